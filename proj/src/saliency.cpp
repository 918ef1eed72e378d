#include "fcaug/saliency.hpp"

#include <cmath>
#include <mutex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "fcaug/error.hpp"
#include "fcaug/io.hpp"

namespace fc {

namespace {

enum class Direction { forward, inverse };

ComplexGrid transform2(const ComplexGrid& x, Direction dir)
{
    Eigen::FFT<double> fft;
    ComplexGrid out(x.rows(), x.cols());
    std::vector<std::complex<double>> in, res;

    for (Index r = 0; r < x.rows(); ++r) {
        in.assign(x.row(r).data(), x.row(r).data() + x.cols());
        if (dir == Direction::forward)
            fft.fwd(res, in);
        else
            fft.inv(res, in);
        for (Index c = 0; c < x.cols(); ++c)
            out(r, c) = res[static_cast<std::size_t>(c)];
    }
    in.resize(static_cast<std::size_t>(x.rows()));
    for (Index c = 0; c < x.cols(); ++c) {
        for (Index r = 0; r < x.rows(); ++r)
            in[static_cast<std::size_t>(r)] = out(r, c);
        if (dir == Direction::forward)
            fft.fwd(res, in);
        else
            fft.inv(res, in);
        for (Index r = 0; r < x.rows(); ++r)
            out(r, c) = res[static_cast<std::size_t>(r)];
    }
    return out;
}

}  // namespace

ComplexGrid fft2(const ComplexGrid& x) { return transform2(x, Direction::forward); }
ComplexGrid ifft2(const ComplexGrid& x) { return transform2(x, Direction::inverse); }

Grid<double> sr_working_raster(const Grid<double>& image, const SpectralResidualConfig& cfg)
{
    const Index longer = std::max(image.rows(), image.cols());
    const auto scale = double(cfg.working_px) / double(longer);
    const Index rows = std::max<Index>(1, std::lround(double(image.rows()) * scale));
    const Index cols = std::max<Index>(1, std::lround(double(image.cols()) * scale));
    Grid<double> work = resize_bilinear(image, rows, cols);
    work -= work.mean();
    return work;
}

ComplexGrid sr_residual_spectrum(const ComplexGrid& spectrum)
{
    const Index rows = spectrum.rows();
    const Index cols = spectrum.cols();
    const Grid<double> amplitude = spectrum.abs();
    const double peak = amplitude.maxCoeff();
    ComplexGrid out = ComplexGrid::Zero(rows, cols);
    if (!(peak > 0.0))
        return out;

    const double floor = peak * 1e-12;
    const Grid<double> log_amp = amplitude.max(floor).log();
    for (Index u = 0; u < rows; ++u) {
        for (Index v = 0; v < cols; ++v) {
            if (u == 0 && v == 0)
                continue;
            double sum = 0.0;
            int n = 0;
            for (Index du = -1; du <= 1; ++du) {
                for (Index dv = -1; dv <= 1; ++dv) {
                    const Index uu = (u + du + rows) % rows;
                    const Index vv = (v + dv + cols) % cols;
                    if (uu == 0 && vv == 0)
                        continue;
                    sum += log_amp(uu, vv);
                    ++n;
                }
            }
            const double residual = log_amp(u, v) - sum / n;
            const std::complex<double> phase =
                amplitude(u, v) > 0.0 ? spectrum(u, v) / amplitude(u, v) : std::complex<double>(1.0, 0.0);
            out(u, v) = std::exp(residual) * phase;
        }
    }
    return out;
}

Grid<double> sr_finish(const Grid<double>& energy, Index rows, Index cols, const SpectralResidualConfig& cfg)
{
    Grid<double> smooth = gaussian_blur(energy, cfg.smooth_sigma);
    Grid<double> out = resize_bilinear(smooth, rows, cols);
    max_normalize(out);
    return out;
}

Grid<double> spectral_residual_impl(const Grid<double>& image, const SpectralResidualConfig& cfg)
{
    if (image.rows() < 8 || image.cols() < 8)
        throw ValidationError("spectral residual needs an image of at least 8x8");
    const Grid<double> work = sr_working_raster(image, cfg);
    const double scale = std::max(1.0, image.abs().maxCoeff());
    if (work.abs().maxCoeff() <= 1e-12 * scale)
        return Grid<double>::Zero(image.rows(), image.cols());

    const ComplexGrid spectrum = fft2(work.cast<std::complex<double>>());
    const ComplexGrid back = ifft2(sr_residual_spectrum(spectrum));
    return sr_finish(back.abs2(), image.rows(), image.cols(), cfg);
}

SaliencyKind parse_saliency_kind(const std::string& name)
{
    if (name == "gaze_file")
        return SaliencyKind::gaze_file;
    if (name == "spectral_residual")
        return SaliencyKind::spectral_residual;
    if (name == "uniform")
        return SaliencyKind::uniform;
    throw ConfigError("unknown saliency source '" + name + "'");
}

std::string to_string(SaliencyKind kind)
{
    switch (kind) {
    case SaliencyKind::gaze_file:
        return "gaze_file";
    case SaliencyKind::spectral_residual:
        return "spectral_residual";
    case SaliencyKind::uniform:
        return "uniform";
    }
    return "unknown";
}

SaliencyProvider::SaliencyProvider(SaliencySource source) : source_(std::move(source))
{
    if (source_.kind == SaliencyKind::gaze_file && !std::filesystem::is_directory(source_.root))
        throw LookupError("saliency root does not exist: " + source_.root.string());
}

SaliencyMap SaliencyProvider::saliency_for(const std::string& image_id, const Image& image) const
{
    if (image.size() == 0)
        throw ValidationError("empty image");
    switch (source_.kind) {
    case SaliencyKind::uniform:
        return SaliencyMap::Ones(image.rows(), image.cols());
    case SaliencyKind::spectral_residual:
        return spectral_residual(image, source_.sr);
    case SaliencyKind::gaze_file:
        break;
    }

    std::shared_ptr<const SaliencyMap> map;
    {
        std::shared_lock lock(mutex_);
        if (auto it = cache_.find(image_id); it != cache_.end())
            map = it->second;
    }
    if (!map) {
        const auto path = source_.root / (image_id + ".smap");
        if (!std::filesystem::exists(path))
            throw LookupError("no saliency map for '" + image_id + "' at " + path.string());
        auto loaded = std::make_shared<const SaliencyMap>(read_smap(path));
        std::unique_lock lock(mutex_);
        map = cache_.emplace(image_id, std::move(loaded)).first->second;
    }
    if (map->rows() != image.rows() || map->cols() != image.cols())
        throw ValidationError("saliency map for '" + image_id + "' is " + std::to_string(map->cols()) + "x"
                              + std::to_string(map->rows()) + ", image is " + std::to_string(image.cols()) + "x"
                              + std::to_string(image.rows()));
    return *map;
}

SaliencyMap saliency_for(const SaliencySource& source, const std::string& image_id, const Image& image)
{
    return SaliencyProvider(source).saliency_for(image_id, image);
}

}  // namespace fc
