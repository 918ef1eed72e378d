#pragma once

#include <complex>
#include <filesystem>
#include <map>
#include <memory>
#include <shared_mutex>
#include <string>

#include "fcaug/grid.hpp"

namespace fc {

using ComplexGrid = Eigen::Array<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 2-D DFT (unnormalized forward, 1/N inverse) built from row/column FFTs.
ComplexGrid fft2(const ComplexGrid& x);
ComplexGrid ifft2(const ComplexGrid& x);

struct SpectralResidualConfig
{
    int working_px = 64;        // longer side of the analysis raster
    double smooth_sigma = 2.5;  // post-smoothing at working resolution
};

// Spectral residual saliency, split into stages so the transform can be swapped
// for a reference implementation:
//   working raster -> spectrum -> residual spectrum -> inverse -> |.|^2 -> finish.

/// Resized to the working resolution and mean-subtracted.
Grid<double> sr_working_raster(const Grid<double>& image, const SpectralResidualConfig& cfg);

/// exp(log-amplitude minus its wrapped 3x3 mean) with the original phase. DC is dropped.
ComplexGrid sr_residual_spectrum(const ComplexGrid& spectrum);

/// Smooth, upscale to (rows, cols) and max-normalize.
Grid<double> sr_finish(const Grid<double>& energy, Index rows, Index cols, const SpectralResidualConfig& cfg);

Grid<double> spectral_residual_impl(const Grid<double>& image, const SpectralResidualConfig& cfg);

/// Spectral-residual saliency map in [0,1], same size as the input (>= 8x8).
/// A constant image yields the all-zero map.
template <typename Scalar>
Grid<Scalar> spectral_residual(const Grid<Scalar>& image, const SpectralResidualConfig& cfg = {})
{
    return spectral_residual_impl(image.template cast<double>(), cfg).template cast<Scalar>();
}

enum class SaliencyKind { gaze_file, spectral_residual, uniform };

SaliencyKind parse_saliency_kind(const std::string& name);
std::string to_string(SaliencyKind kind);

struct SaliencySource
{
    SaliencyKind kind = SaliencyKind::uniform;
    std::filesystem::path root;
    SpectralResidualConfig sr;
};

/// Read-only after construction. The gaze-file cache is safe under concurrent readers.
class SaliencyProvider
{
  public:
    explicit SaliencyProvider(SaliencySource source);

    SaliencyMap saliency_for(const std::string& image_id, const Image& image) const;

    const SaliencySource& source() const { return source_; }

  private:
    SaliencySource source_;
    mutable std::shared_mutex mutex_;
    mutable std::map<std::string, std::shared_ptr<const SaliencyMap>> cache_;
};

SaliencyMap saliency_for(const SaliencySource& source, const std::string& image_id, const Image& image);

}  // namespace fc
