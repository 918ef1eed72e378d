#include "fcaug/synth.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "fcaug/error.hpp"

namespace fc {

namespace {

struct Ellipse
{
    double cx, cy;
    double a, b;  // semi-axes, a >= b
    double angle;

    /// Normalized elliptical radius: 1 on the boundary.
    double radius(double x, double y) const
    {
        const double dx = x - cx;
        const double dy = y - cy;
        const double u = std::cos(angle) * dx + std::sin(angle) * dy;
        const double v = -std::sin(angle) * dx + std::cos(angle) * dy;
        return std::sqrt((u * u) / (a * a) + (v * v) / (b * b));
    }
};

/// Fraction of the pixel covered by the ellipse, 4x4 supersampled.
double coverage(const Ellipse& e, Index r, Index c)
{
    int inside = 0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            inside += e.radius(double(c) - 0.375 + 0.25 * j, double(r) - 0.375 + 0.25 * i) <= 1.0;
    return inside / 16.0;
}

Grid<double> background(const SynthSpec& spec, double joint_y, CounterRng& rng)
{
    const Index n = spec.image_px;
    Grid<double> noise(n, n);
    for (Index i = 0; i < noise.size(); ++i)
        noise.data()[i] = rng.normal();
    // Gaussian low-pass with sigma a quarter wavelength.
    noise = gaussian_blur(noise, std::max(0.5, spec.texture_wavelength_px / 4.0));
    const double sd = std::sqrt((noise - noise.mean()).square().mean());
    if (sd > 0.0)
        noise *= spec.texture_std / sd;

    // Two bone plates separated by a slightly darker joint gap.
    const double gap = 0.05 * double(n);
    Grid<double> img(n, n);
    for (Index r = 0; r < n; ++r) {
        const double d = std::abs(double(r) - joint_y) / gap;
        const double plate = 0.42 - 0.03 * std::exp(-d * d);
        img.row(r).setConstant(plate);
    }
    return img + noise;
}

}  // namespace

void SynthSpec::validate() const
{
    if (image_px < 16)
        throw ConfigError("image_px must be >= 16");
    if (!(lesion_area_fraction > 0.0 && lesion_area_fraction < 0.5))
        throw ConfigError("lesion_area_fraction must lie in (0, 0.5)");
    if (n_classes < 2)
        throw ConfigError("n_classes must be >= 2");
    if (!(saliency_margin > 0.0))
        throw ConfigError("saliency_margin must be > 0");
}

SynthSample gen_sample(const SynthSpec& spec, int grade, CounterRng& rng)
{
    spec.validate();
    if (grade < 0 || grade >= spec.n_classes)
        throw ValidationError("grade out of range");

    const Index n = spec.image_px;
    const double joint_y = double(n) * rng.uniform(0.45, 0.55);
    CounterRng texture_rng = rng.split(spec.texture_seed);
    Grid<double> img = background(spec, joint_y, texture_rng);

    const double area = spec.lesion_area_fraction * double(n) * double(n);
    const double ratio = rng.uniform(1.0, 2.0);
    Ellipse e{};
    e.a = std::sqrt(area * ratio / std::numbers::pi);
    e.b = e.a / ratio;
    e.angle = rng.uniform(0.0, std::numbers::pi);
    if (grade > 0) {
        e.cx = rng.uniform(e.a, double(n - 1) - e.a);
        e.cy = rng.uniform(e.a, double(n - 1) - e.a);
    } else {
        e.cx = rng.uniform(0.2, 0.8) * double(n - 1);
        e.cy = joint_y;
    }

    SynthSample s;
    s.label = grade;
    s.lesion_mask = BinaryMask::Constant(n, n, false);
    Grid<double> sal(n, n);
    const double delta = spec.lesion_contrast * double(grade) / double(spec.n_classes - 1);
    // exp(-k q^2) equals 0.05 at q = 1 + margin.
    const double k = std::log(20.0) / ((1.0 + spec.saliency_margin) * (1.0 + spec.saliency_margin));
    for (Index r = 0; r < n; ++r) {
        for (Index c = 0; c < n; ++c) {
            const double q = e.radius(double(c), double(r));
            sal(r, c) = std::exp(-k * q * q);
            if (grade > 0 && q < 1.0 + 2.0 / e.b) {
                const double alpha = coverage(e, r, c);
                img(r, c) += delta * alpha;
                s.lesion_mask(r, c) = alpha >= 0.5;
            }
        }
    }
    max_normalize(sal);
    s.image = img.max(0.0).min(1.0).cast<float>();
    s.saliency = sal.cast<float>();
    return s;
}

std::vector<SynthSample> gen_dataset(const SynthSpec& spec, int n_per_class, std::uint64_t seed)
{
    spec.validate();
    if (n_per_class < 1)
        throw ValidationError("n_per_class must be >= 1");
    std::vector<SynthSample> out;
    out.reserve(std::size_t(n_per_class) * std::size_t(spec.n_classes));
    for (int g = 0; g < spec.n_classes; ++g) {
        for (int i = 0; i < n_per_class; ++i) {
            const auto index = static_cast<std::uint64_t>(out.size());
            CounterRng rng(derive_key(seed, index));
            SynthSample s = gen_sample(spec, g, rng);
            char id[32];
            std::snprintf(id, sizeof id, "s%05llu", static_cast<unsigned long long>(index));
            s.image_id = id;
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace fc
