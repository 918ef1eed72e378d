#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "fcaug/grid.hpp"
#include "fcaug/rng.hpp"

namespace fc {

enum class OpKind { flip, color, rotate, cutout, crop };

std::string to_string(OpKind kind);
OpKind parse_op_kind(const std::string& name);

/// Random augmentation recipe. Defaults are the standard contrastive recipe:
/// flip, color distortion, rotation (30 deg), cutout (32 px), resized crop (1.2x).
struct AugmentSpec
{
    double flip_prob = 0.5;
    double rotation_deg = 30.0;
    int cutout_px = 32;
    double crop_zoom = 1.2;
    double jitter = 0.2;
    std::vector<OpKind> op_order = {OpKind::flip, OpKind::color, OpKind::rotate, OpKind::cutout, OpKind::crop};
    /// When > 0, cutout_px is expressed at this image width and rescaled to the actual width.
    int reference_px = 0;

    void validate() const;
    bool enabled(OpKind kind) const;
    /// Cutout side in pixels for an image `width` wide.
    int cutout_for(Index width) const;
};

struct FocusConfig
{
    double cutout_iou_min = 0.9;
    double crop_iou_min = 0.8;
    double mask_keep_fraction = 0.2;
    double salient_eps = 0.05;
    int max_retries = 100;
    bool mask_both_views = true;

    void validate() const;
};

// Recorded transform steps. A chain of these fully determines a view.
struct FlipStep
{
    bool operator==(const FlipStep&) const = default;
};
struct ColorStep
{
    double gain = 1.0;
    double bias = 0.0;
    bool operator==(const ColorStep&) const = default;
};
struct RotateStep
{
    double angle_deg = 0.0;
    bool operator==(const RotateStep&) const = default;
};
struct CutoutStep
{
    Index x = 0;
    Index y = 0;
    Index size = 0;
    bool operator==(const CutoutStep&) const = default;
};
struct CropStep
{
    double zoom = 1.0;
    Index off_x = 0;
    Index off_y = 0;
    bool operator==(const CropStep&) const = default;
};
/// Zeroes image pixels whose (current) map value lies below the keep quantile.
struct MaskStep
{
    double keep_fraction = 0.2;
    bool operator==(const MaskStep&) const = default;
};

using Step = std::variant<FlipStep, ColorStep, RotateStep, CutoutStep, CropStep, MaskStep>;
using TransformChain = std::vector<Step>;

// --- raster primitives (templated on scalar) --------------------------------

template <typename Scalar>
Grid<Scalar> flip_horizontal(const Grid<Scalar>& g)
{
    return g.rowwise().reverse();
}

/// Rotation about the raster center, bilinear, zero fill.
template <typename Scalar>
Grid<Scalar> rotate(const Grid<Scalar>& g, double angle_deg)
{
    const double theta = angle_deg * (3.14159265358979323846 / 180.0);
    const double cs = std::cos(theta);
    const double sn = std::sin(theta);
    const double cy = 0.5 * double(g.rows() - 1);
    const double cx = 0.5 * double(g.cols() - 1);
    Grid<Scalar> out(g.rows(), g.cols());
    for (Index r = 0; r < g.rows(); ++r) {
        const double dy = double(r) - cy;
        for (Index c = 0; c < g.cols(); ++c) {
            const double dx = double(c) - cx;
            out(r, c) = static_cast<Scalar>(sample_zero(g, -sn * dx + cs * dy + cy, cs * dx + sn * dy + cx));
        }
    }
    return out;
}

template <typename Scalar>
void cut_square(Grid<Scalar>& g, Index x, Index y, Index size)
{
    g.block(y, x, size, size).setZero();
}

/// Resized extent floor(n * zoom); 224 at 1.4x gives 313.
Index resized_extent(Index n, double zoom);

/// zoom > 1: bilinear upscale then crop an n-sized window at (off_x, off_y).
/// zoom < 1: bilinear shrink placed at (off_x, off_y) on a zero background.
template <typename Scalar>
Grid<Scalar> resized_crop(const Grid<Scalar>& g, double zoom, Index off_x, Index off_y)
{
    const Index rows = g.rows();
    const Index cols = g.cols();
    const Index rr = resized_extent(rows, zoom);
    const Index rc = resized_extent(cols, zoom);
    if (rr == rows && rc == cols)
        return g;
    Grid<Scalar> out = Grid<Scalar>::Zero(rows, cols);
    // Signed shift from output to resized coordinates.
    const Index sy = rr > rows ? off_y : -off_y;
    const Index sx = rc > cols ? off_x : -off_x;
    for (Index r = 0; r < rows; ++r) {
        const Index ry = r + sy;
        if (ry < 0 || ry >= rr)
            continue;
        const double y = resample_coord(ry, rows, rr);
        for (Index c = 0; c < cols; ++c) {
            const Index rx = c + sx;
            if (rx < 0 || rx >= rc)
                continue;
            out(r, c) = static_cast<Scalar>(sample_clamped(g, y, resample_coord(rx, cols, rc)));
        }
    }
    return out;
}

// --- random operators --------------------------------------------------------

BinaryMask salient_region(const SaliencyMap& map, double eps);

/// |a and b| / |a or b|; two empty masks give 1.
double iou(const BinaryMask& a, const BinaryMask& b);

struct CutoutResult
{
    Image image;
    SaliencyMap map;
    BinaryMask footprint;
};

CutoutResult random_cutout(const Image& image, const SaliencyMap& map, int size_px, CounterRng& rng);

std::pair<Image, SaliencyMap> random_resized_crop(const Image& image, const SaliencyMap& map, double zoom,
                                                  CounterRng& rng);

std::pair<Image, SaliencyMap> photometric_and_geometric(const Image& image, const SaliencyMap& map,
                                                        const AugmentSpec& spec, CounterRng& rng);

/// Pixels whose map value is below the (1 - keep_fraction) quantile are zeroed;
/// ties at the quantile survive.
Image focus_mask(const Image& image, const SaliencyMap& map, double keep_fraction);

/// Map value at the (1 - keep_fraction) quantile.
float keep_quantile(const SaliencyMap& map, double keep_fraction);

// --- chains ------------------------------------------------------------------

Step sample_step(OpKind kind, const AugmentSpec& spec, Index rows, Index cols, CounterRng& rng);
TransformChain sample_chain(const AugmentSpec& spec, Index rows, Index cols, CounterRng& rng);

struct View
{
    Image image;
    SaliencyMap map;
};

View apply_chain(const TransformChain& chain, const Image& image, const SaliencyMap& map);

/// Map through the chain; cutout steps optionally skipped (the gate reference).
SaliencyMap apply_chain_to_map(const TransformChain& chain, const SaliencyMap& map, bool skip_cutout);

/// Where a source pixel ends up, and what removed it if anything.
struct PointFate
{
    bool rigid_lost = false;   // left the frame under flip/rotation
    bool window_lost = false;  // outside the resized-crop window
    bool occluded = false;     // covered by a cutout
    bool survives() const { return !rigid_lost && !window_lost && !occluded; }
};

PointFate track_point(const TransformChain& chain, Index rows, Index cols, Index y, Index x);

struct ChainMasks
{
    BinaryMask rigid;   // source pixels kept in frame by flip/rotation
    BinaryMask window;  // ...and inside every crop window
    BinaryMask alive;   // ...and not cut out
};

ChainMasks track_mask(const TransformChain& chain, const BinaryMask& source);

/// Salient region after the chain versus the same chain without cutouts.
double cutout_gate_iou(const TransformChain& chain, const SaliencyMap& source_map, const SaliencyMap& view_map,
                       double eps);

/// Source salient pixels kept inside the crop windows versus those kept by rigid motion.
double crop_gate_iou(const TransformChain& chain, const SaliencyMap& source_map, double eps);

// --- pairs -------------------------------------------------------------------

enum class PairMode { default_mode, searched, focus, focus_cutout, focus_crop };

std::string to_string(PairMode mode);
PairMode parse_pair_mode(const std::string& name);

struct ViewPair
{
    Image v1, v2;
    SaliencyMap map1, map2;
    TransformChain chain1, chain2;
    int attempts = 1;
    std::uint64_t seed = 0;
    PairMode mode = PairMode::default_mode;
    double iou_v1 = 1.0;  // cutout gate
    double iou_v2 = 1.0;
    double crop_iou_v1 = 1.0;
    double crop_iou_v2 = 1.0;
};

/// Searched-optimum recipe: 1.2x crop and 48 px cutout (reference scale kept).
AugmentSpec searched_spec(const AugmentSpec& base);

ViewPair focus_cutout_pair(const Image& image, const SaliencyMap& map, const AugmentSpec& spec,
                           const FocusConfig& cfg, std::uint64_t seed);
ViewPair focus_crop_pair(const Image& image, const SaliencyMap& map, const AugmentSpec& spec,
                         const FocusConfig& cfg, std::uint64_t seed);

/// default: ungated chain twice. searched: ungated with searched optima.
/// focus: focus mask, then cutout and crop gated together.
ViewPair generate_pair(const Image& image, const SaliencyMap& map, PairMode mode, const AugmentSpec& spec,
                       const FocusConfig& cfg, std::uint64_t seed);

}  // namespace fc
