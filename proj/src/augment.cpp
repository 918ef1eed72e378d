#include "fcaug/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fcaug/error.hpp"

namespace fc {

namespace {

template <class... Ts>
struct overloaded : Ts...
{
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void check_same_dims(const Image& image, const SaliencyMap& map)
{
    if (image.rows() != map.rows() || image.cols() != map.cols())
        throw ValidationError("saliency map dimensions do not match the image");
}

Index round_half_up(double v) { return static_cast<Index>(std::floor(v + 0.5)); }

bool in_frame(double y, double x, Index rows, Index cols)
{
    const Index r = round_half_up(y);
    const Index c = round_half_up(x);
    return r >= 0 && r < rows && c >= 0 && c < cols;
}

}  // namespace

std::string to_string(OpKind kind)
{
    switch (kind) {
    case OpKind::flip:
        return "flip";
    case OpKind::color:
        return "color";
    case OpKind::rotate:
        return "rotate";
    case OpKind::cutout:
        return "cutout";
    case OpKind::crop:
        return "crop";
    }
    return "unknown";
}

OpKind parse_op_kind(const std::string& name)
{
    for (auto k : {OpKind::flip, OpKind::color, OpKind::rotate, OpKind::cutout, OpKind::crop}) {
        if (to_string(k) == name)
            return k;
    }
    throw ConfigError("unknown augmentation op '" + name + "'");
}

void AugmentSpec::validate() const
{
    if (!(flip_prob >= 0.0 && flip_prob <= 1.0))
        throw ConfigError("flip_prob must lie in [0,1]");
    if (!(rotation_deg >= 0.0))
        throw ConfigError("rotation_deg must be >= 0");
    if (cutout_px < 0)
        throw ConfigError("cutout_px must be >= 0");
    if (!(crop_zoom > 0.0))
        throw ConfigError("crop_zoom must be > 0");
    if (!(jitter >= 0.0 && jitter < 1.0))
        throw ConfigError("jitter must lie in [0,1)");
    if (reference_px < 0)
        throw ConfigError("reference_px must be >= 0");
}

bool AugmentSpec::enabled(OpKind kind) const
{
    return std::find(op_order.begin(), op_order.end(), kind) != op_order.end();
}

int AugmentSpec::cutout_for(Index width) const
{
    if (reference_px <= 0)
        return cutout_px;
    return static_cast<int>(std::lround(double(cutout_px) * double(width) / double(reference_px)));
}

void FocusConfig::validate() const
{
    if (!(cutout_iou_min > 0.0 && cutout_iou_min <= 1.0) || !(crop_iou_min > 0.0 && crop_iou_min <= 1.0))
        throw ConfigError("IOU thresholds must lie in (0,1]");
    if (!(mask_keep_fraction > 0.0 && mask_keep_fraction < 1.0))
        throw ConfigError("mask_keep_fraction must lie in (0,1)");
    if (max_retries < 1)
        throw ConfigError("max_retries must be >= 1");
}

Index resized_extent(Index n, double zoom)
{
    return std::max<Index>(1, static_cast<Index>(std::floor(double(n) * zoom + 1e-9)));
}

BinaryMask salient_region(const SaliencyMap& map, double eps) { return map > static_cast<float>(eps); }

double iou(const BinaryMask& a, const BinaryMask& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ValidationError("IOU of masks with different dimensions");
    const auto uni = (a || b).count();
    if (uni == 0)
        return 1.0;
    return double((a && b).count()) / double(uni);
}

CutoutResult random_cutout(const Image& image, const SaliencyMap& map, int size_px, CounterRng& rng)
{
    check_same_dims(image, map);
    if (size_px < 0 || size_px > std::min(image.rows(), image.cols()))
        throw ValidationError("cutout size " + std::to_string(size_px) + " exceeds the image");
    CutoutResult out{image, map, BinaryMask::Constant(image.rows(), image.cols(), false)};
    if (size_px == 0)
        return out;
    const Index x = rng.uniform_int(0, image.cols() - size_px);
    const Index y = rng.uniform_int(0, image.rows() - size_px);
    cut_square(out.image, x, y, size_px);
    cut_square(out.map, x, y, size_px);
    out.footprint.block(y, x, size_px, size_px).setConstant(true);
    return out;
}

std::pair<Image, SaliencyMap> random_resized_crop(const Image& image, const SaliencyMap& map, double zoom,
                                                  CounterRng& rng)
{
    check_same_dims(image, map);
    AugmentSpec spec;
    spec.crop_zoom = zoom;
    spec.validate();
    const Step step = sample_step(OpKind::crop, spec, image.rows(), image.cols(), rng);
    const auto view = apply_chain({step}, image, map);
    return {view.image, view.map};
}

std::pair<Image, SaliencyMap> photometric_and_geometric(const Image& image, const SaliencyMap& map,
                                                        const AugmentSpec& spec, CounterRng& rng)
{
    check_same_dims(image, map);
    spec.validate();
    AugmentSpec sub = spec;
    std::erase_if(sub.op_order, [](OpKind k) { return k == OpKind::cutout || k == OpKind::crop; });
    auto view = apply_chain(sample_chain(sub, image.rows(), image.cols(), rng), image, map);
    return {std::move(view.image), std::move(view.map)};
}

float keep_quantile(const SaliencyMap& map, double keep_fraction)
{
    std::vector<float> values(map.data(), map.data() + map.size());
    const auto n = static_cast<Index>(values.size());
    auto k = static_cast<Index>(std::floor((1.0 - keep_fraction) * double(n) + 1e-9));
    k = std::clamp<Index>(k, 0, n - 1);
    std::nth_element(values.begin(), values.begin() + k, values.end());
    return values[static_cast<std::size_t>(k)];
}

Image focus_mask(const Image& image, const SaliencyMap& map, double keep_fraction)
{
    check_same_dims(image, map);
    if (!(keep_fraction > 0.0 && keep_fraction < 1.0))
        throw ValidationError("keep_fraction must lie in (0,1)");
    const float q = keep_quantile(map, keep_fraction);
    return (map < q).select(Image::Zero(image.rows(), image.cols()), image);
}

Step sample_step(OpKind kind, const AugmentSpec& spec, Index rows, Index cols, CounterRng& rng)
{
    switch (kind) {
    case OpKind::flip:
        return FlipStep{};
    case OpKind::color:
        return ColorStep{rng.uniform(1.0 - spec.jitter, 1.0 + spec.jitter), rng.uniform(-spec.jitter, spec.jitter)};
    case OpKind::rotate:
        return RotateStep{rng.uniform(-spec.rotation_deg, spec.rotation_deg)};
    case OpKind::cutout: {
        const Index size = spec.cutout_for(cols);
        if (size > std::min(rows, cols))
            throw ValidationError("cutout size " + std::to_string(size) + " exceeds the image");
        if (size <= 0)
            return CutoutStep{};
        const Index x = rng.uniform_int(0, cols - size);
        const Index y = rng.uniform_int(0, rows - size);
        return CutoutStep{x, y, size};
    }
    case OpKind::crop: {
        const Index rr = resized_extent(rows, spec.crop_zoom);
        const Index rc = resized_extent(cols, spec.crop_zoom);
        const Index ox = rng.uniform_int(0, std::abs(rc - cols));
        const Index oy = rng.uniform_int(0, std::abs(rr - rows));
        return CropStep{spec.crop_zoom, ox, oy};
    }
    }
    throw ValidationError("unknown op");
}

TransformChain sample_chain(const AugmentSpec& spec, Index rows, Index cols, CounterRng& rng)
{
    TransformChain chain;
    for (OpKind k : spec.op_order) {
        switch (k) {
        case OpKind::flip:
            if (spec.flip_prob > 0.0 && rng.bernoulli(spec.flip_prob))
                chain.push_back(FlipStep{});
            break;
        case OpKind::rotate:
            if (spec.rotation_deg > 0.0)
                chain.push_back(sample_step(k, spec, rows, cols, rng));
            break;
        case OpKind::cutout:
            if (spec.cutout_for(cols) > 0)
                chain.push_back(sample_step(k, spec, rows, cols, rng));
            break;
        case OpKind::crop:
            if (resized_extent(rows, spec.crop_zoom) != rows || resized_extent(cols, spec.crop_zoom) != cols)
                chain.push_back(sample_step(k, spec, rows, cols, rng));
            break;
        case OpKind::color:
            if (spec.jitter > 0.0)
                chain.push_back(sample_step(k, spec, rows, cols, rng));
            break;
        }
    }
    return chain;
}

View apply_chain(const TransformChain& chain, const Image& image, const SaliencyMap& map)
{
    check_same_dims(image, map);
    View v{image, map};
    for (const auto& step : chain) {
        std::visit(overloaded{
                       [&](const FlipStep&) {
                           v.image = flip_horizontal(v.image);
                           v.map = flip_horizontal(v.map);
                       },
                       [&](const ColorStep& s) {
                           v.image = (v.image * float(s.gain) + float(s.bias)).max(0.0f).min(1.0f);
                       },
                       [&](const RotateStep& s) {
                           v.image = rotate(v.image, s.angle_deg);
                           v.map = rotate(v.map, s.angle_deg);
                       },
                       [&](const CutoutStep& s) {
                           cut_square(v.image, s.x, s.y, s.size);
                           cut_square(v.map, s.x, s.y, s.size);
                       },
                       [&](const CropStep& s) {
                           v.image = resized_crop(v.image, s.zoom, s.off_x, s.off_y);
                           v.map = resized_crop(v.map, s.zoom, s.off_x, s.off_y);
                       },
                       [&](const MaskStep& s) { v.image = focus_mask(v.image, v.map, s.keep_fraction); },
                   },
                   step);
    }
    return v;
}

SaliencyMap apply_chain_to_map(const TransformChain& chain, const SaliencyMap& map, bool skip_cutout)
{
    SaliencyMap m = map;
    for (const auto& step : chain) {
        std::visit(overloaded{
                       [&](const FlipStep&) { m = flip_horizontal(m); },
                       [&](const ColorStep&) {},
                       [&](const RotateStep& s) { m = rotate(m, s.angle_deg); },
                       [&](const CutoutStep& s) {
                           if (!skip_cutout)
                               cut_square(m, s.x, s.y, s.size);
                       },
                       [&](const CropStep& s) { m = resized_crop(m, s.zoom, s.off_x, s.off_y); },
                       [&](const MaskStep&) {},
                   },
                   step);
    }
    return m;
}

PointFate track_point(const TransformChain& chain, Index rows, Index cols, Index py, Index px)
{
    PointFate fate;
    double y = double(py);
    double x = double(px);
    const double cy = 0.5 * double(rows - 1);
    const double cx = 0.5 * double(cols - 1);
    for (const auto& step : chain) {
        if (fate.rigid_lost || fate.window_lost)
            break;
        std::visit(overloaded{
                       [&](const FlipStep&) { x = double(cols - 1) - x; },
                       [&](const ColorStep&) {},
                       [&](const RotateStep& s) {
                           const double t = s.angle_deg * (std::numbers::pi / 180.0);
                           const double dx = x - cx;
                           const double dy = y - cy;
                           x = std::cos(t) * dx - std::sin(t) * dy + cx;
                           y = std::sin(t) * dx + std::cos(t) * dy + cy;
                           if (!in_frame(y, x, rows, cols))
                               fate.rigid_lost = true;
                       },
                       [&](const CutoutStep& s) {
                           const Index r = round_half_up(y);
                           const Index c = round_half_up(x);
                           if (r >= s.y && r < s.y + s.size && c >= s.x && c < s.x + s.size)
                               fate.occluded = true;
                       },
                       [&](const CropStep& s) {
                           const Index rr = resized_extent(rows, s.zoom);
                           const Index rc = resized_extent(cols, s.zoom);
                           const Index sy = rr > rows ? s.off_y : -s.off_y;
                           const Index sx = rc > cols ? s.off_x : -s.off_x;
                           y = (y + 0.5) * double(rr) / double(rows) - 0.5 - double(sy);
                           x = (x + 0.5) * double(rc) / double(cols) - 0.5 - double(sx);
                           if (!in_frame(y, x, rows, cols))
                               fate.window_lost = true;
                       },
                       [&](const MaskStep&) {},
                   },
                   step);
    }
    return fate;
}

ChainMasks track_mask(const TransformChain& chain, const BinaryMask& source)
{
    const Index rows = source.rows();
    const Index cols = source.cols();
    ChainMasks out{BinaryMask::Constant(rows, cols, false), BinaryMask::Constant(rows, cols, false),
                   BinaryMask::Constant(rows, cols, false)};
    for (Index r = 0; r < rows; ++r) {
        for (Index c = 0; c < cols; ++c) {
            if (!source(r, c))
                continue;
            const PointFate f = track_point(chain, rows, cols, r, c);
            out.rigid(r, c) = !f.rigid_lost;
            out.window(r, c) = !f.rigid_lost && !f.window_lost;
            out.alive(r, c) = f.survives();
        }
    }
    return out;
}

double cutout_gate_iou(const TransformChain& chain, const SaliencyMap& source_map, const SaliencyMap& view_map,
                       double eps)
{
    const bool has_cutout = std::any_of(chain.begin(), chain.end(), [](const Step& s) {
        return std::holds_alternative<CutoutStep>(s) && std::get<CutoutStep>(s).size > 0;
    });
    if (!has_cutout)
        return 1.0;
    return iou(salient_region(view_map, eps), salient_region(apply_chain_to_map(chain, source_map, true), eps));
}

double crop_gate_iou(const TransformChain& chain, const SaliencyMap& source_map, double eps)
{
    const auto masks = track_mask(chain, salient_region(source_map, eps));
    return iou(masks.window, masks.rigid);
}

std::string to_string(PairMode mode)
{
    switch (mode) {
    case PairMode::default_mode:
        return "default";
    case PairMode::searched:
        return "searched";
    case PairMode::focus:
        return "focus";
    case PairMode::focus_cutout:
        return "focus_cutout";
    case PairMode::focus_crop:
        return "focus_crop";
    }
    return "unknown";
}

PairMode parse_pair_mode(const std::string& name)
{
    for (auto m : {PairMode::default_mode, PairMode::searched, PairMode::focus, PairMode::focus_cutout,
                   PairMode::focus_crop}) {
        if (to_string(m) == name)
            return m;
    }
    throw ConfigError("unknown pair mode '" + name + "'");
}

AugmentSpec searched_spec(const AugmentSpec& base)
{
    AugmentSpec s = base;
    s.crop_zoom = 1.2;
    s.cutout_px = 48;
    return s;
}

namespace {

struct Gates
{
    bool cutout = false;
    bool crop = false;
    bool mask = false;
};

ViewPair gated_pair(const Image& image, const SaliencyMap& map, const AugmentSpec& spec, const FocusConfig& cfg,
                    Gates gates, PairMode mode, std::uint64_t seed)
{
    check_same_dims(image, map);
    spec.validate();
    cfg.validate();
    CounterRng rng(seed);
    const Index rows = image.rows();
    const Index cols = image.cols();

    double best_score = -1.0;
    double best1 = 0.0;
    double best2 = 0.0;
    const int tries = gates.cutout || gates.crop ? cfg.max_retries : 1;

    for (int attempt = 1; attempt <= tries; ++attempt) {
        TransformChain chains[2];
        for (int v = 0; v < 2; ++v) {
            if (gates.mask && (v == 0 || cfg.mask_both_views))
                chains[v].push_back(MaskStep{cfg.mask_keep_fraction});
            auto tail = sample_chain(spec, rows, cols, rng);
            chains[v].insert(chains[v].end(), tail.begin(), tail.end());
        }

        ViewPair pair;
        pair.seed = seed;
        pair.mode = mode;
        pair.attempts = attempt;
        bool ok = true;
        double score[2] = {1.0, 1.0};
        double crop_iou[2] = {1.0, 1.0};
        double cut_iou[2] = {1.0, 1.0};
        View views[2];
        for (int v = 0; v < 2; ++v) {
            if (gates.crop) {
                crop_iou[v] = crop_gate_iou(chains[v], map, cfg.salient_eps);
                if (!(crop_iou[v] > cfg.crop_iou_min))
                    ok = false;
            }
            views[v] = apply_chain(chains[v], image, map);
            if (gates.cutout) {
                cut_iou[v] = cutout_gate_iou(chains[v], map, views[v].map, cfg.salient_eps);
                if (!(cut_iou[v] > cfg.cutout_iou_min))
                    ok = false;
            }
            score[v] = std::min(cut_iou[v], crop_iou[v]);
        }
        if (ok) {
            pair.v1 = std::move(views[0].image);
            pair.map1 = std::move(views[0].map);
            pair.v2 = std::move(views[1].image);
            pair.map2 = std::move(views[1].map);
            pair.chain1 = std::move(chains[0]);
            pair.chain2 = std::move(chains[1]);
            pair.iou_v1 = cut_iou[0];
            pair.iou_v2 = cut_iou[1];
            pair.crop_iou_v1 = crop_iou[0];
            pair.crop_iou_v2 = crop_iou[1];
            return pair;
        }
        if (std::min(score[0], score[1]) > best_score) {
            best_score = std::min(score[0], score[1]);
            best1 = score[0];
            best2 = score[1];
        }
    }
    throw RejectionFailure("no acceptable view pair after " + std::to_string(tries) + " attempts (best IOU "
                               + std::to_string(best1) + ", " + std::to_string(best2) + ")",
                           best1, best2, tries);
}

}  // namespace

ViewPair focus_cutout_pair(const Image& image, const SaliencyMap& map, const AugmentSpec& spec,
                           const FocusConfig& cfg, std::uint64_t seed)
{
    return gated_pair(image, map, spec, cfg, {true, false, false}, PairMode::focus_cutout, seed);
}

ViewPair focus_crop_pair(const Image& image, const SaliencyMap& map, const AugmentSpec& spec,
                         const FocusConfig& cfg, std::uint64_t seed)
{
    return gated_pair(image, map, spec, cfg, {false, true, false}, PairMode::focus_crop, seed);
}

ViewPair generate_pair(const Image& image, const SaliencyMap& map, PairMode mode, const AugmentSpec& spec,
                       const FocusConfig& cfg, std::uint64_t seed)
{
    switch (mode) {
    case PairMode::default_mode:
        return gated_pair(image, map, spec, cfg, {}, mode, seed);
    case PairMode::searched:
        return gated_pair(image, map, searched_spec(spec), cfg, {}, mode, seed);
    case PairMode::focus:
        return gated_pair(image, map, spec, cfg, {true, true, true}, mode, seed);
    case PairMode::focus_cutout:
        return focus_cutout_pair(image, map, spec, cfg, seed);
    case PairMode::focus_crop:
        return focus_crop_pair(image, map, spec, cfg, seed);
    }
    throw ValidationError("unknown pair mode");
}

}  // namespace fc
