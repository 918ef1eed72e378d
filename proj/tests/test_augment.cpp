#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "fcaug/augment.hpp"
#include "fcaug/error.hpp"
#include "fcaug/rng.hpp"
#include "fcaug/synth.hpp"
#include "oracles.hpp"

using namespace fc;

namespace {

AugmentSpec only(std::vector<OpKind> ops)
{
    AugmentSpec s;
    s.flip_prob = 0.0;
    s.rotation_deg = 0.0;
    s.jitter = 0.0;
    s.op_order = std::move(ops);
    return s;
}

SaliencyMap block_map(Index n, Index y, Index x, Index size)
{
    SaliencyMap m = SaliencyMap::Zero(n, n);
    m.block(y, x, size, size).setOnes();
    return m;
}

Image pattern(Index n)
{
    Image img(n, n);
    for (Index r = 0; r < n; ++r)
        for (Index c = 0; c < n; ++c)
            img(r, c) = float((r * 7 + c * c * 3) % 17) / 16.0f;
    return img;
}

}  // namespace

TEST(SalientRegion, Basics)
{
    EXPECT_EQ(salient_region(SaliencyMap::Zero(8, 8), 0.05).count(), 0);
    SaliencyMap m = SaliencyMap::Zero(8, 8);
    m(2, 5) = 1.0f;
    EXPECT_EQ(salient_region(m, 0.05).count(), 1);
}

TEST(SalientRegion, GaussianDiscRadius)
{
    // exp(-r^2 / 2 s^2) > eps  <=>  r < s * sqrt(2 ln(1/eps))
    const double sigma = 6.0, eps = 0.05;
    const Index n = 61, c = 30;
    SaliencyMap m(n, n);
    for (Index y = 0; y < n; ++y)
        for (Index x = 0; x < n; ++x)
            m(y, x) = float(std::exp(-double((y - c) * (y - c) + (x - c) * (x - c)) / (2 * sigma * sigma)));
    const double radius = sigma * std::sqrt(2.0 * std::log(1.0 / eps));
    const BinaryMask mask = salient_region(m, eps);
    for (Index y = 0; y < n; ++y)
        for (Index x = 0; x < n; ++x) {
            const double d = std::hypot(double(y - c), double(x - c));
            if (std::abs(d - radius) > 1e-3)
                ASSERT_EQ(mask(y, x), d < radius) << y << "," << x;
        }
}

TEST(Iou, Cases)
{
    BinaryMask a = BinaryMask::Constant(30, 30, false);
    BinaryMask b = a;
    a.block(5, 5, 10, 10).setConstant(true);
    EXPECT_EQ(iou(a, a), 1.0);
    b.block(20, 20, 5, 5).setConstant(true);
    EXPECT_EQ(iou(a, b), 0.0);
    b.setConstant(false);
    b.block(5, 10, 10, 10).setConstant(true);
    EXPECT_DOUBLE_EQ(iou(a, b), 50.0 / 150.0);
    EXPECT_EQ(iou(BinaryMask::Constant(4, 4, false), BinaryMask::Constant(4, 4, false)), 1.0);
    EXPECT_THROW(iou(a, BinaryMask::Constant(4, 4, false)), ValidationError);
}

TEST(Cutout, SizeZeroAndFull)
{
    const Image img = pattern(32);
    const SaliencyMap map = block_map(32, 4, 4, 8);
    CounterRng rng(1);
    const CutoutResult none = random_cutout(img, map, 0, rng);
    EXPECT_TRUE((none.image == img).all());
    EXPECT_TRUE((none.map == map).all());
    const CutoutResult full = random_cutout(img, map, 32, rng);
    EXPECT_TRUE((full.image == 0.0f).all());
    EXPECT_THROW(random_cutout(img, map, 33, rng), ValidationError);
}

TEST(Cutout, PlacementIsUniform)
{
    const Image img = Image::Ones(224, 224);
    CounterRng rng(5);
    double sy = 0.0, sx = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const Step s = sample_step(OpKind::cutout, only({OpKind::cutout}), 224, 224, rng);
        const auto& c = std::get<CutoutStep>(s);
        sy += double(c.y) + c.size / 2.0;
        sx += double(c.x) + c.size / 2.0;
    }
    EXPECT_NEAR(sy / n, 112.0, 1.0);
    EXPECT_NEAR(sx / n, 112.0, 1.0);
}

TEST(Crop, ZoomOneIsIdentity)
{
    const Image img = pattern(40);
    CounterRng rng(2);
    const auto [out, m] = random_resized_crop(img, img, 1.0, rng);
    EXPECT_TRUE((out == img).all());
}

TEST(Crop, ResizedExtent)
{
    EXPECT_EQ(resized_extent(224, 1.4), 313);
    EXPECT_EQ(resized_extent(224, 1.2), 268);
    EXPECT_EQ(resized_extent(224, 0.5), 112);
}

TEST(Crop, ShrinkPadding)
{
    const Image img = Image::Ones(224, 224);
    CounterRng rng(8);
    for (int i = 0; i < 5; ++i) {
        const auto [out, m] = random_resized_crop(img, img, 0.5, rng);
        EXPECT_EQ((out == 0.0f).count(), 224 * 224 - 112 * 112);
    }
}

TEST(Geometric, IdentityAndInvolution)
{
    const Image img = pattern(24);
    CounterRng rng(3);
    AugmentSpec s = only({OpKind::flip, OpKind::color, OpKind::rotate});
    EXPECT_TRUE((photometric_and_geometric(img, img, s, rng).first == img).all());
    EXPECT_TRUE(sample_chain(s, 24, 24, rng).empty());
    s.flip_prob = 1.0;
    const TransformChain chain = sample_chain(s, 24, 24, rng);
    ASSERT_EQ(chain.size(), 1u);
    const View once = apply_chain(chain, img, img);
    EXPECT_FALSE((once.image == img).all());
    EXPECT_TRUE((apply_chain(chain, once.image, once.map).image == img).all());
}

TEST(Geometric, Rotate90MatchesIndexPermutation)
{
    for (Index n : {9, 16}) {
        Image img(n, n);
        for (Index i = 0; i < img.size(); ++i)
            img.data()[i] = float(i % 11) / 10.0f + float(i) * 1e-3f;
        const Image out = rotate(img, 90.0);
        for (Index r = 0; r < n; ++r)
            for (Index c = 0; c < n; ++c)
                ASSERT_NEAR(out(r, c), img(n - 1 - c, r), 1e-6) << r << "," << c;
    }
}

TEST(FocusMask, NearOneKeepFraction)
{
    const Index n = 100;
    std::vector<int> perm(n * n);
    std::iota(perm.begin(), perm.end(), 0);
    CounterRng rng(4);
    for (std::size_t i = perm.size() - 1; i > 0; --i)
        std::swap(perm[i], perm[std::size_t(rng.uniform_int(0, std::int64_t(i)))]);
    SaliencyMap map(n, n);
    for (Index i = 0; i < map.size(); ++i)
        map.data()[i] = float(perm[std::size_t(i)]) / float(n * n);
    const Image out = focus_mask(Image::Ones(n, n), map, 0.99);
    EXPECT_EQ((out == 0.0f).count(), n * n / 100);
    // The zeroed pixels are exactly the 100 smallest map values.
    EXPECT_TRUE(((out == 0.0f) == (map < 100.0f / float(n * n))).all());
}

TEST(FocusMask, TiesSurvive)
{
    const Image out = focus_mask(Image::Ones(10, 10), SaliencyMap::Constant(10, 10, 0.3f), 0.2);
    EXPECT_TRUE((out == 1.0f).all());
}

TEST(FocusMask, RampKeepsTopTwenty)
{
    SaliencyMap ramp(1, 100);
    for (Index i = 0; i < 100; ++i)
        ramp(0, i) = float(i) / 99.0f;
    const Image out = focus_mask(Image::Ones(1, 100), ramp, 0.2);
    EXPECT_EQ((out > 0.0f).count(), 20);
    EXPECT_TRUE((out.rightCols(20) == 1.0f).all());
}

TEST(CutoutGate, DisjointFootprintAccepted)
{
    const SaliencyMap map = block_map(16, 2, 2, 3);
    const TransformChain chain = {CutoutStep{9, 9, 4}};
    const View v = apply_chain(chain, Image::Ones(16, 16), map);
    EXPECT_EQ(cutout_gate_iou(chain, map, v.map, 0.05), 1.0);
}

TEST(CutoutGate, WholeImageSalientFails)
{
    FocusConfig cfg;
    cfg.max_retries = 25;
    AugmentSpec spec = only({OpKind::cutout});
    spec.cutout_px = 32;
    try {
        focus_cutout_pair(Image::Ones(64, 64), SaliencyMap::Ones(64, 64), spec, cfg, 3);
        FAIL();
    } catch (const RejectionFailure& e) {
        EXPECT_EQ(e.attempts, 25);
        EXPECT_DOUBLE_EQ(e.best_iou_v1, 1.0 - 1024.0 / 4096.0);
    }
}

TEST(CutoutGate, UniformSaliencyIsStrict)
{
    // The salient region is the whole frame, so a small cutout passes with a known IOU.
    AugmentSpec spec = only({OpKind::cutout});
    spec.cutout_px = 8;
    const ViewPair p = focus_cutout_pair(Image::Ones(64, 64), SaliencyMap::Ones(64, 64), spec, {}, 3);
    EXPECT_EQ(p.attempts, 1);
    EXPECT_DOUBLE_EQ(p.iou_v1, 1.0 - 64.0 / 4096.0);
}

TEST(CutoutGate, EightByEightEnumeration)
{
    const SaliencyMap map = block_map(8, 3, 3, 2);
    const double per_view = oracle::cutout_acceptance(salient_region(map, 0.05), 2, 0.9);
    EXPECT_DOUBLE_EQ(per_view, 40.0 / 49.0);
    AugmentSpec spec = only({OpKind::cutout});
    spec.cutout_px = 2;
    FocusConfig cfg;
    cfg.max_retries = 1;
    const int trials = 20000;
    int accepted = 0;
    for (int i = 0; i < trials; ++i) {
        try {
            focus_cutout_pair(Image::Ones(8, 8), map, spec, cfg, derive_key(99, std::uint64_t(i)));
            ++accepted;
        } catch (const RejectionFailure&) {
        }
    }
    EXPECT_NEAR(double(accepted) / trials, per_view * per_view, 0.02);

    // With retries the attempt count is geometric in the per-attempt acceptance.
    cfg.max_retries = 100;
    double attempts = 0.0;
    for (int i = 0; i < trials; ++i)
        attempts += focus_cutout_pair(Image::Ones(8, 8), map, spec, cfg, derive_key(7, std::uint64_t(i))).attempts;
    EXPECT_NEAR(attempts / trials, 1.0 / (per_view * per_view), 0.03);
}

TEST(CropGate, ZoomOneAlwaysPasses)
{
    AugmentSpec spec = only({OpKind::crop});
    spec.crop_zoom = 1.0;
    const ViewPair p = focus_crop_pair(pattern(32), block_map(32, 0, 0, 5), spec, {}, 1);
    EXPECT_EQ(p.attempts, 1);
    EXPECT_EQ(p.crop_iou_v1, 1.0);
}

TEST(CropGate, CentralRegionAlwaysContained)
{
    AugmentSpec spec = only({OpKind::crop});
    FocusConfig cfg;
    cfg.max_retries = 1;
    const SaliencyMap map = block_map(64, 28, 28, 8);
    for (int i = 0; i < 200; ++i) {
        const ViewPair p = focus_crop_pair(pattern(64), map, spec, cfg, std::uint64_t(i));
        ASSERT_EQ(p.crop_iou_v1, 1.0);
        ASSERT_EQ(p.crop_iou_v2, 1.0);
    }
}

TEST(CropGate, CornerRegionEnumeration)
{
    // 16 px frame, 2x zoom: 17 x 17 window offsets. Source pixel y lands on output row
    // 2y + 1 - off_y (its upscaled center rounded half up).
    const Index n = 16;
    const SaliencyMap map = block_map(n, 0, 0, 4);
    const double threshold = 0.8;
    int ok = 0, total = 0;
    for (Index oy = 0; oy <= n; ++oy)
        for (Index ox = 0; ox <= n; ++ox) {
            int kept = 0;
            for (Index y = 0; y < 4; ++y)
                for (Index x = 0; x < 4; ++x) {
                    const Index r = 2 * y + 1 - oy, c = 2 * x + 1 - ox;
                    kept += r >= 0 && r < n && c >= 0 && c < n;
                }
            ok += kept / 16.0 > threshold;
            ++total;
        }
    const double per_view = double(ok) / total;

    AugmentSpec spec = only({OpKind::crop});
    spec.crop_zoom = 2.0;
    FocusConfig cfg;
    cfg.max_retries = 1;
    cfg.crop_iou_min = threshold;
    const int trials = 20000;
    int accepted = 0;
    for (int i = 0; i < trials; ++i) {
        try {
            focus_crop_pair(pattern(n), map, spec, cfg, derive_key(5, std::uint64_t(i)));
            ++accepted;
        } catch (const RejectionFailure&) {
        }
    }
    EXPECT_NEAR(double(accepted) / trials, per_view * per_view, 0.015);
}

TEST(Pairs, Deterministic)
{
    SynthSpec sp;
    sp.image_px = 64;
    CounterRng rng(1);
    const SynthSample s = gen_sample(sp, 3, rng);
    AugmentSpec spec;
    spec.reference_px = 224;
    for (PairMode mode : {PairMode::default_mode, PairMode::searched, PairMode::focus, PairMode::focus_cutout,
                          PairMode::focus_crop}) {
        const ViewPair a = generate_pair(s.image, s.saliency, mode, spec, {}, 77);
        const ViewPair b = generate_pair(s.image, s.saliency, mode, spec, {}, 77);
        EXPECT_TRUE((a.v1 == b.v1).all() && (a.v2 == b.v2).all()) << to_string(mode);
        EXPECT_EQ(a.chain1, b.chain1);
        EXPECT_EQ(a.attempts, b.attempts);
    }
    const ViewPair d = generate_pair(s.image, s.saliency, PairMode::default_mode, spec, {}, 77);
    const ViewPair f = generate_pair(s.image, s.saliency, PairMode::focus, spec, {}, 77);
    EXPECT_FALSE((d.v1 == f.v1).all());
}

TEST(Pairs, ReplayFromChain)
{
    SynthSpec sp;
    sp.image_px = 64;
    CounterRng rng(2);
    const SynthSample s = gen_sample(sp, 4, rng);
    AugmentSpec spec;
    spec.reference_px = 224;
    const ViewPair p = generate_pair(s.image, s.saliency, PairMode::focus, spec, {}, 5);
    const View v = apply_chain(p.chain2, s.image, s.saliency);
    EXPECT_TRUE((v.image == p.v2).all());
    EXPECT_TRUE((v.map == p.map2).all());
}

TEST(Pairs, FocusKeepsLesionPixels)
{
    // Cutout-gated pairs on planted lesions: nearly every lesion pixel inside the crop
    // window survives the cutout.
    SynthSpec sp;
    sp.image_px = 64;
    const auto data = gen_dataset(sp, 4, 21);
    AugmentSpec spec;
    spec.reference_px = 224;
    double alive = 0.0, window = 0.0;
    for (int i = 0; i < 3000; ++i) {
        const SynthSample& s = data[std::size_t(i) % data.size()];
        if (s.label == 0)
            continue;
        const ViewPair p = generate_pair(s.image, s.saliency, PairMode::focus, spec, {}, derive_key(3, i));
        for (const auto* chain : {&p.chain1, &p.chain2}) {
            const ChainMasks m = track_mask(*chain, s.lesion_mask);
            alive += double(m.alive.count());
            window += double(m.window.count());
        }
    }
    EXPECT_GE(alive / window, 0.99);
}

TEST(Spec, Validation)
{
    AugmentSpec s;
    s.flip_prob = 1.5;
    EXPECT_THROW(s.validate(), ConfigError);
    FocusConfig f;
    f.cutout_iou_min = 0.0;
    EXPECT_THROW(f.validate(), ConfigError);
    EXPECT_EQ(parse_pair_mode("focus_crop"), PairMode::focus_crop);
    EXPECT_THROW(parse_pair_mode("strong"), ConfigError);
    AugmentSpec r;
    r.reference_px = 224;
    r.cutout_px = 128;
    EXPECT_EQ(r.cutout_for(64), 37);
}
