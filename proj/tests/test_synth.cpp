#include <gtest/gtest.h>

#include <set>

#include "fcaug/augment.hpp"
#include "fcaug/dataset.hpp"
#include "fcaug/error.hpp"
#include "fcaug/synth.hpp"

using namespace fc;

TEST(Synth, GradeZeroHasNoLesion)
{
    CounterRng rng(1);
    EXPECT_EQ(gen_sample({}, 0, rng).lesion_mask.count(), 0);
}

TEST(Synth, LesionArea)
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        CounterRng rng(seed);
        const SynthSample s = gen_sample({}, 4, rng);
        const double frac = double(s.lesion_mask.count()) / (224.0 * 224.0);
        EXPECT_GE(frac, 0.037);
        EXPECT_LE(frac, 0.045);
    }
}

TEST(Synth, LesionInsideSalientRegion)
{
    SynthSpec sp;
    sp.image_px = 96;
    for (const auto& s : gen_dataset(sp, 3, 4)) {
        const BinaryMask region = salient_region(s.saliency, 0.05);
        EXPECT_EQ((s.lesion_mask && !region).count(), 0) << s.image_id;
        EXPECT_FLOAT_EQ(s.saliency.maxCoeff(), 1.0f);
    }
}

TEST(Synth, Deterministic)
{
    CounterRng a(9), b(9);
    const SynthSample x = gen_sample({}, 2, a);
    const SynthSample y = gen_sample({}, 2, b);
    EXPECT_TRUE((x.image == y.image).all());
    EXPECT_TRUE((x.lesion_mask == y.lesion_mask).all());
}

TEST(Synth, DatasetLabels)
{
    SynthSpec sp;
    sp.image_px = 32;
    const auto one = gen_dataset(sp, 1, 0);
    ASSERT_EQ(one.size(), 5u);
    for (int g = 0; g < 5; ++g)
        EXPECT_EQ(one[std::size_t(g)].label, g);

    const auto big = gen_dataset(sp, 100, 0);
    ASSERT_EQ(big.size(), 500u);
    std::vector<int> hist(5, 0);
    for (const auto& s : big)
        ++hist[std::size_t(s.label)];
    EXPECT_EQ(hist, std::vector<int>(5, 100));
}

TEST(Synth, DistinctImages)
{
    SynthSpec sp;
    sp.image_px = 32;
    std::set<std::string> seen;
    for (std::uint64_t seed : {1, 2, 3})
        for (const auto& s : gen_dataset(sp, 20, seed))
            seen.insert(std::string(reinterpret_cast<const char*>(s.image.data()), s.image.size() * sizeof(float)));
    EXPECT_EQ(seen.size(), 300u);
}

TEST(Synth, Validation)
{
    SynthSpec sp;
    sp.image_px = 8;
    EXPECT_THROW(sp.validate(), ConfigError);
    CounterRng rng(0);
    EXPECT_THROW(gen_sample({}, 5, rng), ValidationError);
}

TEST(Dataset, WriteAndLoad)
{
    const auto dir = std::filesystem::temp_directory_path() / "fcaug_test_dataset";
    std::filesystem::remove_all(dir);
    SynthSpec sp;
    sp.image_px = 32;
    const auto synth = gen_dataset(sp, 2, 5);
    write_dataset(dir, synth);
    EXPECT_TRUE(std::filesystem::exists(dir / "labels.csv"));
    const auto loaded = load_dataset(dir, {SaliencyKind::gaze_file, {}, {}});
    ASSERT_EQ(loaded.size(), synth.size());
    for (std::size_t i = 0; i < synth.size(); ++i) {
        EXPECT_EQ(loaded[i].id, synth[i].image_id);
        EXPECT_EQ(loaded[i].label, synth[i].label);
        EXPECT_TRUE((loaded[i].map == synth[i].saliency).all());
        EXPECT_LT((loaded[i].image - synth[i].image).abs().maxCoeff(), 1.0f / 65535);
    }
    const auto small = load_dataset(dir, {SaliencyKind::uniform, {}, {}}, 16);
    EXPECT_EQ(small[0].image.rows(), 16);
    EXPECT_TRUE((small[0].map == 1.0f).all());
    std::filesystem::remove_all(dir);
}
