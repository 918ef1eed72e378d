#include <gtest/gtest.h>

#include <filesystem>

#include "fcaug/error.hpp"
#include "fcaug/io.hpp"
#include "fcaug/rng.hpp"
#include "fcaug/saliency.hpp"
#include "oracles.hpp"

using namespace fc;

namespace {

Grid<double> random_image(Index rows, Index cols, std::uint64_t seed)
{
    CounterRng rng(seed);
    Grid<double> g(rows, cols);
    for (Index i = 0; i < g.size(); ++i)
        g.data()[i] = rng.uniform01();
    return g;
}

}  // namespace

TEST(Fft, MatchesDirectDft)
{
    const Grid<double> x = random_image(12, 10, 3);
    const ComplexGrid f = fft2(x.cast<std::complex<double>>());
    const ComplexGrid ref = oracle::direct_dft(x.cast<std::complex<double>>(), -1);
    EXPECT_LT((f - ref).abs().maxCoeff(), 1e-10);
    EXPECT_LT((ifft2(f) - x.cast<std::complex<double>>()).abs().maxCoeff(), 1e-12);
}

TEST(SpectralResidual, MatchesDirectDftOracle)
{
    SpectralResidualConfig cfg;
    cfg.working_px = 16;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Grid<double> img = random_image(16, 16, seed);
        const Grid<double> work = sr_working_raster(img, cfg);
        const ComplexGrid back = ifft2(sr_residual_spectrum(fft2(work.cast<std::complex<double>>())));
        const Grid<double> energy = back.abs2();
        const Grid<double> ref = oracle::sr_energy(img);
        const double scale = ref.maxCoeff();
        for (Index i = 0; i < ref.size(); ++i)
            ASSERT_LE(std::abs(energy.data()[i] - ref.data()[i]), 1e-6 * std::max(std::abs(ref.data()[i]), 1e-9 * scale))
                << "seed " << seed << " index " << i;

        const Grid<double> full = spectral_residual(img, cfg);
        const Grid<double> full_ref = sr_finish(ref, 16, 16, cfg);
        EXPECT_LT((full - full_ref).abs().maxCoeff(), 1e-6);
    }
}

TEST(SpectralResidual, ConstantImage)
{
    const Grid<float> img = Grid<float>::Constant(64, 64, 0.4f);
    EXPECT_LT(spectral_residual(img).maxCoeff(), 0.05f);
}

TEST(SpectralResidual, ImpulsePeak)
{
    Grid<float> img = Grid<float>::Zero(64, 64);
    img(20, 41) = 1.0f;
    const auto [r, c] = argmax(spectral_residual(img));
    EXPECT_EQ(r, 20);
    EXPECT_EQ(c, 41);
}

TEST(SpectralResidual, AffineIntensityInvariance)
{
    Grid<double> img = random_image(48, 48, 9) * 0.2;
    img.block(30, 10, 5, 5) += 0.8;
    const auto peak = argmax(spectral_residual(img));
    EXPECT_EQ(argmax(spectral_residual(Grid<double>(3.0 * img + 0.7))), peak);
    EXPECT_EQ(argmax(spectral_residual(Grid<double>(0.25 * img - 2.0))), peak);
}

TEST(SpectralResidual, RangeAndShape)
{
    const Grid<double> img = random_image(40, 72, 4);
    const Grid<double> m = spectral_residual(img);
    EXPECT_EQ(m.rows(), 40);
    EXPECT_EQ(m.cols(), 72);
    EXPECT_DOUBLE_EQ(m.maxCoeff(), 1.0);
    EXPECT_GE(m.minCoeff(), 0.0);
    EXPECT_THROW(spectral_residual(random_image(7, 30, 1)), ValidationError);
}

TEST(SaliencySource, Uniform)
{
    const Image img = Image::Random(224, 224);
    const SaliencyMap m = saliency_for({SaliencyKind::uniform, {}, {}}, "x", img);
    EXPECT_EQ(m.rows(), 224);
    EXPECT_TRUE((m == 1.0f).all());
}

TEST(SaliencySource, GazeFileRoundTrip)
{
    const auto dir = std::filesystem::temp_directory_path() / "fcaug_test_saliency";
    std::filesystem::create_directories(dir);
    SaliencyMap stored = SaliencyMap::Random(32, 48).abs();
    write_smap(dir / "img7.smap", stored);
    const SaliencyProvider provider({SaliencyKind::gaze_file, dir, {}});
    const Image img = Image::Zero(32, 48);
    EXPECT_TRUE((provider.saliency_for("img7", img) == stored).all());
    EXPECT_THROW(provider.saliency_for("missing", img), LookupError);
    EXPECT_THROW(provider.saliency_for("img7", Image::Zero(48, 32)), ValidationError);
    std::filesystem::remove_all(dir);
}

TEST(SaliencySource, ParseKind)
{
    EXPECT_EQ(parse_saliency_kind("spectral_residual"), SaliencyKind::spectral_residual);
    EXPECT_EQ(to_string(SaliencyKind::gaze_file), "gaze_file");
    EXPECT_THROW(parse_saliency_kind("itti"), ConfigError);
}

TEST(Smap, EncodeDecode)
{
    const SaliencyMap m = SaliencyMap::Random(5, 9);
    const auto bytes = encode_smap(m);
    EXPECT_EQ(bytes.size(), 12u + 45u * 4u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "SMAP");
    EXPECT_TRUE((decode_smap(bytes) == m).all());
}

TEST(Pgm, SixteenAndEightBit)
{
    Image img(3, 4);
    img << 0, 0.25f, 0.5f, 1, 0.1f, 0.2f, 0.3f, 0.4f, 1, 1, 0, 0;
    const Image back16 = decode_pgm(encode_pgm(img, 16));
    EXPECT_LT((back16 - img).abs().maxCoeff(), 1.0f / 65535);
    const Image back8 = decode_pgm(encode_pgm(img, 8));
    EXPECT_LT((back8 - img).abs().maxCoeff(), 1.0f / 255);
}
