#include <gtest/gtest.h>

#include <cmath>

#include "fcaug/encoder.hpp"
#include "fcaug/error.hpp"
#include "fcaug/losses.hpp"
#include "fcaug/rng.hpp"
#include "fcaug/train.hpp"

using namespace fc;

namespace {

EncoderConfig tiny(int px = 16)
{
    EncoderConfig c;
    c.input_px = px;
    c.conv1_channels = 4;
    c.conv2_channels = 6;
    c.embed_dim = 8;
    return c;
}

std::vector<Image> random_images(int n, int px, std::uint64_t seed)
{
    CounterRng rng(seed);
    std::vector<Image> out;
    for (int i = 0; i < n; ++i) {
        Image img(px, px);
        for (Index k = 0; k < img.size(); ++k)
            img.data()[k] = float(rng.uniform01());
        out.push_back(img);
    }
    return out;
}

Matrix random_rows(Index n, Index d, std::uint64_t seed, bool unit)
{
    CounterRng rng(seed);
    Matrix m(n, d);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = rng.normal();
    if (unit)
        m.rowwise().normalize();
    return m;
}

template <typename Loss>
double fd_max_rel(Matrix& x, const Matrix& analytic, Loss loss)
{
    const double h = 1e-6;
    double worst = 0.0;
    for (Index i = 0; i < x.size(); ++i) {
        const double orig = x.data()[i];
        x.data()[i] = orig + h;
        const double up = loss();
        x.data()[i] = orig - h;
        const double down = loss();
        x.data()[i] = orig;
        const double num = (up - down) / (2 * h);
        const double a = analytic.data()[i];
        worst = std::max(worst, std::abs(a - num) / std::max({std::abs(a), std::abs(num), 1e-6}));
    }
    return worst;
}

}  // namespace

TEST(Encoder, HandComputedFourByFour)
{
    EncoderConfig c;
    c.input_px = 4;
    c.conv1_channels = 1;
    c.conv2_channels = 1;
    c.embed_dim = 1;
    c.center_input = false;
    c.batch_norm = false;
    EncoderState s = init_encoder(c, 0);
    s.conv1_w.setZero();
    s.conv1_w(0, 4) = 1.0;  // center tap
    s.conv1_w(0, 8) = 2.0;  // bottom-right tap
    s.conv1_b(0, 0) = 0.5;
    s.conv2_w.setZero();
    s.conv2_w(0, 4) = 1.0;
    s.conv2_w(0, 5) = -1.0;
    s.conv2_w(0, 7) = 0.5;
    s.conv2_b(0, 0) = -1.0;
    s.proj_w(0, 0) = 2.0;
    s.proj_b(0, 0) = -30.0;

    Image img(4, 4);
    for (Index i = 0; i < 16; ++i)
        img.data()[i] = float(i + 1);
    const ForwardCache fc = forward(s, std::span<const Image>(&img, 1));
    // conv1 at centers (0,0) (0,2) (2,0) (2,2): I + 2 * I(down-right) + 0.5
    EXPECT_DOUBLE_EQ(fc.a1(0, 0), 1 + 2 * 6 + 0.5);
    EXPECT_DOUBLE_EQ(fc.a1(1, 0), 3 + 2 * 8 + 0.5);
    EXPECT_DOUBLE_EQ(fc.a1(2, 0), 9 + 2 * 14 + 0.5);
    EXPECT_DOUBLE_EQ(fc.a1(3, 0), 11 + 2 * 16 + 0.5);
    // conv2 sees the 2x2 map at taps (1,1) (1,2) (2,1) (2,2).
    EXPECT_DOUBLE_EQ(fc.features(0, 0), 13.5 - 19.5 + 0.5 * 37.5 - 1.0);
    EXPECT_DOUBLE_EQ(fc.z(0, 0), 2.0 * 11.75 - 30.0);
    EXPECT_DOUBLE_EQ(fc.u(0, 0), -1.0);

    s.conv2_b(0, 0) = -20.0;
    EXPECT_DOUBLE_EQ(forward(s, std::span<const Image>(&img, 1)).features(0, 0), 0.0);
}

TEST(Encoder, ZeroEmbeddingFallsBackToE1)
{
    EncoderState s = zeros_like(init_encoder(tiny(), 1));
    const Vector u = encode(s, Image::Zero(16, 16));
    ASSERT_EQ(u.size(), 8);
    EXPECT_EQ(u(0), 1.0);
    EXPECT_EQ(u.tail(7).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Encoder, UnitNorm)
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const EncoderState s = init_encoder(tiny(), seed);
        for (const Image& img : random_images(4, 16, seed + 10))
            EXPECT_NEAR(encode(s, img).norm(), 1.0, 1e-6);
        const ForwardCache c = forward(s, random_images(4, 16, seed), Pass::train);
        EXPECT_LT((c.u.rowwise().norm().array() - 1.0).abs().maxCoeff(), 1e-6);
    }
}

TEST(Encoder, Errors)
{
    EncoderState s = init_encoder(tiny(), 0);
    EXPECT_THROW(forward(s, random_images(1, 12, 0)), ValidationError);
    EXPECT_THROW(forward(s, std::vector<Image>{}), ValidationError);
    EXPECT_THROW(forward(s, random_images(1, 16, 0), Pass::train), ValidationError);
    s.conv2_w(0, 0) = std::nan("");
    EXPECT_THROW(forward(s, random_images(2, 16, 0)), ValidationError);
    EncoderConfig bad = tiny();
    bad.embed_dim = 0;
    EXPECT_THROW(init_encoder(bad, 0), ConfigError);
}

TEST(Encoder, DeterministicInit)
{
    const EncoderState a = init_encoder(tiny(), 3);
    const EncoderState b = init_encoder(tiny(), 3);
    const EncoderState c = init_encoder(tiny(), 4);
    EXPECT_EQ(a.conv2_w, b.conv2_w);
    EXPECT_NE(a.conv2_w, c.conv2_w);
}

TEST(Encoder, EvalUsesRunningStatistics)
{
    EncoderState s = init_encoder(tiny(), 2);
    const auto imgs = random_images(6, 16, 1);
    const ForwardCache train = forward(s, imgs, Pass::train);
    EXPECT_LT(train.normed.colwise().mean().cwiseAbs().maxCoeff(), 1e-12);
    update_running_stats(s, train, 1.0);
    const ForwardCache eval = forward(s, imgs, Pass::eval);
    EXPECT_LT((eval.z - train.z).cwiseAbs().maxCoeff(), 1e-12);
    // Eval-mode embeddings of one image do not depend on the rest of the batch.
    EXPECT_LT((forward(s, std::span<const Image>(imgs.data(), 1)).u.row(0) - eval.u.row(0)).norm(), 1e-12);
}

TEST(InfoNce, TwoOrthogonalPoints)
{
    const Matrix u = Matrix::Identity(2, 2);
    for (double tau : {0.1, 0.2, 0.5, 1.0})
        EXPECT_NEAR(info_nce(u, u, tau).loss, std::log(1.0 + std::exp(-1.0 / tau)), 1e-6);
}

TEST(InfoNce, IdenticalEmbeddings)
{
    for (Index n : {2, 5, 16}) {
        const Matrix u = Matrix::Ones(n, 4) * 0.5;
        const LossGrad lg = info_nce(u, u, 0.2);
        EXPECT_NEAR(lg.loss, std::log(double(n)), 1e-6);
        EXPECT_LT(lg.grad1.cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(InfoNce, FiniteDifferences)
{
    Matrix u1 = random_rows(8, 32, 1, true);
    Matrix u2 = random_rows(8, 32, 2, true);
    const LossGrad lg = info_nce(u1, u2, 0.2);
    EXPECT_LT(fd_max_rel(u1, lg.grad1, [&] { return info_nce(u1, u2, 0.2).loss; }), 1e-4);
    EXPECT_LT(fd_max_rel(u2, lg.grad2, [&] { return info_nce(u1, u2, 0.2).loss; }), 1e-4);
}

TEST(InfoNce, RotationInvariance)
{
    const Matrix u1 = random_rows(6, 5, 3, true);
    const Matrix u2 = random_rows(6, 5, 4, true);
    const Eigen::HouseholderQR<Matrix> qr(random_rows(5, 5, 5, false));
    const Matrix q = qr.householderQ();
    EXPECT_NEAR(info_nce(u1 * q, u2 * q, 0.3).loss, info_nce(u1, u2, 0.3).loss, 1e-12);
}

TEST(InfoNce, Errors)
{
    EXPECT_THROW(info_nce(Matrix::Identity(1, 3), Matrix::Identity(1, 3), 0.2), ValidationError);
    EXPECT_THROW(info_nce(Matrix::Identity(2, 2), Matrix::Identity(2, 2), 0.0), ConfigError);
}

TEST(Byol, ClosedForms)
{
    const Matrix p = random_rows(4, 6, 1, false);
    EXPECT_NEAR(byol_loss(p, p, 3.0 * p, 2.0 * p).loss, 0.0, 1e-12);
    const Matrix e = Matrix::Identity(2, 2);
    Matrix swapped(2, 2);
    swapped << 0, 1, 1, 0;
    EXPECT_NEAR(byol_loss(e, e, swapped, swapped).loss, 2.0, 1e-12);
}

TEST(Byol, FiniteDifferences)
{
    Matrix p1 = random_rows(5, 7, 1, false);
    Matrix p2 = random_rows(5, 7, 2, false);
    const Matrix t1 = random_rows(5, 7, 3, false);
    const Matrix t2 = random_rows(5, 7, 4, false);
    const LossGrad lg = byol_loss(p1, p2, t1, t2);
    EXPECT_LT(fd_max_rel(p1, lg.grad1, [&] { return byol_loss(p1, p2, t1, t2).loss; }), 1e-4);
    EXPECT_LT(fd_max_rel(p2, lg.grad2, [&] { return byol_loss(p1, p2, t1, t2).loss; }), 1e-4);
}

TEST(GradCheck, LinearSquaredIsExact)
{
    EncoderConfig c = tiny();
    c.relu = false;
    c.batch_norm = false;
    const auto v1 = random_images(4, 16, 1);
    const GradCheckReport r = grad_check(init_encoder(c, 1), CheckLoss::squared, v1, v1, 1e-8);
    EXPECT_TRUE(r.passed) << r.max_rel_error;
    EXPECT_EQ(r.n_kinked, 0u);
}

TEST(GradCheck, InfoNceWithRelu)
{
    const EncoderState s = init_encoder(tiny(), 2);
    const GradCheckReport r = grad_check(s, CheckLoss::infonce, random_images(4, 16, 3), random_images(4, 16, 4), 1e-4);
    EXPECT_TRUE(r.passed) << r.max_rel_error;
    EXPECT_EQ(r.n_params + r.n_kinked, s.parameter_count());
    EXPECT_LT(r.n_kinked, s.parameter_count() / 20);
}

TEST(GradCheck, ByolStopGradient)
{
    EncoderConfig c = tiny();
    c.predictor_hidden = 8;
    const GradCheckReport r =
        grad_check(init_encoder(c, 5), CheckLoss::byol, random_images(4, 16, 6), random_images(4, 16, 7), 1e-4);
    EXPECT_TRUE(r.passed) << r.max_rel_error;
    EXPECT_EQ(r.target_grad_max, 0.0);
}

TEST(Byol, NeedsPredictor)
{
    const EncoderState s = init_encoder(tiny(), 0);
    const auto v = random_images(2, 16, 0);
    EXPECT_THROW(byol_step(s, s, v, v), ConfigError);
}
