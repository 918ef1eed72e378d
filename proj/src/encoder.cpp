#include "fcaug/encoder.hpp"

#include <cmath>

#include "fcaug/error.hpp"
#include "fcaug/rng.hpp"

namespace fc {

namespace {

constexpr double bn_eps = 1e-5;

Index conv_out(Index n) { return (n - 1) / 2 + 1; }

/// 3x3 stride-2 pad-1 patches. `input` rows are (b, y, x) positions, columns are channels.
Activations im2col(const Activations& input, Index batch, Index h, Index w, Index channels)
{
    const Index ho = conv_out(h);
    const Index wo = conv_out(w);
    Activations col = Activations::Zero(batch * ho * wo, channels * 9);
    for (Index b = 0; b < batch; ++b)
        for (Index oy = 0; oy < ho; ++oy)
            for (Index ox = 0; ox < wo; ++ox) {
                const Index row = (b * ho + oy) * wo + ox;
                for (Index ky = 0; ky < 3; ++ky) {
                    const Index y = 2 * oy - 1 + ky;
                    if (y < 0 || y >= h)
                        continue;
                    for (Index kx = 0; kx < 3; ++kx) {
                        const Index x = 2 * ox - 1 + kx;
                        if (x < 0 || x >= w)
                            continue;
                        const Index src = (b * h + y) * w + x;
                        for (Index c = 0; c < channels; ++c)
                            col(row, c * 9 + ky * 3 + kx) = input(src, c);
                    }
                }
            }
    return col;
}

Activations col2im(const Activations& col, Index batch, Index h, Index w, Index channels)
{
    const Index ho = conv_out(h);
    const Index wo = conv_out(w);
    Activations out = Activations::Zero(batch * h * w, channels);
    for (Index b = 0; b < batch; ++b)
        for (Index oy = 0; oy < ho; ++oy)
            for (Index ox = 0; ox < wo; ++ox) {
                const Index row = (b * ho + oy) * wo + ox;
                for (Index ky = 0; ky < 3; ++ky) {
                    const Index y = 2 * oy - 1 + ky;
                    if (y < 0 || y >= h)
                        continue;
                    for (Index kx = 0; kx < 3; ++kx) {
                        const Index x = 2 * ox - 1 + kx;
                        if (x < 0 || x >= w)
                            continue;
                        const Index dst = (b * h + y) * w + x;
                        for (Index c = 0; c < channels; ++c)
                            out(dst, c) += col(row, c * 9 + ky * 3 + kx);
                    }
                }
            }
    return out;
}

Activations activate(const Activations& a, bool relu) { return relu ? Activations(a.cwiseMax(0.0)) : a; }

Activations activation_grad(const Activations& a, const Activations& grad, bool relu)
{
    if (!relu)
        return grad;
    return (a.array() > 0.0).select(grad, 0.0);
}

Matrix he_normal(Index rows, Index cols, double fan_in, CounterRng& rng)
{
    Matrix m(rows, cols);
    const double sd = std::sqrt(2.0 / fan_in);
    for (Index i = 0; i < m.size(); ++i)
        m.data()[i] = sd * rng.normal();
    return m;
}

}  // namespace

void EncoderConfig::validate() const
{
    if (input_px < 2 || conv1_channels < 1 || conv2_channels < 1 || embed_dim < 1 || predictor_hidden < 0)
        throw ConfigError("invalid encoder dimensions");
}

std::vector<std::pair<std::string, Matrix*>> EncoderState::params()
{
    std::vector<std::pair<std::string, Matrix*>> p = {
        {"conv1.w", &conv1_w}, {"conv1.b", &conv1_b}, {"conv2.w", &conv2_w},
        {"conv2.b", &conv2_b}, {"proj.w", &proj_w},   {"proj.b", &proj_b},
    };
    if (has_predictor()) {
        p.emplace_back("pred.w1", &pred_w1);
        p.emplace_back("pred.b1", &pred_b1);
        p.emplace_back("pred.w2", &pred_w2);
        p.emplace_back("pred.b2", &pred_b2);
    }
    return p;
}

std::vector<std::pair<std::string, const Matrix*>> EncoderState::params() const
{
    std::vector<std::pair<std::string, const Matrix*>> out;
    for (auto& [name, m] : const_cast<EncoderState*>(this)->params())
        out.emplace_back(name, m);
    return out;
}

std::vector<std::pair<std::string, Matrix*>> EncoderState::buffers()
{
    return {{"bn.mean", &bn_mean}, {"bn.var", &bn_var}};
}

std::vector<std::pair<std::string, const Matrix*>> EncoderState::buffers() const
{
    return {{"bn.mean", &bn_mean}, {"bn.var", &bn_var}};
}

std::size_t EncoderState::parameter_count() const
{
    std::size_t n = 0;
    for (const auto& [name, m] : params())
        n += static_cast<std::size_t>(m->size());
    return n;
}

bool EncoderState::all_finite() const
{
    for (const auto& [name, m] : params())
        if (!m->allFinite())
            return false;
    for (const auto& [name, m] : buffers())
        if (!m->allFinite())
            return false;
    return true;
}

EncoderState init_encoder(const EncoderConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    CounterRng rng(derive_key(seed, 0xe9c0de));
    EncoderState s;
    s.cfg = cfg;
    const Index c1 = cfg.conv1_channels, c2 = cfg.conv2_channels, d = cfg.embed_dim;
    s.conv1_w = he_normal(c1, 9, 9.0, rng);
    s.conv1_b = Matrix::Zero(c1, 1);
    s.conv2_w = he_normal(c2, c1 * 9, double(c1 * 9), rng);
    s.conv2_b = Matrix::Zero(c2, 1);
    s.proj_w = he_normal(d, c2, double(c2), rng);
    s.proj_b = Matrix::Zero(d, 1);
    s.bn_mean = Matrix::Zero(c2, 1);
    s.bn_var = Matrix::Ones(c2, 1);
    if (cfg.predictor_hidden > 0) {
        const Index h = cfg.predictor_hidden;
        s.pred_w1 = he_normal(h, d, double(d), rng);
        s.pred_b1 = Matrix::Zero(h, 1);
        s.pred_w2 = he_normal(d, h, double(h), rng);
        s.pred_b2 = Matrix::Zero(d, 1);
    }
    return s;
}

EncoderState zeros_like(const EncoderState& s)
{
    EncoderState z = s;
    for (auto& [name, m] : z.params())
        m->setZero();
    return z;
}

ForwardCache forward(const EncoderState& s, std::span<const Image> batch, Pass pass)
{
    if (!s.all_finite())
        throw ValidationError("encoder parameters contain NaN or Inf");
    const Index n = s.cfg.input_px;
    ForwardCache c;
    c.batch = static_cast<Index>(batch.size());
    if (c.batch == 0)
        throw ValidationError("empty batch");
    Activations input(c.batch * n * n, 1);
    for (Index b = 0; b < c.batch; ++b) {
        const Image& img = batch[static_cast<std::size_t>(b)];
        if (img.rows() != n || img.cols() != n)
            throw ValidationError("image is " + std::to_string(img.cols()) + "x" + std::to_string(img.rows())
                                  + ", encoder expects " + std::to_string(n) + "x" + std::to_string(n));
        const double offset = s.cfg.center_input ? img.cast<double>().mean() : 0.0;
        for (Index i = 0; i < n * n; ++i)
            input(b * n * n + i, 0) = static_cast<double>(img.data()[i]) - offset;
    }
    const bool relu = s.cfg.relu;
    c.h1 = conv_out(n);
    c.w1 = conv_out(n);
    c.col1 = im2col(input, c.batch, n, n, 1);
    c.a1 = c.col1 * s.conv1_w.transpose();
    c.a1.rowwise() += s.conv1_b.col(0).transpose();
    c.r1 = activate(c.a1, relu);

    c.h2 = conv_out(c.h1);
    c.w2 = conv_out(c.w1);
    c.col2 = im2col(c.r1, c.batch, c.h1, c.w1, s.cfg.conv1_channels);
    c.a2 = c.col2 * s.conv2_w.transpose();
    c.a2.rowwise() += s.conv2_b.col(0).transpose();
    c.r2 = activate(c.a2, relu);

    const Index spatial = c.h2 * c.w2;
    c.features.resize(c.batch, s.cfg.conv2_channels);
    for (Index b = 0; b < c.batch; ++b)
        c.features.row(b) = c.r2.middleRows(b * spatial, spatial).colwise().mean();

    if (!s.cfg.batch_norm) {
        c.normed = c.features;
    } else {
        c.batch_stats = pass == Pass::train;
        if (c.batch_stats) {
            if (c.batch < 2)
                throw ValidationError("batch statistics need at least 2 images");
            c.batch_mean = c.features.colwise().mean();
            c.batch_var = (c.features.rowwise() - c.batch_mean).array().square().colwise().mean();
        } else {
            c.batch_mean = s.bn_mean.col(0).transpose();
            c.batch_var = s.bn_var.col(0).transpose();
        }
        c.inv_std = (c.batch_var.array() + bn_eps).rsqrt();
        c.normed = (c.features.rowwise() - c.batch_mean).array().rowwise() * c.inv_std.array();
    }
    c.z = c.normed * s.proj_w.transpose();
    c.z.rowwise() += s.proj_b.col(0).transpose();
    c.u = normalize_rows(c.z, c.norms);
    return c;
}

void update_running_stats(EncoderState& s, const ForwardCache& c, double momentum)
{
    if (!c.batch_stats)
        return;
    s.bn_mean = (1.0 - momentum) * s.bn_mean + momentum * c.batch_mean.transpose();
    s.bn_var = (1.0 - momentum) * s.bn_var + momentum * c.batch_var.transpose();
}

Vector encode(const EncoderState& s, const Image& image)
{
    const auto c = forward(s, std::span<const Image>(&image, 1));
    return c.u.row(0).transpose();
}

Matrix backbone_features(const EncoderState& s, std::span<const Image> images)
{
    Matrix out(static_cast<Index>(images.size()), s.cfg.conv2_channels);
    constexpr std::size_t chunk = 256;
    for (std::size_t i = 0; i < images.size(); i += chunk) {
        const std::size_t len = std::min(chunk, images.size() - i);
        const auto c = forward(s, images.subspan(i, len));
        out.middleRows(static_cast<Index>(i), static_cast<Index>(len)) = c.features;
    }
    return out;
}

Matrix normalize_rows(const Matrix& z, Vector& norms)
{
    norms = z.rowwise().norm();
    Matrix u(z.rows(), z.cols());
    for (Index i = 0; i < z.rows(); ++i) {
        if (norms(i) > 0.0) {
            u.row(i) = z.row(i) / norms(i);
        } else {
            u.row(i).setZero();
            u(i, 0) = 1.0;
        }
    }
    return u;
}

Matrix normalize_rows_backward(const Matrix& u, const Vector& norms, const Matrix& grad_u)
{
    Matrix g = Matrix::Zero(u.rows(), u.cols());
    for (Index i = 0; i < u.rows(); ++i) {
        if (norms(i) > 0.0)
            g.row(i) = (grad_u.row(i) - u.row(i) * u.row(i).dot(grad_u.row(i))) / norms(i);
    }
    return g;
}

void backward(const EncoderState& s, const ForwardCache& c, const Matrix& grad_z, EncoderState& grad)
{
    const bool relu = s.cfg.relu;
    grad.proj_w += grad_z.transpose() * c.normed;
    grad.proj_b += grad_z.colwise().sum().transpose();
    Matrix grad_feat = grad_z * s.proj_w;
    if (s.cfg.batch_norm) {
        if (c.batch_stats) {
            const Eigen::RowVectorXd g_mean = grad_feat.colwise().mean();
            const Eigen::RowVectorXd gx_mean = (grad_feat.array() * c.normed.array()).colwise().mean();
            grad_feat = ((grad_feat.rowwise() - g_mean).array()
                         - c.normed.array().rowwise() * gx_mean.array())
                            .rowwise()
                        * c.inv_std.array();
        } else {
            grad_feat = grad_feat.array().rowwise() * c.inv_std.array();
        }
    }

    const Index spatial = c.h2 * c.w2;
    Activations grad_r2(c.r2.rows(), c.r2.cols());
    for (Index b = 0; b < c.batch; ++b)
        grad_r2.middleRows(b * spatial, spatial).rowwise() = grad_feat.row(b) / double(spatial);
    const Activations grad_a2 = activation_grad(c.a2, grad_r2, relu);
    grad.conv2_w += grad_a2.transpose() * c.col2;
    grad.conv2_b += grad_a2.colwise().sum().transpose();

    const Activations grad_col2 = grad_a2 * s.conv2_w;
    const Activations grad_r1 = col2im(grad_col2, c.batch, c.h1, c.w1, s.cfg.conv1_channels);
    const Activations grad_a1 = activation_grad(c.a1, grad_r1, relu);
    grad.conv1_w += grad_a1.transpose() * c.col1;
    grad.conv1_b += grad_a1.colwise().sum().transpose();
}

Matrix predictor_forward(const EncoderState& s, const Matrix& z, PredictorCache& cache)
{
    if (!s.has_predictor())
        throw ConfigError("encoder has no predictor head");
    cache.input = z;
    cache.hidden_pre = z * s.pred_w1.transpose();
    cache.hidden_pre.rowwise() += s.pred_b1.col(0).transpose();
    cache.hidden = cache.hidden_pre.cwiseMax(0.0);
    cache.out = cache.hidden * s.pred_w2.transpose();
    cache.out.rowwise() += s.pred_b2.col(0).transpose();
    return cache.out;
}

Matrix predictor_backward(const EncoderState& s, const PredictorCache& cache, const Matrix& grad_out,
                          EncoderState& grad)
{
    grad.pred_w2 += grad_out.transpose() * cache.hidden;
    grad.pred_b2 += grad_out.colwise().sum().transpose();
    const Matrix grad_hidden = (cache.hidden_pre.array() > 0.0).select(grad_out * s.pred_w2, 0.0);
    grad.pred_w1 += grad_hidden.transpose() * cache.input;
    grad.pred_b1 += grad_hidden.colwise().sum().transpose();
    return grad_hidden * s.pred_w1;
}

}  // namespace fc
