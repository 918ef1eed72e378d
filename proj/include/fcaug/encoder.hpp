#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fcaug/grid.hpp"

namespace fc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
/// Per-position activations: one row per (image, y, x), one column per channel or tap.
using Activations = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct EncoderConfig
{
    int input_px = 64;
    int conv1_channels = 8;
    int conv2_channels = 16;
    int embed_dim = 32;
    int predictor_hidden = 0;  // 0: no predictor head
    bool relu = true;          // false gives a purely linear encoder
    bool center_input = true;  // subtract each image's mean intensity first
    bool batch_norm = true;    // standardize pooled features before the projector

    void validate() const;
    bool operator==(const EncoderConfig&) const = default;
};

/// Two stride-2 3x3 convolutions, global average pool, linear projector and an
/// optional one-hidden-layer predictor. Biases are stored as n x 1 matrices so
/// every parameter is a Matrix.
struct EncoderState
{
    EncoderConfig cfg;
    Matrix conv1_w, conv1_b;  // C1 x 9, C1 x 1
    Matrix conv2_w, conv2_b;  // C2 x (C1*9), C2 x 1
    Matrix proj_w, proj_b;    // d x C2, d x 1
    Matrix pred_w1, pred_b1;  // h x d, h x 1
    Matrix pred_w2, pred_b2;  // d x h, d x 1
    Matrix bn_mean, bn_var;   // C2 x 1 running feature statistics, not trained

    bool has_predictor() const { return pred_w1.size() > 0; }

    /// Named parameter tensors in a fixed order (predictor last, when present).
    std::vector<std::pair<std::string, Matrix*>> params();
    std::vector<std::pair<std::string, const Matrix*>> params() const;
    /// Non-trained state (running statistics).
    std::vector<std::pair<std::string, Matrix*>> buffers();
    std::vector<std::pair<std::string, const Matrix*>> buffers() const;
    std::size_t parameter_count() const;
    bool all_finite() const;
};

/// He-initialized weights, zero biases, running statistics mean 0 and variance 1.
EncoderState init_encoder(const EncoderConfig& cfg, std::uint64_t seed);
EncoderState zeros_like(const EncoderState& s);

/// Activations kept for the backward pass.
struct ForwardCache
{
    Index batch = 0;
    Index h1 = 0, w1 = 0, h2 = 0, w2 = 0;
    Activations col1, a1, r1;
    Activations col2, a2, r2;
    Matrix features;  // B x C2, pooled backbone output
    Matrix normed;    // B x C2, projector input
    Eigen::RowVectorXd batch_mean, batch_var, inv_std;
    bool batch_stats = false;
    Matrix z;         // B x d, projector output
    Matrix u;         // B x d, L2-normalized z
    Vector norms;
};

/// train: feature statistics from the batch (needs >= 2 images). eval: running statistics.
enum class Pass { train, eval };

ForwardCache forward(const EncoderState& s, std::span<const Image> batch, Pass pass = Pass::eval);

/// running <- (1 - momentum) * running + momentum * batch, using the cache's batch statistics.
void update_running_stats(EncoderState& s, const ForwardCache& cache, double momentum = 0.1);

/// Unit embedding. A zero projection falls back to e1.
Vector encode(const EncoderState& s, const Image& image);

/// Pooled backbone features (pre-projector), one row per image.
Matrix backbone_features(const EncoderState& s, std::span<const Image> images);

/// Row-wise L2 normalization with the e1 fallback; returns norms.
Matrix normalize_rows(const Matrix& z, Vector& norms);
/// Gradient through normalize_rows.
Matrix normalize_rows_backward(const Matrix& u, const Vector& norms, const Matrix& grad_u);

/// Accumulates encoder/projector gradients for dL/dz into `grad`.
void backward(const EncoderState& s, const ForwardCache& cache, const Matrix& grad_z, EncoderState& grad);

struct PredictorCache
{
    Matrix input, hidden_pre, hidden, out;
};

Matrix predictor_forward(const EncoderState& s, const Matrix& z, PredictorCache& cache);
/// Accumulates predictor gradients into `grad`; returns dL/dz.
Matrix predictor_backward(const EncoderState& s, const PredictorCache& cache, const Matrix& grad_out,
                          EncoderState& grad);

}  // namespace fc
