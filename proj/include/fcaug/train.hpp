#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fcaug/augment.hpp"
#include "fcaug/encoder.hpp"

namespace fc {

/// One labeled training or evaluation image with its saliency map.
struct Sample
{
    std::string id;
    Image image;
    SaliencyMap map;
    int label = 0;
};

enum class LossKind { infonce, byol };

std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& name);

struct TrainConfig
{
    LossKind loss = LossKind::infonce;
    int batch_size = 128;
    int epochs = 100;
    int warmup_epochs = 10;
    double temperature = 0.2;
    double ema_momentum = 0.99;
    double base_lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double max_reject_rate = 0.5;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Learning rate for 1-based `epoch`: linear warm-up to base_lr, then cosine decay to 0.
double lr_at(const TrainConfig& cfg, int epoch);

/// How positive pairs are produced during pre-training.
struct PairRecipe
{
    PairMode mode = PairMode::default_mode;
    AugmentSpec spec;
    FocusConfig focus;
};

struct EpochLog
{
    int epoch = 0;
    double loss = 0.0;
    double lr = 0.0;
    double reject_rate = 0.0;
    double attempts_mean = 0.0;
};

/// `epoch,loss,lr,reject_rate` with a header row.
std::string training_log_csv(const std::vector<EpochLog>& log);

struct TrainResult
{
    EncoderState online;
    EncoderState target;  // EMA copy; only meaningful for BYOL
    std::vector<EpochLog> log;
};

/// Loss and gradient for one InfoNCE batch (batch statistics); gradients are accumulated
/// into `grad`. When `running` is given its feature statistics are updated from both views.
double infonce_step(const EncoderState& s, std::span<const Image> v1, std::span<const Image> v2, double tau,
                    EncoderState& grad, EncoderState* running = nullptr);

struct ByolStep
{
    double loss = 0.0;
    EncoderState grad_online;
    EncoderState grad_target;  // stays zero: the target branch is a constant
};

ByolStep byol_step(const EncoderState& online, const EncoderState& target, std::span<const Image> v1,
                   std::span<const Image> v2, EncoderState* running = nullptr);

/// p -= lr * v with v = momentum * v + (g + weight_decay * p).
void sgd_step(EncoderState& params, const EncoderState& grad, EncoderState& velocity, double lr, double momentum,
              double weight_decay);

/// target <- m * target + (1 - m) * online, elementwise.
void ema_update(EncoderState& target, const EncoderState& online, double m);

using EpochCallback = std::function<void(const EpochLog&)>;

/// Pair generation fans out over `workers` threads; the update itself is sequential,
/// so the result does not depend on the worker count. Throws TrainingAborted when an
/// epoch's rejection-failure rate exceeds cfg.max_reject_rate.
TrainResult pretrain(const TrainConfig& cfg, const EncoderConfig& enc, std::span<const Sample> data,
                     const PairRecipe& recipe, int workers = 1, const EpochCallback& on_epoch = {});

// --- checkpoints ---------------------------------------------------------------

/// "FCCK", u32 version, u32 length + JSON config, u32 tensor count, then per tensor:
/// u32 name length, name, u32 rows, u32 cols, rows*cols f32 LE (row-major).
std::vector<std::uint8_t> encode_checkpoint(const EncoderState& s);
EncoderState decode_checkpoint(const std::vector<std::uint8_t>& bytes);
void save_checkpoint(const std::filesystem::path& path, const EncoderState& s);
EncoderState load_checkpoint(const std::filesystem::path& path);

// --- linear probe ----------------------------------------------------------------

struct ProbeConfig
{
    int iterations = 500;
    double l2 = 1e-4;
};

struct ProbeResult
{
    double accuracy = 0.0;
    double mae = 0.0;
    Eigen::MatrixXi confusion;  // rows: true grade, cols: predicted
    std::size_t n_train = 0;
    std::size_t n_test = 0;
};

/// Multinomial logistic regression on standardized features, full-batch gradient descent.
ProbeResult probe_features(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                           std::span<const int> test_y, int n_classes, const ProbeConfig& cfg = {});

/// round(fraction * n_c) indices per class, drawn without replacement.
std::vector<std::size_t> stratified_subsample(std::span<const int> labels, int n_classes, double fraction,
                                              std::uint64_t seed);

/// Frozen backbone features of `train` (label_fraction subsample) and `test`.
ProbeResult linear_probe(const EncoderState& s, std::span<const Sample> train, std::span<const Sample> test,
                         int n_classes, double label_fraction, std::uint64_t seed, const ProbeConfig& cfg = {});

// --- gradient check ----------------------------------------------------------------

enum class CheckLoss { squared, infonce, byol };

struct GradCheckReport
{
    double max_rel_error = 0.0;
    double max_abs_error = 0.0;
    double target_grad_max = 0.0;
    std::size_t n_params = 0;
    std::size_t n_kinked = 0;  // skipped: the +-h probe moved a ReLU input across zero
    bool passed = false;
};

/// Central differences on every online parameter. Relative error per element is
/// |a - n| / max(|a|, |n|, 1e-3 * max|a|). The squared loss is taken on v1's projections.
/// Batch statistics are used throughout, so each view needs at least 2 images.
GradCheckReport grad_check(const EncoderState& s, CheckLoss kind, std::span<const Image> v1,
                           std::span<const Image> v2, double tolerance, double tau = 0.2, double h = 1e-4);

}  // namespace fc
