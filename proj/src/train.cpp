#include "fcaug/train.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numbers>
#include <optional>

#include "json.hpp"

#include "fcaug/error.hpp"
#include "fcaug/io.hpp"
#include "fcaug/losses.hpp"
#include "fcaug/parallel.hpp"

namespace fc {

std::string to_string(LossKind kind) { return kind == LossKind::infonce ? "infonce" : "byol"; }

LossKind parse_loss_kind(const std::string& name)
{
    if (name == "infonce")
        return LossKind::infonce;
    if (name == "byol")
        return LossKind::byol;
    throw ConfigError("unknown loss '" + name + "'");
}

void TrainConfig::validate() const
{
    if (batch_size < 2)
        throw ConfigError("batch_size must be >= 2");
    if (epochs < 0 || warmup_epochs < 0)
        throw ConfigError("epochs must be >= 0");
    if (!(temperature > 0.0))
        throw ConfigError("temperature must be > 0");
    if (!(ema_momentum > 0.0 && ema_momentum < 1.0))
        throw ConfigError("ema_momentum must lie in (0, 1)");
    if (!(base_lr > 0.0) || momentum < 0.0 || momentum >= 1.0 || weight_decay < 0.0)
        throw ConfigError("invalid optimizer settings");
    if (!(max_reject_rate >= 0.0 && max_reject_rate <= 1.0))
        throw ConfigError("max_reject_rate must lie in [0, 1]");
}

double lr_at(const TrainConfig& cfg, int epoch)
{
    const int w = cfg.warmup_epochs;
    if (epoch <= w)
        return cfg.base_lr * double(epoch) / double(w);
    if (cfg.epochs <= w)
        return cfg.base_lr;
    const double t = double(epoch - w) / double(cfg.epochs - w);
    return cfg.base_lr * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::string training_log_csv(const std::vector<EpochLog>& log)
{
    std::string out = "epoch,loss,lr,reject_rate\n";
    char line[128];
    for (const auto& e : log) {
        std::snprintf(line, sizeof line, "%d,%.9g,%.9g,%.6g\n", e.epoch, e.loss, e.lr, e.reject_rate);
        out += line;
    }
    return out;
}

double infonce_step(const EncoderState& s, std::span<const Image> v1, std::span<const Image> v2, double tau,
                    EncoderState& grad, EncoderState* running)
{
    const ForwardCache c1 = forward(s, v1, Pass::train);
    const ForwardCache c2 = forward(s, v2, Pass::train);
    if (running) {
        update_running_stats(*running, c1, 0.05);
        update_running_stats(*running, c2, 0.05);
    }
    const LossGrad lg = info_nce(c1.u, c2.u, tau);
    backward(s, c1, normalize_rows_backward(c1.u, c1.norms, lg.grad1), grad);
    backward(s, c2, normalize_rows_backward(c2.u, c2.norms, lg.grad2), grad);
    return lg.loss;
}

ByolStep byol_step(const EncoderState& online, const EncoderState& target, std::span<const Image> v1,
                   std::span<const Image> v2, EncoderState* running)
{
    if (!online.has_predictor())
        throw ConfigError("BYOL needs a predictor head (predictor_hidden > 0)");
    if (!(online.cfg == target.cfg))
        throw ConfigError("online and target encoders differ in shape");
    const ForwardCache o1 = forward(online, v1, Pass::train);
    const ForwardCache o2 = forward(online, v2, Pass::train);
    const ForwardCache t1 = forward(target, v1, Pass::train);
    const ForwardCache t2 = forward(target, v2, Pass::train);
    if (running) {
        update_running_stats(*running, o1, 0.05);
        update_running_stats(*running, o2, 0.05);
    }
    PredictorCache pc1, pc2;
    const Matrix p1 = predictor_forward(online, o1.z, pc1);
    const Matrix p2 = predictor_forward(online, o2.z, pc2);
    const LossGrad lg = byol_loss(p1, p2, t1.z, t2.z);

    ByolStep out;
    out.loss = lg.loss;
    out.grad_online = zeros_like(online);
    out.grad_target = zeros_like(target);
    backward(online, o1, predictor_backward(online, pc1, lg.grad1, out.grad_online), out.grad_online);
    backward(online, o2, predictor_backward(online, pc2, lg.grad2, out.grad_online), out.grad_online);
    return out;
}

void sgd_step(EncoderState& params, const EncoderState& grad, EncoderState& velocity, double lr, double momentum,
              double weight_decay)
{
    auto p = params.params();
    auto g = grad.params();
    auto v = velocity.params();
    for (std::size_t i = 0; i < p.size(); ++i) {
        *v[i].second = momentum * *v[i].second + *g[i].second + weight_decay * *p[i].second;
        *p[i].second -= lr * *v[i].second;
    }
}

void ema_update(EncoderState& target, const EncoderState& online, double m)
{
    auto t = target.params();
    auto o = online.params();
    for (std::size_t i = 0; i < t.size(); ++i)
        *t[i].second = m * *t[i].second + (1.0 - m) * *o[i].second;
}

namespace {

void shuffle(std::vector<std::size_t>& v, CounterRng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.uniform_int(0, std::int64_t(i) - 1));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace

TrainResult pretrain(const TrainConfig& cfg, const EncoderConfig& enc, std::span<const Sample> data,
                     const PairRecipe& recipe, int workers, const EpochCallback& on_epoch)
{
    cfg.validate();
    recipe.spec.validate();
    recipe.focus.validate();
    if (data.empty())
        throw ValidationError("empty training set");
    if (cfg.loss == LossKind::byol && enc.predictor_hidden <= 0)
        throw ConfigError("BYOL needs a predictor head (predictor_hidden > 0)");

    TrainResult out;
    out.online = init_encoder(enc, cfg.seed);
    out.target = out.online;
    EncoderState velocity = zeros_like(out.online);

    std::vector<std::size_t> order(data.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = i;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const std::uint64_t epoch_key = derive_key(cfg.seed, std::uint64_t(epoch));
        CounterRng shuffle_rng(derive_key(epoch_key, 0x5eed));
        shuffle(order, shuffle_rng);

        std::vector<std::optional<ViewPair>> pairs(data.size());
        parallel_for(order.size(), workers, [&](std::size_t i) {
            const Sample& s = data[i];
            try {
                pairs[i] = generate_pair(s.image, s.map, recipe.mode, recipe.spec, recipe.focus,
                                         pair_key(epoch_key, s.id, 0));
            } catch (const RejectionFailure&) {
                pairs[i].reset();
            }
        });

        std::size_t failed = 0;
        double attempts = 0.0;
        for (const auto& p : pairs) {
            if (p)
                attempts += p->attempts;
            else
                ++failed;
        }
        EpochLog log;
        log.epoch = epoch;
        log.lr = lr_at(cfg, epoch);
        log.reject_rate = double(failed) / double(pairs.size());
        log.attempts_mean = failed < pairs.size() ? attempts / double(pairs.size() - failed) : 0.0;
        if (log.reject_rate > cfg.max_reject_rate) {
            char msg[256];
            std::snprintf(msg, sizeof msg,
                          "epoch %d: %.1f%% of pairs failed the saliency gates (limit %.1f%%); "
                          "check that the saliency maps match the images and the focus thresholds",
                          epoch, 100.0 * log.reject_rate, 100.0 * cfg.max_reject_rate);
            throw TrainingAborted(msg);
        }

        double loss_sum = 0.0;
        int batches = 0;
        for (std::size_t start = 0; start < order.size(); start += std::size_t(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + std::size_t(cfg.batch_size));
            std::vector<Image> v1, v2;
            for (std::size_t k = start; k < end; ++k) {
                if (const auto& p = pairs[order[k]]) {
                    v1.push_back(p->v1);
                    v2.push_back(p->v2);
                }
            }
            if (v1.size() < 2)
                continue;
            double loss = 0.0;
            if (cfg.loss == LossKind::infonce) {
                EncoderState grad = zeros_like(out.online);
                EncoderState stats = out.online;
                loss = infonce_step(out.online, v1, v2, cfg.temperature, grad, &stats);
                out.online.bn_mean = stats.bn_mean;
                out.online.bn_var = stats.bn_var;
                sgd_step(out.online, grad, velocity, log.lr, cfg.momentum, cfg.weight_decay);
            } else {
                EncoderState stats = out.online;
                const ByolStep step = byol_step(out.online, out.target, v1, v2, &stats);
                out.online.bn_mean = stats.bn_mean;
                out.online.bn_var = stats.bn_var;
                loss = step.loss;
                sgd_step(out.online, step.grad_online, velocity, log.lr, cfg.momentum, cfg.weight_decay);
                ema_update(out.target, out.online, cfg.ema_momentum);
            }
            if (!std::isfinite(loss) || !out.online.all_finite())
                throw TrainingAborted("epoch " + std::to_string(epoch) + ": loss diverged");
            loss_sum += loss;
            ++batches;
        }
        log.loss = batches > 0 ? loss_sum / batches : 0.0;
        out.log.push_back(log);
        if (on_epoch)
            on_epoch(log);
    }
    return out;
}

// --- checkpoints -------------------------------------------------------------------

namespace {

constexpr std::uint32_t checkpoint_version = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader
{
  public:
    explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

    std::uint32_t u32()
    {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i)
            v |= std::uint32_t(b_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::string str(std::size_t n)
    {
        need(n);
        std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == b_.size(); }

  private:
    void need(std::size_t n) const
    {
        if (b_.size() - pos_ < n)
            throw ValidationError("checkpoint truncated");
    }
    const std::vector<std::uint8_t>& b_;
    std::size_t pos_ = 0;
};

nlohmann::json encoder_json(const EncoderConfig& c)
{
    return {{"input_px", c.input_px},       {"conv1_channels", c.conv1_channels},
            {"conv2_channels", c.conv2_channels}, {"embed_dim", c.embed_dim},
            {"predictor_hidden", c.predictor_hidden}, {"relu", c.relu},
            {"center_input", c.center_input}, {"batch_norm", c.batch_norm}};
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const EncoderState& s)
{
    std::vector<std::uint8_t> out = {'F', 'C', 'C', 'K'};
    put_u32(out, checkpoint_version);
    const std::string cfg = nlohmann::json{{"encoder", encoder_json(s.cfg)}}.dump();
    put_u32(out, static_cast<std::uint32_t>(cfg.size()));
    out.insert(out.end(), cfg.begin(), cfg.end());
    auto params = s.params();
    for (const auto& b : s.buffers())
        params.push_back(b);
    put_u32(out, static_cast<std::uint32_t>(params.size()));
    for (const auto& [name, m] : params) {
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        put_u32(out, static_cast<std::uint32_t>(m->rows()));
        put_u32(out, static_cast<std::uint32_t>(m->cols()));
        for (Index r = 0; r < m->rows(); ++r)
            for (Index c = 0; c < m->cols(); ++c)
                put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>((*m)(r, c))));
    }
    return out;
}

EncoderState decode_checkpoint(const std::vector<std::uint8_t>& bytes)
{
    Reader in(bytes);
    if (in.str(4) != "FCCK")
        throw ValidationError("not a checkpoint (bad magic)");
    if (const auto v = in.u32(); v != checkpoint_version)
        throw ValidationError("unsupported checkpoint version " + std::to_string(v));
    const auto doc = nlohmann::json::parse(in.str(in.u32()));
    const auto& e = doc.at("encoder");
    EncoderConfig cfg;
    cfg.input_px = e.at("input_px");
    cfg.conv1_channels = e.at("conv1_channels");
    cfg.conv2_channels = e.at("conv2_channels");
    cfg.embed_dim = e.at("embed_dim");
    cfg.predictor_hidden = e.at("predictor_hidden");
    cfg.relu = e.at("relu");
    cfg.center_input = e.at("center_input");
    cfg.batch_norm = e.at("batch_norm");
    EncoderState s = init_encoder(cfg, 0);
    auto params = s.params();
    for (const auto& b : s.buffers())
        params.push_back(b);
    const std::uint32_t count = in.u32();
    if (count != params.size())
        throw ValidationError("checkpoint tensor count does not match its config");
    for (auto& [name, m] : params) {
        const std::string got = in.str(in.u32());
        if (got != name)
            throw ValidationError("checkpoint tensor '" + got + "' where '" + name + "' was expected");
        const std::uint32_t rows = in.u32();
        const std::uint32_t cols = in.u32();
        if (rows != m->rows() || cols != m->cols())
            throw ValidationError("checkpoint tensor '" + name + "' has the wrong shape");
        for (Index r = 0; r < m->rows(); ++r)
            for (Index c = 0; c < m->cols(); ++c)
                (*m)(r, c) = std::bit_cast<float>(in.u32());
    }
    if (!in.done())
        throw ValidationError("trailing bytes after checkpoint");
    return s;
}

void save_checkpoint(const std::filesystem::path& path, const EncoderState& s)
{
    write_bytes(path, encode_checkpoint(s));
}

EncoderState load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_bytes(path)); }

// --- linear probe ----------------------------------------------------------------------

ProbeResult probe_features(const Matrix& train_x, std::span<const int> train_y, const Matrix& test_x,
                           std::span<const int> test_y, int n_classes, const ProbeConfig& cfg)
{
    const Index n = train_x.rows();
    const Index f = train_x.cols();
    if (n == 0 || Index(train_y.size()) != n || Index(test_y.size()) != test_x.rows() || test_x.cols() != f)
        throw ValidationError("probe inputs have inconsistent shapes");
    for (int y : train_y)
        if (y < 0 || y >= n_classes)
            throw ValidationError("label out of range");

    // Standardize with training statistics; constant columns stay at zero.
    const Eigen::RowVectorXd mean = train_x.colwise().mean();
    Eigen::RowVectorXd sd = ((train_x.rowwise() - mean).array().square().colwise().mean()).sqrt();
    for (Index j = 0; j < f; ++j)
        sd(j) = sd(j) > 1e-12 ? sd(j) : 1.0;
    auto design = [&](const Matrix& x) {
        Matrix d(x.rows(), f + 1);
        d.leftCols(f) = (x.rowwise() - mean).array().rowwise() / sd.array();
        d.col(f).setOnes();
        return d;
    };
    const Matrix xtr = design(train_x);
    const Matrix xte = design(test_x);

    Matrix y = Matrix::Zero(n, n_classes);
    for (Index i = 0; i < n; ++i)
        y(i, train_y[std::size_t(i)]) = 1.0;

    // Step 1/L with L bounding the Hessian of the mean cross-entropy.
    const Matrix gram = xtr.transpose() * xtr / double(n);
    Vector v = Vector::Ones(f + 1);
    double lambda = 0.0;
    for (int it = 0; it < 100; ++it) {
        const Vector w = gram * v;
        lambda = w.norm();
        if (lambda <= 0.0)
            break;
        v = w / lambda;
    }
    const double step = 1.0 / (0.5 * lambda + cfg.l2 + 1e-12);

    Matrix w = Matrix::Zero(f + 1, n_classes);
    for (int it = 0; it < cfg.iterations; ++it) {
        Matrix logits = xtr * w;
        for (Index i = 0; i < n; ++i) {
            auto row = logits.row(i).array();
            row = (row - row.maxCoeff()).exp();
            row /= row.sum();
        }
        Matrix g = xtr.transpose() * (logits - y) / double(n);
        g.topRows(f) += cfg.l2 * w.topRows(f);
        w -= step * g;
    }

    ProbeResult r;
    r.n_train = std::size_t(n);
    r.n_test = test_y.size();
    r.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
    if (test_y.empty())
        return r;
    const Matrix scores = xte * w;
    double correct = 0.0, abs_err = 0.0;
    for (Index i = 0; i < scores.rows(); ++i) {
        Index pred = 0;
        scores.row(i).maxCoeff(&pred);
        const int truth = test_y[std::size_t(i)];
        if (truth < 0 || truth >= n_classes)
            throw ValidationError("label out of range");
        r.confusion(truth, pred) += 1;
        correct += (pred == truth);
        abs_err += std::abs(double(pred) - double(truth));
    }
    r.accuracy = correct / double(test_y.size());
    r.mae = abs_err / double(test_y.size());
    return r;
}

std::vector<std::size_t> stratified_subsample(std::span<const int> labels, int n_classes, double fraction,
                                              std::uint64_t seed)
{
    if (!(fraction > 0.0 && fraction <= 1.0))
        throw ValidationError("label_fraction must lie in (0, 1]");
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(n_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes)
            throw ValidationError("label out of range");
        by_class[std::size_t(labels[i])].push_back(i);
    }
    std::vector<std::size_t> out;
    for (int c = 0; c < n_classes; ++c) {
        auto& members = by_class[std::size_t(c)];
        const auto take = static_cast<std::size_t>(std::llround(fraction * double(members.size())));
        if (take == 0)
            throw ValidationError("class " + std::to_string(c) + " is absent from the "
                                  + std::to_string(fraction) + " label subsample");
        CounterRng rng(derive_key(seed, std::uint64_t(c)));
        shuffle(members, rng);
        out.insert(out.end(), members.begin(), members.begin() + std::ptrdiff_t(take));
    }
    std::sort(out.begin(), out.end());
    return out;
}

ProbeResult linear_probe(const EncoderState& s, std::span<const Sample> train, std::span<const Sample> test,
                         int n_classes, double label_fraction, std::uint64_t seed, const ProbeConfig& cfg)
{
    std::vector<int> all_labels;
    for (const auto& x : train)
        all_labels.push_back(x.label);
    const auto pick = stratified_subsample(all_labels, n_classes, label_fraction, seed);

    std::vector<Image> tr_img, te_img;
    std::vector<int> tr_y, te_y;
    for (std::size_t i : pick) {
        tr_img.push_back(train[i].image);
        tr_y.push_back(train[i].label);
    }
    for (const auto& x : test) {
        te_img.push_back(x.image);
        te_y.push_back(x.label);
    }
    const Matrix tr_x = backbone_features(s, tr_img);
    const Matrix te_x = te_img.empty() ? Matrix(0, s.cfg.conv2_channels) : backbone_features(s, te_img);
    return probe_features(tr_x, tr_y, te_x, te_y, n_classes, cfg);
}

// --- gradient check ------------------------------------------------------------------------

GradCheckReport grad_check(const EncoderState& s, CheckLoss kind, std::span<const Image> v1,
                           std::span<const Image> v2, double tolerance, double tau, double h)
{
    if (s.parameter_count() >= 10000)
        throw ValidationError("gradient check needs fewer than 1e4 parameters");
    const EncoderState target = s;

    auto evaluate = [&](const EncoderState& st, EncoderState* grad) -> double {
        switch (kind) {
        case CheckLoss::squared: {
            const ForwardCache c = forward(st, v1, Pass::train);
            Matrix g;
            const double loss = squared_loss(c.z, g);
            if (grad)
                backward(st, c, g, *grad);
            return loss;
        }
        case CheckLoss::infonce: {
            EncoderState scratch = zeros_like(st);
            return infonce_step(st, v1, v2, tau, grad ? *grad : scratch);
        }
        case CheckLoss::byol: {
            ByolStep step = byol_step(st, target, v1, v2);
            if (grad)
                *grad = step.grad_online;
            return step.loss;
        }
        }
        return 0.0;
    };

    GradCheckReport report;
    EncoderState analytic = zeros_like(s);
    evaluate(s, &analytic);
    if (kind == CheckLoss::byol) {
        const ByolStep step = byol_step(s, target, v1, v2);
        for (const auto& [name, m] : step.grad_target.params())
            report.target_grad_max = std::max(report.target_grad_max, m->cwiseAbs().maxCoeff());
    }

    double gmax = 0.0;
    for (const auto& [name, m] : analytic.params())
        gmax = std::max(gmax, m->cwiseAbs().maxCoeff());
    const double floor = std::max(1e-3 * gmax, 1e-12);

    // Sign pattern of every ReLU input the loss passes through. A perturbation that flips
    // one of them straddles a kink, where central differences say nothing about the gradient.
    auto pattern = [&](const EncoderState& st) {
        std::vector<bool> bits;
        if (!st.cfg.relu && !st.has_predictor())
            return bits;
        auto add = [&](const auto& m) {
            for (Index i = 0; i < m.size(); ++i)
                bits.push_back(m.data()[i] > 0.0);
        };
        for (std::span<const Image> v : {v1, v2}) {
            if (kind == CheckLoss::squared && v.data() == v2.data())
                break;
            const ForwardCache c = forward(st, v, Pass::train);
            if (st.cfg.relu) {
                add(c.a1);
                add(c.a2);
            }
            if (kind == CheckLoss::byol) {
                PredictorCache pc;
                predictor_forward(st, c.z, pc);
                add(pc.hidden_pre);
            }
        }
        return bits;
    };
    const std::vector<bool> base_pattern = pattern(s);

    EncoderState probe = s;
    auto p = probe.params();
    auto a = analytic.params();
    for (std::size_t t = 0; t < p.size(); ++t) {
        Matrix& m = *p[t].second;
        for (Index i = 0; i < m.size(); ++i) {
            const double orig = m.data()[i];
            m.data()[i] = orig + h;
            const double up = evaluate(probe, nullptr);
            const bool kink_up = pattern(probe) != base_pattern;
            m.data()[i] = orig - h;
            const double down = evaluate(probe, nullptr);
            const bool kink_down = pattern(probe) != base_pattern;
            m.data()[i] = orig;
            if (kink_up || kink_down) {
                ++report.n_kinked;
                continue;
            }
            const double numeric = (up - down) / (2.0 * h);
            const double exact = a[t].second->data()[i];
            const double err = std::abs(exact - numeric);
            report.max_abs_error = std::max(report.max_abs_error, err);
            report.max_rel_error =
                std::max(report.max_rel_error, err / std::max({std::abs(exact), std::abs(numeric), floor}));
            ++report.n_params;
        }
    }
    report.passed = report.max_rel_error < tolerance && report.target_grad_max == 0.0;
    return report;
}

}  // namespace fc
