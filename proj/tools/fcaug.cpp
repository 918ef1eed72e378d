// fcaug: gaze maps, saliency, gated view pairs, synthetic data, pre-training, probing, sweeps.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fcaug/config.hpp"
#include "fcaug/dataset.hpp"
#include "fcaug/error.hpp"
#include "fcaug/io.hpp"
#include "fcaug/parallel.hpp"

namespace fs = std::filesystem;
using namespace fc;

namespace {

/// Bad command line, bad config or missing input: exit status 2.
struct UsageError : Error
{
    using Error::Error;
};

struct Common
{
    std::string config;
    std::optional<std::uint64_t> seed;
    int workers = 1;
};

void add_common(CLI::App* cmd, Common& c)
{
    cmd->add_option("--config", c.config, "JSON run configuration");
    cmd->add_option("--seed", c.seed, "root seed (overrides FC_SEED and the config)");
    cmd->add_option("--workers", c.workers, "worker threads")->check(CLI::PositiveNumber);
}

RunConfig load_config(const Common& c)
{
    RunConfig cfg;
    if (!c.config.empty()) {
        if (!fs::exists(c.config))
            throw UsageError("config file not found: " + c.config);
        cfg = load_run_config(c.config);
    }
    return cfg;
}

std::uint64_t resolve_seed(const Common& c, const RunConfig& cfg)
{
    if (c.seed)
        return *c.seed;
    if (const char* env = std::getenv("FC_SEED")) {
        try {
            return std::stoull(env);
        } catch (const std::exception&) {
            throw UsageError(std::string("FC_SEED is not an unsigned integer: ") + env);
        }
    }
    return cfg.seed.value_or(0);
}

void require_path(const fs::path& p, const std::string& what)
{
    if (p.empty())
        throw UsageError(what + " is required");
    if (!fs::exists(p))
        throw UsageError(what + " not found: " + p.string());
}

/// A gaze_file source without a root reads paths.saliency. Datasets otherwise use
/// their own maps/ directory; single images fall back to spectral residual.
SaliencySource resolve_source(const RunConfig& cfg, bool for_dataset)
{
    SaliencySource source = cfg.saliency;
    if (source.kind == SaliencyKind::gaze_file && source.root.empty()) {
        source.root = cfg.paths.saliency;
        if (source.root.empty() && !for_dataset)
            source.kind = SaliencyKind::spectral_residual;
    }
    return source;
}

std::string format_pair_name(int i, const char* suffix)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "pair_%03d%s", i, suffix);
    return buf;
}

// --- gaze2map -------------------------------------------------------------------

struct GazeArgs
{
    Common common;
    std::string log;
    int size = 0;
    int width = 0;
    int height = 0;
    int kernel_size = 0;
    std::string out;
};

int cmd_gaze2map(const GazeArgs& a)
{
    RunConfig cfg = load_config(a.common);
    require_path(a.log, "gaze log");
    if (a.out.empty())
        throw UsageError("--out is required");
    const int w = a.width > 0 ? a.width : a.size;
    const int h = a.height > 0 ? a.height : a.size;
    if (w <= 0 || h <= 0)
        throw UsageError("--size (or --width and --height) is required");
    KernelSpec kernel = cfg.kernel;
    if (a.kernel_size > 0)
        kernel = KernelSpec::with_size(a.kernel_size);
    kernel.validate();

    const auto logs = parse_gaze_logs(read_text(a.log));
    std::vector<SaliencyMap> maps(logs.size());
    parallel_for(logs.size(), a.common.workers,
                 [&](std::size_t i) { maps[i] = render_gaze_map(filter_gaze(logs[i]), w, h, kernel); });
    for (std::size_t i = 0; i < logs.size(); ++i)
        write_smap(fs::path(a.out) / (logs[i].image_id + ".smap"), maps[i]);
    std::cout << "processed " << logs.size() << " gaze sessions\n";
    return 0;
}

// --- saliency --------------------------------------------------------------------

struct SaliencyArgs
{
    Common common;
    std::string input;
    std::string kind;
    std::string out;
};

int cmd_saliency(const SaliencyArgs& a)
{
    RunConfig cfg = load_config(a.common);
    require_path(a.input, "input");
    if (a.out.empty())
        throw UsageError("--out is required");
    SaliencySource source = resolve_source(cfg, false);
    if (!a.kind.empty())
        source.kind = parse_saliency_kind(a.kind);
    const SaliencyProvider provider(source);

    std::vector<fs::path> inputs;
    if (fs::is_directory(a.input)) {
        for (const auto& e : fs::directory_iterator(a.input))
            if (e.path().extension() == ".pgm")
                inputs.push_back(e.path());
        std::sort(inputs.begin(), inputs.end());
    } else {
        inputs.push_back(a.input);
    }
    std::vector<SaliencyMap> maps(inputs.size());
    parallel_for(inputs.size(), a.common.workers, [&](std::size_t i) {
        maps[i] = provider.saliency_for(inputs[i].stem().string(), read_pgm(inputs[i]));
    });
    for (std::size_t i = 0; i < inputs.size(); ++i)
        write_smap(fs::path(a.out) / (inputs[i].stem().string() + ".smap"), maps[i]);
    std::cout << "wrote " << inputs.size() << " saliency maps (" << to_string(source.kind) << ")\n";
    return 0;
}

// --- augment -----------------------------------------------------------------------

struct AugmentArgs
{
    Common common;
    std::string image;
    std::string map;
    std::string image_id;
    std::string mode;
    int pairs = 1;
    std::string out;
};

int cmd_augment(const AugmentArgs& a)
{
    RunConfig cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    require_path(a.image, "image");
    if (a.out.empty())
        throw UsageError("--out is required");
    if (a.pairs < 1)
        throw UsageError("--pairs must be >= 1");
    const PairMode mode = a.mode.empty() ? cfg.mode : parse_pair_mode(a.mode);
    cfg.augment.validate();
    cfg.focus.validate();

    const fs::path image_path(a.image);
    const std::string id = a.image_id.empty() ? image_path.stem().string() : a.image_id;
    const Image image = read_pgm(image_path);
    SaliencyMap map;
    if (!a.map.empty()) {
        require_path(a.map, "saliency map");
        map = read_smap(a.map);
    } else {
        map = saliency_for(resolve_source(cfg, false), id, image);
    }
    if (map.rows() != image.rows() || map.cols() != image.cols())
        throw ValidationError("saliency map is " + std::to_string(map.cols()) + "x" + std::to_string(map.rows())
                              + " but the image is " + std::to_string(image.cols()) + "x"
                              + std::to_string(image.rows()));

    std::vector<std::optional<ViewPair>> pairs(std::size_t(a.pairs));
    std::vector<std::string> failures(std::size_t(a.pairs));
    parallel_for(pairs.size(), a.common.workers, [&](std::size_t i) {
        try {
            pairs[i] = generate_pair(image, map, mode, cfg.augment, cfg.focus, pair_key(seed, id, i));
        } catch (const RejectionFailure& e) {
            failures[i] = "pair " + std::to_string(i) + ": " + e.what();
        }
    });
    int failed = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (!pairs[i]) {
            std::cerr << "fcaug augment: " << failures[i] << "\n";
            ++failed;
            continue;
        }
        const fs::path dir(a.out);
        write_pgm(dir / format_pair_name(int(i), "_v1.pgm"), pairs[i]->v1);
        write_pgm(dir / format_pair_name(int(i), "_v2.pgm"), pairs[i]->v2);
        write_text(dir / format_pair_name(int(i), ".json"), pair_sidecar(*pairs[i]));
    }
    std::cout << "wrote " << (a.pairs - failed) << " of " << a.pairs << " pairs (" << to_string(mode) << ")\n";
    return failed ? 1 : 0;
}

// --- synth ---------------------------------------------------------------------------

struct SynthArgs
{
    Common common;
    int per_class = 20;
    int size = 0;
    std::string out;
};

int cmd_synth(const SynthArgs& a)
{
    RunConfig cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    if (a.out.empty())
        throw UsageError("--out is required");
    if (a.size > 0)
        cfg.synth.image_px = a.size;
    if (a.per_class < 1)
        throw UsageError("--per-class must be >= 1");
    cfg.synth.validate();
    const auto samples = gen_dataset(cfg.synth, a.per_class, seed);
    write_dataset(a.out, samples);
    std::cout << "wrote " << samples.size() << " images to " << a.out << "\n";
    return 0;
}

// --- pretrain -------------------------------------------------------------------------

struct TrainArgs
{
    Common common;
    std::string data;
    std::string out;
    std::string mode;
    std::string loss;
    int epochs = -1;
    int batch_size = 0;
    double lr = 0.0;
    int cutout_px = -1;
    double crop_zoom = 0.0;
};

void apply_train_overrides(const TrainArgs& a, RunConfig& cfg)
{
    if (!a.mode.empty())
        cfg.mode = parse_pair_mode(a.mode);
    if (!a.loss.empty())
        cfg.train.loss = parse_loss_kind(a.loss);
    if (a.epochs >= 0)
        cfg.train.epochs = a.epochs;
    if (a.batch_size > 0)
        cfg.train.batch_size = a.batch_size;
    if (a.lr > 0.0)
        cfg.train.base_lr = a.lr;
    if (a.cutout_px >= 0)
        cfg.augment.cutout_px = a.cutout_px;
    if (a.crop_zoom > 0.0)
        cfg.augment.crop_zoom = a.crop_zoom;
    if (cfg.train.loss == LossKind::byol && cfg.encoder.predictor_hidden == 0)
        cfg.encoder.predictor_hidden = 64;
}

int cmd_pretrain(const TrainArgs& a)
{
    RunConfig cfg = load_config(a.common);
    cfg.train.seed = resolve_seed(a.common, cfg);
    apply_train_overrides(a, cfg);
    const fs::path data = a.data.empty() ? cfg.paths.data : fs::path(a.data);
    const fs::path out = a.out.empty() ? cfg.paths.out : fs::path(a.out);
    require_path(data, "dataset");
    if (out.empty())
        throw UsageError("--out is required");
    cfg.train.validate();
    cfg.encoder.validate();

    const auto samples = load_dataset(data, resolve_source(cfg, true), cfg.encoder.input_px);
    const PairRecipe recipe{cfg.mode, cfg.augment, cfg.focus};
    const TrainResult r = pretrain(cfg.train, cfg.encoder, samples, recipe, a.common.workers,
                                   [](const EpochLog& e) {
                                       std::printf("epoch %d loss %.6f lr %.6g reject %.4f\n", e.epoch, e.loss,
                                                   e.lr, e.reject_rate);
                                       std::fflush(stdout);
                                   });
    save_checkpoint(out / "encoder.fcck", r.online);
    write_text(out / "train_log.csv", training_log_csv(r.log));
    std::cout << "wrote " << (out / "encoder.fcck").string() << "\n";
    return 0;
}

// --- probe --------------------------------------------------------------------------------

struct ProbeArgs
{
    Common common;
    std::string checkpoint;
    std::string data;
    std::string test;
    double label_fraction = 0.0;
    std::string out;
};

int cmd_probe(const ProbeArgs& a)
{
    RunConfig cfg = load_config(a.common);
    const std::uint64_t seed = resolve_seed(a.common, cfg);
    require_path(a.checkpoint, "checkpoint");
    const fs::path data = a.data.empty() ? cfg.paths.data : fs::path(a.data);
    const fs::path test = a.test.empty() ? cfg.paths.test : fs::path(a.test);
    require_path(data, "training set");
    require_path(test, "test set");
    const double fraction = a.label_fraction > 0.0 ? a.label_fraction : cfg.label_fraction;

    const EncoderState state = load_checkpoint(a.checkpoint);
    const auto source = resolve_source(cfg, true);
    const auto train = load_dataset(data, source, state.cfg.input_px);
    const auto held_out = load_dataset(test, source, state.cfg.input_px);
    const ProbeResult r = linear_probe(state, train, held_out, cfg.n_classes, fraction, seed, cfg.probe);

    std::printf("ACC=%.6f,MAE=%.6f\n", r.accuracy, r.mae);
    nlohmann::json doc = {{"accuracy", r.accuracy}, {"mae", r.mae},          {"label_fraction", fraction},
                          {"n_train", r.n_train},   {"n_test", r.n_test},     {"seed", seed}};
    nlohmann::json confusion = nlohmann::json::array();
    for (Index i = 0; i < r.confusion.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (Index j = 0; j < r.confusion.cols(); ++j)
            row.push_back(r.confusion(i, j));
        confusion.push_back(row);
    }
    doc["confusion"] = confusion;
    const fs::path out = a.out.empty() ? fs::path(a.checkpoint).parent_path() / "probe.json" : fs::path(a.out);
    write_text(out, doc.dump(2) + "\n");
    return 0;
}

// --- sweep ------------------------------------------------------------------------------------

struct SweepArgs
{
    TrainArgs train;
    std::string test;
    std::string axis;
    std::vector<double> values;
    std::vector<double> fractions;
    std::size_t overlap_pairs = 0;
};

int cmd_sweep(const SweepArgs& a)
{
    RunConfig cfg = load_config(a.train.common);
    cfg.train.seed = resolve_seed(a.train.common, cfg);
    apply_train_overrides(a.train, cfg);
    const fs::path data = a.train.data.empty() ? cfg.paths.data : fs::path(a.train.data);
    const fs::path test = a.test.empty() ? cfg.paths.test : fs::path(a.test);
    const fs::path out = a.train.out.empty() ? cfg.paths.out : fs::path(a.train.out);
    require_path(data, "training set");
    require_path(test, "test set");
    if (out.empty())
        throw UsageError("--out is required");

    SweepGrid grid;
    grid.axis = a.axis.empty() ? cfg.sweep.axis : parse_sweep_axis(a.axis);
    grid.values = a.values.empty() ? cfg.sweep.values : a.values;
    grid.label_fractions = a.fractions.empty() ? cfg.sweep.label_fractions : a.fractions;
    grid.recipe = {cfg.mode, cfg.augment, cfg.focus};
    grid.validate();
    cfg.train.validate();

    const auto source = resolve_source(cfg, true);
    const auto train = load_dataset(data, source, cfg.encoder.input_px);
    const auto held_out = load_dataset(test, source, cfg.encoder.input_px);
    SweepOptions opt;
    opt.overlap_pairs = a.overlap_pairs > 0 ? a.overlap_pairs : cfg.sweep.overlap_pairs;
    opt.n_classes = cfg.n_classes;
    opt.probe = cfg.probe;
    opt.workers = a.train.common.workers;
    const auto rows = run_sweep(grid, cfg.train, cfg.encoder, train, held_out, opt);
    const std::string csv = sweep_csv(rows);
    write_text(out / "sweep.csv", csv);
    std::cout << csv;
    return 0;
}

void add_train_options(CLI::App* cmd, TrainArgs& t)
{
    add_common(cmd, t.common);
    cmd->add_option("--data", t.data, "dataset directory");
    cmd->add_option("--out", t.out, "output directory");
    cmd->add_option("--mode", t.mode, "pair mode: default, searched, focus, focus_cutout, focus_crop");
    cmd->add_option("--loss", t.loss, "infonce or byol");
    cmd->add_option("--epochs", t.epochs, "training epochs");
    cmd->add_option("--batch-size", t.batch_size, "batch size");
    cmd->add_option("--lr", t.lr, "peak learning rate");
    cmd->add_option("--cutout-px", t.cutout_px, "cutout side");
    cmd->add_option("--crop-zoom", t.crop_zoom, "resized-crop zoom");
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Saliency-gated view-pair generation and desk-scale contrastive pre-training"};
    app.require_subcommand(1);

    GazeArgs gaze;
    auto* g = app.add_subcommand("gaze2map", "render gaze logs into .smap saliency maps");
    add_common(g, gaze.common);
    g->add_option("--log", gaze.log, "gaze log CSV (image_id,x,y,t_ms)");
    g->add_option("--size", gaze.size, "square map side in pixels");
    g->add_option("--width", gaze.width, "map width");
    g->add_option("--height", gaze.height, "map height");
    g->add_option("--kernel-size", gaze.kernel_size, "Gaussian kernel size (odd)");
    g->add_option("--out", gaze.out, "output directory");

    SaliencyArgs sal;
    auto* s = app.add_subcommand("saliency", "compute saliency maps for PGM images");
    add_common(s, sal.common);
    s->add_option("--input", sal.input, "PGM file or directory of PGM files");
    s->add_option("--kind", sal.kind, "spectral_residual, uniform or gaze_file");
    s->add_option("--out", sal.out, "output directory");

    AugmentArgs aug;
    auto* au = app.add_subcommand("augment", "generate view pairs with JSON sidecars");
    add_common(au, aug.common);
    au->add_option("--image", aug.image, "source PGM image");
    au->add_option("--map", aug.map, "saliency .smap (default: configured provider)");
    au->add_option("--image-id", aug.image_id, "image id for seeding (default: file stem)");
    au->add_option("--mode", aug.mode, "default, searched, focus, focus_cutout or focus_crop");
    au->add_option("--pairs", aug.pairs, "number of pairs");
    au->add_option("--out", aug.out, "output directory");

    SynthArgs syn;
    auto* sy = app.add_subcommand("synth", "write a synthetic planted-lesion dataset");
    add_common(sy, syn.common);
    sy->add_option("--per-class", syn.per_class, "images per grade");
    sy->add_option("--size", syn.size, "image side in pixels");
    sy->add_option("--out", syn.out, "output directory");

    TrainArgs tr;
    auto* pt = app.add_subcommand("pretrain", "contrastive pre-training; writes encoder.fcck and train_log.csv");
    add_train_options(pt, tr);

    ProbeArgs pr;
    auto* pb = app.add_subcommand("probe", "linear probe on frozen features; prints ACC and MAE");
    add_common(pb, pr.common);
    pb->add_option("--checkpoint", pr.checkpoint, "encoder checkpoint");
    pb->add_option("--data", pr.data, "labeled training set");
    pb->add_option("--test", pr.test, "held-out test set");
    pb->add_option("--label-fraction", pr.label_fraction, "fraction of training labels used");
    pb->add_option("--out", pr.out, "result JSON (default: probe.json next to the checkpoint)");

    SweepArgs sw;
    auto* sp = app.add_subcommand("sweep", "augmentation-strength sweep; writes sweep.csv");
    add_train_options(sp, sw.train);
    sp->add_option("--test", sw.test, "held-out test set");
    sp->add_option("--axis", sw.axis, "crop_zoom or cutout_px");
    sp->add_option("--values", sw.values, "strength values")->delimiter(',');
    sp->add_option("--fractions", sw.fractions, "label fractions")->delimiter(',');
    sp->add_option("--overlap-pairs", sw.overlap_pairs, "Monte Carlo pairs per cell");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (g->parsed())
            return cmd_gaze2map(gaze);
        if (s->parsed())
            return cmd_saliency(sal);
        if (au->parsed())
            return cmd_augment(aug);
        if (sy->parsed())
            return cmd_synth(syn);
        if (pt->parsed())
            return cmd_pretrain(tr);
        if (pb->parsed())
            return cmd_probe(pr);
        if (sp->parsed())
            return cmd_sweep(sw);
    } catch (const UsageError& e) {
        std::cerr << "fcaug: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "fcaug: config error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "fcaug: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
