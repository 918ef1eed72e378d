#include "fcaug/config.hpp"

#include <initializer_list>
#include <variant>

#include "json.hpp"

#include "fcaug/error.hpp"
#include "fcaug/io.hpp"

namespace fc {

namespace {

using nlohmann::json;

/// Reads the keys of one JSON object, rejecting any key it was not told about.
class Section
{
  public:
    Section(const json& j, std::string where, std::initializer_list<const char*> keys) : j_(j), where_(std::move(where))
    {
        if (!j.is_object())
            throw ConfigError("'" + where_ + "' must be an object");
        for (const auto& [k, v] : j.items()) {
            bool known = false;
            for (const char* key : keys)
                known = known || k == key;
            if (!known)
                throw ConfigError("unknown key '" + k + "' in '" + where_ + "'");
        }
    }

    template <typename T>
    void get(const char* key, T& out) const
    {
        if (!j_.contains(key))
            return;
        try {
            out = j_.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError("bad value for '" + path(key) + "'");
        }
    }

    template <typename T, typename Parse>
    void get_enum(const char* key, T& out, Parse parse) const
    {
        std::string s;
        get(key, s);
        if (j_.contains(key))
            out = parse(s);
    }

    bool has(const char* key) const { return j_.contains(key); }
    const json& at(const char* key) const { return j_.at(key); }
    std::string path(const char* key) const { return where_.empty() ? key : where_ + "." + key; }

  private:
    const json& j_;
    std::string where_;
};

void read_augment(const Section& s, AugmentSpec& a)
{
    s.get("flip_prob", a.flip_prob);
    s.get("rotation_deg", a.rotation_deg);
    s.get("cutout_px", a.cutout_px);
    s.get("crop_zoom", a.crop_zoom);
    s.get("jitter", a.jitter);
    s.get("reference_px", a.reference_px);
    if (s.has("op_order")) {
        std::vector<std::string> names;
        s.get("op_order", names);
        a.op_order.clear();
        for (const auto& n : names)
            a.op_order.push_back(parse_op_kind(n));
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& text, RunConfig c)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    const Section root(doc, "",
                       {"seed", "paths", "mode", "augment", "focus", "saliency", "kernel", "synth", "encoder",
                        "train", "probe", "sweep"});
    if (root.has("seed")) {
        std::uint64_t seed = 0;
        root.get("seed", seed);
        c.seed = seed;
    }
    root.get_enum("mode", c.mode, parse_pair_mode);

    if (root.has("paths")) {
        const Section s(root.at("paths"), "paths", {"data", "test", "saliency", "out"});
        std::string v;
        if (s.has("data")) {
            s.get("data", v);
            c.paths.data = v;
        }
        if (s.has("test")) {
            s.get("test", v);
            c.paths.test = v;
        }
        if (s.has("saliency")) {
            s.get("saliency", v);
            c.paths.saliency = v;
        }
        if (s.has("out")) {
            s.get("out", v);
            c.paths.out = v;
        }
    }
    if (root.has("augment"))
        read_augment(Section(root.at("augment"), "augment",
                             {"flip_prob", "rotation_deg", "cutout_px", "crop_zoom", "jitter", "op_order",
                              "reference_px"}),
                     c.augment);
    if (root.has("focus")) {
        const Section s(root.at("focus"), "focus",
                        {"cutout_iou_min", "crop_iou_min", "mask_keep_fraction", "salient_eps", "max_retries",
                         "mask_both_views"});
        s.get("cutout_iou_min", c.focus.cutout_iou_min);
        s.get("crop_iou_min", c.focus.crop_iou_min);
        s.get("mask_keep_fraction", c.focus.mask_keep_fraction);
        s.get("salient_eps", c.focus.salient_eps);
        s.get("max_retries", c.focus.max_retries);
        s.get("mask_both_views", c.focus.mask_both_views);
    }
    if (root.has("saliency")) {
        const Section s(root.at("saliency"), "saliency", {"kind", "working_px", "smooth_sigma"});
        s.get_enum("kind", c.saliency.kind, parse_saliency_kind);
        s.get("working_px", c.saliency.sr.working_px);
        s.get("smooth_sigma", c.saliency.sr.smooth_sigma);
    }
    if (root.has("kernel")) {
        const Section s(root.at("kernel"), "kernel", {"size_px", "sigma_px"});
        s.get("size_px", c.kernel.size_px);
        if (s.has("size_px") && !s.has("sigma_px"))
            c.kernel.sigma_px = c.kernel.size_px / 6.0;
        s.get("sigma_px", c.kernel.sigma_px);
    }
    if (root.has("synth")) {
        const Section s(root.at("synth"), "synth",
                        {"image_px", "lesion_area_fraction", "n_classes", "texture_seed", "lesion_contrast",
                         "texture_wavelength_px", "texture_std", "saliency_margin"});
        s.get("image_px", c.synth.image_px);
        s.get("lesion_area_fraction", c.synth.lesion_area_fraction);
        s.get("n_classes", c.synth.n_classes);
        s.get("texture_seed", c.synth.texture_seed);
        s.get("lesion_contrast", c.synth.lesion_contrast);
        s.get("texture_wavelength_px", c.synth.texture_wavelength_px);
        s.get("texture_std", c.synth.texture_std);
        s.get("saliency_margin", c.synth.saliency_margin);
    }
    if (root.has("encoder")) {
        const Section s(root.at("encoder"), "encoder",
                        {"input_px", "conv1_channels", "conv2_channels", "embed_dim", "predictor_hidden", "relu",
                         "center_input", "batch_norm"});
        s.get("input_px", c.encoder.input_px);
        s.get("conv1_channels", c.encoder.conv1_channels);
        s.get("conv2_channels", c.encoder.conv2_channels);
        s.get("embed_dim", c.encoder.embed_dim);
        s.get("predictor_hidden", c.encoder.predictor_hidden);
        s.get("relu", c.encoder.relu);
        s.get("center_input", c.encoder.center_input);
        s.get("batch_norm", c.encoder.batch_norm);
    }
    if (root.has("train")) {
        const Section s(root.at("train"), "train",
                        {"loss", "batch_size", "epochs", "warmup_epochs", "temperature", "ema_momentum", "base_lr",
                         "momentum", "weight_decay", "max_reject_rate"});
        s.get_enum("loss", c.train.loss, parse_loss_kind);
        s.get("batch_size", c.train.batch_size);
        s.get("epochs", c.train.epochs);
        s.get("warmup_epochs", c.train.warmup_epochs);
        s.get("temperature", c.train.temperature);
        s.get("ema_momentum", c.train.ema_momentum);
        s.get("base_lr", c.train.base_lr);
        s.get("momentum", c.train.momentum);
        s.get("weight_decay", c.train.weight_decay);
        s.get("max_reject_rate", c.train.max_reject_rate);
    }
    if (root.has("probe")) {
        const Section s(root.at("probe"), "probe", {"iterations", "l2", "label_fraction", "n_classes"});
        s.get("iterations", c.probe.iterations);
        s.get("l2", c.probe.l2);
        s.get("label_fraction", c.label_fraction);
        s.get("n_classes", c.n_classes);
    }
    if (root.has("sweep")) {
        const Section s(root.at("sweep"), "sweep", {"axis", "values", "label_fractions", "overlap_pairs"});
        s.get_enum("axis", c.sweep.axis, parse_sweep_axis);
        s.get("values", c.sweep.values);
        s.get("label_fractions", c.sweep.label_fractions);
        s.get("overlap_pairs", c.sweep.overlap_pairs);
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig base)
{
    return parse_run_config(read_text(path), std::move(base));
}

namespace {

json step_json(const Step& step)
{
    return std::visit(
        [](const auto& s) -> json {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, FlipStep>)
                return {{"op", "flip"}};
            else if constexpr (std::is_same_v<T, ColorStep>)
                return {{"op", "color"}, {"gain", s.gain}, {"bias", s.bias}};
            else if constexpr (std::is_same_v<T, RotateStep>)
                return {{"op", "rotate"}, {"angle_deg", s.angle_deg}};
            else if constexpr (std::is_same_v<T, CutoutStep>)
                return {{"op", "cutout"}, {"x", s.x}, {"y", s.y}, {"size", s.size}};
            else if constexpr (std::is_same_v<T, CropStep>)
                return {{"op", "crop"}, {"zoom", s.zoom}, {"off_x", s.off_x}, {"off_y", s.off_y}};
            else
                return {{"op", "mask"}, {"keep_fraction", s.keep_fraction}};
        },
        step);
}

json chain_json(const TransformChain& chain)
{
    json arr = json::array();
    for (const auto& s : chain)
        arr.push_back(step_json(s));
    return arr;
}

}  // namespace

std::string chain_to_json(const TransformChain& chain) { return chain_json(chain).dump(); }

std::string pair_sidecar(const ViewPair& p)
{
    const json doc = {
        {"seed", p.seed},
        {"attempts", p.attempts},
        {"mode", to_string(p.mode)},
        {"iou_v1", p.iou_v1},
        {"iou_v2", p.iou_v2},
        {"crop_iou_v1", p.crop_iou_v1},
        {"crop_iou_v2", p.crop_iou_v2},
        {"transform_chain", {{"v1", chain_json(p.chain1)}, {"v2", chain_json(p.chain2)}}},
    };
    return doc.dump(2) + "\n";
}

}  // namespace fc
