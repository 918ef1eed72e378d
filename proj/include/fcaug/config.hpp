#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "fcaug/augment.hpp"
#include "fcaug/gaze.hpp"
#include "fcaug/metrics.hpp"
#include "fcaug/saliency.hpp"
#include "fcaug/synth.hpp"
#include "fcaug/train.hpp"

namespace fc {

struct Paths
{
    std::filesystem::path data;      // dataset directory (images/, maps/, labels.csv)
    std::filesystem::path test;      // held-out dataset directory
    std::filesystem::path saliency;  // .smap root for gaze_file saliency
    std::filesystem::path out;
};

struct SweepSettings
{
    SweepAxis axis = SweepAxis::cutout_px;
    std::vector<double> values = {8, 16, 32, 48, 64, 96, 128};
    std::vector<double> label_fractions = {0.1};
    std::size_t overlap_pairs = 10000;
};

/// Everything a CLI run can be configured with. Parsed strictly: unknown keys are errors.
struct RunConfig
{
    std::optional<std::uint64_t> seed;
    Paths paths;
    PairMode mode = PairMode::default_mode;
    AugmentSpec augment;
    FocusConfig focus;
    SaliencySource saliency{SaliencyKind::gaze_file, {}, {}};
    KernelSpec kernel;
    SynthSpec synth;
    EncoderConfig encoder;
    TrainConfig train;
    ProbeConfig probe;
    double label_fraction = 0.1;
    int n_classes = 5;
    SweepSettings sweep;
};

/// Parses a JSON document into `base`, overriding only the keys present.
RunConfig parse_run_config(const std::string& text, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

std::string chain_to_json(const TransformChain& chain);
/// {seed, attempts, mode, iou_v1, iou_v2, crop_iou_v1, crop_iou_v2, transform_chain}
std::string pair_sidecar(const ViewPair& pair);

}  // namespace fc
