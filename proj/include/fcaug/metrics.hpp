#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "fcaug/augment.hpp"
#include "fcaug/train.hpp"

namespace fc {

/// Fraction of source salient pixels that survive in both views. Pixels pushed out
/// of frame by flip or rotation are not counted as lost; crop windows and cutouts are.
/// 1.0 when nothing salient remains in frame.
double overlap_score(const ViewPair& pair, const SaliencyMap& source_map, double eps);

/// Minimum over the two views of surviving lesion pixels / in-frame lesion pixels; 1.0 for
/// an empty lesion.
double lesion_preservation(const ViewPair& pair, const BinaryMask& lesion_mask);

/// True when a view lost every in-frame lesion pixel (the lesion must be non-empty).
bool lesion_destroyed(const TransformChain& chain, const BinaryMask& lesion_mask);

struct OverlapStats
{
    double mean = 0.0;
    double stddev = 0.0;
    double sem = 0.0;  // standard error of the mean
    std::size_t pairs = 0;
    double reject_rate = 0.0;
    double attempts_mean = 0.0;
};

/// Monte Carlo overlap over `n_pairs` pairs drawn round-robin from `data`; pair i uses
/// pair_key(seed, id, i). Failed pairs count toward reject_rate only.
OverlapStats overlap_monte_carlo(std::span<const Sample> data, const PairRecipe& recipe, std::size_t n_pairs,
                                 std::uint64_t seed, int workers = 1);

enum class SweepAxis { crop_zoom, cutout_px };

std::string to_string(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);

struct SweepGrid
{
    SweepAxis axis = SweepAxis::cutout_px;
    std::vector<double> values;
    std::vector<double> label_fractions = {0.1};
    PairRecipe recipe;  // fixed settings for everything but the swept parameter

    void validate() const;
    /// The recipe with the swept parameter set to `value`.
    PairRecipe at(double value) const;
};

struct SweepRow
{
    SweepAxis axis = SweepAxis::cutout_px;
    double value = 0.0;
    double label_fraction = 0.0;
    double acc = 0.0;
    double mae = 0.0;
    double overlap_mean = 0.0;
    double reject_rate = 0.0;
    double attempts_mean = 0.0;
    std::string status = "ok";
};

struct SweepOptions
{
    std::size_t overlap_pairs = 10000;
    int n_classes = 5;
    ProbeConfig probe;
    int workers = 1;
};

/// One cell per value: pretrain, probe at every label fraction, Monte Carlo overlap.
/// Cell seeds derive from (train.seed, value), so repeated values give identical rows.
/// A cell whose pretraining aborts is reported with status "failed: ..." and the sweep continues.
std::vector<SweepRow> run_sweep(const SweepGrid& grid, const TrainConfig& train, const EncoderConfig& enc,
                                std::span<const Sample> train_set, std::span<const Sample> test_set,
                                const SweepOptions& opt = {});

/// `axis,value,label_fraction,acc,mae,overlap_mean,reject_rate,attempts_mean,status`.
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace fc
