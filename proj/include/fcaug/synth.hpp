#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fcaug/grid.hpp"
#include "fcaug/rng.hpp"

namespace fc {

/// Synthetic radiograph-like images with a planted elliptical lesion whose
/// contrast grows linearly with the grade; grade 0 has no lesion.
struct SynthSpec
{
    int image_px = 224;
    double lesion_area_fraction = 0.0412;
    int n_classes = 5;
    std::uint64_t texture_seed = 0;
    double lesion_contrast = 0.4;  // intensity delta at the top grade
    double texture_wavelength_px = 16.0;
    double texture_std = 0.04;
    /// Salient ellipse (at eps 0.05) is the lesion ellipse scaled by 1 + margin.
    double saliency_margin = 0.3;

    void validate() const;
};

struct SynthSample
{
    std::string image_id;
    Image image;
    int label = 0;
    BinaryMask lesion_mask;
    SaliencyMap saliency;
};

SynthSample gen_sample(const SynthSpec& spec, int grade, CounterRng& rng);

/// Balanced dataset: n_per_class samples per grade, ids "s00000".., label-major order.
std::vector<SynthSample> gen_dataset(const SynthSpec& spec, int n_per_class, std::uint64_t seed);

}  // namespace fc
