#pragma once

#include <filesystem>
#include <vector>

#include "fcaug/saliency.hpp"
#include "fcaug/synth.hpp"
#include "fcaug/train.hpp"

namespace fc {

// On-disk layout: images/<id>.pgm, maps/<id>.smap, lesions/<id>.pgm (8-bit mask),
// labels.csv with header "image_id,grade".

void write_dataset(const std::filesystem::path& dir, const std::vector<SynthSample>& samples);

/// Loads images and labels; maps come from `source` (a gaze_file source with an empty
/// root reads <dir>/maps). When resize_px > 0 images and maps are resampled to that size.
std::vector<Sample> load_dataset(const std::filesystem::path& dir, SaliencySource source, int resize_px = 0);

std::vector<Sample> to_samples(const std::vector<SynthSample>& synth);

/// Bilinear resize of image and map to size x size.
Sample resized(const Sample& s, Index size);

}  // namespace fc
