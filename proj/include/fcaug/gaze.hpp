#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "fcaug/grid.hpp"

namespace fc {

/// One eye-tracker sample in normalized image coordinates.
struct GazePoint
{
    double x = 0.0;
    double y = 0.0;
    double t_ms = 0.0;

    bool operator==(const GazePoint&) const = default;
};

/// Samples recorded while one image was read.
struct GazeLog
{
    std::string image_id;
    std::vector<GazePoint> points;
    double sample_rate_hz = 90.0;
};

/// Truncated Gaussian used to splat gaze samples. The default support covers +-3 sigma.
struct KernelSpec
{
    int size_px = 99;
    double sigma_px = 99.0 / 6.0;

    static KernelSpec with_size(int size) { return {size, size / 6.0}; }
    int radius() const { return size_px / 2; }
    void validate() const;
};

/// Parses `image_id,x,y,t_ms` lines, grouping samples by image id in order of
/// first appearance. Throws ParseError (with line number) on malformed rows and
/// ValidationError when a session's timestamps go backwards.
std::vector<GazeLog> parse_gaze_logs(std::string_view text);

/// Single-session variant; rejects input containing more than one image id.
GazeLog parse_gaze_log(std::string_view text);

/// Keeps only samples inside [0,1]^2. Throws ValidationError when nothing survives.
GazeLog filter_gaze(const GazeLog& log);

/// Nearest-pixel impulse location (round half up, clamped to the raster).
Index gaze_pixel(double normalized, Index extent);

/// Splats each sample as a unit impulse, convolves with the truncated Gaussian
/// (zero padding) and max-normalizes to [0,1].
SaliencyMap render_gaze_map(const GazeLog& log, Index width, Index height, const KernelSpec& kernel = {});

}  // namespace fc
