#include "fcaug/gaze.hpp"

#include <charconv>
#include <cmath>
#include <map>

#include "fcaug/error.hpp"

namespace fc {

namespace {

std::string_view trim(std::string_view s)
{
    const auto ws = " \t\r";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

double parse_number(std::string_view field, std::size_t line, const char* name)
{
    field = trim(field);
    double v = 0.0;
    const auto* end = field.data() + field.size();
    auto [ptr, ec] = std::from_chars(field.data(), end, v);
    if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
        throw ParseError(std::string("bad ") + name + " field '" + std::string(field) + "'", line);
    return v;
}

}  // namespace

void KernelSpec::validate() const
{
    if (size_px <= 0 || size_px % 2 == 0)
        throw ValidationError("kernel size must be a positive odd integer");
    if (!(sigma_px > 0.0))
        throw ValidationError("kernel sigma must be positive");
}

std::vector<GazeLog> parse_gaze_logs(std::string_view text)
{
    std::vector<GazeLog> logs;
    std::map<std::string, std::size_t, std::less<>> slot;
    std::size_t line_no = 0;
    std::size_t samples = 0;

    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;

        line = trim(line);
        if (line.empty() || line.front() == '#')
            continue;

        std::string_view fields[4];
        std::size_t n = 0;
        std::string_view rest = line;
        while (true) {
            const auto comma = rest.find(',');
            if (n == 4)
                throw ParseError("expected 4 fields (image_id,x,y,t_ms)", line_no);
            fields[n++] = rest.substr(0, comma);
            if (comma == std::string_view::npos)
                break;
            rest = rest.substr(comma + 1);
        }
        if (n != 4)
            throw ParseError("expected 4 fields (image_id,x,y,t_ms)", line_no);

        const std::string id(trim(fields[0]));
        if (id.empty())
            throw ParseError("empty image_id", line_no);
        GazePoint p{parse_number(fields[1], line_no, "x"), parse_number(fields[2], line_no, "y"),
                    parse_number(fields[3], line_no, "t_ms")};
        if (p.t_ms < 0.0)
            throw ValidationError("line " + std::to_string(line_no) + ": negative timestamp");

        auto it = slot.find(id);
        if (it == slot.end()) {
            it = slot.emplace(id, logs.size()).first;
            logs.push_back(GazeLog{id, {}, 90.0});
        }
        auto& pts = logs[it->second].points;
        if (!pts.empty() && p.t_ms < pts.back().t_ms)
            throw ValidationError("line " + std::to_string(line_no) + ": timestamp decreases for image '" + id
                                  + "'");
        pts.push_back(p);
        ++samples;
    }
    if (samples == 0)
        throw ParseError("no samples", 0);
    return logs;
}

GazeLog parse_gaze_log(std::string_view text)
{
    auto logs = parse_gaze_logs(text);
    if (logs.size() != 1)
        throw ValidationError("expected a single image session, found " + std::to_string(logs.size()));
    return std::move(logs.front());
}

GazeLog filter_gaze(const GazeLog& log)
{
    GazeLog out{log.image_id, {}, log.sample_rate_hz};
    for (const auto& p : log.points) {
        if (p.x >= 0.0 && p.x <= 1.0 && p.y >= 0.0 && p.y <= 1.0)
            out.points.push_back(p);
    }
    if (out.points.empty())
        throw ValidationError("empty after filtering: " + log.image_id);
    return out;
}

Index gaze_pixel(double normalized, Index extent)
{
    const auto px = static_cast<Index>(std::floor(normalized * double(extent) + 0.5));
    return std::clamp<Index>(px, 0, extent - 1);
}

SaliencyMap render_gaze_map(const GazeLog& log, Index width, Index height, const KernelSpec& kernel)
{
    kernel.validate();
    if (width <= 0 || height <= 0)
        throw ValidationError("map dimensions must be positive");
    if (log.points.empty())
        throw ValidationError("cannot render an empty gaze log");
    if (kernel.size_px > width || kernel.size_px > height)
        throw ValidationError("kernel exceeds image");

    Grid<double> impulses = Grid<double>::Zero(height, width);
    for (const auto& p : log.points)
        impulses(gaze_pixel(p.y, height), gaze_pixel(p.x, width)) += 1.0;

    Grid<double> map = separable_filter(impulses, gaussian_taps(kernel.radius(), kernel.sigma_px));
    max_normalize(map);
    return map.cast<float>();
}

}  // namespace fc
