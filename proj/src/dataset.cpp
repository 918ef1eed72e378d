#include "fcaug/dataset.hpp"

#include <sstream>

#include "fcaug/error.hpp"
#include "fcaug/io.hpp"

namespace fc {

void write_dataset(const std::filesystem::path& dir, const std::vector<SynthSample>& samples)
{
    std::string labels = "image_id,grade\n";
    for (const auto& s : samples) {
        write_pgm(dir / "images" / (s.image_id + ".pgm"), s.image, 16);
        write_smap(dir / "maps" / (s.image_id + ".smap"), s.saliency);
        write_pgm(dir / "lesions" / (s.image_id + ".pgm"), s.lesion_mask.cast<float>(), 8);
        labels += s.image_id + "," + std::to_string(s.label) + "\n";
    }
    write_text(dir / "labels.csv", labels);
}

std::vector<Sample> load_dataset(const std::filesystem::path& dir, SaliencySource source, int resize_px)
{
    const auto labels_path = dir / "labels.csv";
    if (!std::filesystem::exists(labels_path))
        throw LookupError("no labels.csv in " + dir.string());
    if (source.kind == SaliencyKind::gaze_file && source.root.empty())
        source.root = dir / "maps";
    const SaliencyProvider provider(source);

    std::istringstream in(read_text(labels_path));
    std::string line;
    std::size_t lineno = 0;
    std::vector<Sample> out;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || (lineno == 1 && line.rfind("image_id", 0) == 0))
            continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos)
            throw ParseError("expected image_id,grade", lineno);
        Sample s;
        s.id = line.substr(0, comma);
        try {
            s.label = std::stoi(line.substr(comma + 1));
        } catch (const std::exception&) {
            throw ParseError("bad grade '" + line.substr(comma + 1) + "'", lineno);
        }
        s.image = read_pgm(dir / "images" / (s.id + ".pgm"));
        s.map = provider.saliency_for(s.id, s.image);
        if (resize_px > 0)
            s = resized(s, resize_px);
        out.push_back(std::move(s));
    }
    if (out.empty())
        throw ValidationError("dataset " + dir.string() + " is empty");
    return out;
}

std::vector<Sample> to_samples(const std::vector<SynthSample>& synth)
{
    std::vector<Sample> out;
    out.reserve(synth.size());
    for (const auto& s : synth)
        out.push_back({s.image_id, s.image, s.saliency, s.label});
    return out;
}

Sample resized(const Sample& s, Index size)
{
    if (s.image.rows() == size && s.image.cols() == size)
        return s;
    Sample r = s;
    r.image = resize_bilinear(s.image, size, size);
    r.map = resize_bilinear(s.map, size, size);
    return r;
}

}  // namespace fc
