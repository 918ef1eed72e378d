#include "fcaug/io.hpp"

#include <bit>
#include <cctype>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "fcaug/error.hpp"

namespace fc {

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i)
        out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p)
{
    return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

}  // namespace

std::vector<std::uint8_t> encode_smap(const SaliencyMap& map)
{
    std::vector<std::uint8_t> out{'S', 'M', 'A', 'P'};
    out.reserve(12 + 4 * static_cast<std::size_t>(map.size()));
    put_u32(out, static_cast<std::uint32_t>(map.cols()));
    put_u32(out, static_cast<std::uint32_t>(map.rows()));
    for (Index i = 0; i < map.size(); ++i)
        put_u32(out, std::bit_cast<std::uint32_t>(map.data()[i]));
    return out;
}

SaliencyMap decode_smap(const std::vector<std::uint8_t>& bytes)
{
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "SMAP", 4) != 0)
        throw ParseError("not a saliency map file (bad magic)", 0);
    const std::uint32_t w = get_u32(bytes.data() + 4);
    const std::uint32_t h = get_u32(bytes.data() + 8);
    if (bytes.size() != 12 + 4ull * w * h)
        throw ParseError("saliency map payload size mismatch", 0);
    SaliencyMap map(h, w);
    for (Index i = 0; i < map.size(); ++i)
        map.data()[i] = std::bit_cast<float>(get_u32(bytes.data() + 12 + 4 * i));
    return map;
}

void write_smap(const std::filesystem::path& path, const SaliencyMap& map) { write_bytes(path, encode_smap(map)); }

SaliencyMap read_smap(const std::filesystem::path& path) { return decode_smap(read_bytes(path)); }

std::vector<std::uint8_t> encode_pgm(const Image& image, int bits)
{
    if (bits != 8 && bits != 16)
        throw ValidationError("PGM depth must be 8 or 16 bits");
    const int maxval = bits == 8 ? 255 : 65535;
    const std::string header =
        "P5\n" + std::to_string(image.cols()) + " " + std::to_string(image.rows()) + "\n" + std::to_string(maxval) + "\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    for (Index i = 0; i < image.size(); ++i) {
        const double v = std::clamp(double(image.data()[i]), 0.0, 1.0);
        const auto q = static_cast<std::uint32_t>(std::lround(v * maxval));
        if (bits == 16)
            out.push_back(static_cast<std::uint8_t>(q >> 8));
        out.push_back(static_cast<std::uint8_t>(q & 0xff));
    }
    return out;
}

Image decode_pgm(const std::vector<std::uint8_t>& bytes)
{
    std::size_t pos = 0;
    auto next_token = [&]() {
        while (pos < bytes.size()) {
            if (bytes[pos] == '#') {
                while (pos < bytes.size() && bytes[pos] != '\n')
                    ++pos;
            } else if (std::isspace(bytes[pos])) {
                ++pos;
            } else {
                break;
            }
        }
        std::string tok;
        while (pos < bytes.size() && !std::isspace(bytes[pos]))
            tok.push_back(static_cast<char>(bytes[pos++]));
        return tok;
    };
    if (next_token() != "P5")
        throw ParseError("only binary PGM (P5) is supported", 0);
    long w = 0, h = 0, maxval = 0;
    try {
        w = std::stol(next_token());
        h = std::stol(next_token());
        maxval = std::stol(next_token());
    } catch (const std::exception&) {
        throw ParseError("malformed PGM header", 0);
    }
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 65535)
        throw ParseError("invalid PGM header values", 0);
    ++pos;  // single whitespace before raster
    const std::size_t bpp = maxval > 255 ? 2 : 1;
    if (bytes.size() < pos + bpp * std::size_t(w) * std::size_t(h))
        throw ParseError("truncated PGM raster", 0);
    Image img(h, w);
    for (Index i = 0; i < img.size(); ++i) {
        const std::uint8_t* p = bytes.data() + pos + bpp * std::size_t(i);
        const std::uint32_t q = bpp == 2 ? (std::uint32_t(p[0]) << 8 | p[1]) : p[0];
        img.data()[i] = static_cast<float>(double(q) / double(maxval));
    }
    return img;
}

void write_pgm(const std::filesystem::path& path, const Image& image, int bits)
{
    write_bytes(path, encode_pgm(image, bits));
}

Image read_pgm(const std::filesystem::path& path) { return decode_pgm(read_bytes(path)); }

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw LookupError("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text(const std::filesystem::path& path)
{
    const auto bytes = read_bytes(path);
    return {bytes.begin(), bytes.end()};
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

void write_text(const std::filesystem::path& path, const std::string& text)
{
    write_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace fc
