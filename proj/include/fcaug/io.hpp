#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fcaug/grid.hpp"

namespace fc {

// .smap: "SMAP", u32 LE width, u32 LE height, width*height f32 LE, row-major.
std::vector<std::uint8_t> encode_smap(const SaliencyMap& map);
SaliencyMap decode_smap(const std::vector<std::uint8_t>& bytes);
void write_smap(const std::filesystem::path& path, const SaliencyMap& map);
SaliencyMap read_smap(const std::filesystem::path& path);

/// Binary PGM (P5), 8-bit (maxval <= 255) or 16-bit big-endian. Intensities map to [0,1].
std::vector<std::uint8_t> encode_pgm(const Image& image, int bits = 16);
Image decode_pgm(const std::vector<std::uint8_t>& bytes);
void write_pgm(const std::filesystem::path& path, const Image& image, int bits = 16);
Image read_pgm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
std::string read_text(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace fc
