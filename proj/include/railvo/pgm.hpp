#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "railvo/image.hpp"

namespace railvo::imgcore {

/// Decodes a binary PGM (P5) stream, 8-bit or 16-bit big-endian. Samples are
/// divided by the header maxval. Throws Error(Format) naming the byte offset.
Image decode_pgm(std::span<const std::uint8_t> bytes);

/// Encodes in canonical form: "P5\n<w> <h>\n<maxval>\n" followed by the payload.
std::vector<std::uint8_t> encode_pgm(const Image& img, int maxval = 255);

Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img, int maxval = 255);

}  // namespace railvo::imgcore
