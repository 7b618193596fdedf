#pragma once

#include <filesystem>
#include <span>
#include <cstdint>
#include <vector>

#include "templar/image.hpp"

namespace templar {

/// Minimal binary PGM (P5) / PPM (P6) codec, 8-bit only. Values map to [0,1].
Image decode_pnm(std::span<const std::uint8_t> bytes);
Image read_pnm(const std::filesystem::path& path);

/// Writes P5 for one channel, P6 for three; values are clamped and rounded.
std::vector<std::uint8_t> encode_pnm(const Image& img);
void write_pnm(const std::filesystem::path& path, const Image& img);

}  // namespace templar
