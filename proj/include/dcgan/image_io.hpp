#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace dcgan {

/// Single-channel image with values in [0, 1], row-major.
struct GrayImage {
    std::size_t width = 0;
    std::size_t height = 0;
    std::vector<double> pixels;
};

/// Decodes a PNG (any bit depth / color type) or a PGM (P2 or P5) file,
/// detected by content rather than extension. Color is reduced to luminance
/// with Rec. 601 weights; alpha is ignored. Throws IoError naming the file
/// on anything undecodable.
GrayImage read_gray_image(const std::filesystem::path& path);

/// Rec. 601 luma of 8-bit-normalized RGB.
double rec601_luma(double r, double g, double b);

/// Rounds [0,1] values to 8 bits.
std::vector<std::uint8_t> quantize_8bit(std::span<const double> values);

/// 8-bit grayscale PNG with fixed compression settings and no timestamp,
/// so identical pixels always give identical bytes.
void write_png_gray8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                     std::span<const std::uint8_t> pixels);

/// Binary PGM (P5) with maxval 255.
void write_pgm_gray8(const std::filesystem::path& path, std::size_t width, std::size_t height,
                     std::span<const std::uint8_t> pixels);

}  // namespace dcgan
