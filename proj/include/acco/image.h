#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "acco/multiplier.h"

namespace acco {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Reads P2 (ASCII) or P5 (binary) with maxval <= 255.
GrayImage parse_pgm(const std::string& bytes, const std::string& source = "pgm");
GrayImage read_pgm(const std::string& path);
/// Binary P5.
std::string format_pgm(const GrayImage& img);
void write_pgm(const std::string& path, const GrayImage& img);

/// Diagonal ramp.
GrayImage synthetic_gradient(int width, int height);
/// 8x8-pixel checkerboard of levels 48 and 208 plus seeded Gaussian noise (sd 12).
GrayImage synthetic_checker_noise(int width, int height, std::uint64_t seed);

inline constexpr double kPsnrInf = std::numeric_limits<double>::infinity();

double mse(const GrayImage& a, const GrayImage& b);
/// 10 log10(255^2 / MSE); kPsnrInf when the images are identical.
double psnr(const GrayImage& a, const GrayImage& b);
std::string format_psnr(double db);

/// 8x8-bit product lookup, index (a << 8) | b.
using ProductTable = std::vector<std::uint32_t>;
ProductTable product_table(const Netlist& net);
ProductTable exact_product_table();

/// out = (mul(a, al) + mul(b, 255 - al) + 128) >> 8 with al = round(255 alpha),
/// clamped to 255.
GrayImage blend(const GrayImage& a, const GrayImage& b, double alpha, const ProductTable& mul);

/// Rank correlation with average ranks for ties.
double spearman(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace acco
