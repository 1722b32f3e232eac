#include "acco/image.h"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <random>

#include "acco/text_format.h"

namespace acco {

namespace {

class PgmReader {
 public:
  PgmReader(const std::string& bytes, const std::string& source) : s_(bytes), source_(source) {}

  std::string token() {
    skip();
    const std::size_t b = pos_;
    while (pos_ < s_.size() && !std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (b == pos_) throw ParseError(source_ + ": truncated header");
    return s_.substr(b, pos_ - b);
  }

  long long number(const char* what) {
    const auto t = token();
    try {
      return parse_integer(t, source_ + " " + what, 0);
    } catch (const ParseError&) {
      throw ParseError(source_ + ": bad " + std::string(what) + " '" + t + "'");
    }
  }

  // Single whitespace byte after maxval, then raw samples.
  std::size_t raster_start() {
    if (pos_ >= s_.size()) throw ParseError(source_ + ": missing raster");
    return pos_ + 1;
  }

 private:
  void skip() {
    while (pos_ < s_.size()) {
      if (s_[pos_] == '#') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      } else if (std::isspace(static_cast<unsigned char>(s_[pos_]))) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  const std::string& s_;
  std::string source_;
  std::size_t pos_ = 0;
};

}  // namespace

GrayImage parse_pgm(const std::string& bytes, const std::string& source) {
  PgmReader rd(bytes, source);
  const auto magic = rd.token();
  if (magic != "P2" && magic != "P5") throw ParseError(source + ": not a P2/P5 PGM file");
  GrayImage img;
  img.width = static_cast<int>(rd.number("width"));
  img.height = static_cast<int>(rd.number("height"));
  const long long maxval = rd.number("maxval");
  if (img.width <= 0 || img.height <= 0) throw ParseError(source + ": non-positive dimensions");
  if (maxval < 1 || maxval > 255) throw ParseError(source + ": only 8-bit PGM (maxval <= 255) is supported");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.pixels.resize(n);
  auto rescale = [&](long long v) {
    if (v < 0 || v > maxval) throw ParseError(source + ": sample out of range");
    return static_cast<std::uint8_t>(maxval == 255 ? v : (v * 255 + maxval / 2) / maxval);
  };
  if (magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = rescale(rd.number("sample"));
  } else {
    const std::size_t start = rd.raster_start();
    if (bytes.size() < start + n) throw ParseError(source + ": truncated raster");
    for (std::size_t i = 0; i < n; ++i) img.pixels[i] = rescale(static_cast<unsigned char>(bytes[start + i]));
  }
  return img;
}

GrayImage read_pgm(const std::string& path) { return parse_pgm(read_text_file(path), path); }

std::string format_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  out.append(img.pixels.begin(), img.pixels.end());
  return out;
}

void write_pgm(const std::string& path, const GrayImage& img) { write_text_file(path, format_pgm(img)); }

GrayImage synthetic_gradient(int width, int height) {
  GrayImage img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
  const int denom = std::max(1, width + height - 2);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x)
      img.pixels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>((255 * (x + y) + denom / 2) / denom);
  return img;
}

GrayImage synthetic_checker_noise(int width, int height, std::uint64_t seed) {
  GrayImage img{width, height, std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height)};
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 12.0);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      const double base = ((x / 8 + y / 8) % 2) ? 208.0 : 48.0;
      const double v = std::clamp(std::round(base + noise(rng)), 0.0, 255.0);
      img.pixels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(v);
    }
  return img;
}

double mse(const GrayImage& a, const GrayImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw Error("image dimension mismatch: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                std::to_string(b.width) + "x" + std::to_string(b.height));
  if (a.pixels.empty()) throw Error("mse: empty image");
  double s = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - static_cast<double>(b.pixels[i]);
    s += d * d;
  }
  return s / static_cast<double>(a.pixels.size());
}

double psnr(const GrayImage& a, const GrayImage& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kPsnrInf;
  return 10.0 * std::log10(255.0 * 255.0 / m);
}

std::string format_psnr(double db) {
  if (std::isinf(db)) return "inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", db);
  return buf;
}

ProductTable product_table(const Netlist& net) {
  if (net.width() != 8) throw Error("product_table: blending needs an 8-bit multiplier");
  Simulator sim(net);
  ProductTable t(1u << 16);
  for (std::uint32_t a = 0; a < 256; ++a)
    for (std::uint32_t b = 0; b < 256; ++b) t[(a << 8) | b] = static_cast<std::uint32_t>(sim.evaluate(a, b));
  return t;
}

ProductTable exact_product_table() {
  ProductTable t(1u << 16);
  for (std::uint32_t a = 0; a < 256; ++a)
    for (std::uint32_t b = 0; b < 256; ++b) t[(a << 8) | b] = a * b;
  return t;
}

GrayImage blend(const GrayImage& a, const GrayImage& b, double alpha, const ProductTable& mul) {
  if (a.width != b.width || a.height != b.height)
    throw Error("blend: image dimension mismatch (" + std::to_string(a.width) + "x" + std::to_string(a.height) +
                " vs " + std::to_string(b.width) + "x" + std::to_string(b.height) + ")");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw Error("blend: alpha must lie in [0, 1]");
  if (mul.size() != (1u << 16)) throw Error("blend: product table must have 65536 entries");
  const std::uint32_t al = static_cast<std::uint32_t>(std::lround(255.0 * alpha));
  GrayImage out{a.width, a.height, std::vector<std::uint8_t>(a.pixels.size())};
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const std::uint32_t s = mul[(static_cast<std::uint32_t>(a.pixels[i]) << 8) | al] +
                            mul[(static_cast<std::uint32_t>(b.pixels[i]) << 8) | (255 - al)] + 128;
    out.pixels[i] = static_cast<std::uint8_t>(std::min<std::uint32_t>(s >> 8, 255));
  }
  return out;
}

namespace {

std::vector<double> ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("spearman: need two equal-length series of size >= 2");
  const auto rx = ranks(x), ry = ranks(y);
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0 || syy == 0) throw Error("spearman: a series is constant");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace acco
