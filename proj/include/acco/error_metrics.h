#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "acco/multiplier.h"

namespace acco {

/// Batch product function: out[i] = R_a(xs[i], ys[i]).
using ProductFn = std::function<void(std::span<const std::uint64_t>, std::span<const std::uint64_t>,
                                     std::span<std::uint64_t>)>;

/// Wraps a compiled simulator of `net`. The netlist may be discarded afterwards.
ProductFn product_fn(const Netlist& net);

inline constexpr std::uint64_t kDefaultSampleCount = std::uint64_t{1} << 20;
inline constexpr std::uint64_t kDefaultSampleSeed = 0x5eed2024;
inline constexpr int kMaxExhaustiveWidth = 8;

struct InputSet {
  enum class Mode { Exhaustive, Sampled, Explicit };

  Mode mode = Mode::Exhaustive;
  int width = 8;
  std::uint64_t count = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;

  static InputSet exhaustive(int width);
  static InputSet sampled(int width, std::uint64_t count, std::uint64_t seed = kDefaultSampleSeed);
  static InputSet explicit_pairs(int width, std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs);
  /// Exhaustive up to 8 bits, otherwise 2^20 seeded samples.
  static InputSet standard(int width);

  void validate() const;
  std::string describe() const;
};

struct ErrorReport {
  double mred = 0.0;
  double nmed = 0.0;
  std::uint64_t max_ed = 0;
  std::uint64_t count_u = 0;
  std::uint64_t count_u_plus = 0;
  std::string inputs;  // InputSet::describe()
};

inline std::uint64_t error_distance(std::uint64_t r_approx, std::uint64_t r_exact) {
  return r_approx > r_exact ? r_approx - r_exact : r_exact - r_approx;
}

/// R_max = (2^N - 1)^2.
std::uint64_t max_product(int width);

/// One sweep over the input set. In sampled mode, pairs outside U_+ are
/// replaced from an independent stream for the MRED accumulator only, so
/// count_u_plus equals count.
ErrorReport error_report(const ProductFn& fn, const InputSet& inputs);
ErrorReport error_report(const Netlist& net, const InputSet& inputs);

double mred(const Netlist& net, const InputSet& inputs);
double nmed(const Netlist& net, const InputSet& inputs);

using Rational = boost::multiprecision::cpp_rational;

struct ExactErrorReport {
  Rational mred;
  Rational nmed;
  std::uint64_t max_ed = 0;
  std::uint64_t count_u = 0;
  std::uint64_t count_u_plus = 0;
};

/// Rational-arithmetic report for Exhaustive and Explicit sets.
ExactErrorReport exact_error_report(const ProductFn& fn, const InputSet& inputs);

}  // namespace acco
