#include "acco/error_metrics.h"

#include <memory>
#include <random>

namespace acco {

namespace {

constexpr std::size_t kChunk = 4096;

std::uint64_t operand_mask(int width) {
  return width >= 64 ? ~std::uint64_t{0} : (std::uint64_t{1} << width) - 1;
}

// Neumaier compensated sum.
struct CompensatedSum {
  long double sum = 0.0L;
  long double c = 0.0L;
  void add(long double v) {
    const long double t = sum + v;
    if ((sum >= 0 ? sum : -sum) >= (v >= 0 ? v : -v))
      c += (sum - t) + v;
    else
      c += (v - t) + sum;
    sum = t;
  }
  long double value() const { return sum + c; }
};

// Calls visit(xs, ys) on consecutive chunks of a deterministic (non-sampled) set.
template <class Visit>
void for_each_chunk(const InputSet& in, Visit&& visit) {
  std::vector<std::uint64_t> xs, ys;
  xs.reserve(kChunk);
  ys.reserve(kChunk);
  auto flush = [&] {
    if (xs.empty()) return;
    visit(std::span<const std::uint64_t>(xs), std::span<const std::uint64_t>(ys));
    xs.clear();
    ys.clear();
  };
  if (in.mode == InputSet::Mode::Exhaustive) {
    const std::uint64_t lim = std::uint64_t{1} << in.width;
    for (std::uint64_t x = 0; x < lim; ++x)
      for (std::uint64_t y = 0; y < lim; ++y) {
        xs.push_back(x);
        ys.push_back(y);
        if (xs.size() == kChunk) flush();
      }
  } else {
    for (const auto& [x, y] : in.pairs) {
      xs.push_back(x);
      ys.push_back(y);
      if (xs.size() == kChunk) flush();
    }
  }
  flush();
}

}  // namespace

ProductFn product_fn(const Netlist& net) {
  auto sim = std::make_shared<Simulator>(net);
  return [sim](std::span<const std::uint64_t> xs, std::span<const std::uint64_t> ys,
               std::span<std::uint64_t> out) { sim->evaluate_batch(xs, ys, out); };
}

InputSet InputSet::exhaustive(int width) {
  InputSet s;
  s.mode = Mode::Exhaustive;
  s.width = width;
  s.validate();
  return s;
}

InputSet InputSet::sampled(int width, std::uint64_t count, std::uint64_t seed) {
  InputSet s;
  s.mode = Mode::Sampled;
  s.width = width;
  s.count = count;
  s.seed = seed;
  s.validate();
  return s;
}

InputSet InputSet::explicit_pairs(int width, std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs) {
  InputSet s;
  s.mode = Mode::Explicit;
  s.width = width;
  s.pairs = std::move(pairs);
  s.validate();
  return s;
}

InputSet InputSet::standard(int width) {
  return width <= kMaxExhaustiveWidth ? exhaustive(width) : sampled(width, kDefaultSampleCount);
}

void InputSet::validate() const {
  if (width < kMinWidth || width > kMaxWidth)
    throw Error("InputSet: width " + std::to_string(width) + " outside [" + std::to_string(kMinWidth) +
                ", " + std::to_string(kMaxWidth) + "]");
  switch (mode) {
    case Mode::Exhaustive:
      if (width > kMaxExhaustiveWidth)
        throw Error("InputSet: exhaustive evaluation only permitted for N <= 8 (got N=" +
                    std::to_string(width) + ")");
      break;
    case Mode::Sampled:
      if (count == 0) throw Error("InputSet: sample count must be positive");
      break;
    case Mode::Explicit: {
      if (pairs.empty()) throw Error("InputSet: explicit pair list is empty");
      const std::uint64_t m = operand_mask(width);
      for (const auto& [x, y] : pairs)
        if (x > m || y > m)
          throw Error("InputSet: pair (" + std::to_string(x) + ", " + std::to_string(y) +
                      ") out of range for N=" + std::to_string(width));
      break;
    }
  }
}

std::string InputSet::describe() const {
  switch (mode) {
    case Mode::Exhaustive:
      return "exhaustive N=" + std::to_string(width);
    case Mode::Sampled:
      return "sampled N=" + std::to_string(width) + " count=" + std::to_string(count) +
             " seed=" + std::to_string(seed);
    case Mode::Explicit:
      return "explicit N=" + std::to_string(width) + " pairs=" + std::to_string(pairs.size());
  }
  return {};
}

std::uint64_t max_product(int width) {
  const std::uint64_t m = operand_mask(width);
  return m * m;
}

ErrorReport error_report(const ProductFn& fn, const InputSet& inputs) {
  inputs.validate();
  const long double r_max = static_cast<long double>(max_product(inputs.width));
  ErrorReport rep;
  rep.inputs = inputs.describe();
  unsigned __int128 ed_sum = 0;
  CompensatedSum red_sum;
  std::vector<std::uint64_t> out;

  auto accumulate_u = [&](std::span<const std::uint64_t> xs, std::span<const std::uint64_t> ys,
                          bool count_plus) {
    out.resize(xs.size());
    fn(xs, ys, out);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::uint64_t exact = xs[i] * ys[i];
      const std::uint64_t ed = error_distance(out[i], exact);
      ed_sum += ed;
      rep.max_ed = std::max(rep.max_ed, ed);
      ++rep.count_u;
      if (count_plus && exact > 0) {
        red_sum.add(static_cast<long double>(ed) / static_cast<long double>(exact));
        ++rep.count_u_plus;
      }
    }
  };

  if (inputs.mode != InputSet::Mode::Sampled) {
    for_each_chunk(inputs, [&](auto xs, auto ys) { accumulate_u(xs, ys, true); });
  } else {
    const std::uint64_t mask = operand_mask(inputs.width);
    std::mt19937_64 main_rng(inputs.seed);
    std::seed_seq alt_seed{static_cast<std::uint32_t>(inputs.seed), static_cast<std::uint32_t>(inputs.seed >> 32),
                           0x7e5a3u};
    std::mt19937_64 alt_rng(alt_seed);
    std::vector<std::uint64_t> xs, ys, rx, ry, rout;
    for (std::uint64_t done = 0; done < inputs.count;) {
      const std::size_t n = static_cast<std::size_t>(std::min<std::uint64_t>(kChunk, inputs.count - done));
      xs.resize(n);
      ys.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        xs[i] = main_rng() & mask;
        ys[i] = main_rng() & mask;
      }
      accumulate_u(xs, ys, true);
      // MRED replacements for pairs with a zero exact product.
      rx.clear();
      ry.clear();
      for (std::size_t i = 0; i < n; ++i) {
        if (xs[i] * ys[i] != 0) continue;
        std::uint64_t x, y;
        do {
          x = alt_rng() & mask;
          y = alt_rng() & mask;
        } while (x == 0 || y == 0);
        rx.push_back(x);
        ry.push_back(y);
      }
      if (!rx.empty()) {
        rout.resize(rx.size());
        fn(rx, ry, rout);
        for (std::size_t i = 0; i < rx.size(); ++i) {
          const std::uint64_t exact = rx[i] * ry[i];
          red_sum.add(static_cast<long double>(error_distance(rout[i], exact)) / static_cast<long double>(exact));
          ++rep.count_u_plus;
        }
      }
      done += n;
    }
  }

  if (rep.count_u_plus == 0) throw Error("error_report: empty U_+ (no pair has a nonzero exact product)");
  rep.mred = static_cast<double>(red_sum.value() / static_cast<long double>(rep.count_u_plus));
  rep.nmed = static_cast<double>(static_cast<long double>(ed_sum) /
                                 (static_cast<long double>(rep.count_u) * r_max));
  return rep;
}

ErrorReport error_report(const Netlist& net, const InputSet& inputs) {
  if (net.width() != inputs.width)
    throw Error("error_report: netlist width " + std::to_string(net.width()) + " does not match input set width " +
                std::to_string(inputs.width));
  return error_report(product_fn(net), inputs);
}

double mred(const Netlist& net, const InputSet& inputs) { return error_report(net, inputs).mred; }

double nmed(const Netlist& net, const InputSet& inputs) { return error_report(net, inputs).nmed; }

ExactErrorReport exact_error_report(const ProductFn& fn, const InputSet& inputs) {
  inputs.validate();
  if (inputs.mode == InputSet::Mode::Sampled)
    throw Error("exact_error_report: sampled input sets are not supported");
  ExactErrorReport rep;
  boost::multiprecision::cpp_int ed_sum = 0;
  Rational red_sum = 0;
  std::vector<std::uint64_t> out;
  for_each_chunk(inputs, [&](std::span<const std::uint64_t> xs, std::span<const std::uint64_t> ys) {
    out.resize(xs.size());
    fn(xs, ys, out);
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::uint64_t exact = xs[i] * ys[i];
      const std::uint64_t ed = error_distance(out[i], exact);
      ed_sum += ed;
      rep.max_ed = std::max(rep.max_ed, ed);
      ++rep.count_u;
      if (exact > 0) {
        red_sum += Rational(ed, exact);
        ++rep.count_u_plus;
      }
    }
  });
  if (rep.count_u_plus == 0) throw Error("exact_error_report: empty U_+ (no pair has a nonzero exact product)");
  rep.mred = red_sum / rep.count_u_plus;
  rep.nmed = Rational(ed_sum) / (boost::multiprecision::cpp_int(rep.count_u) * max_product(inputs.width));
  return rep;
}

}  // namespace acco
