#include "acco/sram_macro.h"

#include <cmath>
#include <map>
#include <limits>
#include <random>
#include <tuple>

#include "acco/text_format.h"

namespace acco {

namespace {

bool is_pow2(long long v) { return v > 0 && (v & (v - 1)) == 0; }

int ilog2(long long v) {
  int k = 0;
  while (v > 1) {
    v >>= 1;
    ++k;
  }
  return k;
}

}  // namespace

SramCoefficients parse_sram_coefficients(const std::string& text, const std::string& source) {
  const auto kv = KeyValues::parse(text, source);
  kv.require_known({"t_dec_ps", "t_bl_ps", "t_wbl_ps", "t_mux_ps", "t_sa_ps", "t_wd_ps", "t_route_ps", "p_bl_rd_uw",
                    "p_bl_wr_uw", "p_dec_uw", "p_per_uw", "p_wd_uw", "a_cell_um2", "a_row_um2", "a_col_um2",
                    "a_array_um2", "mu_set", "r_min", "r_max", "c_min", "c_max", "cell_read_margin_mv",
                    "cell_write_margin_mv", "cell_hold_margin_mv", "cell_t_read_ps", "cell_t_write_ps",
                    "cell_p_width_uw", "cell_a_width_um2", "cell_a_fixed_um2"});
  SramCoefficients k;
  auto get = [&](const char* key) {
    const double v = kv.get_double(key, 0.0);
    if (!(v >= 0) || !std::isfinite(v)) throw ParseError(source + ": '" + key + "' must be non-negative");
    return v;
  };
  k.t_dec = get("t_dec_ps");
  k.t_bl = get("t_bl_ps");
  k.t_wbl = get("t_wbl_ps");
  k.t_mux = get("t_mux_ps");
  k.t_sa = get("t_sa_ps");
  k.t_wd = get("t_wd_ps");
  k.t_route = get("t_route_ps");
  k.p_bl_rd = get("p_bl_rd_uw");
  k.p_bl_wr = get("p_bl_wr_uw");
  k.p_dec = get("p_dec_uw");
  k.p_per = get("p_per_uw");
  k.p_wd = get("p_wd_uw");
  k.a_cell = get("a_cell_um2");
  k.a_row = get("a_row_um2");
  k.a_col = get("a_col_um2");
  k.a_array = get("a_array_um2");
  if (kv.has("mu_set")) {
    k.mu_set.clear();
    for (double m : kv.get_doubles("mu_set")) {
      if (m != std::round(m) || !is_pow2(static_cast<long long>(m)))
        throw ParseError(source + ": mu_set entries must be powers of two");
      k.mu_set.push_back(static_cast<int>(m));
    }
  }
  k.r_min = static_cast<int>(kv.get_int("r_min", 2));
  k.r_max = static_cast<int>(kv.get_int("r_max", 512));
  k.c_min = static_cast<int>(kv.get_int("c_min", 2));
  k.c_max = static_cast<int>(kv.get_int("c_max", 256));
  for (int v : {k.r_min, k.r_max, k.c_min, k.c_max})
    if (!is_pow2(v)) throw ParseError(source + ": grid bounds must be powers of two");
  k.cell_read_margin = get("cell_read_margin_mv");
  k.cell_write_margin = get("cell_write_margin_mv");
  k.cell_hold_margin = get("cell_hold_margin_mv");
  k.cell_t_read = get("cell_t_read_ps");
  k.cell_t_write = get("cell_t_write_ps");
  k.cell_p_width = get("cell_p_width_uw");
  k.cell_a_width = get("cell_a_width_um2");
  k.cell_a_fixed = get("cell_a_fixed_um2");
  return k;
}

SramCoefficients load_sram_coefficients(const std::string& path) {
  return parse_sram_coefficients(read_text_file(path), path);
}

std::vector<BankConfig> enumerate_configs(long long capacity, std::span<const int> mu_set, int r_min, int r_max,
                                          int c_min, int c_max) {
  if (!is_pow2(capacity)) throw Error("enumerate_configs: capacity must be a power of two");
  std::vector<BankConfig> out;
  for (long long r = r_min; r <= r_max; r *= 2)
    for (long long c = c_min; c <= c_max; c *= 2) {
      if (capacity % (r * c) != 0) continue;
      for (int mu : mu_set) out.push_back({static_cast<int>(r), static_cast<int>(c), mu, capacity / (r * c)});
    }
  return out;
}

std::vector<BankConfig> enumerate_configs(long long capacity, const SramCoefficients& k) {
  return enumerate_configs(capacity, k.mu_set, k.r_min, k.r_max, k.c_min, k.c_max);
}

BankMetrics bank_model(const BankConfig& cfg, const SramCoefficients& k) {
  if (cfg.r < 1 || cfg.c < 1 || cfg.mu < 1 || cfg.n_a < 1) throw Error("bank_model: invalid configuration");
  const double r = cfg.r, c = cfg.c, mu = cfg.mu, na = static_cast<double>(cfg.n_a);
  const double dec = std::log2(r * na);
  const double route = k.t_route * std::sqrt(na);
  BankMetrics m;
  m.d_rd = k.t_dec * dec + k.t_bl * r + k.t_mux * std::log2(mu) + k.t_sa + route;
  m.d_wr = k.t_dec * dec + k.t_wbl * r + k.t_mux * std::log2(mu) + k.t_wd + route;
  m.p_rd = k.p_bl_rd * (c / mu) * r + k.p_dec * dec + k.p_per * na;
  m.p_wr = k.p_bl_wr * (c / mu) * r + k.p_dec * dec + k.p_per * na + k.p_wd * (c / mu);
  m.area = na * (r * c * k.a_cell + r * k.a_row + c * k.a_col + k.a_array);
  return m;
}

BankMetrics evaluate_bank(const BankConfig& cfg, long long capacity, const SramCoefficients& k) {
  if (static_cast<long long>(cfg.r) * cfg.c * cfg.n_a != capacity)
    throw Error("evaluate_bank: r*c*n_a = " + std::to_string(static_cast<long long>(cfg.r) * cfg.c * cfg.n_a) +
                " does not match capacity " + std::to_string(capacity));
  return bank_model(cfg, k);
}

double fom_value(double p_watt, double area_um2, double d_seconds) {
  if (!(p_watt > 0) || !(area_um2 > 0) || !(d_seconds > 0)) throw Error("fom: metrics must be positive");
  return -(std::log10(p_watt) + 0.5 * std::log10(area_um2) + std::log10(d_seconds));
}

double fom(const BankMetrics& m) { return fom_value(m.p_max() * 1e-6, m.area, m.d_max() * 1e-12); }

namespace {

bool better_result(const BankResult& a, const BankResult& b) {
  if (a.fom != b.fom) return a.fom > b.fom;
  return std::tie(a.cfg.r, a.cfg.c, a.cfg.mu) < std::tie(b.cfg.r, b.cfg.c, b.cfg.mu);
}

std::vector<BankResult> pareto_front(const std::vector<BankResult>& rs) {
  std::vector<BankResult> front;
  for (const auto& a : rs) {
    bool dominated = false;
    for (const auto& b : rs) {
      const double pa = a.metrics.p_max(), da = a.metrics.d_max(), pb = b.metrics.p_max(), db = b.metrics.d_max();
      if (pb <= pa && db <= da && (pb < pa || db < da)) {
        dominated = true;
        break;
      }
    }
    if (!dominated) front.push_back(a);
  }
  std::sort(front.begin(), front.end(), [](const BankResult& a, const BankResult& b) {
    if (a.metrics.p_max() != b.metrics.p_max()) return a.metrics.p_max() < b.metrics.p_max();
    return better_result(a, b);
  });
  return front;
}

}  // namespace

BankSearchResult search_bank(long long capacity, const SramCoefficients& k, const BankSearchOptions& opt) {
  if (!is_pow2(capacity)) throw Error("search_bank: capacity must be a power of two");
  if (k.mu_set.empty()) throw Error("search_bank: empty mux set");
  BankSearchResult res;
  std::map<std::tuple<int, int, int>, BankResult> seen;
  auto eval = [&](const BankConfig& cfg) {
    ++res.evaluations;
    auto key = std::make_tuple(cfg.r, cfg.c, cfg.mu);
    auto it = seen.find(key);
    if (it != seen.end()) return it->second;
    BankResult br{cfg, evaluate_bank(cfg, capacity, k), 0.0};
    br.fom = fom(br.metrics);
    seen.emplace(key, br);
    return br;
  };

  if (opt.method == SearchMethod::Scan) {
    for (const auto& cfg : enumerate_configs(capacity, k)) eval(cfg);
  } else {
    // Index grid: log2(r / r_min), log2(c / c_min), position in the mux set.
    ScalarProblem p;
    p.variables = {Variable{0, static_cast<double>(ilog2(k.r_max / k.r_min)), true},
                   Variable{0, static_cast<double>(ilog2(k.c_max / k.c_min)), true},
                   Variable{0, static_cast<double>(k.mu_set.size() - 1), true}};
    auto decode = [&](const Design& x) {
      const long long r = static_cast<long long>(k.r_min) << static_cast<int>(x[0]);
      const long long c = static_cast<long long>(k.c_min) << static_cast<int>(x[1]);
      return std::make_pair(r, c);
    };
    p.violation = [&](const Design& x) {
      const auto [r, c] = decode(x);
      return r * c > capacity ? std::log2(static_cast<double>(r * c) / static_cast<double>(capacity)) : 0.0;
    };
    p.evaluate = [&](const Design& x) {
      const auto [r, c] = decode(x);
      if (r * c > capacity) {
        ++res.evaluations;
        return 0.0;
      }
      const BankConfig cfg{static_cast<int>(r), static_cast<int>(c), k.mu_set[static_cast<std::size_t>(x[2])],
                           capacity / (r * c)};
      return -eval(cfg).fom;
    };
    const std::size_t budget = std::max<std::size_t>(opt.budget, 20);
    if (opt.method == SearchMethod::Pso) {
      PsoOptions po;
      po.particles = 10;
      po.iterations = budget / po.particles - 1;
      po.seed = opt.seed;
      pso(p, po);
    } else {
      SaOptions so;
      so.steps = budget - 1;
      so.t0 = 0.5;
      so.alpha = std::pow(1e-3 / so.t0, 1.0 / static_cast<double>(so.steps));
      so.seed = opt.seed;
      sa(p, so);
    }
  }
  for (const auto& [key, br] : seen) res.ranked.push_back(br);
  if (res.ranked.empty()) throw Error("search_bank: no feasible configuration evaluated");
  std::sort(res.ranked.begin(), res.ranked.end(), better_result);
  res.best = res.ranked.front();
  res.front = pareto_front(res.ranked);
  return res;
}

double BitcellMetrics::fom() const {
  if (!(margin_min() > 0) || !(power > 0) || !(delay > 0) || !(area > 0))
    throw Error("bitcell fom: metrics must be positive");
  return std::log10(margin_min()) - (std::log10(power) + std::log10(delay) + 0.5 * std::log10(area));
}

BitcellMetrics bitcell_nominal(double s_pu, double s_pd, double s_pg, const BitcellDesign& d, const PvtCorner& corner,
                               const SramCoefficients& k) {
  BitcellMetrics m;
  const double beta = s_pd / s_pg, gamma = s_pg / s_pu;
  m.read_margin = k.cell_read_margin * beta / (1.0 + beta);
  m.write_margin = k.cell_write_margin * gamma / (1.0 + gamma);
  m.hold_margin = k.cell_hold_margin * (s_pu + s_pd) / (s_pu + s_pd + 1.0);
  const double t_rd = k.cell_t_read * (1.0 / s_pg + 1.0 / s_pd);
  const double t_wr = k.cell_t_write / s_pg * (1.0 + 0.5 * s_pu / s_pg);
  m.delay = corner.delay_scale * std::max(t_rd, t_wr);
  const double width = 2.0 * (d.w_pu + d.w_pd + d.w_pg);
  m.power = corner.power_scale * k.cell_p_width * width;
  m.area = k.cell_a_fixed + k.cell_a_width * width;
  return m;
}

BitcellMetrics mc_bitcell_eval(const BitcellDesign& d, const VariationSpec& v, const SramCoefficients& k) {
  if (v.n_mc < 1) throw Error("mc_bitcell_eval: n_mc must be at least 1");
  if (!(v.sigma >= 0)) throw Error("mc_bitcell_eval: sigma must be non-negative");
  if (v.corners.empty()) throw Error("mc_bitcell_eval: empty corner set");
  if (!(d.w_pu > 0) || !(d.w_pd > 0) || !(d.w_pg > 0)) throw Error("mc_bitcell_eval: widths must be positive");
  BitcellMetrics worst;
  bool first = true;
  for (std::size_t i = 0; i < v.n_mc; ++i) {
    std::seed_seq ss{static_cast<std::uint32_t>(v.seed), static_cast<std::uint32_t>(v.seed >> 32),
                     static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(ss);
    std::normal_distribution<double> z(0.0, 1.0);
    auto strength = [&](double w) { return w * std::max(0.05, 1.0 + v.sigma * z(rng)); };
    const double s_pu = strength(d.w_pu), s_pd = strength(d.w_pd), s_pg = strength(d.w_pg);
    for (const auto& corner : v.corners) {
      const auto m = bitcell_nominal(s_pu, s_pd, s_pg, d, corner, k);
      if (first) {
        worst = m;
        first = false;
        continue;
      }
      worst.hold_margin = std::min(worst.hold_margin, m.hold_margin);
      worst.read_margin = std::min(worst.read_margin, m.read_margin);
      worst.write_margin = std::min(worst.write_margin, m.write_margin);
      worst.delay = std::max(worst.delay, m.delay);
      worst.power = std::max(worst.power, m.power);
    }
  }
  return worst;
}

namespace {

struct BitcellGrid {
  std::vector<Variable> vars;
  BitcellBounds b;
  double pitch = 0;

  BitcellGrid(const BitcellBounds& bounds, double pitch_) : b(bounds), pitch(pitch_) {
    const double lo[] = {b.lower.w_pu, b.lower.w_pd, b.lower.w_pg};
    const double hi[] = {b.upper.w_pu, b.upper.w_pd, b.upper.w_pg};
    for (int i = 0; i < 3; ++i) {
      if (!(lo[i] > 0) || !(lo[i] <= hi[i])) throw Error("bitcell bounds must satisfy 0 < lower <= upper");
      if (pitch > 0)
        vars.push_back(Variable{0, std::floor((hi[i] - lo[i]) / pitch + 1e-9), true});
      else
        vars.push_back(Variable{lo[i], hi[i], false});
    }
  }

  BitcellDesign decode(const Design& x) const {
    if (pitch <= 0) return {x[0], x[1], x[2]};
    return {b.lower.w_pu + x[0] * pitch, b.lower.w_pd + x[1] * pitch, b.lower.w_pg + x[2] * pitch};
  }
};

}  // namespace

BitcellResult optimize_bitcell(const BitcellBounds& b, const VariationSpec& v, const SramCoefficients& k,
                               const BitcellOptions& opt) {
  const BitcellGrid grid(b, opt.pitch);
  BitcellResult res;
  double best = -std::numeric_limits<double>::infinity();
  auto consider = [&](const Design& x) {
    ++res.evaluations;
    const auto d = grid.decode(x);
    const auto m = mc_bitcell_eval(d, v, k);
    const double f = m.fom();
    if (f > best) {
      best = f;
      res.best = d;
      res.metrics = m;
    }
    return f;
  };
  if (opt.method == SearchMethod::Scan) {
    if (opt.pitch <= 0) throw Error("optimize_bitcell: grid scan needs a positive pitch");
    Design x(3);
    for (x[0] = 0; x[0] <= grid.vars[0].upper; x[0] += 1)
      for (x[1] = 0; x[1] <= grid.vars[1].upper; x[1] += 1)
        for (x[2] = 0; x[2] <= grid.vars[2].upper; x[2] += 1) consider(x);
    return res;
  }
  ScalarProblem p;
  p.variables = grid.vars;
  p.evaluate = [&](const Design& x) { return -consider(x); };
  const std::size_t budget = std::max<std::size_t>(opt.budget, 40);
  if (opt.method == SearchMethod::Pso) {
    PsoOptions po;
    po.particles = 20;
    po.iterations = budget / po.particles - 1;
    po.seed = opt.seed;
    pso(p, po);
  } else {
    SaOptions so;
    so.steps = budget - 1;
    so.t0 = 0.2;
    so.alpha = std::pow(1e-4 / so.t0, 1.0 / static_cast<double>(so.steps));
    so.seed = opt.seed;
    sa(p, so);
  }
  return res;
}

ParetoArchive bitcell_front(const BitcellBounds& b, const VariationSpec& v, const SramCoefficients& k,
                            const Nsga2Options& opt) {
  const BitcellGrid grid(b, 0.0);
  MultiObjectiveProblem p;
  p.variables = grid.vars;
  p.evaluate = [&](const Design& x) {
    const auto m = mc_bitcell_eval(grid.decode(x), v, k);
    return ObjectiveVector{{-m.margin_min(), m.power * m.delay}, 0.0};
  };
  return nsga2(p, opt);
}

}  // namespace acco
