#include "acco/optimizers.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "acco/compressor_lib.h"
#include "acco/text_format.h"

namespace acco {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_problem(const MultiObjectiveProblem& p) {
  if (p.variables.empty()) throw Error("optimizer: problem has no variables");
  if (p.num_objectives < 1) throw Error("optimizer: problem needs at least one objective");
  if (!p.evaluate) throw Error("optimizer: problem has no evaluation function");
  for (const auto& v : p.variables)
    if (!(v.lower <= v.upper)) throw Error("optimizer: variable with lower bound above upper bound");
  for (const auto& s : p.seeds)
    if (s.size() != p.variables.size()) throw Error("optimizer: seed design has the wrong length");
}

double clamp_to(const Variable& v, double x) {
  x = std::min(v.upper, std::max(v.lower, x));
  if (v.integral) x = std::min(v.upper, std::max(v.lower, std::round(x)));
  return x;
}

Design random_design(std::span<const Variable> vars, std::mt19937_64& rng) {
  Design x(vars.size());
  for (std::size_t i = 0; i < vars.size(); ++i) {
    const auto& v = vars[i];
    if (v.integral) {
      const auto lo = static_cast<long long>(std::ceil(v.lower));
      const auto hi = static_cast<long long>(std::floor(v.upper));
      x[i] = static_cast<double>(std::uniform_int_distribution<long long>(lo, hi)(rng));
    } else {
      x[i] = std::uniform_real_distribution<double>(v.lower, v.upper)(rng);
    }
  }
  return x;
}

// Variation operators shared by NSGA-II and MOEA/D.
struct Variation {
  std::span<const Variable> vars;
  bool discrete = false;
  double crossover_prob = 0.9;
  double mutation_rate = 0.1;
  double eta_c = 15.0;
  double eta_m = 20.0;

  std::pair<Design, Design> crossover(const Design& a, const Design& b, std::mt19937_64& rng) const {
    Design c1 = a, c2 = b;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (u(rng) >= crossover_prob) return {c1, c2};
    for (std::size_t i = 0; i < vars.size(); ++i) {
      if (discrete) {
        if (u(rng) < 0.5) std::swap(c1[i], c2[i]);
        continue;
      }
      const double r = u(rng);
      if (u(rng) >= 0.5 || std::abs(a[i] - b[i]) < 1e-14) continue;
      const double beta = r <= 0.5 ? std::pow(2.0 * r, 1.0 / (eta_c + 1.0))
                                   : std::pow(1.0 / (2.0 * (1.0 - r)), 1.0 / (eta_c + 1.0));
      const double m = 0.5 * (a[i] + b[i]), h = 0.5 * (a[i] - b[i]);
      c1[i] = clamp_to(vars[i], m + beta * h);
      c2[i] = clamp_to(vars[i], m - beta * h);
    }
    return {c1, c2};
  }

  void mutate(Design& x, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      const double draw = u(rng);
      if (draw >= mutation_rate) continue;
      const auto& v = vars[i];
      if (discrete) {
        const auto lo = static_cast<long long>(std::ceil(v.lower));
        const auto hi = static_cast<long long>(std::floor(v.upper));
        x[i] = static_cast<double>(std::uniform_int_distribution<long long>(lo, hi)(rng));
        continue;
      }
      const double range = v.upper - v.lower;
      if (range <= 0) continue;
      const double r = u(rng);
      const double delta = r < 0.5 ? std::pow(2.0 * r, 1.0 / (eta_m + 1.0)) - 1.0
                                   : 1.0 - std::pow(2.0 * (1.0 - r), 1.0 / (eta_m + 1.0));
      x[i] = clamp_to(v, x[i] + delta * range);
    }
  }
};

// Memoized evaluation; discrete searches revisit designs often.
class CachedEvaluator {
 public:
  explicit CachedEvaluator(const MultiObjectiveProblem& p) : p_(p) {}
  const ObjectiveVector& operator()(const Design& x) {
    auto it = cache_.find(x);
    if (it != cache_.end()) return it->second;
    ObjectiveVector f = p_.evaluate(x);
    if (static_cast<int>(f.values.size()) != p_.num_objectives)
      throw Error("optimizer: evaluation returned " + std::to_string(f.values.size()) + " objectives, expected " +
                  std::to_string(p_.num_objectives));
    for (double v : f.values)
      if (!std::isfinite(v)) throw Error("optimizer: evaluation returned a non-finite objective");
    if (!(f.violation >= 0.0)) throw Error("optimizer: evaluation returned a negative violation");
    return cache_.emplace(x, std::move(f)).first->second;
  }

 private:
  const MultiObjectiveProblem& p_;
  std::map<Design, ObjectiveVector> cache_;
};

std::vector<Design> initial_population(const MultiObjectiveProblem& p, std::size_t n, std::mt19937_64& rng) {
  std::vector<Design> pop;
  for (const auto& s : p.seeds) {
    if (pop.size() == n) break;
    Design x = s;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = clamp_to(p.variables[i], x[i]);
    pop.push_back(std::move(x));
  }
  while (pop.size() < n) pop.push_back(random_design(p.variables, rng));
  return pop;
}

Variation make_variation(const MultiObjectiveProblem& p, double cx, double mut, double eta_c, double eta_m) {
  Variation v;
  v.vars = p.variables;
  v.discrete = p.all_integral();
  v.crossover_prob = cx;
  v.mutation_rate = mut < 0 ? 1.0 / static_cast<double>(p.variables.size()) : mut;
  v.eta_c = eta_c;
  v.eta_m = eta_m;
  return v;
}

}  // namespace

bool dominates(const ObjectiveVector& u, const ObjectiveVector& v) {
  if (u.values.size() != v.values.size())
    throw Error("dominates: arity mismatch (" + std::to_string(u.values.size()) + " vs " +
                std::to_string(v.values.size()) + ")");
  bool strict = false;
  for (std::size_t i = 0; i < u.values.size(); ++i) {
    if (u.values[i] > v.values[i]) return false;
    if (u.values[i] < v.values[i]) strict = true;
  }
  return strict;
}

int feasibility_rule(const ObjectiveVector& u, const ObjectiveVector& v) {
  const bool fu = u.feasible(), fv = v.feasible();
  if (fu && !fv) return -1;
  if (!fu && fv) return 1;
  if (!fu && !fv) return u.violation < v.violation ? -1 : v.violation < u.violation ? 1 : 0;
  if (dominates(u, v)) return -1;
  if (dominates(v, u)) return 1;
  return 0;
}

std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const ObjectiveVector> pts) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> dominated(n);
  std::vector<std::size_t> count(n, 0);
  std::vector<std::vector<std::size_t>> fronts;
  std::vector<std::size_t> current;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const int r = feasibility_rule(pts[i], pts[j]);
      if (r < 0) {
        dominated[i].push_back(j);
        ++count[j];
      } else if (r > 0) {
        dominated[j].push_back(i);
        ++count[i];
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    if (count[i] == 0) current.push_back(i);
  while (!current.empty()) {
    fronts.push_back(current);
    std::vector<std::size_t> next;
    for (std::size_t i : current)
      for (std::size_t j : dominated[i])
        if (--count[j] == 0) next.push_back(j);
    std::sort(next.begin(), next.end());
    current = std::move(next);
  }
  return fronts;
}

std::vector<double> crowding_distance(std::span<const ObjectiveVector> front) {
  const std::size_t n = front.size();
  std::vector<double> d(n, 0.0);
  if (n == 0) return d;
  if (n <= 2) return std::vector<double>(n, kInf);
  const std::size_t m = front[0].values.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t k = 0; k < m; ++k) {
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return front[a].values[k] < front[b].values[k]; });
    const double lo = front[idx.front()].values[k], hi = front[idx.back()].values[k];
    d[idx.front()] = kInf;
    d[idx.back()] = kInf;
    if (hi <= lo) continue;
    for (std::size_t i = 1; i + 1 < n; ++i)
      d[idx[i]] += (front[idx[i + 1]].values[k] - front[idx[i - 1]].values[k]) / (hi - lo);
  }
  return d;
}

double hypervolume_2d(std::span<const std::array<double, 2>> points, std::array<double, 2> ref) {
  std::vector<std::array<double, 2>> pts(points.begin(), points.end());
  for (const auto& p : pts)
    if (p[0] > ref[0] || p[1] > ref[1])
      throw Error("hypervolume_2d: point (" + format_double(p[0]) + ", " + format_double(p[1]) +
                  ") does not dominate the reference point");
  std::sort(pts.begin(), pts.end());
  double area = 0.0;
  double prev_y = ref[1];
  for (const auto& p : pts) {
    if (p[1] >= prev_y) continue;  // dominated by an earlier point
    area += (ref[0] - p[0]) * (prev_y - p[1]);
    prev_y = p[1];
  }
  return area;
}

double hypervolume_2d(std::span<const ObjectiveVector> points, std::array<double, 2> ref) {
  std::vector<std::array<double, 2>> pts;
  for (const auto& p : points) {
    if (p.values.size() != 2) throw Error("hypervolume_2d: expected two objectives");
    pts.push_back({p.values[0], p.values[1]});
  }
  return hypervolume_2d(pts, ref);
}

bool MultiObjectiveProblem::all_integral() const {
  return std::all_of(variables.begin(), variables.end(), [](const Variable& v) { return v.integral; });
}

bool ParetoArchive::insert(const Design& x, const ObjectiveVector& f, int generation) {
  for (const auto& e : entries_)
    if (e.x == x) return false;
  if (entries_.empty()) {
    entries_.push_back({x, f, generation});
    return true;
  }
  const bool arch_feasible = entries_.front().f.feasible();
  if (!f.feasible()) {
    if (arch_feasible) return false;
    const double v = entries_.front().f.violation;
    if (f.violation > v) return false;
    if (f.violation < v) {
      entries_.clear();
      entries_.push_back({x, f, generation});
      return true;
    }
  } else if (!arch_feasible) {
    entries_.clear();
    entries_.push_back({x, f, generation});
    return true;
  }
  for (const auto& e : entries_)
    if (dominates(e.f, f)) return false;
  std::erase_if(entries_, [&](const ArchiveEntry& e) { return dominates(f, e.f); });
  entries_.push_back({x, f, generation});
  return true;
}

bool ParetoArchive::is_consistent() const {
  for (const auto& a : entries_) {
    if (a.f.feasible() != entries_.front().f.feasible()) return false;
    for (const auto& b : entries_)
      if (dominates(a.f, b.f)) return false;
  }
  return true;
}

std::vector<ObjectiveVector> ParetoArchive::objectives() const {
  std::vector<ObjectiveVector> out;
  for (const auto& e : entries_) out.push_back(e.f);
  return out;
}

std::string format_archive_csv(const ParetoArchive& archive, std::span<const std::string> variable_names,
                               std::span<const std::string> objective_names) {
  std::ostringstream os;
  os << "generation";
  for (const auto& n : variable_names) os << ',' << n;
  for (const auto& n : objective_names) os << ',' << n;
  os << ",violation,feasible\n";
  std::vector<ArchiveEntry> sorted(archive.entries().begin(), archive.entries().end());
  std::sort(sorted.begin(), sorted.end(), [](const ArchiveEntry& a, const ArchiveEntry& b) {
    return std::tie(a.f.values, a.x) < std::tie(b.f.values, b.x);
  });
  for (const auto& e : sorted) {
    if (e.x.size() != variable_names.size() || e.f.values.size() != objective_names.size())
      throw Error("format_archive_csv: column names do not match the archive");
    os << e.generation;
    for (double v : e.x) os << ',' << format_double(v);
    for (double v : e.f.values) os << ',' << format_double(v);
    os << ',' << format_double(e.f.violation) << ',' << (e.f.feasible() ? 1 : 0) << '\n';
  }
  return os.str();
}

ParetoArchive enumerate_front(const MultiObjectiveProblem& p, std::size_t max_designs) {
  check_problem(p);
  if (!p.all_integral()) throw Error("enumerate_front: all variables must be integral");
  std::vector<long long> lo, hi;
  double total = 1;
  for (const auto& v : p.variables) {
    lo.push_back(static_cast<long long>(std::ceil(v.lower)));
    hi.push_back(static_cast<long long>(std::floor(v.upper)));
    total *= static_cast<double>(hi.back() - lo.back() + 1);
  }
  if (total > static_cast<double>(max_designs))
    throw Error("enumerate_front: " + format_double(total) + " designs exceed the limit");
  ParetoArchive arch;
  Design x(lo.begin(), lo.end());
  while (true) {
    arch.insert(x, p.evaluate(x), 0);
    std::size_t i = 0;
    for (; i < x.size(); ++i) {
      if (x[i] < static_cast<double>(hi[i])) {
        x[i] += 1;
        break;
      }
      x[i] = static_cast<double>(lo[i]);
    }
    if (i == x.size()) break;
  }
  return arch;
}

ParetoArchive nsga2(const MultiObjectiveProblem& p, const Nsga2Options& opt) {
  check_problem(p);
  if (opt.population < 2 || opt.population % 2 != 0) throw Error("nsga2: population must be even and at least 2");
  if (opt.generations < 0) throw Error("nsga2: negative generation count");
  std::mt19937_64 rng(opt.seed);
  CachedEvaluator eval(p);
  const Variation var = make_variation(p, opt.crossover_prob, opt.mutation_rate, opt.eta_c, opt.eta_m);
  ParetoArchive archive;

  std::vector<Design> pop = initial_population(p, opt.population, rng);
  std::vector<ObjectiveVector> objs;
  for (const auto& x : pop) {
    objs.push_back(eval(x));
    archive.insert(x, objs.back(), 0);
  }
  std::vector<std::size_t> rank(pop.size());
  std::vector<double> crowd(pop.size());
  auto assign_rank = [&] {
    rank.assign(pop.size(), 0);
    crowd.assign(pop.size(), 0.0);
    auto fronts = nondominated_sort(objs);
    for (std::size_t r = 0; r < fronts.size(); ++r) {
      std::vector<ObjectiveVector> fo;
      for (auto i : fronts[r]) fo.push_back(objs[i]);
      auto cd = crowding_distance(fo);
      for (std::size_t k = 0; k < fronts[r].size(); ++k) {
        rank[fronts[r][k]] = r;
        crowd[fronts[r][k]] = cd[k];
      }
    }
  };
  assign_rank();

  std::uniform_int_distribution<std::size_t> pick(0, opt.population - 1);
  auto tournament = [&] {
    const std::size_t a = pick(rng), b = pick(rng);
    if (rank[a] != rank[b]) return rank[a] < rank[b] ? a : b;
    if (crowd[a] != crowd[b]) return crowd[a] > crowd[b] ? a : b;
    return std::min(a, b);
  };

  for (int gen = 1; gen <= opt.generations; ++gen) {
    std::vector<Design> off;
    while (off.size() < opt.population) {
      const auto a = tournament(), b = tournament();
      auto [c1, c2] = var.crossover(pop[a], pop[b], rng);
      var.mutate(c1, rng);
      var.mutate(c2, rng);
      off.push_back(std::move(c1));
      off.push_back(std::move(c2));
    }
    std::vector<Design> all = pop;
    std::vector<ObjectiveVector> all_objs = objs;
    for (auto& x : off) {
      all_objs.push_back(eval(x));
      archive.insert(x, all_objs.back(), gen);
      all.push_back(std::move(x));
    }
    auto fronts = nondominated_sort(all_objs);
    std::vector<std::size_t> keep;
    for (const auto& fr : fronts) {
      if (keep.size() + fr.size() <= opt.population) {
        keep.insert(keep.end(), fr.begin(), fr.end());
        continue;
      }
      std::vector<ObjectiveVector> fo;
      for (auto i : fr) fo.push_back(all_objs[i]);
      auto cd = crowding_distance(fo);
      std::vector<std::size_t> order(fr.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return cd[x] > cd[y]; });
      for (std::size_t k = 0; keep.size() < opt.population; ++k) keep.push_back(fr[order[k]]);
      break;
    }
    std::vector<Design> next_pop;
    std::vector<ObjectiveVector> next_objs;
    for (auto i : keep) {
      next_pop.push_back(all[i]);
      next_objs.push_back(all_objs[i]);
    }
    pop = std::move(next_pop);
    objs = std::move(next_objs);
    assign_rank();
  }
  return archive;
}

double tchebycheff(std::span<const double> lambda, std::span<const double> f, std::span<const double> z) {
  if (lambda.size() != f.size() || z.size() != f.size()) throw Error("tchebycheff: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s = std::max(s, lambda[i] * std::abs(f[i] - z[i]));
  return s;
}

double weighted_sum(std::span<const double> lambda, std::span<const double> f, std::span<const double> z) {
  if (lambda.size() != f.size() || z.size() != f.size()) throw Error("weighted_sum: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += lambda[i] * (f[i] - z[i]);
  return s;
}

std::vector<std::vector<double>> simplex_weights_2d(std::size_t count) {
  if (count == 0) throw Error("simplex_weights_2d: count must be positive");
  if (count == 1) return {{0.5, 0.5}};
  std::vector<std::vector<double>> w;
  for (std::size_t i = 0; i < count; ++i) {
    const double a = static_cast<double>(i) / static_cast<double>(count - 1);
    w.push_back({a, 1.0 - a});
  }
  return w;
}

ParetoArchive moead(const MultiObjectiveProblem& p, const MoeadOptions& opt) {
  check_problem(p);
  if (p.num_objectives != 2) throw Error("moead: only two objectives are supported");
  if (opt.subproblems < 2) throw Error("moead: need at least two subproblems");
  if (opt.generations < 0) throw Error("moead: negative generation count");
  const std::size_t n = opt.subproblems;
  const std::size_t t_nb = std::max<std::size_t>(2, std::min(opt.neighborhood, n));
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  CachedEvaluator eval(p);
  const Variation var = make_variation(p, opt.crossover_prob, opt.mutation_rate, opt.eta_c, opt.eta_m);
  ParetoArchive archive;

  const auto w = simplex_weights_2d(n);
  std::vector<std::vector<std::size_t>> nb(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    auto dist = [&](std::size_t j) { return std::hypot(w[i][0] - w[j][0], w[i][1] - w[j][1]); };
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
    nb[i].assign(idx.begin(), idx.begin() + t_nb);
  }

  std::vector<Design> pop = initial_population(p, n, rng);
  std::vector<ObjectiveVector> objs;
  std::array<double, 2> z{kInf, kInf};
  bool z_feasible = false;
  auto update_z = [&](const ObjectiveVector& f) {
    if (f.feasible() && !z_feasible) {
      z = {kInf, kInf};
      z_feasible = true;
    }
    if (!f.feasible() && z_feasible) return;
    for (int k = 0; k < 2; ++k) z[k] = std::min(z[k], f.values[k]);
  };
  for (const auto& x : pop) {
    objs.push_back(eval(x));
    archive.insert(x, objs.back(), 0);
    update_z(objs.back());
  }

  auto scalar = [&](std::size_t j, const ObjectiveVector& f, const std::array<double, 2>& scale) {
    std::array<double, 2> fn{}, zn{};
    for (int k = 0; k < 2; ++k) {
      fn[k] = f.values[k] / scale[k];
      zn[k] = z[k] / scale[k];
    }
    return opt.scalarization == Scalarization::Tchebycheff ? tchebycheff(w[j], fn, zn) : weighted_sum(w[j], fn, zn);
  };
  auto current_scale = [&] {
    std::array<double, 2> s{1.0, 1.0};
    if (!opt.normalize) return s;
    std::array<double, 2> hi{-kInf, -kInf};
    for (const auto& f : objs)
      if (f.feasible() == z_feasible)
        for (int k = 0; k < 2; ++k) hi[k] = std::max(hi[k], f.values[k]);
    for (int k = 0; k < 2; ++k) {
      const double span = hi[k] - z[k];
      s[k] = std::isfinite(span) && span > 1e-12 * std::max(1.0, std::abs(z[k])) ? span : std::max(1.0, std::abs(z[k]));
    }
    return s;
  };

  for (int gen = 1; gen <= opt.generations; ++gen) {
    const auto scale = current_scale();
    for (std::size_t i = 0; i < n; ++i) {
      const bool local = u(rng) < 0.9;
      std::vector<std::size_t> pool;
      if (local) {
        pool = nb[i];
      } else {
        pool.resize(n);
        std::iota(pool.begin(), pool.end(), 0);
      }
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const std::size_t a = pool[pick(rng)], b = pool[pick(rng)];
      auto child = var.crossover(pop[a], pop[b], rng).first;
      var.mutate(child, rng);
      const ObjectiveVector fc = eval(child);
      archive.insert(child, fc, gen);
      update_z(fc);
      std::shuffle(pool.begin(), pool.end(), rng);
      std::size_t replaced = 0;
      for (std::size_t j : pool) {
        if (replaced >= opt.max_replace) break;
        const auto& fj = objs[j];
        bool better;
        if (fc.feasible() && fj.feasible())
          better = scalar(j, fc, scale) < scalar(j, fj, scale);
        else
          better = feasibility_rule(fc, fj) < 0 || (!fc.feasible() && !fj.feasible() && fc.violation < fj.violation);
        if (better) {
          pop[j] = child;
          objs[j] = fc;
          ++replaced;
        }
      }
    }
  }
  return archive;
}

namespace {

struct Scored {
  Design x;
  double f = 0.0;
  double v = 0.0;
};

bool better(const Scored& a, const Scored& b) {
  const bool fa = a.v <= 0.0, fb = b.v <= 0.0;
  if (fa && fb) return a.f < b.f;
  if (fa != fb) return fa;
  return a.v < b.v || (a.v == b.v && a.f < b.f);
}

void check_scalar(const ScalarProblem& p) {
  if (p.variables.empty()) throw Error("optimizer: problem has no variables");
  if (!p.evaluate) throw Error("optimizer: problem has no evaluation function");
  for (const auto& v : p.variables)
    if (!(v.lower <= v.upper)) throw Error("optimizer: variable with lower bound above upper bound");
}

Scored score(const ScalarProblem& p, Design x, std::size_t& evals) {
  Scored s;
  s.f = p.evaluate(x);
  s.v = p.violation ? p.violation(x) : 0.0;
  if (std::isnan(s.f) || !(s.v >= 0.0)) throw Error("optimizer: evaluation returned NaN or a negative violation");
  s.x = std::move(x);
  ++evals;
  return s;
}

void record(ScalarResult& r, const Scored& best) {
  r.best_x = best.x;
  r.best_f = best.f;
  r.best_violation = best.v;
  r.history.push_back(best.v <= 0.0 ? best.f : kInf);
}

}  // namespace

ScalarResult pso(const ScalarProblem& p, const PsoOptions& opt) {
  check_scalar(p);
  if (opt.particles == 0) throw Error("pso: need at least one particle");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t dim = p.variables.size();
  ScalarResult res;
  std::vector<Design> x;
  std::vector<Design> vel(opt.particles, Design(dim, 0.0));
  for (std::size_t i = 0; i < opt.particles; ++i) {
    Design d = i < p.seeds.size() ? p.seeds[i] : random_design(p.variables, rng);
    for (std::size_t k = 0; k < dim; ++k) {
      d[k] = clamp_to(p.variables[k], d[k]);
      const double range = p.variables[k].upper - p.variables[k].lower;
      vel[i][k] = (u(rng) - 0.5) * 0.2 * range;
    }
    x.push_back(std::move(d));
  }
  std::vector<Scored> pbest;
  for (const auto& d : x) pbest.push_back(score(p, d, res.evaluations));
  Scored gbest = pbest[0];
  for (const auto& s : pbest)
    if (better(s, gbest)) gbest = s;
  record(res, gbest);

  for (std::size_t it = 1; it <= opt.iterations; ++it) {
    for (std::size_t i = 0; i < opt.particles; ++i) {
      for (std::size_t k = 0; k < dim; ++k) {
        const auto& var = p.variables[k];
        const double range = var.upper - var.lower;
        const double r1 = u(rng), r2 = u(rng);
        double v = opt.inertia * vel[i][k] + opt.c1 * r1 * (pbest[i].x[k] - x[i][k]) +
                   opt.c2 * r2 * (gbest.x[k] - x[i][k]);
        v = std::max(-range, std::min(range, v));
        double nx = x[i][k] + v;
        if (nx < var.lower || nx > var.upper) v = 0.0;
        vel[i][k] = v;
        x[i][k] = clamp_to(var, nx);
      }
      Scored s = score(p, x[i], res.evaluations);
      if (better(s, pbest[i])) pbest[i] = s;
      if (better(s, gbest)) gbest = s;
    }
    record(res, gbest);
  }
  return res;
}

double metropolis_acceptance(double delta, double temperature) {
  if (delta <= 0.0) return 1.0;
  if (!(temperature > 0.0)) return 0.0;
  return std::exp(-delta / temperature);
}

Design single_coordinate_move(std::span<const Variable> vars, const Design& x, std::mt19937_64& rng) {
  std::vector<std::size_t> movable;
  for (std::size_t k = 0; k < vars.size(); ++k)
    if (vars[k].upper > vars[k].lower) movable.push_back(k);
  Design y = x;
  if (movable.empty()) return y;
  const std::size_t k = movable[std::uniform_int_distribution<std::size_t>(0, movable.size() - 1)(rng)];
  const auto& v = vars[k];
  if (v.integral) {
    double step = std::uniform_int_distribution<int>(0, 1)(rng) ? 1.0 : -1.0;
    if (y[k] + step > v.upper || y[k] + step < v.lower) step = -step;
    y[k] = clamp_to(v, y[k] + step);
  } else {
    std::normal_distribution<double> nd(0.0, 0.1 * (v.upper - v.lower));
    y[k] = clamp_to(v, y[k] + nd(rng));
  }
  return y;
}

ScalarResult sa(const ScalarProblem& p, const SaOptions& opt) {
  check_scalar(p);
  if (!(opt.t0 >= 0.0) || !(opt.alpha > 0.0 && opt.alpha <= 1.0)) throw Error("sa: invalid cooling schedule");
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ScalarResult res;
  Design start = !opt.start.empty() ? opt.start : !p.seeds.empty() ? p.seeds.front() : random_design(p.variables, rng);
  if (start.size() != p.variables.size()) throw Error("sa: start point has the wrong length");
  for (std::size_t k = 0; k < start.size(); ++k) start[k] = clamp_to(p.variables[k], start[k]);
  Scored cur = score(p, start, res.evaluations);
  Scored best = cur;
  record(res, best);
  double temp = opt.t0;
  for (std::size_t step = 1; step <= opt.steps; ++step) {
    Design y = opt.neighbor ? opt.neighbor(cur.x, rng) : single_coordinate_move(p.variables, cur.x, rng);
    Scored cand = score(p, std::move(y), res.evaluations);
    const double draw = u(rng);
    bool accept;
    const bool fc = cur.v <= 0.0, fn = cand.v <= 0.0;
    if (fc && fn)
      accept = draw < metropolis_acceptance(cand.f - cur.f, temp);
    else if (fn)
      accept = true;
    else if (fc)
      accept = false;
    else
      accept = draw < metropolis_acceptance(cand.v - cur.v, temp);
    if (accept) cur = std::move(cand);
    if (better(cur, best)) best = cur;
    record(res, best);
    temp *= opt.alpha;
  }
  return res;
}

}  // namespace acco
