#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace acco {

/// Minimization convention. violation 0 means feasible.
struct ObjectiveVector {
  std::vector<double> values;
  double violation = 0.0;

  bool feasible() const { return violation <= 0.0; }
};

/// Plain Pareto dominance on values. Throws on arity mismatch.
bool dominates(const ObjectiveVector& u, const ObjectiveVector& v);

/// Feasibility rule: feasible beats infeasible, lower violation wins among
/// infeasible points, dominance decides among feasible points.
/// Returns -1 when u is preferred, 1 when v is preferred, 0 otherwise.
int feasibility_rule(const ObjectiveVector& u, const ObjectiveVector& v);
inline bool constrained_dominates(const ObjectiveVector& u, const ObjectiveVector& v) {
  return feasibility_rule(u, v) < 0;
}

/// Fronts of indices under constrained dominance, best front first.
std::vector<std::vector<std::size_t>> nondominated_sort(std::span<const ObjectiveVector> points);
/// Boundary points get +infinity; interior points the normalized span sum.
std::vector<double> crowding_distance(std::span<const ObjectiveVector> front);

/// Area dominated by the points and bounded by ref. Throws if a point lies
/// beyond ref in any coordinate.
double hypervolume_2d(std::span<const std::array<double, 2>> points, std::array<double, 2> ref);
double hypervolume_2d(std::span<const ObjectiveVector> points, std::array<double, 2> ref);

struct Variable {
  double lower = 0.0;
  double upper = 1.0;
  bool integral = false;
};

using Design = std::vector<double>;

struct MultiObjectiveProblem {
  std::vector<Variable> variables;
  int num_objectives = 2;
  std::function<ObjectiveVector(const Design&)> evaluate;
  std::vector<Design> seeds;  // placed first in the initial population

  bool all_integral() const;
};

struct ArchiveEntry {
  Design x;
  ObjectiveVector f;
  int generation = 0;
};

/// Non-dominated archive under the feasibility rule. Until a feasible point
/// is seen it holds the least-violation points and reports infeasible_only().
class ParetoArchive {
 public:
  /// Returns true when the point was added.
  bool insert(const Design& x, const ObjectiveVector& f, int generation);
  std::span<const ArchiveEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  bool infeasible_only() const { return !entries_.empty() && !entries_.front().f.feasible(); }
  /// True when no member dominates another.
  bool is_consistent() const;
  std::vector<ObjectiveVector> objectives() const;

 private:
  std::vector<ArchiveEntry> entries_;
};

std::string format_archive_csv(const ParetoArchive& archive, std::span<const std::string> variable_names,
                               std::span<const std::string> objective_names);

/// Exhaustive non-dominated set of an all-integral problem.
ParetoArchive enumerate_front(const MultiObjectiveProblem& problem, std::size_t max_designs = 1000000);

struct Nsga2Options {
  std::size_t population = 50;
  int generations = 100;
  std::uint64_t seed = 1;
  double crossover_prob = 0.9;
  double mutation_rate = -1.0;  // per gene; negative selects 1/n
  double eta_c = 15.0;
  double eta_m = 20.0;
};

ParetoArchive nsga2(const MultiObjectiveProblem& problem, const Nsga2Options& opt);

enum class Scalarization { Tchebycheff, WeightedSum };

/// s = max_i λ_i |f_i - z_i|.
double tchebycheff(std::span<const double> lambda, std::span<const double> f, std::span<const double> z);
/// s = Σ λ_i (f_i - z_i).
double weighted_sum(std::span<const double> lambda, std::span<const double> f, std::span<const double> z);
/// Evenly spread weights on the 2-simplex (count >= 2) or the 1-simplex (count = 1 gives (0.5, 0.5)).
std::vector<std::vector<double>> simplex_weights_2d(std::size_t count);

struct MoeadOptions {
  std::size_t subproblems = 50;
  int generations = 100;
  std::size_t neighborhood = 10;
  std::size_t max_replace = 2;
  Scalarization scalarization = Scalarization::Tchebycheff;
  bool normalize = true;
  std::uint64_t seed = 1;
  double crossover_prob = 0.9;
  double mutation_rate = -1.0;
  double eta_c = 15.0;
  double eta_m = 20.0;
};

/// Two-objective MOEA/D.
ParetoArchive moead(const MultiObjectiveProblem& problem, const MoeadOptions& opt);

struct ScalarProblem {
  std::vector<Variable> variables;
  std::function<double(const Design&)> evaluate;
  std::function<double(const Design&)> violation;  // optional, 0 = feasible
  std::vector<Design> seeds;
};

struct ScalarResult {
  Design best_x;
  double best_f = 0.0;
  double best_violation = 0.0;
  /// Best feasible value after each iteration (+inf before the first feasible point).
  std::vector<double> history;
  std::size_t evaluations = 0;
};

struct PsoOptions {
  std::size_t particles = 30;
  std::size_t iterations = 200;
  double inertia = 0.7298;
  double c1 = 1.49618;
  double c2 = 1.49618;
  std::uint64_t seed = 1;
};

ScalarResult pso(const ScalarProblem& problem, const PsoOptions& opt);

/// 1 for delta <= 0, exp(-delta / T) otherwise.
double metropolis_acceptance(double delta, double temperature);

using NeighborFn = std::function<Design(const Design&, std::mt19937_64&)>;

struct SaOptions {
  double t0 = 1.0;
  double alpha = 0.95;
  std::size_t steps = 1000;
  std::uint64_t seed = 1;
  NeighborFn neighbor;  // default: perturb one coordinate
  Design start;         // default: first seed, else uniform random
};

ScalarResult sa(const ScalarProblem& problem, const SaOptions& opt);

/// Default SA move: one coordinate, ±1 on integral variables, Gaussian with
/// 10% of the range otherwise; clamped to bounds.
Design single_coordinate_move(std::span<const Variable> vars, const Design& x, std::mt19937_64& rng);

}  // namespace acco
