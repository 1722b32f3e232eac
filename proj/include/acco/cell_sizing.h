#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "acco/compressor_lib.h"
#include "acco/optimizers.h"

namespace acco {

/// Logical-effort parameters of one gate kind. `devices` is the transistor
/// count of each of the pull-up and pull-down networks.
struct GateKind {
  std::string name;
  double g = 1.0;
  double p = 1.0;
  int fanin = 1;
  int devices = 1;
};

struct PvtCorner {
  std::string name = "TT";
  double delay_scale = 1.0;
  double power_scale = 1.0;
};

struct SizingParams {
  double tau_ps = 5.0;          // delay of a unit inverter driving its own input cap
  double kappa_uw = 1.0;        // power per unit switched capacitance at activity 1
  double lambda_area_um2 = 0.05;
  double w_min = 1.0;
  double beta_min = 0.5;        // allowed pull-up/pull-down width ratio
  double beta_max = 3.0;
  std::map<std::string, GateKind> kinds;
  std::vector<PvtCorner> corners;  // empty means nominal only

  const GateKind& kind(const std::string& name) const;
};

SizingParams parse_gate_params(const std::string& text);
SizingParams load_gate_params(const std::string& path);

struct WidthGroup {
  std::string name;
  double lower = 1.0;
  double upper = 8.0;
};

/// Signal ids: primary inputs first, then one per gate in file order.
/// kConst0 / kConst1 tie an output to a constant.
inline constexpr int kConst0 = -1;
inline constexpr int kConst1 = -2;

struct ChainGate {
  std::string name;
  std::string kind;
  int pu_group = 0;
  int pd_group = 0;
  std::vector<int> inputs;
  double activity = 0.5;
};

struct ChainOutput {
  std::string name;
  int signal = kConst0;
};

/// Gate-level implementation of one compressor with width-sharing groups.
struct GateChain {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<WidthGroup> groups;
  std::vector<ChainGate> gates;  // topological order
  std::vector<ChainOutput> outputs;
  double load = 4.0;             // external load per driven output, unit-inverter input caps

  int signal_count() const { return static_cast<int>(inputs.size() + gates.size()); }
  std::vector<Variable> variables() const;
};

GateChain parse_chain(const std::string& text, const SizingParams& params);
GateChain load_chain_file(const std::string& path, const SizingParams& params);

/// Logic value of each output (bit j = output j) for one input pattern given
/// MSB-first, i.e. inputs[0] is the top bit.
std::uint32_t simulate_chain(const GateChain& chain, std::uint32_t pattern);
/// True when the chain implements `table` on every row.
bool chain_implements(const GateChain& chain, const TruthTable& table);

using WidthVector = std::vector<double>;

struct Correctness {
  bool feasible = true;
  double violation = 0.0;
};

/// Ratio and minimum-width box constraints standing in for a voltage-level check.
Correctness correctness_surrogate(std::span<const double> w, const GateChain& chain, const SizingParams& params);

struct SizingMetrics {
  double delay_ps = 0.0;
  double power_uw = 0.0;
  double area_um2 = 0.0;
  double pdp_fj = 0.0;
  bool feasible = true;
  double violation = 0.0;  // correctness plus bound excess
};

/// D = tau * longest path of (g*h + p), h = C_load / C_in, C_in = g * (w_pu + w_pd) / 2.
/// P = kappa * sum of activity * switched cap (fanout inputs, external load, p * size).
/// A = lambda * sum of devices * (w_pu + w_pd).
SizingMetrics eval_sizing(std::span<const double> w, const GateChain& chain, const SizingParams& params,
                          const PvtCorner& corner = {});
/// Worst case over corners: max delay, max power, max PDP; area is shared.
SizingMetrics worst_case(std::span<const double> w, const GateChain& chain, const SizingParams& params,
                         std::span<const PvtCorner> corners);

enum class SizingMethod { Moead, Nsga2 };

struct SizingOptions {
  SizingMethod method = SizingMethod::Moead;
  std::size_t population = 40;
  int generations = 60;  // 0 evaluates the seeds only
  std::uint64_t seed = 1;
};

struct SizingResult {
  ParetoArchive archive;  // objectives (PDP, A)
  WidthVector reference;  // all ones
  SizingMetrics reference_metrics;
};

/// Bi-objective (PDP, A) search over group widths. Seeds are the all-ones
/// reference and the all-lower-bound corner.
SizingResult optimize_cell(const GateChain& chain, const SizingParams& params, std::span<const PvtCorner> corners,
                           const SizingOptions& opt);

}  // namespace acco
