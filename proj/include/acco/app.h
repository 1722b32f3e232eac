#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "acco/compressor_lib.h"
#include "acco/image.h"
#include "acco/multiplier.h"
#include "acco/optimizers.h"
#include "acco/pea_gnn.h"
#include "acco/ppa_model.h"

namespace acco {

/// Settings shared by every command. Loaded from a key = value file; see
/// README for the key list. Relative paths resolve against the working directory.
struct RunConfig {
  int width = 8;
  std::string library = ACCO_DATA_DIR "/compressors.lib";
  std::string tech = ACCO_DATA_DIR "/tech_default.tech";
  std::uint64_t seed = 1;
  std::string out_dir = "acco_out";
  bool exact_verify = false;

  // gen-dataset / train
  std::size_t dataset_count = 5000;
  std::string dataset;  // empty: <out_dir>/dataset.csv
  std::string model;    // empty: <out_dir>/model.txt
  int epochs = 60;
  double lr = 2e-3;
  std::size_t batch = 32;

  // search-arch
  double nmed_budget = 1.0;
  double mred_budget = -1.0;  // < 0 disables
  std::string optimizer = "nsga2";
  std::size_t population = 50;
  int generations = 100;
  std::string evaluator = "surrogate";  // or "oracle"
  std::vector<std::string> alphabet;    // compressor names; empty: all
  std::vector<int> free_slots;          // 1-based; empty: all
  std::vector<double> case_budgets{0.0012, 0.0008, 0.0004, 0.0002, 0.0001};

  // size-cells
  std::string gates = ACCO_DATA_DIR "/gates.param";
  std::string chains_dir = ACCO_DATA_DIR "/chains";
  std::vector<std::string> cells;  // empty: every *.chain file
  std::string sizing_method = "moead";
  std::size_t sizing_population = 40;
  int sizing_generations = 60;

  // sram
  std::string sram_coef = ACCO_DATA_DIR "/sram_default.coef";
  long long capacity = 32768;
  std::string sram_method = "scan";
  std::size_t sram_budget = 200;

  // blend / eval
  std::string image_a;  // empty: synthetic gradient
  std::string image_b;  // empty: synthetic checkerboard + noise
  int image_size = 128;
  double alpha = 0.5;
  std::string design = "exact";  // "exact" or comma-separated compressor names
  std::string designs;           // CSV with an `assignment` column; overrides design for blend

  /// Throws when budgets are negative or referenced files are missing.
  void validate() const;
  std::string dataset_path() const;
  std::string model_path() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& source = "config");
RunConfig load_run_config(const std::string& path);
/// key = value dump in a fixed key order.
std::string format_run_config(const RunConfig& cfg);

/// "exact" or t comma/space separated names.
std::vector<std::size_t> parse_assignment(const std::string& text, const CellLibrary& lib, int width);
std::string format_assignment(std::span<const std::size_t> a, const CellLibrary& lib);

struct ArchMetrics {
  double mred = 0, nmed = 0, delay_ps = 0, area_um2 = 0, power_uw = 0;
  double pdp_fj() const { return power_uw * delay_ps * kPdpScale; }
};

ArchMetrics oracle_metrics(const MultiplierConfig& cfg, const TechTable& tech);
ArchMetrics surrogate_metrics(const SurrogateModel& model, const GraphFactory& factory,
                              std::span<const std::size_t> assignment);

/// Slot assignment space: free slots range over the alphabet, others stay exact.
struct ArchSpace {
  int width = 8;
  const CellLibrary* lib = nullptr;
  std::vector<std::size_t> alphabet;  // library indices
  std::vector<int> free_slots;        // 1-based

  std::vector<std::size_t> decode(const Design& x) const;
  /// alphabet^free_slots, saturated at UINT64_MAX.
  std::uint64_t cardinality() const;
};

ArchSpace make_arch_space(const CellLibrary& lib, int width, const std::vector<std::string>& alphabet,
                          const std::vector<int>& free_slots);

struct ArchSearchOptions {
  std::string optimizer = "nsga2";  // nsga2 | moead
  std::size_t population = 50;
  int generations = 100;
  std::uint64_t seed = 1;
  double nmed_budget = 1.0;
  double mred_budget = -1.0;
  bool exact_verify = false;
};

struct ArchPoint {
  std::vector<std::size_t> assignment;
  ArchMetrics search;                 // values the optimizer saw
  std::optional<ArchMetrics> oracle;  // exhaustive/sampled re-check
  int generation = 0;
};

struct ArchSearchResult {
  std::vector<ArchPoint> front;  // sorted by (MRED, PDP)
  bool infeasible = false;       // no design met the budget
  double least_violation = 0.0;
  std::size_t evaluations = 0;
  std::size_t dropped = 0;  // archive members that failed the oracle budget re-check
};

/// Objective vector (MRED, PDP) with violation max(0, NMED - eps) (+ MRED excess).
/// With a model the optimizer sees surrogate predictions; every reported point
/// is re-checked with the oracle and dropped if it misses the budget.
ArchSearchResult search_arch(const ArchSpace& space, const TechTable& tech, const SurrogateModel* model,
                             const ArchSearchOptions& opt);
/// The same problem as search_arch evaluated by the oracle, for enumeration.
MultiObjectiveProblem arch_problem(const ArchSpace& space, const TechTable& tech, double nmed_budget,
                                   double mred_budget = -1.0);

std::string format_front_csv(const ArchSearchResult& r, const CellLibrary& lib, bool with_oracle);

struct BudgetCase {
  double budget = 0;
  std::optional<ArchPoint> point;  // lowest PDP with oracle NMED <= budget
};
std::vector<BudgetCase> pick_budget_cases(const ArchSearchResult& r, const std::vector<double>& budgets);

struct CommandResult {
  std::string summary;  // one machine-readable line
  int status = 0;       // nonzero: the command ran but reports a failure (e.g. infeasible budget)
};

/// Command entry points. Each writes CSV artifacts plus manifest.txt under
/// cfg.out_dir. Errors throw.
CommandResult cmd_gen_dataset(const RunConfig& cfg);
CommandResult cmd_train(const RunConfig& cfg);
CommandResult cmd_search_arch(const RunConfig& cfg);
CommandResult cmd_size_cells(const RunConfig& cfg);
CommandResult cmd_sram(const RunConfig& cfg);
CommandResult cmd_blend(const RunConfig& cfg);
CommandResult cmd_eval(const RunConfig& cfg);

}  // namespace acco
