#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "acco/compressor_lib.h"
#include "acco/multiplier.h"
#include "acco/ppa_model.h"

namespace acco {

inline constexpr int kNumTargets = 5;  // MRED, NMED, D, A, P
inline constexpr int kDefaultHiddenDim = 32;
extern const std::array<const char*, kNumTargets> kTargetNames;

using Labels = std::array<double, kNumTargets>;

/// Structure shared by every configuration of one bit-width.
struct GraphTopology {
  int width = 0;
  int num_nodes = 0;
  int feature_dim = 0;
  int num_stages = 0;  // T: reduction stages plus the final adder
  std::vector<int> stage;
  std::vector<std::vector<int>> neighbors;    // undirected wire adjacency, sorted, unique
  std::vector<std::vector<int>> stage_nodes;  // index 0 holds the partial products
  std::vector<int> slot_nodes;                // V_approx by slot index
  std::vector<int> last_nodes;                // V_last by column
  std::vector<int> readout;                   // slot_nodes then last_nodes

  bool same_layout(const GraphTopology& other) const;
};

/// Node features are column-major, one column per node:
/// rows 0-2 output probabilities, rows 3-5 their product with the cell's
/// error vector, then a kind one-hot (PP-AND, HA, FA, library compressors in
/// library order), zero padded to feature_dim.
struct StageGraph {
  std::shared_ptr<const GraphTopology> topology;
  Eigen::MatrixXd features;
};

/// Feature rows needed before padding.
int raw_feature_count(const CellLibrary& lib);

StageGraph build_graph(const Netlist& net, const CellLibrary& lib, double p_operand = 0.5,
                       int feature_dim = kDefaultHiddenDim);

/// Builds graphs for many assignments of one width without rebuilding the netlist.
class GraphFactory {
 public:
  GraphFactory(int width, const CellLibrary& lib, double p_operand = 0.5, int feature_dim = kDefaultHiddenDim);

  StageGraph make(std::span<const std::size_t> assignment) const;
  void fill_features(std::span<const std::size_t> assignment, Eigen::MatrixXd& out) const;
  const std::shared_ptr<const GraphTopology>& topology() const { return topo_; }
  int slot_count() const { return static_cast<int>(topo_->slot_nodes.size()); }

 private:
  struct CellInfo {
    int outputs = 0;
    int kind_row = 0;
    std::vector<std::uint32_t> masks;  // per output column
    std::vector<std::uint32_t> ref_masks;
  };
  const CellLibrary* lib_;
  double p_;
  std::shared_ptr<const GraphTopology> topo_;
  Netlist net_;
  std::vector<CellInfo> net_cells_;  // per netlist cell index
  std::vector<CellInfo> lib_cells_;  // per library index (compressors only)
};

struct ModelShape {
  int width = 8;
  int slots = 0;
  int stages = 0;
  int readout_nodes = 0;
  int feature_dim = kDefaultHiddenDim;
  int head1 = 64;
  int head2 = 32;

  static ModelShape for_topology(const GraphTopology& topo, int head1 = 64, int head2 = 32);
  friend bool operator==(const ModelShape&, const ModelShape&) = default;
};

/// Stage-indexed GraphSAGE encoder plus MLP head. Parameters live in one flat
/// vector (W_1..W_T, then head weights and biases).
class SurrogateModel {
 public:
  SurrogateModel() = default;
  SurrogateModel(ModelShape shape, std::uint64_t seed);

  const ModelShape& shape() const { return shape_; }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  const Labels& target_mean() const { return mean_; }
  const Labels& target_scale() const { return scale_; }
  /// Sets normalization statistics and re-initialises the output bias so that
  /// an untrained model predicts the mean.
  void set_normalization(const Labels& mean, const Labels& scale);

  /// Global vector g: encoder outputs of the readout nodes, concatenated.
  Eigen::VectorXd encode(const StageGraph& g) const;
  /// Head pre-activations o.
  Labels head_output(const StageGraph& g) const;
  /// ŷ_t = scale_t * softplus(o_t).
  Labels predict(const StageGraph& g) const;

  /// Mean over samples and targets of ((ŷ - y)/scale)^2; accumulates the
  /// gradient into grad (same layout as params) when non-null.
  double loss(std::span<const StageGraph* const> graphs, std::span<const Labels> labels,
              std::vector<double>* grad) const;

  void check_compatible(const GraphTopology& topo) const;

 private:
  struct Layout {
    std::size_t w_stage = 0;  // T blocks of d x 2d
    std::size_t a1 = 0, b1 = 0, a2 = 0, b2 = 0, a3 = 0, b3 = 0, total = 0;
  };
  struct Trace;

  void compute_layout();
  void forward(const StageGraph& g, Trace& tr) const;

  ModelShape shape_;
  Layout lay_;
  std::vector<double> params_;
  Labels mean_{};
  Labels scale_{1, 1, 1, 1, 1};

  friend std::string format_model(const SurrogateModel&);
  friend SurrogateModel parse_model(const std::string&);
};

std::string format_model(const SurrogateModel& m);
SurrogateModel parse_model(const std::string& text);
void save_model(const SurrogateModel& m, const std::string& path);
/// Refuses to load when the stored layout fingerprint differs from `expected`.
SurrogateModel load_model(const std::string& path, const GraphTopology& expected);

inline double softplus(double x) { return x > 30 ? x : std::log1p(std::exp(x)); }
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double softplus_inverse(double y);

struct Sample {
  std::vector<std::size_t> assignment;
  Labels y{};
};

struct Dataset {
  int width = 8;
  std::uint64_t seed = 0;
  std::vector<Sample> samples;
  std::vector<std::size_t> train, validation, test;
};

/// Seeded uniform sampling of assignments over the library's compressors,
/// labelled by the error oracle (standard input set) and the PPA model.
/// When force_exact_first is set, sample 0 is the all-exact design.
Dataset generate_dataset(int width, const CellLibrary& lib, const TechTable& tech, std::size_t count,
                         std::uint64_t seed, bool force_exact_first = false);
Labels label_design(const MultiplierConfig& cfg, const TechTable& tech);
/// Shuffled 70/15/15 split.
void split_dataset(Dataset& ds, std::uint64_t seed);

std::string format_dataset_csv(const Dataset& ds, const CellLibrary& lib);
Dataset parse_dataset_csv(const std::string& text, const CellLibrary& lib);

struct TrainOptions {
  double lr = 2e-3;
  double lr_final = 1e-4;  // cosine decay target
  std::size_t batch = 32;
  int epochs = 60;
  std::uint64_t seed = 1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainResult {
  std::vector<double> train_loss;       // per epoch
  std::vector<double> validation_loss;  // per epoch, empty when no validation split
  int best_epoch = -1;
};

/// Adam on the normalized MSE. Normalization stats come from the samples
/// given. Keeps the parameters with the best validation loss when a
/// validation set is given. Throws on a non-finite loss.
TrainResult train(SurrogateModel& model, std::span<const StageGraph> train_graphs, std::span<const Labels> train_labels,
                  std::span<const StageGraph> val_graphs, std::span<const Labels> val_labels,
                  const TrainOptions& opt);

Labels compute_mean(std::span<const Labels> labels);
Labels compute_scale(std::span<const Labels> labels);

struct TargetMetrics {
  double mse = 0.0;       // label units
  double mse_norm = 0.0;  // in units of the model's target scale
  double mre_percent = 0.0;
  double r2 = 0.0;
};

std::array<TargetMetrics, kNumTargets> eval_metrics(std::span<const Labels> predicted, std::span<const Labels> actual,
                                                    const Labels& scale);
std::array<TargetMetrics, kNumTargets> eval_metrics(const SurrogateModel& model, std::span<const StageGraph> graphs,
                                                    std::span<const Labels> actual);

}  // namespace acco
