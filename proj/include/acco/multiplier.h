#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "acco/compressor_lib.h"

namespace acco {

inline constexpr int kMinWidth = 2;
inline constexpr int kMaxWidth = 32;

/// Target column heights used by the reduction layout: each stage reduces every
/// column to the largest entry of this sequence below the current maximum
/// height. Powers of two suit 4-2 compressors (each stage halves the height);
/// with this sequence the 8-bit layout exposes exactly nine slots. This is the
/// single calibration point of the layout rule.
int layout_target_height(int max_height);

enum class CellKind : std::uint8_t { PpAnd, HalfAdder, FullAdder, Compressor };

const char* to_string(CellKind kind);

/// Signal 0 is constant zero; signals 1..N are x bits, N+1..2N are y bits.
inline constexpr int kConstZero = 0;

struct Node {
  int id = 0;
  CellKind kind = CellKind::PpAnd;
  int cell = -1;  // index into Netlist::cells(); -1 for PP-AND
  int stage = 0;  // 0 = partial products, 1..R reduction, R+1 final adder
  int column = 0;
  int slot = 0;  // 1..t for configurable compressors, 0 otherwise
  std::vector<int> inputs;   // signal ids, pin order
  std::vector<int> outputs;  // signal ids, pin order
};

struct Edge {
  int from_node = 0;
  int from_pin = 0;
  int to_node = 0;
  int to_pin = 0;
};

struct SlotPosition {
  int slot = 0;
  int column = 0;
  int stage = 0;
  friend bool operator==(const SlotPosition&, const SlotPosition&) = default;
};

struct PPMatrix {
  int width = 0;
  /// columns[j] holds the partial-product bits of weight 2^j, ordered by the
  /// multiplicand bit index p.
  std::vector<std::vector<std::uint8_t>> columns;

  std::uint64_t value() const;
};

PPMatrix generate_pp(int width, std::uint64_t x, std::uint64_t y);

struct MultiplierConfig {
  int width = 8;
  std::vector<std::size_t> assignment;  // a_1..a_t as library indices
  const CellLibrary* library = nullptr;
};

class Netlist {
 public:
  int width() const { return width_; }
  std::span<const Node> nodes() const { return nodes_; }
  const Node& node(int id) const { return nodes_.at(id); }
  std::span<const TruthTable> cells() const { return cells_; }
  const TruthTable& cell_of(const Node& n) const { return cells_.at(n.cell); }
  /// Name used to look up technology data: "AND2" for partial products.
  std::string kind_name(const Node& n) const;

  int num_signals() const { return num_signals_; }
  /// Producing node of each signal, -1 for constants and primary inputs.
  std::span<const int> driver() const { return driver_; }
  std::span<const int> driver_pin() const { return driver_pin_; }
  /// Signal carrying product bit j, j = 0..2N-1.
  std::span<const int> product_bits() const { return product_bits_; }

  int reduction_stages() const { return reduction_stages_; }
  int final_stage() const { return reduction_stages_ + 1; }
  /// Node id of slot i is slot_nodes()[i - 1].
  std::span<const int> slot_nodes() const { return slot_nodes_; }
  int slot_count() const { return static_cast<int>(slot_nodes_.size()); }

  /// Library index chosen for each slot.
  std::span<const std::size_t> assignment() const { return assignment_; }

  std::vector<Edge> edges() const;

 private:
  friend class NetlistAssembler;
  friend Netlist build_tree(const MultiplierConfig&);

  int width_ = 0;
  std::vector<Node> nodes_;
  std::vector<TruthTable> cells_;
  int num_signals_ = 0;
  std::vector<int> driver_;
  std::vector<int> driver_pin_;
  std::vector<int> product_bits_;
  int reduction_stages_ = 0;
  std::vector<int> slot_nodes_;
  std::vector<std::size_t> assignment_;
};

/// Incremental construction of a netlist in topological order. Used by the
/// canonical layout and for hand-built netlists in tests and tools.
class NetlistAssembler {
 public:
  explicit NetlistAssembler(int width);

  int add_cell(TruthTable tt);
  /// Adds a node; every input must be an existing signal, which keeps the
  /// graph acyclic. Returns the node id.
  int add_node(CellKind kind, int cell, int stage, int column, int slot, std::vector<int> inputs);
  int output(int node, int pin) const;
  int x_bit(int p) const { return 1 + p; }
  int y_bit(int q) const { return 1 + net_.width_ + q; }
  void set_product_bit(int j, int signal);
  void set_reduction_stages(int stages) { net_.reduction_stages_ = stages; }
  const Netlist& peek() const { return net_; }

  Netlist finish();

 private:
  Netlist net_;
};

std::vector<SlotPosition> slot_layout(int width);

/// Builds the stage-structured netlist. Slot i uses library cell a_i; every
/// other cell is the exact compressor, HA or FA.
Netlist build_tree(const MultiplierConfig& cfg);

/// Config with every slot set to the library's exact reference.
MultiplierConfig exact_config(int width, const CellLibrary& lib);

/// Scalar evaluation of one operand pair (2N-bit result).
std::uint64_t evaluate(const Netlist& net, std::uint64_t x, std::uint64_t y);

/// Compiled, reusable bit-parallel simulator: 64 operand pairs per word.
class Simulator {
 public:
  explicit Simulator(const Netlist& net);

  int width() const { return width_; }
  std::uint64_t evaluate(std::uint64_t x, std::uint64_t y);
  /// out[i] = R(xs[i], ys[i]). Spans must have equal length.
  void evaluate_batch(std::span<const std::uint64_t> xs,
                      std::span<const std::uint64_t> ys,
                      std::span<std::uint64_t> out);

 private:
  struct Op {
    std::uint8_t n_in = 0;
    std::uint8_t n_out = 0;
    bool is_and = false;
    std::int32_t in[5] = {0, 0, 0, 0, 0};
    std::int32_t out[3] = {0, 0, 0};
    std::uint32_t masks[3] = {0, 0, 0};
  };
  void run_words();

  int width_ = 0;
  std::vector<Op> ops_;
  std::vector<int> product_bits_;
  std::vector<std::uint64_t> words_;
};

/// Line-oriented text dump: "node <id> <kind> <cell> stage <k> column <j> slot <i>"
/// lines followed by "edge <from> <pin> <to> <pin>" lines and "output <j> <signal>".
void export_netlist(const Netlist& net, std::ostream& out);

/// Probability that each signal is 1 when every operand bit is 1 with
/// probability p, propagated under an input-independence assumption.
std::vector<double> signal_probabilities(const Netlist& net, double p_operand = 0.5);

}  // namespace acco
