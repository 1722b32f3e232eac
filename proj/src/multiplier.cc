#include "acco/multiplier.h"

#include <algorithm>
#include <ostream>

namespace acco {

int layout_target_height(int max_height) {
  int target = 2;
  while (target * 2 < max_height) target *= 2;
  return target;
}

const char* to_string(CellKind kind) {
  switch (kind) {
    case CellKind::PpAnd: return "PP-AND";
    case CellKind::HalfAdder: return "HA";
    case CellKind::FullAdder: return "FA";
    case CellKind::Compressor: return "C42";
  }
  return "?";
}

std::uint64_t PPMatrix::value() const {
  std::uint64_t v = 0;
  for (std::size_t j = 0; j < columns.size(); ++j)
    for (auto b : columns[j]) v += static_cast<std::uint64_t>(b) << j;
  return v;
}

namespace {

void check_width(int width) {
  if (width < kMinWidth || width > kMaxWidth)
    throw Error("multiplier width " + std::to_string(width) + " outside [" +
                std::to_string(kMinWidth) + ", " + std::to_string(kMaxWidth) + "]");
}

void check_operand(int width, std::uint64_t v) {
  if (width < 64 && (v >> width) != 0)
    throw Error("operand " + std::to_string(v) + " does not fit in " + std::to_string(width) + " bits");
}

}  // namespace

PPMatrix generate_pp(int width, std::uint64_t x, std::uint64_t y) {
  check_width(width);
  check_operand(width, x);
  check_operand(width, y);
  PPMatrix m;
  m.width = width;
  m.columns.assign(2 * width, {});
  for (int p = 0; p < width; ++p)
    for (int q = 0; q < width; ++q)
      m.columns[p + q].push_back(static_cast<std::uint8_t>(((x >> p) & 1u) & ((y >> q) & 1u)));
  return m;
}

std::string Netlist::kind_name(const Node& n) const {
  if (n.kind == CellKind::PpAnd) return "AND2";
  return cells_.at(n.cell).name();
}

std::vector<Edge> Netlist::edges() const {
  std::vector<Edge> out;
  for (const auto& n : nodes_)
    for (std::size_t pin = 0; pin < n.inputs.size(); ++pin) {
      int s = n.inputs[pin];
      if (driver_[s] >= 0)
        out.push_back({driver_[s], driver_pin_[s], n.id, static_cast<int>(pin)});
    }
  return out;
}

NetlistAssembler::NetlistAssembler(int width) {
  if (width < kMinWidth || width > kMaxWidth)
    throw Error("multiplier width " + std::to_string(width) + " outside [" +
                std::to_string(kMinWidth) + ", " + std::to_string(kMaxWidth) + "]");
  net_.width_ = width;
  // constant zero plus 2N primary inputs
  net_.num_signals_ = 1 + 2 * width;
  net_.driver_.assign(net_.num_signals_, -1);
  net_.driver_pin_.assign(net_.num_signals_, -1);
  net_.product_bits_.assign(2 * width, kConstZero);
}

int NetlistAssembler::add_cell(TruthTable tt) {
  net_.cells_.push_back(std::move(tt));
  return static_cast<int>(net_.cells_.size()) - 1;
}

int NetlistAssembler::add_node(CellKind kind, int cell, int stage, int column, int slot,
                               std::vector<int> inputs) {
  int n_in = 2, n_out = 1;
  if (kind == CellKind::PpAnd) {
    cell = -1;
  } else {
    if (cell < 0 || cell >= static_cast<int>(net_.cells_.size()))
      throw Error("NetlistAssembler: unknown cell index " + std::to_string(cell));
    n_in = net_.cells_[cell].inputs();
    n_out = net_.cells_[cell].outputs();
  }
  if (static_cast<int>(inputs.size()) != n_in)
    throw Error("NetlistAssembler: node expects " + std::to_string(n_in) + " inputs, got " +
                std::to_string(inputs.size()));
  for (int s : inputs)
    if (s < 0 || s >= net_.num_signals_)
      throw Error("NetlistAssembler: input signal " + std::to_string(s) + " does not exist yet");
  Node node;
  node.id = static_cast<int>(net_.nodes_.size());
  node.kind = kind;
  node.cell = cell;
  node.stage = stage;
  node.column = column;
  node.slot = slot;
  node.inputs = std::move(inputs);
  for (int k = 0; k < n_out; ++k) {
    node.outputs.push_back(net_.num_signals_++);
    net_.driver_.push_back(node.id);
    net_.driver_pin_.push_back(k);
  }
  if (slot > 0) {
    if (kind != CellKind::Compressor) throw Error("NetlistAssembler: only compressors occupy slots");
    if (slot != static_cast<int>(net_.slot_nodes_.size()) + 1)
      throw Error("NetlistAssembler: slots must be numbered consecutively from 1");
    net_.slot_nodes_.push_back(node.id);
  }
  net_.nodes_.push_back(std::move(node));
  return net_.nodes_.back().id;
}

int NetlistAssembler::output(int node, int pin) const { return net_.nodes_.at(node).outputs.at(pin); }

void NetlistAssembler::set_product_bit(int j, int signal) {
  if (signal < 0 || signal >= net_.num_signals_) throw Error("NetlistAssembler: unknown signal");
  net_.product_bits_.at(j) = signal;
}

Netlist NetlistAssembler::finish() {
  net_.assignment_.assign(net_.slot_nodes_.size(), 0);
  return std::move(net_);
}

namespace {

// Canonical reduction layout. Cell 0 is the exact 4-2 compressor, cell 1 the
// half adder and cell 2 the full adder; build_tree() swaps the slot cells
// afterwards.
Netlist build_layout(int width, TruthTable exact, TruthTable ha, TruthTable fa) {
  NetlistAssembler as(width);
  const int kExact = as.add_cell(std::move(exact));
  const int kHa = as.add_cell(std::move(ha));
  const int kFa = as.add_cell(std::move(fa));
  const int n = width;
  const int cols = 2 * n;

  std::vector<std::vector<int>> cur(cols);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) {
      int id = as.add_node(CellKind::PpAnd, -1, 0, p + q, 0, {as.x_bit(p), as.y_bit(q)});
      cur[p + q].push_back(as.output(id, 0));
    }

  int stage = 0;
  int slot = 0;
  auto max_height = [&] {
    std::size_t h = 0;
    for (auto& c : cur) h = std::max(h, c.size());
    return static_cast<int>(h);
  };
  while (max_height() > 2) {
    ++stage;
    const int target = layout_target_height(max_height());
    std::vector<std::vector<int>> next(cols), carry_in(cols + 1), cout_in(cols + 1);
    for (int j = 0; j < cols; ++j) {
      const auto& bits = cur[j];
      std::size_t bi = 0;  // next unconsumed bit
      std::size_t ci = 0;  // next unconsumed cout from column j-1
      std::vector<int> sums;
      auto remaining_bits = [&] { return static_cast<int>(bits.size() - bi); };
      auto projected = [&] {
        return remaining_bits() + static_cast<int>(cout_in[j].size() - ci) +
               static_cast<int>(carry_in[j].size() + sums.size());
      };
      auto take = [&](int k) {
        std::vector<int> in(bits.begin() + bi, bits.begin() + bi + k);
        bi += k;
        return in;
      };
      while (projected() > target) {
        const int excess = projected() - target;
        if (excess >= 3 && remaining_bits() >= 4) {
          auto in = take(4);
          if (ci < cout_in[j].size()) {
            in.push_back(cout_in[j][ci++]);
          } else if (excess >= 4 && remaining_bits() >= 1) {
            in.push_back(bits[bi++]);
          } else {
            in.push_back(kConstZero);
          }
          const int s = j < n ? ++slot : 0;
          int id = as.add_node(CellKind::Compressor, kExact, stage, j, s, std::move(in));
          sums.push_back(as.output(id, 0));
          carry_in[j + 1].push_back(as.output(id, 1));
          cout_in[j + 1].push_back(as.output(id, 2));
        } else if (excess >= 2 && remaining_bits() >= 3) {
          int id = as.add_node(CellKind::FullAdder, kFa, stage, j, 0, take(3));
          sums.push_back(as.output(id, 0));
          carry_in[j + 1].push_back(as.output(id, 1));
        } else if (remaining_bits() >= 2) {
          int id = as.add_node(CellKind::HalfAdder, kHa, stage, j, 0, take(2));
          sums.push_back(as.output(id, 0));
          carry_in[j + 1].push_back(as.output(id, 1));
        } else {
          break;
        }
      }
      auto& nx = next[j];
      nx.insert(nx.end(), bits.begin() + bi, bits.end());
      nx.insert(nx.end(), sums.begin(), sums.end());
      nx.insert(nx.end(), carry_in[j].begin(), carry_in[j].end());
      nx.insert(nx.end(), cout_in[j].begin() + ci, cout_in[j].end());
    }
    // Anything pushed into column 2N is beyond the product width.
    cur = std::move(next);
  }
  as.set_reduction_stages(stage);

  // Final ripple carry-propagate adder over the two remaining rows.
  const int final_stage = stage + 1;
  int carry = -1;
  for (int j = 0; j < cols; ++j) {
    std::vector<int> in = cur[j];
    if (carry >= 0) in.push_back(carry);
    carry = -1;
    if (in.empty()) continue;
    if (in.size() == 1) {
      as.set_product_bit(j, in[0]);
      continue;
    }
    const bool full = in.size() == 3;
    int id = as.add_node(full ? CellKind::FullAdder : CellKind::HalfAdder, full ? kFa : kHa,
                         final_stage, j, 0, std::move(in));
    as.set_product_bit(j, as.output(id, 0));
    carry = as.output(id, 1);
  }
  return as.finish();
}

Netlist skeleton(int width, const TruthTable& exact, const TruthTable& ha, const TruthTable& fa) {
  check_width(width);
  return build_layout(width, exact, ha, fa);
}

TruthTable library_or_builtin(const CellLibrary& lib, const char* name, TruthTable builtin) {
  if (auto i = lib.find(name)) {
    const auto& c = lib.cell(*i);
    if (!c.same_shape(builtin) || !c.arithmetically_exact())
      throw Error(std::string("library cell '") + name + "' is not an exact " + name);
    return c;
  }
  return builtin;
}

}  // namespace

std::vector<SlotPosition> slot_layout(int width) {
  Netlist net = skeleton(width, exact_compressor_42(), half_adder(), full_adder());
  std::vector<SlotPosition> out;
  for (std::size_t i = 0; i < net.slot_nodes().size(); ++i) {
    const auto& nd = net.node(net.slot_nodes()[i]);
    out.push_back({static_cast<int>(i + 1), nd.column, nd.stage});
  }
  return out;
}

Netlist build_tree(const MultiplierConfig& cfg) {
  if (!cfg.library) throw Error("build_tree: configuration has no cell library");
  const CellLibrary& lib = *cfg.library;
  Netlist net = skeleton(cfg.width, lib.exact(), library_or_builtin(lib, "HA", half_adder()),
                         library_or_builtin(lib, "FA", full_adder()));
  if (cfg.assignment.size() != net.slot_nodes_.size())
    throw Error("build_tree: assignment has " + std::to_string(cfg.assignment.size()) +
                " entries, layout for N=" + std::to_string(cfg.width) + " has " +
                std::to_string(net.slot_nodes_.size()) + " slots");

  std::vector<int> cell_of_lib(lib.size(), -1);
  cell_of_lib[lib.exact_reference()] = 0;
  for (std::size_t i = 0; i < cfg.assignment.size(); ++i) {
    const std::size_t a = cfg.assignment[i];
    if (a >= lib.size())
      throw Error("build_tree: slot " + std::to_string(i + 1) + " references cell index " +
                  std::to_string(a) + " outside library of size " + std::to_string(lib.size()));
    if (!lib.is_compressor(a))
      throw Error("build_tree: slot " + std::to_string(i + 1) + " references cell '" +
                  lib.cell(a).name() + "' which is not a 5-input, 3-output compressor");
    if (cell_of_lib[a] < 0) {
      cell_of_lib[a] = static_cast<int>(net.cells_.size());
      net.cells_.push_back(lib.cell(a));
    }
    net.nodes_[net.slot_nodes_[i]].cell = cell_of_lib[a];
  }
  net.assignment_ = cfg.assignment;
  return net;
}

MultiplierConfig exact_config(int width, const CellLibrary& lib) {
  MultiplierConfig cfg;
  cfg.width = width;
  cfg.library = &lib;
  cfg.assignment.assign(slot_layout(width).size(), lib.exact_reference());
  return cfg;
}

std::uint64_t evaluate(const Netlist& net, std::uint64_t x, std::uint64_t y) {
  const int n = net.width();
  check_operand(n, x);
  check_operand(n, y);
  std::vector<std::uint8_t> sig(net.num_signals(), 0);
  for (int p = 0; p < n; ++p) {
    sig[1 + p] = (x >> p) & 1u;
    sig[1 + n + p] = (y >> p) & 1u;
  }
  for (const auto& nd : net.nodes()) {
    if (nd.kind == CellKind::PpAnd) {
      sig[nd.outputs[0]] = sig[nd.inputs[0]] & sig[nd.inputs[1]];
      continue;
    }
    const auto& tt = net.cell_of(nd);
    std::size_t idx = 0;
    for (int in : nd.inputs) idx = (idx << 1) | sig[in];
    auto row = tt.row(idx);
    for (std::size_t k = 0; k < nd.outputs.size(); ++k) sig[nd.outputs[k]] = (row >> k) & 1u;
  }
  std::uint64_t r = 0;
  for (int j = 0; j < 2 * n; ++j) r |= static_cast<std::uint64_t>(sig[net.product_bits()[j]]) << j;
  return r;
}

Simulator::Simulator(const Netlist& net)
    : width_(net.width()),
      product_bits_(net.product_bits().begin(), net.product_bits().end()),
      words_(net.num_signals(), 0) {
  ops_.reserve(net.nodes().size());
  for (const auto& nd : net.nodes()) {
    Op op;
    op.n_in = static_cast<std::uint8_t>(nd.inputs.size());
    op.n_out = static_cast<std::uint8_t>(nd.outputs.size());
    if (op.n_in > 5 || op.n_out > 3) throw Error("Simulator: cell shape not supported");
    std::copy(nd.inputs.begin(), nd.inputs.end(), op.in);
    std::copy(nd.outputs.begin(), nd.outputs.end(), op.out);
    if (nd.kind == CellKind::PpAnd) {
      op.is_and = true;
    } else {
      const auto& tt = net.cell_of(nd);
      for (int j = 0; j < op.n_out; ++j) op.masks[j] = tt.output_mask(j);
    }
    ops_.push_back(op);
  }
}

std::uint64_t Simulator::evaluate(std::uint64_t x, std::uint64_t y) {
  std::uint64_t out = 0;
  evaluate_batch({&x, 1}, {&y, 1}, {&out, 1});
  return out;
}

namespace {

// Shannon expansion of a truth-table column over bit-sliced inputs.
inline std::uint64_t eval_column(std::uint32_t mask, int n, const std::uint64_t* in) {
  const std::uint32_t full = n == 5 ? 0xffffffffu : ((1u << (1u << n)) - 1u);
  if (mask == 0) return 0;
  if (mask == full) return ~std::uint64_t{0};
  std::uint64_t v[32];
  int count = 1 << n;
  for (int i = 0; i < count; ++i) v[i] = ((mask >> i) & 1u) ? ~std::uint64_t{0} : 0;
  // Pattern index LSB is the last input.
  for (int k = n - 1; k >= 0; --k) {
    const std::uint64_t s = in[k];
    count >>= 1;
    for (int i = 0; i < count; ++i) v[i] = v[2 * i] ^ ((v[2 * i] ^ v[2 * i + 1]) & s);
  }
  return v[0];
}

}  // namespace

void Simulator::run_words() {
  std::uint64_t* w = words_.data();
  for (const auto& op : ops_) {
    if (op.is_and) {
      w[op.out[0]] = w[op.in[0]] & w[op.in[1]];
      continue;
    }
    std::uint64_t in[5];
    for (int k = 0; k < op.n_in; ++k) in[k] = w[op.in[k]];
    for (int j = 0; j < op.n_out; ++j) w[op.out[j]] = eval_column(op.masks[j], op.n_in, in);
  }
}

void Simulator::evaluate_batch(std::span<const std::uint64_t> xs,
                               std::span<const std::uint64_t> ys,
                               std::span<std::uint64_t> out) {
  if (xs.size() != ys.size() || xs.size() != out.size())
    throw Error("Simulator::evaluate_batch: span length mismatch");
  const int n = width_;
  for (std::size_t base = 0; base < xs.size(); base += 64) {
    const std::size_t lanes = std::min<std::size_t>(64, xs.size() - base);
    std::uint64_t* w = words_.data();
    w[kConstZero] = 0;
    for (int p = 0; p < 2 * n; ++p) w[1 + p] = 0;
    for (std::size_t l = 0; l < lanes; ++l) {
      const std::uint64_t x = xs[base + l], y = ys[base + l];
      check_operand(n, x);
      check_operand(n, y);
      for (int p = 0; p < n; ++p) {
        w[1 + p] |= ((x >> p) & 1u) << l;
        w[1 + n + p] |= ((y >> p) & 1u) << l;
      }
    }
    run_words();
    for (std::size_t l = 0; l < lanes; ++l) out[base + l] = 0;
    for (int j = 0; j < 2 * n; ++j) {
      const std::uint64_t bj = w[product_bits_[j]];
      if (!bj) continue;
      for (std::size_t l = 0; l < lanes; ++l) out[base + l] |= ((bj >> l) & 1u) << j;
    }
  }
}

void export_netlist(const Netlist& net, std::ostream& out) {
  out << "netlist width " << net.width() << " stages " << net.reduction_stages() << " slots "
      << net.slot_count() << '\n';
  for (const auto& nd : net.nodes())
    out << "node " << nd.id << ' ' << to_string(nd.kind) << ' ' << net.kind_name(nd) << " stage "
        << nd.stage << " column " << nd.column << " slot " << nd.slot << '\n';
  for (const auto& e : net.edges())
    out << "edge " << e.from_node << ' ' << e.from_pin << ' ' << e.to_node << ' ' << e.to_pin << '\n';
  for (int j = 0; j < 2 * net.width(); ++j) {
    int s = net.product_bits()[j];
    out << "output " << j << ' ' << net.driver()[s] << ' ' << net.driver_pin()[s] << '\n';
  }
}

std::vector<double> signal_probabilities(const Netlist& net, double p_operand) {
  if (!(p_operand >= 0.0 && p_operand <= 1.0)) throw Error("signal_probabilities: p outside [0,1]");
  std::vector<double> prob(net.num_signals(), 0.0);
  for (int s = 1; s <= 2 * net.width(); ++s) prob[s] = p_operand;
  std::vector<double> pin;
  for (const auto& nd : net.nodes()) {
    if (nd.kind == CellKind::PpAnd) {
      prob[nd.outputs[0]] = prob[nd.inputs[0]] * prob[nd.inputs[1]];
      continue;
    }
    pin.clear();
    for (int s : nd.inputs) pin.push_back(prob[s]);
    auto p_out = output_probabilities(net.cell_of(nd), input_weights(pin));
    for (std::size_t k = 0; k < nd.outputs.size(); ++k) prob[nd.outputs[k]] = p_out[k];
  }
  return prob;
}

}  // namespace acco
