#include "acco/pea_gnn.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "acco/error_metrics.h"
#include "acco/text_format.h"

namespace acco {

const std::array<const char*, kNumTargets> kTargetNames = {"mred", "nmed", "delay_ps", "area_um2", "power_uw"};

namespace {

constexpr int kProbRow = 0;
constexpr int kFusedRow = 3;
constexpr int kKindRow = 6;

int compressor_kind_row(const CellLibrary& lib, const std::string& name) {
  auto comps = lib.compressor_indices();
  for (std::size_t i = 0; i < comps.size(); ++i)
    if (lib.cell(comps[i]).name() == name) return kKindRow + 3 + static_cast<int>(i);
  throw Error("build_graph: compressor '" + name + "' is not in the cell library");
}

int kind_row(const Netlist& net, const Node& nd, const CellLibrary& lib) {
  switch (nd.kind) {
    case CellKind::PpAnd:
      return kKindRow;
    case CellKind::HalfAdder:
      return kKindRow + 1;
    case CellKind::FullAdder:
      return kKindRow + 2;
    case CellKind::Compressor:
      return compressor_kind_row(lib, net.cell_of(nd).name());
  }
  return kKindRow;
}

std::shared_ptr<GraphTopology> make_topology(const Netlist& net, int feature_dim) {
  auto topo = std::make_shared<GraphTopology>();
  topo->width = net.width();
  topo->num_nodes = static_cast<int>(net.nodes().size());
  topo->feature_dim = feature_dim;
  topo->num_stages = net.final_stage();
  topo->stage.resize(topo->num_nodes);
  topo->neighbors.resize(topo->num_nodes);
  topo->stage_nodes.resize(topo->num_stages + 1);
  for (const auto& nd : net.nodes()) {
    if (nd.stage < 0 || nd.stage > topo->num_stages) throw Error("build_graph: node stage out of range");
    topo->stage[nd.id] = nd.stage;
    topo->stage_nodes[nd.stage].push_back(nd.id);
  }
  for (const auto& e : net.edges()) {
    if (e.from_node == e.to_node) continue;
    topo->neighbors[e.from_node].push_back(e.to_node);
    topo->neighbors[e.to_node].push_back(e.from_node);
  }
  for (auto& nb : topo->neighbors) {
    std::sort(nb.begin(), nb.end());
    nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
  }
  topo->slot_nodes.assign(net.slot_nodes().begin(), net.slot_nodes().end());
  for (int id : topo->stage_nodes[topo->num_stages])
    if (net.node(id).kind != CellKind::PpAnd) topo->last_nodes.push_back(id);
  std::stable_sort(topo->last_nodes.begin(), topo->last_nodes.end(),
                   [&](int a, int b) { return net.node(a).column < net.node(b).column; });
  topo->readout = topo->slot_nodes;
  topo->readout.insert(topo->readout.end(), topo->last_nodes.begin(), topo->last_nodes.end());
  return topo;
}

// Probabilities and error terms of one cell under given input marginals.
void cell_terms(int n, std::span<const double> pin, std::span<const std::uint32_t> masks,
                std::span<const std::uint32_t> ref_masks, double* p_out, double* e_out) {
  double omega[32];
  const int rows = 1 << n;
  omega[0] = 1.0;
  // build weights MSB-first: input j is bit n-1-j of the row index
  int len = 1;
  for (int j = 0; j < n; ++j) {
    for (int i = len - 1; i >= 0; --i) {
      omega[2 * i + 1] = omega[i] * pin[j];
      omega[2 * i] = omega[i] * (1.0 - pin[j]);
    }
    len *= 2;
  }
  for (std::size_t k = 0; k < masks.size(); ++k) {
    double p = 0.0, e = 0.0;
    const std::uint32_t diff = masks[k] ^ ref_masks[k];
    for (int i = 0; i < rows; ++i) {
      if ((masks[k] >> i) & 1u) p += omega[i];
      if ((diff >> i) & 1u) e += omega[i];
    }
    p_out[k] = std::min(1.0, std::max(0.0, p));
    e_out[k] = e;
  }
}

}  // namespace

bool GraphTopology::same_layout(const GraphTopology& o) const {
  return width == o.width && num_nodes == o.num_nodes && feature_dim == o.feature_dim && num_stages == o.num_stages &&
         slot_nodes.size() == o.slot_nodes.size() && readout.size() == o.readout.size();
}

int raw_feature_count(const CellLibrary& lib) {
  return kKindRow + 3 + static_cast<int>(lib.compressor_indices().size());
}

StageGraph build_graph(const Netlist& net, const CellLibrary& lib, double p_operand, int feature_dim) {
  if (feature_dim < raw_feature_count(lib))
    throw Error("build_graph: feature dimension " + std::to_string(feature_dim) + " below the " +
                std::to_string(raw_feature_count(lib)) + " raw features");
  StageGraph g;
  g.topology = make_topology(net, feature_dim);
  g.features = Eigen::MatrixXd::Zero(feature_dim, g.topology->num_nodes);
  auto prob = signal_probabilities(net, p_operand);
  std::vector<double> pin;
  for (const auto& nd : net.nodes()) {
    auto col = g.features.col(nd.id);
    col(kind_row(net, nd, lib)) = 1.0;
    if (nd.kind == CellKind::PpAnd) {
      col(kProbRow) = prob[nd.outputs[0]];
      continue;
    }
    const auto& tt = net.cell_of(nd);
    if (tt.outputs() > 3) throw Error("build_graph: cells with more than 3 outputs are not supported");
    pin.clear();
    for (int s : nd.inputs) pin.push_back(prob[s]);
    auto omega = input_weights(pin);
    auto p_out = output_probabilities(tt, omega);
    std::vector<double> e(tt.outputs(), 0.0);
    if (nd.kind == CellKind::Compressor) e = error_vector(tt, lib.exact(), omega).e;
    for (int k = 0; k < tt.outputs(); ++k) {
      col(kProbRow + k) = p_out[k];
      col(kFusedRow + k) = p_out[k] * e[k];
    }
  }
  return g;
}

GraphFactory::GraphFactory(int width, const CellLibrary& lib, double p_operand, int feature_dim)
    : lib_(&lib), p_(p_operand) {
  if (!(p_operand >= 0.0 && p_operand <= 1.0)) throw Error("GraphFactory: p outside [0,1]");
  if (feature_dim < raw_feature_count(lib))
    throw Error("GraphFactory: feature dimension below the raw feature count");
  net_ = build_tree(exact_config(width, lib));
  topo_ = make_topology(net_, feature_dim);
  auto info = [&](const TruthTable& tt, const TruthTable* ref, int row) {
    CellInfo c;
    c.outputs = tt.outputs();
    c.kind_row = row;
    for (int k = 0; k < tt.outputs(); ++k) {
      c.masks.push_back(tt.output_mask(k));
      c.ref_masks.push_back(ref ? ref->output_mask(k) : tt.output_mask(k));
    }
    return c;
  };
  for (const auto& tt : net_.cells()) {
    // netlist cells: 0 exact compressor, then HA/FA variants
    int row = tt.inputs() == 2 ? kKindRow + 1 : tt.inputs() == 3 ? kKindRow + 2 : compressor_kind_row(lib, tt.name());
    net_cells_.push_back(info(tt, nullptr, row));
  }
  lib_cells_.resize(lib.size());
  for (auto i : lib.compressor_indices())
    lib_cells_[i] = info(lib.cell(i), &lib.exact(), compressor_kind_row(lib, lib.cell(i).name()));
}

void GraphFactory::fill_features(std::span<const std::size_t> assignment, Eigen::MatrixXd& out) const {
  const auto& topo = *topo_;
  if (assignment.size() != topo.slot_nodes.size())
    throw Error("GraphFactory: assignment has " + std::to_string(assignment.size()) + " entries, expected " +
                std::to_string(topo.slot_nodes.size()));
  for (std::size_t a : assignment)
    if (a >= lib_cells_.size() || lib_cells_[a].masks.empty())
      throw Error("GraphFactory: assignment entry " + std::to_string(a) + " is not a library compressor");
  out.setZero(topo.feature_dim, topo.num_nodes);
  std::vector<double> prob(net_.num_signals(), 0.0);
  for (int s = 1; s <= 2 * net_.width(); ++s) prob[s] = p_;
  double pin[5], p_out[3], e_out[3];
  for (const auto& nd : net_.nodes()) {
    auto col = out.col(nd.id);
    if (nd.kind == CellKind::PpAnd) {
      const double p = prob[nd.inputs[0]] * prob[nd.inputs[1]];
      prob[nd.outputs[0]] = p;
      col(kProbRow) = p;
      col(kKindRow) = 1.0;
      continue;
    }
    const CellInfo& c = nd.slot > 0 ? lib_cells_[assignment[nd.slot - 1]] : net_cells_[nd.cell];
    const int n = static_cast<int>(nd.inputs.size());
    for (int k = 0; k < n; ++k) pin[k] = prob[nd.inputs[k]];
    cell_terms(n, {pin, static_cast<std::size_t>(n)}, c.masks, c.ref_masks, p_out, e_out);
    for (int k = 0; k < c.outputs; ++k) {
      prob[nd.outputs[k]] = p_out[k];
      col(kProbRow + k) = p_out[k];
      col(kFusedRow + k) = p_out[k] * e_out[k];
    }
    col(c.kind_row) = 1.0;
  }
}

StageGraph GraphFactory::make(std::span<const std::size_t> assignment) const {
  StageGraph g;
  g.topology = topo_;
  fill_features(assignment, g.features);
  return g;
}

// ---------------------------------------------------------------------------
// Model

ModelShape ModelShape::for_topology(const GraphTopology& topo, int head1, int head2) {
  ModelShape s;
  s.width = topo.width;
  s.slots = static_cast<int>(topo.slot_nodes.size());
  s.stages = topo.num_stages;
  s.readout_nodes = static_cast<int>(topo.readout.size());
  s.feature_dim = topo.feature_dim;
  s.head1 = head1;
  s.head2 = head2;
  return s;
}

struct SurrogateModel::Trace {
  Eigen::MatrixXd h;               // d x n, current node values
  std::vector<Eigen::MatrixXd> z;  // per stage: 2d x |S_k|
  std::vector<Eigen::MatrixXd> a;  // per stage: d x |S_k|
  Eigen::VectorXd g, a1, h1, a2, h2, o;
};

void SurrogateModel::compute_layout() {
  const std::size_t d = shape_.feature_dim, r = static_cast<std::size_t>(shape_.readout_nodes) * d;
  const std::size_t h1 = shape_.head1, h2 = shape_.head2;
  std::size_t off = 0;
  lay_.w_stage = off;
  off += static_cast<std::size_t>(shape_.stages) * d * 2 * d;
  lay_.a1 = off;
  off += h1 * r;
  lay_.b1 = off;
  off += h1;
  lay_.a2 = off;
  off += h2 * h1;
  lay_.b2 = off;
  off += h2;
  lay_.a3 = off;
  off += kNumTargets * h2;
  lay_.b3 = off;
  off += kNumTargets;
  lay_.total = off;
}

SurrogateModel::SurrogateModel(ModelShape shape, std::uint64_t seed) : shape_(shape) {
  if (shape.stages < 1 || shape.readout_nodes < 1 || shape.feature_dim < 1 || shape.head1 < 1 || shape.head2 < 1)
    throw Error("SurrogateModel: invalid shape");
  compute_layout();
  params_.assign(lay_.total, 0.0);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t off, std::size_t count, double sd) {
    std::normal_distribution<double> nd(0.0, sd);
    for (std::size_t i = 0; i < count; ++i) params_[off + i] = nd(rng);
  };
  const std::size_t d = shape.feature_dim, r = static_cast<std::size_t>(shape.readout_nodes) * d;
  fill(lay_.w_stage, static_cast<std::size_t>(shape.stages) * d * 2 * d, std::sqrt(2.0 / (2.0 * d)));
  fill(lay_.a1, shape.head1 * r, std::sqrt(2.0 / r));
  fill(lay_.a2, static_cast<std::size_t>(shape.head2) * shape.head1, std::sqrt(2.0 / shape.head1));
  fill(lay_.a3, static_cast<std::size_t>(kNumTargets) * shape.head2, 0.1 * std::sqrt(1.0 / shape.head2));
  set_normalization({0, 0, 0, 0, 0}, {1, 1, 1, 1, 1});
}

double softplus_inverse(double y) {
  y = std::max(y, 1e-6);
  return y > 30 ? y : std::log(std::expm1(y));
}

void SurrogateModel::set_normalization(const Labels& mean, const Labels& scale) {
  for (int t = 0; t < kNumTargets; ++t) {
    if (!std::isfinite(mean[t]) || !std::isfinite(scale[t]) || !(scale[t] > 0))
      throw Error("SurrogateModel: normalization statistics must be finite with positive scale");
    mean_[t] = mean[t];
    scale_[t] = scale[t];
    if (!params_.empty()) params_[lay_.b3 + t] = softplus_inverse(mean[t] / scale[t]);
  }
}

void SurrogateModel::check_compatible(const GraphTopology& topo) const {
  auto expect = ModelShape::for_topology(topo, shape_.head1, shape_.head2);
  if (!(expect == shape_))
    throw Error("surrogate model fingerprint (N=" + std::to_string(shape_.width) + ", t=" +
                std::to_string(shape_.slots) + ", T=" + std::to_string(shape_.stages) + ", readout=" +
                std::to_string(shape_.readout_nodes) + ", d=" + std::to_string(shape_.feature_dim) +
                ") does not match graph (N=" + std::to_string(expect.width) + ", t=" + std::to_string(expect.slots) +
                ", T=" + std::to_string(expect.stages) + ", readout=" + std::to_string(expect.readout_nodes) +
                ", d=" + std::to_string(expect.feature_dim) + ")");
}

void SurrogateModel::forward(const StageGraph& g, Trace& tr) const {
  if (params_.empty()) throw Error("SurrogateModel: model is not initialised");
  const auto& topo = *g.topology;
  const int d = shape_.feature_dim;
  if (g.features.rows() != d || g.features.cols() != topo.num_nodes)
    throw Error("SurrogateModel: feature matrix is " + std::to_string(g.features.rows()) + "x" +
                std::to_string(g.features.cols()) + ", expected " + std::to_string(d) + "x" +
                std::to_string(topo.num_nodes));
  if (topo.num_stages != shape_.stages || static_cast<int>(topo.readout.size()) != shape_.readout_nodes)
    check_compatible(topo);

  tr.h = g.features;
  tr.z.resize(shape_.stages + 1);
  tr.a.resize(shape_.stages + 1);
  for (int k = 1; k <= shape_.stages; ++k) {
    const auto& nodes = topo.stage_nodes[k];
    const int m = static_cast<int>(nodes.size());
    auto& z = tr.z[k];
    z.setZero(2 * d, m);
    for (int i = 0; i < m; ++i) {
      const int v = nodes[i];
      z.col(i).head(d) = tr.h.col(v);
      const auto& nb = topo.neighbors[v];
      if (nb.empty()) continue;
      auto agg = z.col(i).tail(d);
      for (int u : nb) agg += tr.h.col(u);
      agg /= static_cast<double>(nb.size());
    }
    Eigen::Map<const Eigen::MatrixXd> w(params_.data() + lay_.w_stage + static_cast<std::size_t>(k - 1) * d * 2 * d, d,
                                        2 * d);
    tr.a[k].noalias() = w * z;
    for (int i = 0; i < m; ++i) tr.h.col(nodes[i]) = tr.a[k].col(i).cwiseMax(0.0);
  }

  const int r = shape_.readout_nodes * d;
  tr.g.resize(r);
  for (int i = 0; i < shape_.readout_nodes; ++i) tr.g.segment(i * d, d) = tr.h.col(topo.readout[i]);
  Eigen::Map<const Eigen::MatrixXd> a1(params_.data() + lay_.a1, shape_.head1, r);
  Eigen::Map<const Eigen::VectorXd> b1(params_.data() + lay_.b1, shape_.head1);
  Eigen::Map<const Eigen::MatrixXd> a2(params_.data() + lay_.a2, shape_.head2, shape_.head1);
  Eigen::Map<const Eigen::VectorXd> b2(params_.data() + lay_.b2, shape_.head2);
  Eigen::Map<const Eigen::MatrixXd> a3(params_.data() + lay_.a3, kNumTargets, shape_.head2);
  Eigen::Map<const Eigen::VectorXd> b3(params_.data() + lay_.b3, kNumTargets);
  tr.a1.noalias() = a1 * tr.g;
  tr.a1 += b1;
  tr.h1 = tr.a1.cwiseMax(0.0);
  tr.a2.noalias() = a2 * tr.h1;
  tr.a2 += b2;
  tr.h2 = tr.a2.cwiseMax(0.0);
  tr.o.noalias() = a3 * tr.h2;
  tr.o += b3;
}

Eigen::VectorXd SurrogateModel::encode(const StageGraph& g) const {
  Trace tr;
  forward(g, tr);
  return tr.g;
}

Labels SurrogateModel::head_output(const StageGraph& g) const {
  Trace tr;
  forward(g, tr);
  Labels o;
  for (int t = 0; t < kNumTargets; ++t) o[t] = tr.o(t);
  return o;
}

Labels SurrogateModel::predict(const StageGraph& g) const {
  Labels o = head_output(g);
  for (int t = 0; t < kNumTargets; ++t) o[t] = scale_[t] * softplus(o[t]);
  return o;
}

double SurrogateModel::loss(std::span<const StageGraph* const> graphs, std::span<const Labels> labels,
                            std::vector<double>* grad) const {
  if (graphs.size() != labels.size()) throw Error("SurrogateModel::loss: graph/label count mismatch");
  if (graphs.empty()) throw Error("SurrogateModel::loss: empty batch");
  if (grad) grad->resize(params_.size(), 0.0);
  const int d = shape_.feature_dim;
  const int r = shape_.readout_nodes * d;
  const double norm = 1.0 / (static_cast<double>(graphs.size()) * kNumTargets);
  double total = 0.0;
  Trace tr;
  Eigen::MatrixXd gh;  // gradient w.r.t. updated node values
  for (std::size_t b = 0; b < graphs.size(); ++b) {
    const StageGraph& g = *graphs[b];
    forward(g, tr);
    Eigen::VectorXd d_o(kNumTargets);
    for (int t = 0; t < kNumTargets; ++t) {
      const double sp = softplus(tr.o(t));
      const double diff = sp - labels[b][t] / scale_[t];
      total += diff * diff;
      d_o(t) = 2.0 * norm * diff * sigmoid(tr.o(t));
    }
    if (!grad) continue;
    double* gp = grad->data();
    Eigen::Map<const Eigen::MatrixXd> a2(params_.data() + lay_.a2, shape_.head2, shape_.head1);
    Eigen::Map<const Eigen::MatrixXd> a3(params_.data() + lay_.a3, kNumTargets, shape_.head2);
    Eigen::Map<const Eigen::MatrixXd> a1(params_.data() + lay_.a1, shape_.head1, r);
    Eigen::Map<Eigen::MatrixXd> ga3(gp + lay_.a3, kNumTargets, shape_.head2);
    Eigen::Map<Eigen::VectorXd> gb3(gp + lay_.b3, kNumTargets);
    Eigen::Map<Eigen::MatrixXd> ga2(gp + lay_.a2, shape_.head2, shape_.head1);
    Eigen::Map<Eigen::VectorXd> gb2(gp + lay_.b2, shape_.head2);
    Eigen::Map<Eigen::MatrixXd> ga1(gp + lay_.a1, shape_.head1, r);
    Eigen::Map<Eigen::VectorXd> gb1(gp + lay_.b1, shape_.head1);

    ga3.noalias() += d_o * tr.h2.transpose();
    gb3 += d_o;
    Eigen::VectorXd d_a2 = (a3.transpose() * d_o).cwiseProduct((tr.a2.array() > 0).cast<double>().matrix());
    ga2.noalias() += d_a2 * tr.h1.transpose();
    gb2 += d_a2;
    Eigen::VectorXd d_a1 = (a2.transpose() * d_a2).cwiseProduct((tr.a1.array() > 0).cast<double>().matrix());
    ga1.noalias() += d_a1 * tr.g.transpose();
    gb1 += d_a1;
    Eigen::VectorXd d_g = a1.transpose() * d_a1;

    const auto& topo = *g.topology;
    gh.setZero(d, topo.num_nodes);
    for (int i = 0; i < shape_.readout_nodes; ++i) gh.col(topo.readout[i]) += d_g.segment(i * d, d);
    for (int k = shape_.stages; k >= 1; --k) {
      const auto& nodes = topo.stage_nodes[k];
      const int m = static_cast<int>(nodes.size());
      if (m == 0) continue;
      Eigen::MatrixXd d_a(d, m);
      for (int i = 0; i < m; ++i)
        d_a.col(i) = gh.col(nodes[i]).cwiseProduct((tr.a[k].col(i).array() > 0).cast<double>().matrix());
      const std::size_t woff = lay_.w_stage + static_cast<std::size_t>(k - 1) * d * 2 * d;
      Eigen::Map<const Eigen::MatrixXd> w(params_.data() + woff, d, 2 * d);
      Eigen::Map<Eigen::MatrixXd> gw(gp + woff, d, 2 * d);
      gw.noalias() += d_a * tr.z[k].transpose();
      if (k == 1) continue;  // neighbours of stage-1 nodes are raw features
      Eigen::MatrixXd d_agg = w.rightCols(d).transpose() * d_a;
      for (int i = 0; i < m; ++i) {
        const auto& nb = topo.neighbors[nodes[i]];
        if (nb.empty()) continue;
        const double inv = 1.0 / static_cast<double>(nb.size());
        for (int u : nb) {
          const int su = topo.stage[u];
          if (su >= 1 && su < k) gh.col(u) += inv * d_agg.col(i);
        }
      }
    }
  }
  return total * norm;
}

// ---------------------------------------------------------------------------
// Checkpoints

std::string format_model(const SurrogateModel& m) {
  const auto& s = m.shape_;
  std::ostringstream os;
  os << "acco-surrogate 1\n";
  os << "shape width " << s.width << " slots " << s.slots << " stages " << s.stages << " readout " << s.readout_nodes
     << " features " << s.feature_dim << " head " << s.head1 << ' ' << s.head2 << '\n';
  os << "mean";
  for (double v : m.mean_) os << ' ' << format_double(v);
  os << "\nscale";
  for (double v : m.scale_) os << ' ' << format_double(v);
  os << "\nparams " << m.params_.size() << '\n';
  for (std::size_t i = 0; i < m.params_.size(); ++i)
    os << format_double(m.params_[i]) << ((i % 8 == 7 || i + 1 == m.params_.size()) ? '\n' : ' ');
  return os.str();
}

SurrogateModel parse_model(const std::string& text) {
  auto lines = tokenize(text);
  auto fail = [](const std::string& msg) -> SurrogateModel { throw ParseError("surrogate checkpoint: " + msg); };
  if (lines.size() < 5 || lines[0].tokens != std::vector<std::string>{"acco-surrogate", "1"})
    return fail("missing 'acco-surrogate 1' header");
  const auto& sh = lines[1].tokens;
  if (sh.size() != 14 || sh[0] != "shape" || sh[1] != "width" || sh[3] != "slots" || sh[5] != "stages" ||
      sh[7] != "readout" || sh[9] != "features" || sh[11] != "head")
    return fail("malformed shape line");
  ModelShape s;
  auto num = [&](const std::string& t) { return static_cast<int>(parse_integer(t, "surrogate checkpoint", lines[1].number)); };
  s.width = num(sh[2]);
  s.slots = num(sh[4]);
  s.stages = num(sh[6]);
  s.readout_nodes = num(sh[8]);
  s.feature_dim = num(sh[10]);
  s.head1 = num(sh[12]);
  s.head2 = num(sh[13]);
  SurrogateModel m(s, 0);
  Labels mean{}, scale{};
  for (int which = 0; which < 2; ++which) {
    const auto& ln = lines[2 + which];
    if (ln.tokens.size() != kNumTargets + 1 || ln.tokens[0] != (which ? "scale" : "mean"))
      return fail(std::string("malformed ") + (which ? "scale" : "mean") + " line");
    for (int t = 0; t < kNumTargets; ++t)
      (which ? scale : mean)[t] = parse_double(ln.tokens[t + 1], "surrogate checkpoint", ln.number);
  }
  const auto& pl = lines[4].tokens;
  if (pl.size() != 2 || pl[0] != "params") return fail("missing params line");
  const auto count = static_cast<std::size_t>(parse_integer(pl[1], "surrogate checkpoint", lines[4].number));
  if (count != m.params_.size())
    return fail("parameter count " + std::to_string(count) + " does not match shape (" +
                std::to_string(m.params_.size()) + ")");
  std::size_t idx = 0;
  for (std::size_t li = 5; li < lines.size(); ++li)
    for (const auto& tok : lines[li].tokens) {
      if (idx >= count) return fail("too many parameter values");
      m.params_[idx++] = parse_double(tok, "surrogate checkpoint", lines[li].number);
    }
  if (idx != count) return fail("expected " + std::to_string(count) + " parameter values, found " + std::to_string(idx));
  m.mean_ = mean;
  m.scale_ = scale;
  return m;
}

void save_model(const SurrogateModel& m, const std::string& path) { write_text_file(path, format_model(m)); }

SurrogateModel load_model(const std::string& path, const GraphTopology& expected) {
  auto m = parse_model(read_text_file(path));
  m.check_compatible(expected);
  return m;
}

// ---------------------------------------------------------------------------
// Dataset

Labels label_design(const MultiplierConfig& cfg, const TechTable& tech) {
  auto net = build_tree(cfg);
  auto err = error_report(net, InputSet::standard(cfg.width));
  auto ppa = ppa_report(net, tech);
  return {err.mred, err.nmed, ppa.delay_ps, ppa.area_um2, ppa.power_uw};
}

void split_dataset(Dataset& ds, std::uint64_t seed) {
  std::vector<std::size_t> idx(ds.samples.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const std::size_t n = idx.size();
  const std::size_t n_train = n * 70 / 100;
  const std::size_t n_val = n * 15 / 100;
  ds.train.assign(idx.begin(), idx.begin() + n_train);
  ds.validation.assign(idx.begin() + n_train, idx.begin() + n_train + n_val);
  ds.test.assign(idx.begin() + n_train + n_val, idx.end());
  for (auto* part : {&ds.train, &ds.validation, &ds.test}) std::sort(part->begin(), part->end());
}

Dataset generate_dataset(int width, const CellLibrary& lib, const TechTable& tech, std::size_t count,
                         std::uint64_t seed, bool force_exact_first) {
  if (count == 0) throw Error("generate_dataset: count must be positive");
  Dataset ds;
  ds.width = width;
  ds.seed = seed;
  auto cfg = exact_config(width, lib);
  const auto comps = lib.compressor_indices();
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    Sample s;
    s.assignment = cfg.assignment;
    if (!(force_exact_first && i == 0))
      for (auto& a : s.assignment) a = comps[rng() % comps.size()];
    cfg.assignment = s.assignment;
    s.y = label_design(cfg, tech);
    ds.samples.push_back(std::move(s));
  }
  split_dataset(ds, seed ^ 0x9e3779b97f4a7c15ull);
  return ds;
}

std::string format_dataset_csv(const Dataset& ds, const CellLibrary& lib) {
  std::vector<char> split(ds.samples.size(), '?');
  for (auto i : ds.train) split[i] = 'r';
  for (auto i : ds.validation) split[i] = 'v';
  for (auto i : ds.test) split[i] = 't';
  const std::size_t t = ds.samples.empty() ? 0 : ds.samples[0].assignment.size();
  std::ostringstream os;
  os << "# width " << ds.width << " seed " << ds.seed << '\n';
  os << "id,split";
  for (std::size_t i = 1; i <= t; ++i) os << ",a" << i;
  for (const char* name : kTargetNames) os << ',' << name;
  os << '\n';
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    os << i << ',' << (split[i] == 'r' ? "train" : split[i] == 'v' ? "validation" : split[i] == 't' ? "test" : "none");
    for (auto a : s.assignment) os << ',' << lib.cell(a).name();
    for (double v : s.y) os << ',' << format_double(v);
    os << '\n';
  }
  return os.str();
}

Dataset parse_dataset_csv(const std::string& text, const CellLibrary& lib) {
  Dataset ds;
  std::istringstream in(text);
  std::string line;
  int number = 0;
  std::size_t t = 0;
  bool header = false;
  auto fail = [&](const std::string& msg) { throw ParseError("dataset line " + std::to_string(number) + ": " + msg); };
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream hs(line.substr(1));
      std::string k1, k2;
      long long w = 0;
      unsigned long long seed = 0;
      if (hs >> k1 >> w >> k2 >> seed && k1 == "width" && k2 == "seed") {
        ds.width = static_cast<int>(w);
        ds.seed = seed;
      }
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (!header) {
      if (f.size() < 2 + kNumTargets || f[0] != "id" || f[1] != "split") fail("bad header");
      t = f.size() - 2 - kNumTargets;
      header = true;
      continue;
    }
    if (f.size() != t + 2 + kNumTargets) fail("expected " + std::to_string(t + 2 + kNumTargets) + " fields");
    const auto id = static_cast<std::size_t>(parse_integer(f[0], "dataset", number));
    if (id != ds.samples.size()) fail("ids must be consecutive from 0");
    Sample s;
    for (std::size_t i = 0; i < t; ++i) {
      auto idx = lib.find(f[2 + i]);
      if (!idx || !lib.is_compressor(*idx)) fail("unknown compressor '" + f[2 + i] + "'");
      s.assignment.push_back(*idx);
    }
    for (int k = 0; k < kNumTargets; ++k) s.y[k] = parse_double(f[2 + t + k], "dataset", number);
    if (f[1] == "train")
      ds.train.push_back(id);
    else if (f[1] == "validation")
      ds.validation.push_back(id);
    else if (f[1] == "test")
      ds.test.push_back(id);
    else if (f[1] != "none")
      fail("unknown split '" + f[1] + "'");
    ds.samples.push_back(std::move(s));
  }
  if (!header) throw ParseError("dataset: missing header");
  return ds;
}

// ---------------------------------------------------------------------------
// Training and evaluation

Labels compute_mean(std::span<const Labels> labels) {
  if (labels.empty()) throw Error("compute_mean: no labels");
  Labels m{};
  for (const auto& y : labels)
    for (int t = 0; t < kNumTargets; ++t) m[t] += y[t];
  for (auto& v : m) v /= static_cast<double>(labels.size());
  return m;
}

Labels compute_scale(std::span<const Labels> labels) {
  const Labels m = compute_mean(labels);
  Labels s{};
  for (const auto& y : labels)
    for (int t = 0; t < kNumTargets; ++t) s[t] += (y[t] - m[t]) * (y[t] - m[t]);
  for (int t = 0; t < kNumTargets; ++t) {
    s[t] = std::sqrt(s[t] / static_cast<double>(labels.size()));
    // constant targets fall back to their magnitude
    if (!(s[t] > 1e-12 * std::max(1.0, std::abs(m[t])))) s[t] = std::max(std::abs(m[t]), 1e-12);
  }
  return s;
}

TrainResult train(SurrogateModel& model, std::span<const StageGraph> train_graphs, std::span<const Labels> train_labels,
                  std::span<const StageGraph> val_graphs, std::span<const Labels> val_labels, const TrainOptions& opt) {
  if (train_graphs.empty() || train_graphs.size() != train_labels.size())
    throw Error("train: need a non-empty training set with one label per graph");
  if (val_graphs.size() != val_labels.size()) throw Error("train: validation graph/label count mismatch");
  if (opt.batch == 0 || opt.epochs < 0) throw Error("train: invalid batch size or epoch count");
  model.set_normalization(compute_mean(train_labels), compute_scale(train_labels));

  const std::size_t n = train_graphs.size();
  const std::size_t np = model.params().size();
  std::vector<double> m1(np, 0.0), m2(np, 0.0), grad(np);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(opt.seed);
  std::vector<const StageGraph*> bg;
  std::vector<Labels> bl;
  std::vector<const StageGraph*> vg;
  for (const auto& g : val_graphs) vg.push_back(&g);

  auto val_loss = [&] { return vg.empty() ? 0.0 : model.loss(vg, val_labels, nullptr); };

  TrainResult res;
  std::vector<double> best = std::vector<double>(model.params().begin(), model.params().end());
  double best_val = vg.empty() ? 0.0 : val_loss();
  const std::size_t steps_per_epoch = (n + opt.batch - 1) / opt.batch;
  const double total_steps = static_cast<double>(steps_per_epoch) * std::max(1, opt.epochs);
  std::size_t step = 0;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += opt.batch) {
      const std::size_t end = std::min(n, start + opt.batch);
      bg.clear();
      bl.clear();
      for (std::size_t i = start; i < end; ++i) {
        bg.push_back(&train_graphs[order[i]]);
        bl.push_back(train_labels[order[i]]);
      }
      std::fill(grad.begin(), grad.end(), 0.0);
      const double l = model.loss(bg, bl, &grad);
      if (!std::isfinite(l))
        throw Error("train: non-finite loss at epoch " + std::to_string(epoch) + ", step " + std::to_string(step));
      epoch_loss += l * static_cast<double>(end - start);
      ++step;
      const double progress = static_cast<double>(step - 1) / total_steps;
      const double lr = opt.lr_final + 0.5 * (opt.lr - opt.lr_final) * (1.0 + std::cos(3.14159265358979323846 * progress));
      const double c1 = 1.0 - std::pow(opt.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opt.beta2, static_cast<double>(step));
      auto p = model.params();
      for (std::size_t i = 0; i < np; ++i) {
        m1[i] = opt.beta1 * m1[i] + (1.0 - opt.beta1) * grad[i];
        m2[i] = opt.beta2 * m2[i] + (1.0 - opt.beta2) * grad[i] * grad[i];
        p[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + opt.eps);
      }
    }
    res.train_loss.push_back(epoch_loss / static_cast<double>(n));
    if (!vg.empty()) {
      const double v = val_loss();
      if (!std::isfinite(v)) throw Error("train: non-finite validation loss at epoch " + std::to_string(epoch));
      res.validation_loss.push_back(v);
      if (v < best_val) {
        best_val = v;
        res.best_epoch = epoch;
        best.assign(model.params().begin(), model.params().end());
      }
    }
  }
  if (!vg.empty()) std::copy(best.begin(), best.end(), model.params().begin());
  return res;
}

std::array<TargetMetrics, kNumTargets> eval_metrics(std::span<const Labels> predicted, std::span<const Labels> actual,
                                                    const Labels& scale) {
  if (predicted.empty() || predicted.size() != actual.size())
    throw Error("eval_metrics: need a non-empty split with matching prediction count");
  std::array<TargetMetrics, kNumTargets> out{};
  const Labels mean = compute_mean(actual);
  const double n = static_cast<double>(actual.size());
  for (int t = 0; t < kNumTargets; ++t) {
    double ss_res = 0, ss_tot = 0, mre = 0;
    std::size_t nz = 0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
      const double e = predicted[i][t] - actual[i][t];
      ss_res += e * e;
      ss_tot += (actual[i][t] - mean[t]) * (actual[i][t] - mean[t]);
      if (actual[i][t] != 0.0) {
        mre += std::abs(e) / std::abs(actual[i][t]);
        ++nz;
      }
    }
    auto& m = out[t];
    m.mse = ss_res / n;
    m.mse_norm = m.mse / (scale[t] * scale[t]);
    m.mre_percent = nz ? 100.0 * mre / static_cast<double>(nz) : 0.0;
    m.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : (ss_res == 0 ? 1.0 : 0.0);
  }
  return out;
}

std::array<TargetMetrics, kNumTargets> eval_metrics(const SurrogateModel& model, std::span<const StageGraph> graphs,
                                                    std::span<const Labels> actual) {
  std::vector<Labels> pred;
  pred.reserve(graphs.size());
  for (const auto& g : graphs) pred.push_back(model.predict(g));
  return eval_metrics(pred, actual, model.target_scale());
}

}  // namespace acco
