#include "acco/cell_sizing.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <unordered_map>

#include "acco/ppa_model.h"
#include "acco/text_format.h"

namespace acco {

namespace {

std::string at_line(int n) { return "line " + std::to_string(n) + ": "; }

// Boolean behaviour of the gate kinds a chain file may simulate.
using GateFn = std::function<int(std::span<const int>)>;

const std::unordered_map<std::string, GateFn>& gate_functions() {
  static const std::unordered_map<std::string, GateFn> fns{
      {"INV", [](std::span<const int> v) { return !v[0]; }},
      {"BUF", [](std::span<const int> v) { return v[0]; }},
      {"NAND2", [](std::span<const int> v) { return !(v[0] && v[1]); }},
      {"NAND3", [](std::span<const int> v) { return !(v[0] && v[1] && v[2]); }},
      {"NOR2", [](std::span<const int> v) { return !(v[0] || v[1]); }},
      {"NOR3", [](std::span<const int> v) { return !(v[0] || v[1] || v[2]); }},
      {"AOI21", [](std::span<const int> v) { return !((v[0] && v[1]) || v[2]); }},
      {"OAI21", [](std::span<const int> v) { return !((v[0] || v[1]) && v[2]); }},
      {"AOI22", [](std::span<const int> v) { return !((v[0] && v[1]) || (v[2] && v[3])); }},
      {"OAI22", [](std::span<const int> v) { return !((v[0] || v[1]) && (v[2] || v[3])); }},
      {"XOR2", [](std::span<const int> v) { return v[0] != v[1]; }},
      {"XNOR2", [](std::span<const int> v) { return v[0] == v[1]; }},
      {"MAJI", [](std::span<const int> v) { return v[0] + v[1] + v[2] < 2; }},
  };
  return fns;
}

double bound_excess(std::span<const double> w, const GateChain& chain) {
  double e = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    e += std::max(0.0, chain.groups[i].lower - w[i]);
    e += std::max(0.0, w[i] - chain.groups[i].upper);
  }
  return e;
}

void check_widths(std::span<const double> w, const GateChain& chain) {
  if (w.size() != chain.groups.size())
    throw Error("sizing: " + std::to_string(w.size()) + " widths given for " + std::to_string(chain.groups.size()) +
                " groups in chain '" + chain.name + "'");
  for (double v : w)
    if (!(v > 0.0) || !std::isfinite(v)) throw Error("sizing: widths must be positive and finite");
}

}  // namespace

const GateKind& SizingParams::kind(const std::string& name) const {
  auto it = kinds.find(name);
  if (it == kinds.end()) throw Error("unknown gate kind '" + name + "'");
  return it->second;
}

SizingParams parse_gate_params(const std::string& text) {
  SizingParams p;
  for (const auto& ln : tokenize(text)) {
    const auto& tk = ln.tokens;
    auto num = [&](std::size_t i) { return parse_double(tk.at(i), "gate params", ln.number); };
    auto expect = [&](std::size_t n, const char* form) {
      if (tk.size() != n) throw ParseError("gate params " + at_line(ln.number) + "expected '" + form + "'");
    };
    const std::string& key = tk[0];
    if (key == "kind") {
      expect(6, "kind <name> <g> <p> <fanin> <devices>");
      GateKind k{tk[1], num(2), num(3), static_cast<int>(parse_integer(tk[4], "gate params", ln.number)),
                 static_cast<int>(parse_integer(tk[5], "gate params", ln.number))};
      if (!(k.g > 0) || !(k.p >= 0) || k.fanin < 1 || k.devices < 1)
        throw ParseError("gate params " + at_line(ln.number) + "efforts must be positive");
      if (!p.kinds.emplace(k.name, k).second)
        throw ParseError("gate params " + at_line(ln.number) + "duplicate kind '" + k.name + "'");
    } else if (key == "corner") {
      expect(4, "corner <name> <delay_scale> <power_scale>");
      PvtCorner c{tk[1], num(2), num(3)};
      if (!(c.delay_scale > 0) || !(c.power_scale > 0))
        throw ParseError("gate params " + at_line(ln.number) + "corner scales must be positive");
      p.corners.push_back(c);
    } else {
      expect(2, "<key> <value>");
      const double v = num(1);
      if (key == "tau_ps") p.tau_ps = v;
      else if (key == "kappa_uw") p.kappa_uw = v;
      else if (key == "lambda_area_um2") p.lambda_area_um2 = v;
      else if (key == "w_min") p.w_min = v;
      else if (key == "beta_min") p.beta_min = v;
      else if (key == "beta_max") p.beta_max = v;
      else throw ParseError("gate params " + at_line(ln.number) + "unknown key '" + key + "'");
    }
  }
  if (!(p.beta_min > 0) || !(p.beta_min <= p.beta_max)) throw ParseError("gate params: invalid beta bounds");
  return p;
}

SizingParams load_gate_params(const std::string& path) {
  try {
    return parse_gate_params(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::vector<Variable> GateChain::variables() const {
  std::vector<Variable> v;
  for (const auto& g : groups) v.push_back(Variable{g.lower, g.upper, false});
  return v;
}

GateChain parse_chain(const std::string& text, const SizingParams& params) {
  GateChain c;
  std::map<std::string, int> signal;
  std::map<std::string, int> group;
  std::map<std::string, int> gate_index;
  auto fail = [](int line, const std::string& msg) { throw ParseError("chain " + at_line(line) + msg); };
  for (const auto& ln : tokenize(text)) {
    const auto& tk = ln.tokens;
    const std::string& key = tk[0];
    if (key == "chain") {
      if (tk.size() != 2) fail(ln.number, "expected 'chain <name>'");
      c.name = tk[1];
    } else if (key == "inputs") {
      if (!c.inputs.empty() || !c.gates.empty()) fail(ln.number, "inputs must be declared once, before gates");
      for (std::size_t i = 1; i < tk.size(); ++i) {
        if (!signal.emplace(tk[i], static_cast<int>(c.inputs.size())).second) fail(ln.number, "duplicate input");
        c.inputs.push_back(tk[i]);
      }
    } else if (key == "load") {
      if (tk.size() != 2) fail(ln.number, "expected 'load <c>'");
      c.load = parse_double(tk[1], "chain", ln.number);
      if (!(c.load >= 0)) fail(ln.number, "load must be non-negative");
    } else if (key == "group") {
      if (tk.size() != 4) fail(ln.number, "expected 'group <name> <lower> <upper>'");
      WidthGroup g{tk[1], parse_double(tk[2], "chain", ln.number), parse_double(tk[3], "chain", ln.number)};
      if (!(g.lower > 0) || !(g.lower <= g.upper)) fail(ln.number, "group bounds must satisfy 0 < lower <= upper");
      if (!group.emplace(g.name, static_cast<int>(c.groups.size())).second) fail(ln.number, "duplicate group");
      c.groups.push_back(g);
    } else if (key == "gate") {
      if (tk.size() < 6) fail(ln.number, "expected 'gate <name> <kind> <pu_group> <pd_group> <inputs...>'");
      ChainGate g;
      g.name = tk[1];
      g.kind = tk[2];
      const GateKind* k = nullptr;
      try {
        k = &params.kind(g.kind);
      } catch (const Error& e) {
        fail(ln.number, e.what());
      }
      for (int j : {3, 4}) {
        auto it = group.find(tk[j]);
        if (it == group.end()) fail(ln.number, "unknown group '" + tk[j] + "'");
        (j == 3 ? g.pu_group : g.pd_group) = it->second;
      }
      for (std::size_t i = 5; i < tk.size(); ++i) {
        auto it = signal.find(tk[i]);
        if (it == signal.end()) fail(ln.number, "signal '" + tk[i] + "' used before it is driven");
        g.inputs.push_back(it->second);
      }
      if (static_cast<int>(g.inputs.size()) != k->fanin)
        fail(ln.number, g.kind + " takes " + std::to_string(k->fanin) + " inputs");
      if (!signal.emplace(g.name, c.signal_count()).second) fail(ln.number, "duplicate signal '" + g.name + "'");
      gate_index[g.name] = static_cast<int>(c.gates.size());
      c.gates.push_back(std::move(g));
    } else if (key == "activity") {
      if (tk.size() != 3) fail(ln.number, "expected 'activity <gate> <a>'");
      auto it = gate_index.find(tk[1]);
      if (it == gate_index.end()) fail(ln.number, "unknown gate '" + tk[1] + "'");
      const double a = parse_double(tk[2], "chain", ln.number);
      if (!(a >= 0 && a <= 1)) fail(ln.number, "activity must lie in [0, 1]");
      c.gates[it->second].activity = a;
    } else if (key == "output") {
      if (tk.size() != 3) fail(ln.number, "expected 'output <name> <signal|0|1>'");
      ChainOutput o{tk[1], kConst0};
      if (tk[2] == "1") o.signal = kConst1;
      else if (tk[2] != "0") {
        auto it = signal.find(tk[2]);
        if (it == signal.end()) fail(ln.number, "unknown signal '" + tk[2] + "'");
        o.signal = it->second;
      }
      c.outputs.push_back(o);
    } else {
      fail(ln.number, "unknown directive '" + key + "'");
    }
  }
  if (c.name.empty()) throw ParseError("chain: missing 'chain <name>'");
  if (c.groups.empty()) throw ParseError("chain '" + c.name + "': no width groups");
  if (c.outputs.empty()) throw ParseError("chain '" + c.name + "': no outputs");
  std::vector<int> used(c.signal_count(), 0);
  for (const auto& g : c.gates)
    for (int s : g.inputs) ++used[s];
  for (const auto& o : c.outputs)
    if (o.signal >= 0) ++used[o.signal];
  for (std::size_t i = 0; i < c.gates.size(); ++i)
    if (used[c.inputs.size() + i] == 0)
      throw ParseError("chain '" + c.name + "': gate '" + c.gates[i].name + "' drives nothing");
  std::vector<int> group_used(c.groups.size(), 0);
  for (const auto& g : c.gates) group_used[g.pu_group] = group_used[g.pd_group] = 1;
  for (std::size_t i = 0; i < c.groups.size(); ++i)
    if (!group_used[i]) throw ParseError("chain '" + c.name + "': group '" + c.groups[i].name + "' has no devices");
  return c;
}

GateChain load_chain_file(const std::string& path, const SizingParams& params) {
  try {
    return parse_chain(read_text_file(path), params);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::uint32_t simulate_chain(const GateChain& chain, std::uint32_t pattern) {
  const int n = static_cast<int>(chain.inputs.size());
  std::vector<int> v(chain.signal_count());
  for (int i = 0; i < n; ++i) v[i] = (pattern >> (n - 1 - i)) & 1u;
  const auto& fns = gate_functions();
  std::vector<int> args;
  for (std::size_t i = 0; i < chain.gates.size(); ++i) {
    const auto& g = chain.gates[i];
    auto it = fns.find(g.kind);
    if (it == fns.end()) throw Error("no logic function for gate kind '" + g.kind + "'");
    args.clear();
    for (int s : g.inputs) args.push_back(v[s]);
    v[n + i] = it->second(args) ? 1 : 0;
  }
  std::uint32_t out = 0;
  for (std::size_t j = 0; j < chain.outputs.size(); ++j) {
    const int s = chain.outputs[j].signal;
    const int bit = s == kConst1 ? 1 : s == kConst0 ? 0 : v[s];
    out |= static_cast<std::uint32_t>(bit) << j;
  }
  return out;
}

bool chain_implements(const GateChain& chain, const TruthTable& table) {
  if (static_cast<int>(chain.inputs.size()) != table.inputs() ||
      static_cast<int>(chain.outputs.size()) != table.outputs())
    return false;
  for (std::size_t i = 0; i < table.num_rows(); ++i)
    if (simulate_chain(chain, static_cast<std::uint32_t>(i)) != table.row(i)) return false;
  return true;
}

Correctness correctness_surrogate(std::span<const double> w, const GateChain& chain, const SizingParams& params) {
  check_widths(w, chain);
  double v = 0.0;
  for (const auto& g : chain.gates) {
    const double r = w[g.pu_group] / w[g.pd_group];
    v += std::max(0.0, r - params.beta_max) + std::max(0.0, params.beta_min - r);
  }
  for (double x : w) v += std::max(0.0, params.w_min - x);
  return {v == 0.0, v};
}

SizingMetrics eval_sizing(std::span<const double> w, const GateChain& chain, const SizingParams& params,
                          const PvtCorner& corner) {
  check_widths(w, chain);
  const int n_in = static_cast<int>(chain.inputs.size());
  const std::size_t ng = chain.gates.size();
  std::vector<double> c_in(ng), c_load(ng, 0.0), size(ng);
  std::vector<const GateKind*> kinds(ng);
  for (std::size_t i = 0; i < ng; ++i) {
    const auto& g = chain.gates[i];
    kinds[i] = &params.kind(g.kind);
    size[i] = 0.5 * (w[g.pu_group] + w[g.pd_group]);
    c_in[i] = kinds[i]->g * size[i];
  }
  for (std::size_t i = 0; i < ng; ++i)
    for (int s : chain.gates[i].inputs)
      if (s >= n_in) c_load[s - n_in] += c_in[i];
  for (const auto& o : chain.outputs)
    if (o.signal >= n_in) c_load[o.signal - n_in] += chain.load;

  SizingMetrics m;
  std::vector<double> arrival(ng, 0.0);
  double worst = 0.0, power = 0.0, area = 0.0;
  for (std::size_t i = 0; i < ng; ++i) {
    const auto& g = chain.gates[i];
    double t = 0.0;
    for (int s : g.inputs)
      if (s >= n_in) t = std::max(t, arrival[s - n_in]);
    const double h = c_load[i] / c_in[i];
    arrival[i] = t + kinds[i]->g * h + kinds[i]->p;
    worst = std::max(worst, arrival[i]);
    power += g.activity * (c_load[i] + kinds[i]->p * size[i]);
    area += kinds[i]->devices * (w[g.pu_group] + w[g.pd_group]);
  }
  m.delay_ps = corner.delay_scale * params.tau_ps * worst;
  m.power_uw = corner.power_scale * params.kappa_uw * power;
  m.area_um2 = params.lambda_area_um2 * area;
  m.pdp_fj = m.power_uw * m.delay_ps * kPdpScale;
  const auto ok = correctness_surrogate(w, chain, params);
  m.violation = ok.violation + bound_excess(w, chain);
  m.feasible = m.violation == 0.0;
  return m;
}

SizingMetrics worst_case(std::span<const double> w, const GateChain& chain, const SizingParams& params,
                         std::span<const PvtCorner> corners) {
  if (corners.empty()) throw Error("worst_case: empty corner set");
  SizingMetrics out = eval_sizing(w, chain, params, corners[0]);
  for (std::size_t i = 1; i < corners.size(); ++i) {
    const auto m = eval_sizing(w, chain, params, corners[i]);
    out.delay_ps = std::max(out.delay_ps, m.delay_ps);
    out.power_uw = std::max(out.power_uw, m.power_uw);
    out.pdp_fj = std::max(out.pdp_fj, m.pdp_fj);
  }
  return out;
}

SizingResult optimize_cell(const GateChain& chain, const SizingParams& params, std::span<const PvtCorner> corners,
                           const SizingOptions& opt) {
  const std::vector<PvtCorner> nominal{PvtCorner{}};
  const std::span<const PvtCorner> cs = corners.empty() ? std::span<const PvtCorner>(nominal) : corners;
  SizingResult res;
  res.reference.assign(chain.groups.size(), 1.0);
  res.reference_metrics = worst_case(res.reference, chain, params, cs);

  MultiObjectiveProblem prob;
  prob.variables = chain.variables();
  prob.evaluate = [&](const Design& w) {
    const auto m = worst_case(w, chain, params, cs);
    return ObjectiveVector{{m.pdp_fj, m.area_um2}, m.violation};
  };
  Design lower;
  for (const auto& g : chain.groups) lower.push_back(g.lower);
  prob.seeds = {res.reference, lower};

  if (opt.generations == 0) {
    for (const auto& s : prob.seeds) res.archive.insert(s, prob.evaluate(s), 0);
    return res;
  }
  if (opt.method == SizingMethod::Moead) {
    MoeadOptions mo;
    mo.subproblems = opt.population;
    mo.generations = opt.generations;
    mo.seed = opt.seed;
    res.archive = moead(prob, mo);
  } else {
    Nsga2Options no;
    no.population = opt.population;
    no.generations = opt.generations;
    no.seed = opt.seed;
    res.archive = nsga2(prob, no);
  }
  return res;
}

}  // namespace acco
