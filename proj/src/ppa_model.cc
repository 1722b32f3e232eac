#include "acco/ppa_model.h"

#include <algorithm>
#include <cmath>

#include "acco/text_format.h"

namespace acco {

void TechTable::set(const std::string& kind, TechEntry e) {
  if (!(e.delay_ps > 0 && e.energy_fj > 0 && e.area_um2 > 0) || !std::isfinite(e.delay_ps) ||
      !std::isfinite(e.energy_fj) || !std::isfinite(e.area_um2))
    throw Error("tech entry '" + kind + "': all values must be positive and finite");
  entries_[kind] = e;
}

bool TechTable::contains(std::string_view kind) const { return entries_.find(kind) != entries_.end(); }

const TechEntry& TechTable::at(std::string_view kind) const {
  auto it = entries_.find(kind);
  if (it == entries_.end()) throw Error("missing tech entry for cell kind '" + std::string(kind) + "'");
  return it->second;
}

void TechTable::set_frequency_ghz(double f) {
  if (!(f > 0) || !std::isfinite(f)) throw Error("tech table: frequency must be positive");
  frequency_ghz_ = f;
}

TechTable load_tech(std::string_view text) {
  TechTable t;
  for (const auto& ln : tokenize(text)) {
    const auto& tk = ln.tokens;
    if (tk[0] == "frequency_ghz") {
      if (tk.size() != 2) throw ParseError("tech line " + std::to_string(ln.number) + ": expected 'frequency_ghz <f>'");
      t.set_frequency_ghz(parse_double(tk[1], "tech", ln.number));
      continue;
    }
    if (tk.size() != 4)
      throw ParseError("tech line " + std::to_string(ln.number) + ": expected 'kind delay_ps energy_fJ area_um2'");
    if (t.contains(tk[0])) throw ParseError("tech line " + std::to_string(ln.number) + ": duplicate kind '" + tk[0] + "'");
    TechEntry e{parse_double(tk[1], "tech", ln.number), parse_double(tk[2], "tech", ln.number),
                parse_double(tk[3], "tech", ln.number)};
    try {
      t.set(tk[0], e);
    } catch (const Error& err) {
      throw ParseError("tech line " + std::to_string(ln.number) + ": " + err.what());
    }
  }
  return t;
}

TechTable load_tech_file(const std::string& path) {
  try {
    return load_tech(read_text_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

double delay(const Netlist& net, const TechTable& tech) {
  std::vector<double> arrival(net.num_signals(), 0.0);
  double worst = 0.0;
  for (const auto& nd : net.nodes()) {
    double t = 0.0;
    for (int s : nd.inputs) t = std::max(t, arrival[s]);
    t += tech.at(net.kind_name(nd)).delay_ps;
    for (int s : nd.outputs) arrival[s] = t;
    worst = std::max(worst, t);
  }
  return worst;
}

std::vector<double> default_activities(const Netlist& net, double p_operand) {
  auto p = signal_probabilities(net, p_operand);
  std::vector<double> act;
  act.reserve(net.nodes().size());
  for (const auto& nd : net.nodes()) {
    double a = 0.0;
    for (int s : nd.outputs) a += 2.0 * p[s] * (1.0 - p[s]);
    act.push_back(a);
  }
  return act;
}

double power(const Netlist& net, const TechTable& tech, std::span<const double> activities) {
  if (activities.size() != net.nodes().size())
    throw Error("power: " + std::to_string(activities.size()) + " activities for " +
                std::to_string(net.nodes().size()) + " nodes");
  double e = 0.0;
  for (const auto& nd : net.nodes()) e += tech.at(net.kind_name(nd)).energy_fj * activities[nd.id];
  return e * tech.frequency_ghz();
}

double area(const Netlist& net, const TechTable& tech) {
  double a = 0.0;
  for (const auto& nd : net.nodes()) a += tech.at(net.kind_name(nd)).area_um2;
  return a;
}

PpaReport ppa_report(const Netlist& net, const TechTable& tech, std::span<const double> activities) {
  PpaReport r;
  r.delay_ps = delay(net, tech);
  r.power_uw = power(net, tech, activities);
  r.area_um2 = area(net, tech);
  r.pdp_fj = r.power_uw * r.delay_ps * kPdpScale;
  return r;
}

PpaReport ppa_report(const Netlist& net, const TechTable& tech) {
  auto act = default_activities(net);
  return ppa_report(net, tech, act);
}

}  // namespace acco
