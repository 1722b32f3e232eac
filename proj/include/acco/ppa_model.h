#pragma once

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "acco/multiplier.h"

namespace acco {

struct TechEntry {
  double delay_ps = 0.0;
  double energy_fj = 0.0;  // per output toggle
  double area_um2 = 0.0;
};

class TechTable {
 public:
  TechTable() = default;

  void set(const std::string& kind, TechEntry entry);
  bool contains(std::string_view kind) const;
  /// Throws Error naming the kind when absent.
  const TechEntry& at(std::string_view kind) const;
  const std::map<std::string, TechEntry, std::less<>>& entries() const { return entries_; }

  double frequency_ghz() const { return frequency_ghz_; }
  void set_frequency_ghz(double f);

 private:
  std::map<std::string, TechEntry, std::less<>> entries_;
  double frequency_ghz_ = 1.0;
};

/// Lines of `kind delay_ps energy_fJ area_um2`, plus an optional
/// `frequency_ghz <f>` line. '#' starts a comment.
TechTable load_tech(std::string_view text);
TechTable load_tech_file(const std::string& path);

struct PpaReport {
  double delay_ps = 0.0;
  double power_uw = 0.0;
  double area_um2 = 0.0;
  double pdp_fj = 0.0;  // power_uw * delay_ps * 1e-3
};

/// Conversion of µW·ps to fJ.
inline constexpr double kPdpScale = 1e-3;

/// Longest weighted path: arrival of a node output is the max input arrival
/// plus the node's delay entry; primary inputs arrive at 0.
double delay(const Netlist& net, const TechTable& tech);

/// Per-node toggle rate: sum over the node's outputs of 2p(1-p), with p from
/// signal_probabilities().
std::vector<double> default_activities(const Netlist& net, double p_operand = 0.5);

/// Sum over nodes of energy * activity * frequency (fJ * GHz = µW).
double power(const Netlist& net, const TechTable& tech, std::span<const double> activities);
double area(const Netlist& net, const TechTable& tech);

PpaReport ppa_report(const Netlist& net, const TechTable& tech);
PpaReport ppa_report(const Netlist& net, const TechTable& tech, std::span<const double> activities);

}  // namespace acco
