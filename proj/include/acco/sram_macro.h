#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "acco/cell_sizing.h"
#include "acco/optimizers.h"

namespace acco {

struct BankConfig {
  int r = 0;   // rows per array
  int c = 0;   // columns per array
  int mu = 0;  // column mux ratio
  long long n_a = 0;

  friend bool operator==(const BankConfig&, const BankConfig&) = default;
};

/// Units: ps, µW, µm².
struct BankMetrics {
  double d_rd = 0.0, d_wr = 0.0;
  double p_rd = 0.0, p_wr = 0.0;
  double area = 0.0;

  double d_max() const { return std::max(d_rd, d_wr); }
  double p_max() const { return std::max(p_rd, p_wr); }
};

/// Bank model and bitcell surrogate coefficients.
struct SramCoefficients {
  // delay, ps
  double t_dec = 0, t_bl = 0, t_wbl = 0, t_mux = 0, t_sa = 0, t_wd = 0, t_route = 0;
  // power, µW
  double p_bl_rd = 0, p_bl_wr = 0, p_dec = 0, p_per = 0, p_wd = 0;
  // area, µm²
  double a_cell = 0, a_row = 0, a_col = 0, a_array = 0;
  std::vector<int> mu_set{2, 4, 8};
  int r_min = 2, r_max = 512, c_min = 2, c_max = 256;

  // bitcell surrogate
  double cell_read_margin = 0, cell_write_margin = 0, cell_hold_margin = 0;  // mV
  double cell_t_read = 0, cell_t_write = 0;                                  // ps
  double cell_p_width = 0;                                                    // µW per unit width
  double cell_a_width = 0, cell_a_fixed = 0;                                  // µm²
};

SramCoefficients parse_sram_coefficients(const std::string& text, const std::string& source = "coefficients");
SramCoefficients load_sram_coefficients(const std::string& path);

/// Power-of-two (r, c) grid times the mux set, keeping points with integral n_a >= 1.
std::vector<BankConfig> enumerate_configs(long long capacity, std::span<const int> mu_set, int r_min = 2,
                                          int r_max = 512, int c_min = 2, int c_max = 256);
std::vector<BankConfig> enumerate_configs(long long capacity, const SramCoefficients& k);

/// D_rd = t_dec log2(r n_a) + t_bl r + t_mux log2(mu) + t_sa + t_route sqrt(n_a); D_wr swaps
/// t_bl, t_sa for t_wbl, t_wd. P_rd = p_bl_rd (c/mu) r + p_dec log2(r n_a) + p_per n_a; P_wr
/// uses p_bl_wr and adds p_wd (c/mu). A = n_a (r c a_cell + r a_row + c a_col + a_array).
BankMetrics bank_model(const BankConfig& cfg, const SramCoefficients& k);
/// bank_model after asserting r c n_a == capacity.
BankMetrics evaluate_bank(const BankConfig& cfg, long long capacity, const SramCoefficients& k);

/// -log10(P[W] * sqrt(A[µm²]) * D[s]).
double fom_value(double p_watt, double area_um2, double d_seconds);
double fom(const BankMetrics& m);

enum class SearchMethod { Scan, Pso, Sa };

struct BankResult {
  BankConfig cfg;
  BankMetrics metrics;
  double fom = 0.0;
};

struct BankSearchOptions {
  SearchMethod method = SearchMethod::Scan;
  std::uint64_t seed = 1;
  std::size_t budget = 200;  // evaluations for PSO and SA
};

struct BankSearchResult {
  std::vector<BankResult> ranked;  // evaluated configs, best FOM first
  std::vector<BankResult> front;   // non-dominated in (P_max, D_max), by P_max
  BankResult best;
  std::size_t evaluations = 0;
};

BankSearchResult search_bank(long long capacity, const SramCoefficients& k, const BankSearchOptions& opt);

struct BitcellDesign {
  double w_pu = 1.0, w_pd = 2.0, w_pg = 1.5;
};

struct BitcellBounds {
  BitcellDesign lower{1.0, 1.0, 1.0};
  BitcellDesign upper{2.0, 4.0, 3.0};
};

struct VariationSpec {
  std::size_t n_mc = 32;
  double sigma = 0.05;  // relative strength deviation per device
  std::vector<PvtCorner> corners{PvtCorner{}};
  std::uint64_t seed = 1;
};

struct BitcellMetrics {
  double hold_margin = 0, read_margin = 0, write_margin = 0;  // mV, worst case
  double delay = 0;                                           // ps, worst case
  double power = 0;                                           // µW, worst case
  double area = 0;                                            // µm²
  double margin_min() const { return std::min({hold_margin, read_margin, write_margin}); }
  /// log10(margin_min) - log10(P D sqrt(A)).
  double fom() const;
};

/// Nominal surrogate for one set of device strengths.
BitcellMetrics bitcell_nominal(double s_pu, double s_pd, double s_pg, const BitcellDesign& d, const PvtCorner& corner,
                               const SramCoefficients& k);
/// Worst case over n_mc seeded samples times corners. Sample i draws from its
/// own stream, so raising n_mc only adds samples.
BitcellMetrics mc_bitcell_eval(const BitcellDesign& d, const VariationSpec& v, const SramCoefficients& k);

struct BitcellOptions {
  SearchMethod method = SearchMethod::Pso;
  double pitch = 0.1;  // > 0 searches the grid lower + i * pitch
  std::size_t budget = 600;
  std::uint64_t seed = 1;
};

struct BitcellResult {
  BitcellDesign best;
  BitcellMetrics metrics;
  std::size_t evaluations = 0;
};

/// Maximizes the cell FOM inside the bounds.
BitcellResult optimize_bitcell(const BitcellBounds& b, const VariationSpec& v, const SramCoefficients& k,
                               const BitcellOptions& opt);

/// Two-objective exploration of (-margin_min, P*D) with NSGA-II.
ParetoArchive bitcell_front(const BitcellBounds& b, const VariationSpec& v, const SramCoefficients& k,
                            const Nsga2Options& opt);

}  // namespace acco
