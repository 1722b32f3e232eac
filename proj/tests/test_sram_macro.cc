#include <cmath>
#include <set>

#include "acco/sram_macro.h"
#include "doctest.h"
#include "test_helpers.h"

using namespace acco;

namespace {

const SramCoefficients& coef() {
  static const SramCoefficients k = load_sram_coefficients(test::data_path("sram_default.coef"));
  return k;
}

bool has(const std::vector<BankConfig>& v, BankConfig c) { return std::find(v.begin(), v.end(), c) != v.end(); }

}  // namespace

TEST_CASE("enumerate_configs on 32768 bits") {
  const auto cfgs = enumerate_configs(32768, coef());
  // Independent count: (r, c) pairs with r*c dividing the capacity, times |mu|.
  std::size_t expect = 0;
  for (int a = 1; a <= 9; ++a)
    for (int b = 1; b <= 8; ++b)
      if (a + b <= 15) expect += 3;
  CHECK(cfgs.size() == expect);
  CHECK(cfgs.size() == 207);
  CHECK(has(cfgs, BankConfig{256, 32, 4, 4}));
  for (const auto& c : cfgs) {
    CHECK(static_cast<long long>(c.r) * c.c * c.n_a == 32768);
    CHECK(c.n_a >= 1);
  }
  CHECK(std::none_of(cfgs.begin(), cfgs.end(), [](const BankConfig& c) { return c.r == 512 && c.c == 256; }));
  CHECK_THROWS_AS(enumerate_configs(3000, coef()), Error);
}

TEST_CASE("bank model recomputed from the published formula") {
  const auto m = bank_model(BankConfig{256, 32, 4, 4}, coef());
  // Coefficients as written in data/sram_default.coef.
  const double dec = 10.0;  // log2(256 * 4)
  CHECK(m.d_rd == doctest::Approx(9 * dec + 1.8 * 256 + 14 * 2 + 60 + 18 * 2));
  CHECK(m.d_wr == doctest::Approx(9 * dec + 1.2 * 256 + 14 * 2 + 75 + 18 * 2));
  CHECK(m.p_rd == doctest::Approx(0.05 * 8 * 256 + 2.0 * dec + 6.0 * 4));
  CHECK(m.p_wr == doctest::Approx(0.08 * 8 * 256 + 2.0 * dec + 6.0 * 4 + 0.6 * 8));
  CHECK(m.area == doctest::Approx(4 * (256 * 32 * 0.12 + 256 * 1.6 + 32 * 3.2 + 150)));
  CHECK(fom(m) == doctest::Approx(-std::log10(m.p_wr * 1e-6 * std::sqrt(m.area) * m.d_rd * 1e-12)));
}

TEST_CASE("bank model algebra") {
  SramCoefficients bl;
  bl.t_bl = 1.0;
  const auto a = bank_model(BankConfig{64, 32, 2, 16}, bl);
  const auto b = bank_model(BankConfig{128, 32, 2, 8}, bl);
  CHECK(b.d_rd == doctest::Approx(2 * a.d_rd));

  SramCoefficients area_only;
  area_only.a_cell = 0.1;
  for (const auto& c : enumerate_configs(32768, coef()))
    CHECK(bank_model(c, area_only).area == doctest::Approx(32768 * 0.1));

  CHECK_THROWS_AS(evaluate_bank(BankConfig{256, 32, 4, 3}, 32768, coef()), Error);
  CHECK_THROWS_AS(parse_sram_coefficients("t_bogus_ps = 3\n"), ParseError);
  CHECK_THROWS_AS(parse_sram_coefficients("t_dec_ps = -1\n"), ParseError);
  CHECK_THROWS_AS(parse_sram_coefficients("mu_set = 2, 3\n"), ParseError);
}

TEST_CASE("FOM examples and log laws") {
  CHECK(fom_value(1e-3, 1e4, 1e-9) == doctest::Approx(10.0));
  const double base = fom_value(2.5e-4, 7321.0, 3.3e-10);
  CHECK(std::abs(fom_value(2.5e-3, 7321.0, 3.3e-10) - (base - 1)) < 1e-9);
  CHECK(std::abs(fom_value(2.5e-4, 732100.0, 3.3e-10) - (base - 1)) < 1e-9);
  CHECK(std::abs(fom_value(2.5e-4, 7321.0, 3.3e-9) - (base - 1)) < 1e-9);
  CHECK_THROWS_AS(fom_value(0, 1, 1), Error);
  CHECK_THROWS_AS(fom_value(1, -1, 1), Error);
}

TEST_CASE("bank scan: exhaustive, ranked, non-dominated front") {
  const auto scan = search_bank(32768, coef(), BankSearchOptions{});
  CHECK(scan.ranked.size() == 207);
  CHECK(scan.evaluations == 207);
  for (std::size_t i = 1; i < scan.ranked.size(); ++i) CHECK(scan.ranked[i - 1].fom >= scan.ranked[i].fom);
  CHECK(scan.best.fom == scan.ranked.front().fom);
  for (const auto& r : scan.ranked) CHECK(r.fom <= scan.best.fom);
  REQUIRE(scan.front.size() >= 3);
  for (const auto& a : scan.front)
    for (const auto& b : scan.front) {
      const bool dom = b.metrics.p_max() <= a.metrics.p_max() && b.metrics.d_max() <= a.metrics.d_max() &&
                       (b.metrics.p_max() < a.metrics.p_max() || b.metrics.d_max() < a.metrics.d_max());
      CHECK_FALSE(dom);
    }
  // Every scanned config not on the front is dominated by a front member.
  for (const auto& r : scan.ranked) {
    bool covered = false;
    for (const auto& f : scan.front)
      covered = covered || (f.metrics.p_max() <= r.metrics.p_max() && f.metrics.d_max() <= r.metrics.d_max());
    CHECK(covered);
  }
}

TEST_CASE("PSO and SA reach the scan optimum under a matched budget") {
  const auto scan = search_bank(32768, coef(), BankSearchOptions{});
  for (auto m : {SearchMethod::Pso, SearchMethod::Sa})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      BankSearchOptions o;
      o.method = m;
      o.seed = seed;
      o.budget = 200;
      const auto r = search_bank(32768, coef(), o);
      CHECK(r.evaluations == 200);
      CHECK(scan.best.fom - r.best.fom <= 0.05);
      CHECK(r.best.fom <= scan.best.fom + 1e-12);
      const auto again = search_bank(32768, coef(), o);
      CHECK(again.best.cfg == r.best.cfg);
    }
}

TEST_CASE("bitcell MC evaluation") {
  const BitcellDesign d{1.2, 2.4, 1.6};
  VariationSpec v;
  v.sigma = 0.0;
  v.n_mc = 7;
  const auto nominal = bitcell_nominal(d.w_pu, d.w_pd, d.w_pg, d, PvtCorner{}, coef());
  const auto wc = mc_bitcell_eval(d, v, coef());
  CHECK(wc.read_margin == doctest::Approx(nominal.read_margin));
  CHECK(wc.write_margin == doctest::Approx(nominal.write_margin));
  CHECK(wc.delay == doctest::Approx(nominal.delay));
  CHECK(wc.power == doctest::Approx(nominal.power));

  // Monotone surrogate.
  double prev = 0.0;
  for (double w_pd = 1.0; w_pd <= 4.0; w_pd += 0.25) {
    const auto m = bitcell_nominal(1.0, w_pd, 1.5, BitcellDesign{1.0, w_pd, 1.5}, PvtCorner{}, coef());
    CHECK(m.read_margin >= prev);
    prev = m.read_margin;
  }
  const auto slow_pg = bitcell_nominal(1, 2, 1.0, BitcellDesign{1, 2, 1.0}, PvtCorner{}, coef());
  const auto fast_pg = bitcell_nominal(1, 2, 2.0, BitcellDesign{1, 2, 2.0}, PvtCorner{}, coef());
  CHECK(fast_pg.delay < slow_pg.delay);
  CHECK(fast_pg.write_margin > slow_pg.write_margin);
  CHECK(fast_pg.power > slow_pg.power);

  v.sigma = 0.08;
  v.corners = {PvtCorner{"TT", 1, 1}, PvtCorner{"SS", 1.3, 0.9}};
  const auto a = mc_bitcell_eval(d, v, coef());
  const auto b = mc_bitcell_eval(d, v, coef());
  CHECK(a.fom() == b.fom());
  // More samples never improve the worst case.
  double last_margin = 1e300, last_delay = 0;
  for (std::size_t n : {1u, 4u, 16u, 64u}) {
    v.n_mc = n;
    const auto m = mc_bitcell_eval(d, v, coef());
    CHECK(m.margin_min() <= last_margin);
    CHECK(m.delay >= last_delay);
    last_margin = m.margin_min();
    last_delay = m.delay;
  }
  v.n_mc = 0;
  CHECK_THROWS_AS(mc_bitcell_eval(d, v, coef()), Error);
}

TEST_CASE("bitcell optimization") {
  VariationSpec v;
  v.n_mc = 8;
  BitcellBounds b;
  BitcellOptions scan_opt;
  scan_opt.method = SearchMethod::Scan;
  const auto scan = optimize_bitcell(b, v, coef(), scan_opt);
  CHECK(scan.evaluations == 11u * 31u * 21u);
  const bool on_boundary = scan.best.w_pu == b.lower.w_pu || scan.best.w_pu == b.upper.w_pu ||
                           scan.best.w_pd == b.lower.w_pd || scan.best.w_pd == b.upper.w_pd ||
                           scan.best.w_pg == b.lower.w_pg || scan.best.w_pg == b.upper.w_pg;
  CHECK(on_boundary);
  for (auto m : {SearchMethod::Pso, SearchMethod::Sa}) {
    BitcellOptions o;
    o.method = m;
    const auto r = optimize_bitcell(b, v, coef(), o);
    CHECK(std::abs(scan.metrics.fom() - r.metrics.fom()) <= 0.05);
  }

  BitcellBounds point;
  point.lower = point.upper = BitcellDesign{1.3, 2.1, 1.7};
  for (auto m : {SearchMethod::Scan, SearchMethod::Pso, SearchMethod::Sa}) {
    BitcellOptions o;
    o.method = m;
    const auto r = optimize_bitcell(point, v, coef(), o);
    CHECK(r.best.w_pu == 1.3);
    CHECK(r.best.w_pd == 2.1);
    CHECK(r.best.w_pg == 1.7);
  }

  Nsga2Options no;
  no.population = 20;
  no.generations = 10;
  const auto front = bitcell_front(b, v, coef(), no);
  CHECK(front.is_consistent());
  CHECK(front.size() >= 3);
}
