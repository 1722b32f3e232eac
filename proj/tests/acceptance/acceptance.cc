// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "acco/app.h"
#include "acco/cell_sizing.h"
#include "acco/error_metrics.h"
#include "acco/sram_macro.h"
#include "acco/text_format.h"

using namespace acco;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;
double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string num(double v, int digits = 4) {
  std::ostringstream os;
  os.precision(digits);
  os << v;
  return os.str();
}

const std::string kData = ACCO_DATA_DIR;

const CellLibrary& lib() {
  static const CellLibrary l = load_library_file(kData + "/compressors.lib");
  return l;
}

const TechTable& tech() {
  static const TechTable t = load_tech_file(kData + "/tech_default.tech");
  return t;
}

// ------------------------------------------------------------------ 1

Outcome exactness() {
  const auto t0 = Clock::now();
  const auto net = build_tree(exact_config(8, lib()));
  Simulator sim(net);
  std::vector<std::uint64_t> xs, ys, out(65536);
  for (std::uint64_t x = 0; x < 256; ++x)
    for (std::uint64_t y = 0; y < 256; ++y) {
      xs.push_back(x);
      ys.push_back(y);
    }
  sim.evaluate_batch(xs, ys, out);
  std::size_t bad = 0;
  for (std::size_t i = 0; i < out.size(); ++i) bad += out[i] != xs[i] * ys[i];
  // Scalar reference path as well.
  for (std::uint64_t x = 0; x < 256; ++x)
    for (std::uint64_t y = 0; y < 256; ++y) bad += evaluate(net, x, y) != x * y;
  const double dt = seconds_since(t0);
  return {bad == 0 && dt < 10.0, "mismatches=" + std::to_string(bad) + " pairs=65536 time_s=" + num(dt)};
}

// ------------------------------------------------------------------ 2

void dropped_pp(std::span<const std::uint64_t> xs, std::span<const std::uint64_t> ys, std::span<std::uint64_t> out) {
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = xs[i] * ys[i] - (xs[i] & ys[i] & 1u);
}

Outcome dropped_pp_metrics() {
  const auto rep = exact_error_report(ProductFn(dropped_pp), InputSet::exhaustive(2));
  // Independent brute force with rationals.
  Rational mred_sum = 0, nmed_sum = 0;
  int u_plus = 0;
  for (std::uint64_t x = 0; x < 4; ++x)
    for (std::uint64_t y = 0; y < 4; ++y) {
      const std::uint64_t exact = x * y, approx = exact - (x & y & 1u);
      const Rational ed = static_cast<long long>(exact - approx);
      nmed_sum += ed / 9;
      if (exact) {
        mred_sum += ed / static_cast<long long>(exact);
        ++u_plus;
      }
    }
  const Rational mred_bf = mred_sum / u_plus, nmed_bf = nmed_sum / 16;
  const bool ok = rep.mred == Rational(16, 81) && rep.nmed == Rational(1, 36) && rep.mred == mred_bf &&
                  rep.nmed == nmed_bf;
  return {ok, "MRED=" + rep.mred.str() + " NMED=" + rep.nmed.str() + " brute_force=" + mred_bf.str() + "," +
                  nmed_bf.str()};
}

// ------------------------------------------------------------------ 3

Outcome slot_count() {
  const auto slots = slot_layout(8);
  const auto comps = lib().compressor_indices();
  std::vector<std::string> eight;
  for (std::size_t i = 0; i < 8 && i < comps.size(); ++i) eight.push_back(lib().cell(comps[i]).name());
  const auto space = make_arch_space(lib(), 8, eight, {});
  const auto net = build_tree(exact_config(8, lib()));
  std::set<int> ids;
  for (const auto& s : slots) ids.insert(s.slot);
  const bool ok = slots.size() == 9 && net.slot_count() == 9 && ids.size() == 9 && *ids.begin() == 1 &&
                  *ids.rbegin() == 9 && eight.size() == 8 && space.cardinality() == 134217728ull;
  const auto full = make_arch_space(lib(), 8, {}, {});
  return {ok, "t=" + std::to_string(slots.size()) + " K=8 cardinality=" + std::to_string(space.cardinality()) +
                  " default_K=" + std::to_string(full.alphabet.size()) + " cardinality=" + std::to_string(full.cardinality())};
}

// ------------------------------------------------------------ 4, 5, 6

struct Trained {
  Dataset ds;
  GraphFactory factory{8, lib()};
  SurrogateModel model;
  std::vector<StageGraph> test_graphs;
  std::vector<Labels> test_labels;
  std::array<TargetMetrics, kNumTargets> metrics{};
  double gen_s = 0, train_s = 0;
};

Trained& trained() {
  static Trained t = [] {
    Trained tr;
    auto t0 = Clock::now();
    tr.ds = generate_dataset(8, lib(), tech(), 5000, 20240601, true);
    tr.gen_s = seconds_since(t0);
    auto graphs = [&](const std::vector<std::size_t>& idx, std::vector<StageGraph>& g, std::vector<Labels>& y) {
      for (auto i : idx) {
        g.push_back(tr.factory.make(tr.ds.samples[i].assignment));
        y.push_back(tr.ds.samples[i].y);
      }
    };
    std::vector<StageGraph> tg, vg;
    std::vector<Labels> ty, vy;
    t0 = Clock::now();
    graphs(tr.ds.train, tg, ty);
    graphs(tr.ds.validation, vg, vy);
    graphs(tr.ds.test, tr.test_graphs, tr.test_labels);
    tr.model = SurrogateModel(ModelShape::for_topology(*tr.factory.topology()), 7);
    TrainOptions opt;
    opt.seed = 7;
    train(tr.model, tg, ty, vg, vy, opt);
    tr.train_s = seconds_since(t0);
    tr.metrics = eval_metrics(tr.model, tr.test_graphs, tr.test_labels);
    return tr;
  }();
  return t;
}

Outcome surrogate_fidelity() {
  auto& t = trained();
  bool ok = t.ds.samples.size() == 5000 && !t.ds.test.empty() && t.train_s <= 1800.0;
  std::string d = "samples=" + std::to_string(t.ds.samples.size()) + " test=" + std::to_string(t.ds.test.size());
  for (int k = 0; k < kNumTargets; ++k) {
    const double need = k < 2 ? 0.90 : 0.85;
    ok = ok && t.metrics[k].r2 >= need;
    d += std::string(" r2_") + kTargetNames[k] + "=" + num(t.metrics[k].r2);
  }
  d += " gen_s=" + num(t.gen_s) + " train_s=" + num(t.train_s);
  return {ok, d};
}

Outcome surrogate_speedup() {
  auto& t = trained();
  std::mt19937_64 rng(99);
  const auto comps = lib().compressor_indices();
  std::vector<std::vector<std::size_t>> designs(200, exact_config(8, lib()).assignment);
  for (auto& a : designs)
    for (auto& s : a) s = comps[rng() % comps.size()];

  auto t0 = Clock::now();
  double sink = 0;
  for (const auto& a : designs) sink += t.model.predict(t.factory.make(a))[0];
  const double sur = seconds_since(t0) / designs.size();

  const std::size_t n_oracle = 40;
  t0 = Clock::now();
  for (std::size_t i = 0; i < n_oracle; ++i)
    sink += error_report(build_tree(MultiplierConfig{8, designs[i], &lib()}), InputSet::exhaustive(8)).mred;
  const double orc = seconds_since(t0) / n_oracle;
  const double ratio = orc / sur;
  return {std::isfinite(sink) && ratio >= 10.0, "surrogate_us=" + num(sur * 1e6) + " oracle_us=" + num(orc * 1e6) +
                                                     " speedup=" + num(ratio) + "x"};
}

Outcome gradient_check() {
  auto& t = trained();
  SurrogateModel m(t.model.shape(), 21);
  std::vector<Labels> labels;
  std::vector<StageGraph> graphs;
  for (std::size_t i = 0; i < 8; ++i) {
    graphs.push_back(t.factory.make(t.ds.samples[t.ds.train[i]].assignment));
    labels.push_back(t.ds.samples[t.ds.train[i]].y);
  }
  m.set_normalization(compute_mean(labels), compute_scale(labels));
  std::vector<const StageGraph*> gp;
  for (const auto& g : graphs) gp.push_back(&g);
  std::vector<double> grad;
  m.loss(gp, labels, &grad);
  auto p = m.params();
  std::mt19937_64 rng(5);
  const double h = 1e-5;
  int checked = 0, bad = 0;
  double worst = 0;
  for (int i = 0; i < 150; ++i) {
    const std::size_t k = rng() % p.size();
    const double orig = p[k];
    p[k] = orig + h;
    const double lp = m.loss(gp, labels, nullptr);
    p[k] = orig - h;
    const double lm = m.loss(gp, labels, nullptr);
    p[k] = orig;
    const double fd = (lp - lm) / (2 * h);
    const double rel = std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1e-6});
    worst = std::max(worst, rel);
    bad += rel > 1e-4;
    ++checked;
  }
  return {checked >= 100 && bad == 0, "params_checked=" + std::to_string(checked) + " of " +
                                          std::to_string(p.size()) + " worst_rel=" + num(worst, 3)};
}

// ------------------------------------------------------------------ 7

Outcome optimizer_soundness() {
  const double eps = 5e-4;
  const auto space = make_arch_space(lib(), 8, {"EXACT42", "APX_COR", "APX_ORS"}, {6, 7, 8, 9});
  const auto problem = arch_problem(space, tech(), eps);
  const auto bf = enumerate_front(problem);
  std::set<std::vector<std::size_t>> bf_designs;
  double max_mred = 0, max_pdp = 0;
  for (const auto& e : bf.entries()) {
    bf_designs.insert(space.decode(e.x));
    max_mred = std::max(max_mred, e.f.values[0]);
    max_pdp = std::max(max_pdp, e.f.values[1]);
  }
  const std::array<double, 2> ref{max_mred * 1.1 + 1e-9, max_pdp * 1.1};
  const auto bf_objs = bf.objectives();
  const double hv_bf = hypervolume_2d(bf_objs, ref);

  bool ok = !bf.infeasible_only() && bf.size() >= 3 && space.cardinality() == 81;
  double worst_ratio = 1.0;
  std::size_t runs = 0, outside = 0, over_budget = 0;
  for (const char* name : {"nsga2", "moead"})
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      ArchSearchOptions o;
      o.optimizer = name;
      o.population = 20;
      o.generations = 40;
      o.seed = seed;
      o.nmed_budget = eps;
      const auto r = search_arch(space, tech(), nullptr, o);
      ++runs;
      std::vector<std::array<double, 2>> pts;
      for (const auto& p : r.front) {
        outside += bf_designs.count(p.assignment) == 0;
        const auto rep = error_report(build_tree(MultiplierConfig{8, p.assignment, &lib()}), InputSet::exhaustive(8));
        over_budget += rep.nmed > eps;
        pts.push_back({std::min(p.search.mred, ref[0]), std::min(p.search.pdp_fj(), ref[1])});
      }
      const double ratio = pts.empty() ? 0.0 : hypervolume_2d(pts, ref) / hv_bf;
      worst_ratio = std::min(worst_ratio, ratio);
      ok = ok && !r.infeasible;
    }
  ok = ok && outside == 0 && over_budget == 0 && worst_ratio >= 0.98;
  return {ok, "designs=81 bf_front=" + std::to_string(bf.size()) + " runs=" + std::to_string(runs) +
                  " non_subset=" + std::to_string(outside) + " budget_violations=" + std::to_string(over_budget) +
                  " min_hv_ratio=" + num(worst_ratio)};
}

// ------------------------------------------------------------------ 8

Outcome hypervolume_unit() {
  const std::vector<std::array<double, 2>> pts{{1, 2}, {2, 1}};
  const double hv = hypervolume_2d(pts, {3, 3});
  return {hv == 3.0, "hv=" + num(hv, 17)};
}

// ------------------------------------------------------------------ 9

Outcome sram_search() {
  const auto k = load_sram_coefficients(kData + "/sram_default.coef");
  const long long cap = 32768;
  std::size_t expected = 0;
  for (int r = k.r_min; r <= k.r_max; r *= 2)
    for (int c = k.c_min; c <= k.c_max; c *= 2)
      if (cap % (static_cast<long long>(r) * c) == 0) expected += k.mu_set.size();
  const auto scan = search_bank(cap, k, BankSearchOptions{});
  bool ok = scan.ranked.size() == expected && enumerate_configs(cap, k).size() == expected;
  for (const auto& b : scan.ranked) ok = ok && static_cast<long long>(b.cfg.r) * b.cfg.c * b.cfg.n_a == cap;

  double worst_gap = 0;
  for (auto m : {SearchMethod::Pso, SearchMethod::Sa})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      BankSearchOptions o;
      o.method = m;
      o.seed = seed;
      o.budget = 200;
      const auto r = search_bank(cap, k, o);
      ok = ok && r.evaluations == o.budget;
      worst_gap = std::max(worst_gap, scan.best.fom - r.best.fom);
    }
  ok = ok && worst_gap <= 0.05;

  std::size_t dominated = 0;
  for (const auto& a : scan.front)
    for (const auto& b : scan.front)
      dominated += b.metrics.p_max() <= a.metrics.p_max() && b.metrics.d_max() <= a.metrics.d_max() &&
                   (b.metrics.p_max() < a.metrics.p_max() || b.metrics.d_max() < a.metrics.d_max());
  ok = ok && scan.front.size() >= 3 && dominated == 0;

  const double p = 3.7e-4, a = 5123.0, d = 2.9e-10, base = fom_value(p, a, d);
  const double law = std::max({std::abs(fom_value(10 * p, a, d) - (base - 1)),
                               std::abs(fom_value(p, 100 * a, d) - (base - 1)),
                               std::abs(fom_value(p, a, 10 * d) - (base - 1))});
  ok = ok && law <= 1e-9;
  return {ok, "grid=" + std::to_string(scan.ranked.size()) + "/" + std::to_string(expected) +
                  " best_fom=" + num(scan.best.fom, 6) + " worst_pso_sa_gap=" + num(worst_gap) +
                  " front=" + std::to_string(scan.front.size()) + " log_law_err=" + num(law, 3)};
}

// ------------------------------------------------------------------ 10

Outcome sizing_laws() {
  const auto params = load_gate_params(kData + "/gates.param");
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(kData + "/chains"))
    if (e.path().extension() == ".chain") names.push_back(e.path().stem().string());
  std::sort(names.begin(), names.end());
  bool ok = !names.empty();
  double worst_area_err = 0, worst_gain = 1e300;
  std::size_t delay_up = 0, incorrect = 0, not_dominating = 0, members = 0;
  for (const auto& n : names) {
    const auto chain = load_chain_file(kData + "/chains/" + n + ".chain", params);
    ok = ok && chain_implements(chain, lib().cell(lib().index_of(n)));
    std::vector<double> w(chain.groups.size(), 1.0);
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = 1.0 + 0.25 * static_cast<double>(i % 3);
    const auto base = eval_sizing(w, chain, params);
    for (double k : {2.0, 3.0, 5.0}) {
      std::vector<double> wk = w;
      for (auto& x : wk) x *= k;
      const auto m = eval_sizing(wk, chain, params);
      worst_area_err = std::max(worst_area_err, std::abs(m.area_um2 - k * base.area_um2) / (k * base.area_um2));
      delay_up += m.delay_ps > base.delay_ps;
    }
    SizingOptions opt;
    opt.seed = 3;
    const auto res = optimize_cell(chain, params, params.corners, opt);
    bool dominates_ref = false;
    for (const auto& e : res.archive.entries()) {
      ++members;
      incorrect += !correctness_surrogate(e.x, chain, params).feasible;
      dominates_ref = dominates_ref || (e.f.values[0] <= res.reference_metrics.pdp_fj &&
                                        e.f.values[1] <= res.reference_metrics.area_um2);
    }
    double best = 1e300;
    for (const auto& e : res.archive.entries()) best = std::min(best, e.f.values[0]);
    worst_gain = std::min(worst_gain, 100.0 * (res.reference_metrics.pdp_fj - best) / res.reference_metrics.pdp_fj);
    not_dominating += !dominates_ref;
  }
  ok = ok && worst_area_err <= 1e-12 && delay_up == 0 && incorrect == 0 && not_dominating == 0;
  return {ok, "cells=" + std::to_string(names.size()) + " area_scale_err=" + num(worst_area_err, 3) +
                  " delay_increases=" + std::to_string(delay_up) + " archive_members=" + std::to_string(members) +
                  " incorrect=" + std::to_string(incorrect) + " ref_not_dominated=" + std::to_string(not_dominating) +
                  " min_pdp_gain_percent=" + num(worst_gain)};
}

// ------------------------------------------------------------------ 11

Outcome accuracy_quality() {
  const auto space = make_arch_space(lib(), 8, {}, {});
  ArchSearchOptions o;
  o.population = 50;
  o.generations = 60;
  o.seed = 1;
  o.nmed_budget = 1.0;
  const auto r = search_arch(space, tech(), nullptr, o);
  const RunConfig defaults;
  const auto cases = pick_budget_cases(r, defaults.case_budgets);

  const auto a = synthetic_gradient(128, 128), b = synthetic_checker_noise(128, 128, 2024);
  const auto ref = blend(a, b, 0.5, exact_product_table());
  const double exact_db = psnr(blend(a, b, 0.5, product_table(build_tree(exact_config(8, lib())))), ref);
  std::vector<double> mreds, dbs;
  std::string d;
  bool ok = cases.size() >= 5;
  for (const auto& c : cases) {
    if (!c.point) {
      ok = false;
      continue;
    }
    const auto net = build_tree(MultiplierConfig{8, c.point->assignment, &lib()});
    const double db = psnr(blend(a, b, 0.5, product_table(net)), ref);
    mreds.push_back(c.point->oracle->mred);
    dbs.push_back(db);
    d += " " + num(c.point->oracle->mred, 3) + "->" + format_psnr(db);
    ok = ok && db <= exact_db;
  }
  const double rho = mreds.size() >= 2 ? spearman(mreds, dbs) : 0.0;
  ok = ok && mreds.size() >= 5 && rho <= -0.8 && std::isinf(exact_db);
  return {ok, "cases=" + std::to_string(mreds.size()) + " spearman=" + num(rho) + " exact_psnr=" +
                  format_psnr(exact_db) + " (mred->psnr" + d + ")"};
}

// ------------------------------------------------------------------ 12

Outcome determinism() {
  auto run = [](const std::string& dir) {
    fs::remove_all(dir);
    RunConfig c;
    c.out_dir = dir;
    c.seed = 11;
    c.dataset_count = 300;
    c.epochs = 6;
    c.generations = 15;
    c.population = 20;
    c.exact_verify = true;
    cmd_gen_dataset(c);
    cmd_train(c);
    cmd_search_arch(c);
    c.designs = dir + "/cases.csv";
    c.image_size = 64;
    cmd_blend(c);
  };
  const auto root = fs::temp_directory_path() / "acco_acceptance_determinism";
  run((root / "a").string());
  run((root / "b").string());
  std::size_t compared = 0, differ = 0;
  for (const auto& e : fs::directory_iterator(root / "a")) {
    const auto ext = e.path().extension();
    if (ext != ".csv" && ext != ".pgm" && e.path().filename() != "model.txt") continue;
    ++compared;
    const auto other = root / "b" / e.path().filename();
    differ += !fs::exists(other) || read_text_file(e.path().string()) != read_text_file(other.string());
  }
  return {compared >= 6 && differ == 0,
          "artifacts_compared=" + std::to_string(compared) + " differing=" + std::to_string(differ)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"C1 exactness oracle (8-bit exhaustive, <10 s)", exactness},
      {"C2 N=2 dropped-PP MRED=16/81 NMED=1/36", dropped_pp_metrics},
      {"C3 slot count t=9, 8^9 designs for K=8", slot_count},
      {"C4 surrogate fidelity on 5000 samples", surrogate_fidelity},
      {"C5 surrogate speedup >= 10x", surrogate_speedup},
      {"C6 gradient check", gradient_check},
      {"C7 optimizer soundness on the 81-design toy space", optimizer_soundness},
      {"C8 hypervolume unit example", hypervolume_unit},
      {"C9 SRAM bank search", sram_search},
      {"C10 sizing laws", sizing_laws},
      {"C11 MRED vs PSNR trend", accuracy_quality},
      {"C12 pipeline determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s | %s | %.1fs\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
