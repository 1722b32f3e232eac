#include <cmath>
#include <filesystem>

#include "acco/app.h"
#include "acco/error_metrics.h"
#include "acco/text_format.h"
#include "doctest.h"
#include "test_helpers.h"

using namespace acco;
namespace fs = std::filesystem;

namespace {

const CellLibrary& lib() {
  static const CellLibrary l = load_library_file(test::data_path("compressors.lib"));
  return l;
}

const TechTable& tech() {
  static const TechTable t = load_tech_file(test::data_path("tech_default.tech"));
  return t;
}

std::string scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("acco_test_app_" + name);
  fs::remove_all(p);
  return p.string();
}

}  // namespace

TEST_CASE("PGM round trip") {
  GrayImage img{3, 2, {0, 17, 255, 128, 3, 99}};
  const auto back = parse_pgm(format_pgm(img));
  CHECK(back.width == 3);
  CHECK(back.height == 2);
  CHECK(back.pixels == img.pixels);

  const auto ascii = parse_pgm("P2\n# comment\n3 2\n255\n0 17 255\n128 3 99\n");
  CHECK(ascii.pixels == img.pixels);
  // maxval 15 rescales to 0..255.
  const auto small = parse_pgm("P2 2 1 15 0 15");
  CHECK(small.pixels == std::vector<std::uint8_t>{0, 255});

  CHECK_THROWS_AS(parse_pgm("P6\n1 1\n255\n\x01\x02\x03"), ParseError);
  CHECK_THROWS_AS(parse_pgm("P5\n4 4\n255\nab"), ParseError);
  CHECK_THROWS_AS(parse_pgm("P2\n1 1\n255\n300\n"), ParseError);
  CHECK_THROWS_AS(parse_pgm("P2\n1 1\n65535\n3\n"), ParseError);

  const auto dir = scratch("pgm");
  fs::create_directories(dir);
  const auto path = dir + "/a.pgm";
  write_pgm(path, synthetic_checker_noise(16, 9, 5));
  CHECK(read_pgm(path).pixels == synthetic_checker_noise(16, 9, 5).pixels);
}

TEST_CASE("synthetic images are deterministic") {
  const auto g = synthetic_gradient(10, 10);
  CHECK(g.at(0, 0) == 0);
  CHECK(g.at(9, 9) == 255);
  CHECK(synthetic_checker_noise(32, 32, 7).pixels == synthetic_checker_noise(32, 32, 7).pixels);
  CHECK(synthetic_checker_noise(32, 32, 7).pixels != synthetic_checker_noise(32, 32, 8).pixels);
}

TEST_CASE("PSNR examples") {
  GrayImage a{2, 2, {10, 20, 30, 40}};
  GrayImage b = a;
  CHECK(std::isinf(psnr(a, b)));
  CHECK(format_psnr(psnr(a, b)) == "inf");
  // One unit of error on every pixel: MSE = 1.
  for (auto& p : b.pixels) ++p;
  CHECK(mse(a, b) == 1.0);
  CHECK(psnr(a, b) == doctest::Approx(20.0 * std::log10(255.0)));
  CHECK(format_psnr(psnr(a, b)) == "48.1308");
  GrayImage c{1, 4, {10, 20, 30, 40}};
  CHECK_THROWS_AS(psnr(a, c), Error);
}

TEST_CASE("blend arithmetic") {
  const auto exact = exact_product_table();
  CHECK(product_table(build_tree(exact_config(8, lib()))) == exact);

  GrayImage a{2, 1, {200, 0}};
  GrayImage b{2, 1, {100, 255}};
  // al = round(127.5) = 128: (200*128 + 100*127 + 128) >> 8 = 150.
  const auto out = blend(a, b, 0.5, exact);
  CHECK(int(out.pixels[0]) == (200 * 128 + 100 * 127 + 128) / 256);
  CHECK(int(out.pixels[1]) == (0 * 128 + 255 * 127 + 128) / 256);
  CHECK(blend(a, b, 1.0, exact).pixels == std::vector<std::uint8_t>{199, 0});
  CHECK_THROWS_AS(blend(a, GrayImage{1, 1, {0}}, 0.5, exact), Error);
  CHECK_THROWS_AS(blend(a, b, 1.5, exact), Error);

  // The exact design is the PSNR supremum.
  const auto ia = synthetic_gradient(64, 64), ib = synthetic_checker_noise(64, 64, 2024);
  const auto ref = blend(ia, ib, 0.3, exact);
  auto cfg = exact_config(8, lib());
  for (auto& s : cfg.assignment) s = lib().index_of("APX_ORS");
  const double approx = psnr(blend(ia, ib, 0.3, product_table(build_tree(cfg))), ref);
  CHECK(std::isfinite(approx));
  CHECK(approx > 20.0);
}

TEST_CASE("spearman") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  CHECK(spearman({1, 2, 2, 3}, {1, 2, 3, 4}) == doctest::Approx(0.9486832980505138));
  CHECK_THROWS_AS(spearman({1, 1}, {1, 2}), Error);
}

TEST_CASE("run config parsing") {
  const auto c = parse_run_config("seed = 9\nnmed_budget = 0.001\nalphabet = EXACT42, APX_ORS\nfree_slots = 6 7\n"
                                  "case_budgets = 0.1, 0.2\nexact_verify = true\n");
  CHECK(c.seed == 9);
  CHECK(c.nmed_budget == 0.001);
  CHECK(c.alphabet == std::vector<std::string>{"EXACT42", "APX_ORS"});
  CHECK(c.free_slots == std::vector<int>{6, 7});
  CHECK(c.case_budgets == std::vector<double>{0.1, 0.2});
  CHECK(c.exact_verify);
  CHECK_THROWS_AS(parse_run_config("nmed_budget = -0.1\n"), ParseError);
  CHECK_THROWS_AS(parse_run_config("mred_budget = -1\n"), ParseError);
  CHECK_THROWS_AS(parse_run_config("colour = blue\n"), ParseError);

  // format/parse round trip.
  const auto again = parse_run_config(format_run_config(c));
  CHECK(format_run_config(again) == format_run_config(c));

  RunConfig bad;
  bad.library = "/nonexistent/lib";
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("assignments and arch space") {
  const auto a = parse_assignment("exact", lib(), 8);
  CHECK(a == exact_config(8, lib()).assignment);
  const auto b = parse_assignment("APX_ORS,APX_ORS,APX_SAT,EXACT42,EXACT42,EXACT42,EXACT42,EXACT42,APX_COR", lib(), 8);
  CHECK(format_assignment(b, lib()).substr(0, 15) == "APX_ORS APX_ORS");
  CHECK_THROWS_AS(parse_assignment("APX_ORS", lib(), 8), Error);
  CHECK_THROWS_AS(parse_assignment("FA FA FA FA FA FA FA FA FA", lib(), 8), Error);

  const auto space = make_arch_space(lib(), 8, {}, {});
  CHECK(space.free_slots.size() == 9);
  CHECK(space.cardinality() == 387420489ull);  // 9^9
  const auto toy = make_arch_space(lib(), 8, {"EXACT42", "APX_COR", "APX_ORS"}, {6, 7, 8, 9});
  CHECK(toy.cardinality() == 81);
  CHECK_THROWS_AS(make_arch_space(lib(), 8, {"HA"}, {}), Error);
  CHECK_THROWS_AS(make_arch_space(lib(), 8, {}, {10}), Error);
}

TEST_CASE("search_arch budget handling") {
  const auto toy = make_arch_space(lib(), 8, {"EXACT42", "APX_COR", "APX_ORS"}, {6, 7, 8, 9});
  ArchSearchOptions opt;
  opt.population = 12;
  opt.generations = 10;

  opt.nmed_budget = 0.0;
  const auto zero = search_arch(toy, tech(), nullptr, opt);
  REQUIRE(zero.front.size() == 1);
  CHECK(zero.front[0].oracle->nmed == 0.0);
  CHECK(zero.front[0].assignment == exact_config(8, lib()).assignment);

  opt.nmed_budget = 1.0;
  const auto open = search_arch(toy, tech(), nullptr, opt);
  CHECK(open.front.size() > 3);
  CHECK(std::any_of(open.front.begin(), open.front.end(), [](const ArchPoint& p) { return p.search.mred == 0.0; }));
  for (std::size_t i = 1; i < open.front.size(); ++i) CHECK(open.front[i - 1].search.mred <= open.front[i].search.mred);

  const auto no_exact = make_arch_space(lib(), 8, {"APX_COR", "APX_ORS"}, {6, 7});
  opt.nmed_budget = 0.0;
  const auto inf = search_arch(no_exact, tech(), nullptr, opt);
  CHECK(inf.infeasible);
  CHECK(inf.front.empty());
  CHECK(inf.least_violation > 0.0);

  opt.nmed_budget = 2e-4;
  const auto mid = search_arch(toy, tech(), nullptr, opt);
  for (const auto& p : mid.front) {
    const auto rep = error_report(build_tree(MultiplierConfig{8, p.assignment, &lib()}), InputSet::exhaustive(8));
    CHECK(rep.nmed <= 2e-4);
  }
  const auto cases = pick_budget_cases(mid, {2e-4, 1e-4, 0.0});
  REQUIRE(cases.size() == 3);
  REQUIRE(cases[2].point);
  CHECK(cases[2].point->oracle->nmed == 0.0);
  for (const auto& c : cases)
    if (c.point) CHECK(c.point->oracle->nmed <= c.budget);
}

TEST_CASE("commands write artifacts") {
  RunConfig c;
  c.out_dir = scratch("cmd");
  const auto ev = cmd_eval(c);
  CHECK(ev.status == 0);
  CHECK(ev.summary.find("mred=0 nmed=0") != std::string::npos);
  CHECK(fs::exists(c.out_dir + "/eval.csv"));
  CHECK(fs::exists(c.out_dir + "/manifest.txt"));

  const auto sr = cmd_sram(c);
  CHECK(sr.summary.find("rows=207") != std::string::npos);
  const auto scan = read_text_file(c.out_dir + "/sram_scan.csv");
  CHECK(std::count(scan.begin(), scan.end(), '\n') == 208);

  c.dataset_count = 12;
  cmd_gen_dataset(c);
  const auto first = read_text_file(c.dataset_path());
  cmd_gen_dataset(c);
  CHECK(read_text_file(c.dataset_path()) == first);
  // Sample 0 is the all-exact design with zero error.
  const auto ds = parse_dataset_csv(first, lib());
  CHECK(ds.samples[0].y[0] == 0.0);
  CHECK(ds.samples[0].y[1] == 0.0);

  c.evaluator = "surrogate";
  CHECK_THROWS_AS(cmd_search_arch(c), Error);  // no model yet

  c.image_size = 32;
  c.design = "exact";
  const auto bl = cmd_blend(c);
  CHECK(bl.summary.find("psnr_db=inf") != std::string::npos);

  c.image_a = c.out_dir + "/missing.pgm";
  CHECK_THROWS(cmd_blend(c));
}
