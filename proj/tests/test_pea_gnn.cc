#include <cmath>
#include <numeric>
#include <random>

#include "acco/pea_gnn.h"
#include "doctest.h"
#include "test_helpers.h"

using namespace acco;

namespace {

// Two updated nodes: v (neighbour u in stage 0) and an isolated node w.
StageGraph tiny_graph(double hv, double hu, double hw) {
  auto topo = std::make_shared<GraphTopology>();
  topo->width = 2;
  topo->num_nodes = 3;
  topo->feature_dim = 1;
  topo->num_stages = 1;
  topo->stage = {1, 0, 1};
  topo->neighbors = {{1}, {0}, {}};
  topo->stage_nodes = {{1}, {0, 2}};
  topo->slot_nodes = {0};
  topo->last_nodes = {2};
  topo->readout = {0, 2};
  StageGraph g;
  g.topology = topo;
  g.features.resize(1, 3);
  g.features << hv, hu, hw;
  return g;
}

SurrogateModel tiny_model() {
  ModelShape s;
  s.width = 2;
  s.slots = 1;
  s.stages = 1;
  s.readout_nodes = 2;
  s.feature_dim = 1;
  s.head1 = 2;
  s.head2 = 2;
  return SurrogateModel(s, 1);
}

StageGraph permuted(const StageGraph& g, std::uint64_t seed) {
  const auto& t = *g.topology;
  std::vector<int> perm(t.num_nodes);
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  auto p = std::make_shared<GraphTopology>(t);
  p->stage.assign(t.num_nodes, 0);
  p->neighbors.assign(t.num_nodes, {});
  for (int v = 0; v < t.num_nodes; ++v) {
    p->stage[perm[v]] = t.stage[v];
    for (int u : t.neighbors[v]) p->neighbors[perm[v]].push_back(perm[u]);
    std::shuffle(p->neighbors[perm[v]].begin(), p->neighbors[perm[v]].end(), rng);
  }
  for (auto& s : p->stage_nodes) {
    for (auto& v : s) v = perm[v];
    std::shuffle(s.begin(), s.end(), rng);
  }
  for (auto& v : p->slot_nodes) v = perm[v];
  for (auto& v : p->last_nodes) v = perm[v];
  for (auto& v : p->readout) v = perm[v];
  StageGraph out;
  out.topology = p;
  out.features.resize(g.features.rows(), g.features.cols());
  for (int v = 0; v < t.num_nodes; ++v) out.features.col(perm[v]) = g.features.col(v);
  return out;
}

struct Fixture {
  CellLibrary lib = load_library_file(test::data_path("compressors.lib"));
  GraphFactory fac{8, lib};
  std::vector<StageGraph> graphs;
  std::vector<Labels> labels;

  explicit Fixture(std::size_t count, std::uint64_t seed = 3) {
    std::mt19937_64 rng(seed);
    auto comps = lib.compressor_indices();
    std::vector<std::size_t> a(fac.slot_count());
    for (std::size_t i = 0; i < count; ++i) {
      for (auto& s : a) s = comps[rng() % comps.size()];
      graphs.push_back(fac.make(a));
      Labels y;
      for (auto& v : y) v = 0.5 + (rng() % 1000) / 1000.0;
      labels.push_back(y);
    }
  }
};

}  // namespace

TEST_CASE("build_graph features") {
  auto lib = load_library_file(test::data_path("compressors.lib"));
  auto net = build_tree(exact_config(8, lib));
  auto g = build_graph(net, lib);
  CHECK(g.topology->num_nodes == static_cast<int>(net.nodes().size()));
  CHECK(g.features.cols() == g.topology->num_nodes);
  CHECK(g.topology->slot_nodes.size() == 9);
  CHECK(g.topology->num_stages == net.final_stage());
  // exact cells have a zero fused block
  for (const auto& nd : net.nodes())
    for (int r = 3; r < 6; ++r) CHECK(g.features(r, nd.id) == 0.0);

  std::vector<int> seen(g.topology->num_nodes, 0);
  for (const auto& s : g.topology->stage_nodes)
    for (int v : s) ++seen[v];
  for (int c : seen) CHECK(c == 1);

  // APX-C0 driven directly by primary inputs sees uniform marginals.
  auto c0lib = test::exact_plus_c0();
  NetlistAssembler as(3);
  const int c = as.add_cell(test::apx_c0());
  as.add_node(CellKind::Compressor, c, 1, 0, 1,
              {as.x_bit(0), as.x_bit(1), as.x_bit(2), as.y_bit(0), as.y_bit(1)});
  as.set_reduction_stages(1);
  auto one = build_graph(as.finish(), c0lib);
  CHECK(one.features(0, 0) == 0.5);
  CHECK(one.features(1, 0) == 0.5);
  CHECK(one.features(2, 0) == 0.0);
  CHECK(one.features(3, 0) == 0.0);
  CHECK(one.features(4, 0) == 0.0);
  CHECK(one.features(5, 0) == 0.0);
  CHECK(one.features(6 + 3 + 1, 0) == 1.0);
  CHECK_THROWS_AS(build_graph(net, lib, 0.5, 8), Error);
}

TEST_CASE("GraphFactory agrees with build_graph") {
  auto lib = load_library_file(test::data_path("compressors.lib"));
  GraphFactory fac(8, lib);
  std::mt19937_64 rng(21);
  auto comps = lib.compressor_indices();
  auto cfg = exact_config(8, lib);
  for (int rep = 0; rep < 30; ++rep) {
    for (auto& s : cfg.assignment) s = comps[rng() % comps.size()];
    auto ref = build_graph(build_tree(cfg), lib);
    auto fast = fac.make(cfg.assignment);
    REQUIRE(fast.features.cols() == ref.features.cols());
    CHECK((fast.features - ref.features).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(fast.topology->readout == ref.topology->readout);
    CHECK(fast.topology->neighbors == ref.topology->neighbors);
  }
  CHECK_THROWS_AS(fac.make(std::vector<std::size_t>(3, 0)), Error);
  std::vector<std::size_t> bad(9, 0);
  bad[0] = *lib.find("FA");
  CHECK_THROWS_AS(fac.make(bad), Error);
}

TEST_CASE("sage_forward examples") {
  auto m = tiny_model();
  auto p = m.params();
  std::fill(p.begin(), p.end(), 0.0);
  CHECK(m.encode(tiny_graph(0.5, 0.25, 0.5)).isZero());
  p[0] = 1.0;
  p[1] = 1.0;
  auto g = m.encode(tiny_graph(0.5, 0.25, 0.5));
  CHECK(g(0) == 0.75);
  CHECK(g(1) == 0.5);
  CHECK_THROWS_AS(m.encode(build_graph(build_tree(exact_config(4, test::exact_plus_c0())), test::exact_plus_c0())),
                  Error);
}

TEST_CASE("predict") {
  Fixture fx(5);
  SurrogateModel m(ModelShape::for_topology(*fx.fac.topology()), 9);
  auto p = m.params();
  std::fill(p.begin(), p.end(), 0.0);
  for (double v : m.predict(fx.graphs[0])) CHECK(v == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  SurrogateModel r(ModelShape::for_topology(*fx.fac.topology()), 10);
  r.set_normalization({0.03, 0.001, 1000, 300, 150}, {0.02, 0.0004, 25, 5, 5});
  for (const auto& g : fx.graphs) {
    auto y = r.predict(g);
    for (double v : y) CHECK(v >= 0.0);
    CHECK(y == r.predict(g));
  }
  // untrained output bias maps to the target mean
  SurrogateModel z(ModelShape::for_topology(*fx.fac.topology()), 11);
  auto zp = z.params();
  std::fill(zp.begin(), zp.end(), 0.0);
  z.set_normalization({0.03, 0.001, 1000, 300, 150}, {0.02, 0.0004, 25, 5, 5});
  auto y = z.predict(fx.graphs[0]);
  CHECK(y[2] == doctest::Approx(1000).epsilon(1e-9));
  CHECK(y[0] == doctest::Approx(0.03).epsilon(1e-9));
}

TEST_CASE("predictions are invariant under node relabeling") {
  Fixture fx(4);
  SurrogateModel m(ModelShape::for_topology(*fx.fac.topology()), 12);
  for (std::uint64_t s = 0; s < 4; ++s) {
    auto a = m.predict(fx.graphs[s]);
    auto b = m.predict(permuted(fx.graphs[s], s + 100));
    for (int t = 0; t < kNumTargets; ++t) CHECK(std::abs(a[t] - b[t]) <= 1e-12 * std::max(1.0, std::abs(a[t])));
  }
}

TEST_CASE("analytic gradients match central differences") {
  Fixture fx(6);
  SurrogateModel m(ModelShape::for_topology(*fx.fac.topology()), 13);
  m.set_normalization(compute_mean(fx.labels), compute_scale(fx.labels));
  std::vector<const StageGraph*> gp;
  for (const auto& g : fx.graphs) gp.push_back(&g);
  std::vector<double> grad;
  m.loss(gp, fx.labels, &grad);
  auto p = m.params();
  std::mt19937_64 rng(14);
  const double h = 1e-5;
  int checked = 0, bad = 0;
  double worst = 0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t k = rng() % p.size();
    const double orig = p[k];
    p[k] = orig + h;
    const double lp = m.loss(gp, fx.labels, nullptr);
    p[k] = orig - h;
    const double lm = m.loss(gp, fx.labels, nullptr);
    p[k] = orig;
    const double num = (lp - lm) / (2 * h);
    const double rel = std::abs(num - grad[k]) / std::max({std::abs(num), std::abs(grad[k]), 1e-6});
    worst = std::max(worst, rel);
    bad += rel > 1e-4;
    ++checked;
  }
  CAPTURE(worst);
  CHECK(checked >= 100);
  CHECK(bad == 0);
}

TEST_CASE("training behaviour") {
  Fixture fx(8);
  auto shape = ModelShape::for_topology(*fx.fac.topology());

  SUBCASE("single sample overfits") {
    SurrogateModel m(shape, 15);
    TrainOptions opt;
    opt.epochs = 400;
    opt.batch = 1;
    opt.lr = 2e-3;
    opt.lr_final = 2e-4;
    auto res = train(m, std::span(fx.graphs).first(1), std::span(fx.labels).first(1), {}, {}, opt);
    CHECK(res.train_loss.back() < 1e-6);
    CHECK(res.train_loss.back() <= res.train_loss.front());
  }
  SUBCASE("constant labels") {
    std::vector<Labels> same(fx.graphs.size(), Labels{0.02, 0.001, 900, 280, 140});
    SurrogateModel m(shape, 16);
    TrainOptions opt;
    opt.epochs = 100;
    opt.batch = 4;
    train(m, fx.graphs, same, {}, {}, opt);
    for (const auto& g : fx.graphs) {
      auto y = m.predict(g);
      for (int t = 0; t < kNumTargets; ++t) CHECK(std::abs(y[t] - same[0][t]) <= 0.01 * same[0][t]);
    }
  }
  SUBCASE("zero learning rate leaves weights untouched") {
    SurrogateModel m(shape, 17);
    m.set_normalization(compute_mean(fx.labels), compute_scale(fx.labels));
    std::vector<double> before(m.params().begin(), m.params().end());
    TrainOptions opt;
    opt.lr = 0;
    opt.lr_final = 0;
    opt.epochs = 3;
    train(m, fx.graphs, fx.labels, {}, {}, opt);
    CHECK(std::equal(before.begin(), before.end(), m.params().begin()));
  }
  SUBCASE("same seed reproduces the trajectory") {
    SurrogateModel a(shape, 18), b(shape, 18);
    TrainOptions opt;
    opt.epochs = 3;
    opt.batch = 3;
    auto ra = train(a, fx.graphs, fx.labels, {}, {}, opt);
    auto rb = train(b, fx.graphs, fx.labels, {}, {}, opt);
    CHECK(ra.train_loss == rb.train_loss);
    CHECK(std::equal(a.params().begin(), a.params().end(), b.params().begin()));
  }
  SUBCASE("non-finite labels abort") {
    auto bad = fx.labels;
    bad[0][0] = std::nan("");
    SurrogateModel m(shape, 19);
    CHECK_THROWS_AS(train(m, fx.graphs, bad, {}, {}, TrainOptions{}), Error);
  }
}

TEST_CASE("eval_metrics") {
  std::vector<Labels> y = {{1, 1, 1, 1, 1}, {2, 2, 2, 2, 2}, {3, 3, 3, 3, 3}};
  Labels unit{1, 1, 1, 1, 1};
  auto perfect = eval_metrics(y, y, unit);
  for (const auto& m : perfect) {
    CHECK(m.r2 == 1.0);
    CHECK(m.mse == 0.0);
  }
  std::vector<Labels> mean(3, Labels{2, 2, 2, 2, 2});
  for (const auto& m : eval_metrics(mean, y, unit)) CHECK(m.r2 == doctest::Approx(0.0));
  std::vector<Labels> a = {{1.02, 1, 1, 1, 1}}, b = {{1.0, 1, 1, 1, 1}};
  CHECK(eval_metrics(a, b, unit)[0].mre_percent == doctest::Approx(2.0));
  CHECK_THROWS_AS(eval_metrics(std::vector<Labels>{}, std::vector<Labels>{}, unit), Error);
}

TEST_CASE("checkpoints") {
  Fixture fx(2);
  SurrogateModel m(ModelShape::for_topology(*fx.fac.topology()), 20);
  m.set_normalization({0.03, 0.001, 1000, 300, 150}, {0.02, 0.0004, 25, 5, 5});
  auto text = format_model(m);
  auto back = parse_model(text);
  CHECK(back.shape() == m.shape());
  CHECK(std::equal(m.params().begin(), m.params().end(), back.params().begin()));
  CHECK(back.predict(fx.graphs[0]) == m.predict(fx.graphs[0]));
  CHECK(format_model(back) == text);

  GraphFactory other(6, fx.lib);
  CHECK_THROWS_WITH_AS(back.check_compatible(*other.topology()), doctest::Contains("fingerprint"), Error);
  CHECK_THROWS_AS(parse_model("acco-surrogate 2\n"), ParseError);
  auto truncated = text.substr(0, text.size() / 2);
  CHECK_THROWS_AS(parse_model(truncated), ParseError);
}

TEST_CASE("dataset generation and CSV round trip") {
  auto lib = load_library_file(test::data_path("compressors.lib"));
  auto tech = load_tech_file(test::data_path("tech_default.tech"));
  auto a = generate_dataset(8, lib, tech, 40, 5, true);
  auto b = generate_dataset(8, lib, tech, 40, 5, true);
  CHECK(format_dataset_csv(a, lib) == format_dataset_csv(b, lib));
  for (int t = 0; t < 2; ++t) CHECK(a.samples[0].y[t] == 0.0);
  CHECK(a.train.size() == 28);
  CHECK(a.validation.size() == 6);
  CHECK(a.test.size() == 6);
  std::vector<int> seen(40, 0);
  for (auto* part : {&a.train, &a.validation, &a.test})
    for (auto i : *part) ++seen[i];
  for (int c : seen) CHECK(c == 1);

  auto csv = format_dataset_csv(a, lib);
  auto back = parse_dataset_csv(csv, lib);
  CHECK(format_dataset_csv(back, lib) == csv);
  CHECK(back.samples[7].y == a.samples[7].y);
  CHECK(back.test == a.test);
  CHECK(back.seed == 5);
  CHECK_THROWS_AS(parse_dataset_csv("id,split\n", lib), ParseError);

  auto one = generate_dataset(8, lib, tech, 1, 1, true);
  CHECK(one.samples[0].y[0] == 0.0);
  CHECK(one.samples[0].y[1] == 0.0);
}
