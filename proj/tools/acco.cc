#include <cstdio>
#include <exception>
#include <functional>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "acco/app.h"

namespace {

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  bool exact_verify = false;

  std::optional<std::size_t> count;
  std::optional<int> epochs;
  std::optional<double> nmed_budget;
  std::optional<std::string> evaluator, optimizer, sram_method, design, designs, image_a, image_b, cells;
  std::optional<int> generations;
  std::optional<double> alpha;
};

acco::RunConfig resolve(const Overrides& o) {
  acco::RunConfig c = o.config.empty() ? acco::RunConfig{} : acco::load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (o.out_dir) c.out_dir = *o.out_dir;
  if (o.exact_verify) c.exact_verify = true;
  if (o.count) c.dataset_count = *o.count;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.nmed_budget) c.nmed_budget = *o.nmed_budget;
  if (o.evaluator) c.evaluator = *o.evaluator;
  if (o.optimizer) c.optimizer = *o.optimizer;
  if (o.generations) c.generations = *o.generations;
  if (o.sram_method) c.sram_method = *o.sram_method;
  if (o.design) c.design = *o.design;
  if (o.designs) c.designs = *o.designs;
  if (o.image_a) c.image_a = *o.image_a;
  if (o.image_b) c.image_b = *o.image_b;
  if (o.alpha) c.alpha = *o.alpha;
  if (o.cells) {
    c.cells.clear();
    std::string cur;
    for (char ch : *o.cells + ",") {
      if (ch == ',') {
        if (!cur.empty()) c.cells.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(ch);
      }
    }
  }
  if (o.nmed_budget && *o.nmed_budget < 0) throw acco::Error("--nmed-budget must be >= 0");
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Approximate multiplier and SRAM co-optimization toolkit", "acco"};
  app.failure_message(CLI::FailureMessage::help);
  app.require_subcommand(1);
  app.fallthrough();

  Overrides o;
  app.add_option("--config", o.config, "key = value run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", o.seed, "master seed");
  app.add_option("--out-dir", o.out_dir, "artifact directory");
  app.add_flag("--exact-verify", o.exact_verify, "re-check reported designs with the exhaustive oracle");

  using Cmd = std::function<acco::CommandResult(const acco::RunConfig&)>;
  Cmd chosen;
  auto sub = [&](const char* name, const char* help, Cmd cmd) {
    auto* s = app.add_subcommand(name, help);
    s->callback([&chosen, cmd] { chosen = cmd; });
    return s;
  };

  auto* gen = sub("gen-dataset", "sample and label multiplier configurations", acco::cmd_gen_dataset);
  gen->add_option("--count", o.count, "number of samples");

  auto* tr = sub("train", "train the surrogate on the dataset", acco::cmd_train);
  tr->add_option("--epochs", o.epochs, "training epochs");

  auto* sa = sub("search-arch", "NMED-constrained (MRED, PDP) architecture search", acco::cmd_search_arch);
  sa->add_option("--nmed-budget", o.nmed_budget, "NMED budget");
  sa->add_option("--evaluator", o.evaluator, "surrogate or oracle")->check(CLI::IsMember({"surrogate", "oracle"}));
  sa->add_option("--optimizer", o.optimizer, "nsga2 or moead")->check(CLI::IsMember({"nsga2", "moead"}));
  sa->add_option("--generations", o.generations, "optimizer generations");

  auto* sz = sub("size-cells", "transistor width sizing of compressor gate chains", acco::cmd_size_cells);
  sz->add_option("--cells", o.cells, "comma-separated chain names");

  auto* sr = sub("sram", "SRAM bank organization search", acco::cmd_sram);
  sr->add_option("--method", o.sram_method, "scan, pso or sa")->check(CLI::IsMember({"scan", "pso", "sa"}));

  auto* bl = sub("blend", "alpha blending with an approximate multiplier", acco::cmd_blend);
  bl->add_option("--image-a", o.image_a, "first PGM image (default: synthetic gradient)");
  bl->add_option("--image-b", o.image_b, "second PGM image (default: synthetic checkerboard)");
  bl->add_option("--alpha", o.alpha, "blend weight in [0, 1]");
  bl->add_option("--design", o.design, "'exact' or comma-separated compressor names");
  bl->add_option("--designs", o.designs, "CSV with an assignment column, e.g. cases.csv");

  auto* ev = sub("eval", "oracle error and PPA report of one design", acco::cmd_eval);
  ev->add_option("--design", o.design, "'exact' or comma-separated compressor names");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const auto cfg = resolve(o);
    const auto r = chosen(cfg);
    std::printf("%s\n", r.summary.c_str());
    if (r.status != 0) std::fprintf(stderr, "acco: %s\n", r.summary.c_str());
    return r.status;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acco: error: %s\n", e.what());
    return 1;
  }
}
