#include "acco/app.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <sstream>

#include "acco/cell_sizing.h"
#include "acco/error_metrics.h"
#include "acco/sram_macro.h"
#include "acco/text_format.h"

namespace acco {

namespace fs = std::filesystem;

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

std::string join(const std::vector<std::string>& v, const char* sep = ",") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

std::string fmt(double v) { return format_double(v); }

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) throw Error(std::string(what) + " not found: " + path);
}

std::string out_path(const RunConfig& cfg, const std::string& name) { return (fs::path(cfg.out_dir) / name).string(); }

void prepare_out_dir(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw Error("cannot create output directory " + cfg.out_dir + ": " + ec.message());
}

// No timestamps: reruns must be byte-identical.
void write_manifest(const RunConfig& cfg, const std::string& command, const std::vector<std::string>& artifacts,
                    const std::string& summary) {
  std::string m = "# run manifest\ncommand = " + command + "\nacco_version = " ACCO_VERSION "\n";
  m += format_run_config(cfg);
  m += "artifacts = " + join(artifacts) + "\n";
  m += "summary = " + summary + "\n";
  write_text_file(out_path(cfg, "manifest.txt"), m);
}

struct Inputs {
  CellLibrary lib;
  TechTable tech;
};

Inputs load_inputs(const RunConfig& cfg) {
  cfg.validate();
  return Inputs{load_library_file(cfg.library), load_tech_file(cfg.tech)};
}

std::string csv_quote(const std::string& s) { return s.find(',') == std::string::npos ? s : "\"" + s + "\""; }

std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

}  // namespace

// ---------------------------------------------------------------- RunConfig

void RunConfig::validate() const {
  if (width < kMinWidth || width > kMaxWidth)
    throw Error("width must lie in [" + std::to_string(kMinWidth) + ", " + std::to_string(kMaxWidth) + "]");
  if (!(nmed_budget >= 0)) throw Error("nmed_budget must be >= 0");
  for (double b : case_budgets)
    if (!(b >= 0)) throw Error("case_budgets must be >= 0");
  if (!(alpha >= 0 && alpha <= 1)) throw Error("alpha must lie in [0, 1]");
  if (optimizer != "nsga2" && optimizer != "moead") throw Error("optimizer must be nsga2 or moead");
  if (evaluator != "surrogate" && evaluator != "oracle") throw Error("evaluator must be surrogate or oracle");
  if (population < 2) throw Error("population must be >= 2");
  if (generations < 0 || sizing_generations < 0) throw Error("generation counts must be >= 0");
  require_file(library, "library");
  require_file(tech, "tech table");
}

std::string RunConfig::dataset_path() const { return dataset.empty() ? out_path(*this, "dataset.csv") : dataset; }
std::string RunConfig::model_path() const { return model.empty() ? out_path(*this, "model.txt") : model; }

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  const auto kv = KeyValues::parse(text, source);
  kv.require_known({"width", "library", "tech", "seed", "out_dir", "exact_verify", "dataset_count", "dataset",
                    "model", "epochs", "lr", "batch", "nmed_budget", "mred_budget", "optimizer", "population",
                    "generations", "evaluator", "alphabet", "free_slots", "case_budgets", "gates", "chains_dir",
                    "cells", "sizing_method", "sizing_population", "sizing_generations", "sram_coef", "capacity",
                    "sram_method", "sram_budget", "image_a", "image_b", "image_size", "alpha", "design",
                    "designs"});
  RunConfig c;
  auto non_negative = [&](const std::string& key, long long fallback) {
    const long long v = kv.get_int(key, fallback);
    if (v < 0) throw ParseError(source + ": " + key + " must be >= 0");
    return v;
  };
  c.width = static_cast<int>(kv.get_int("width", c.width));
  c.library = kv.get_string("library", c.library);
  c.tech = kv.get_string("tech", c.tech);
  c.seed = static_cast<std::uint64_t>(non_negative("seed", static_cast<long long>(c.seed)));
  c.out_dir = kv.get_string("out_dir", c.out_dir);
  c.exact_verify = kv.get_bool("exact_verify", c.exact_verify);
  c.dataset_count = static_cast<std::size_t>(non_negative("dataset_count", static_cast<long long>(c.dataset_count)));
  c.dataset = kv.get_string("dataset", c.dataset);
  c.model = kv.get_string("model", c.model);
  c.epochs = static_cast<int>(non_negative("epochs", c.epochs));
  c.lr = kv.get_double("lr", c.lr);
  c.batch = static_cast<std::size_t>(non_negative("batch", static_cast<long long>(c.batch)));
  c.nmed_budget = kv.get_double("nmed_budget", c.nmed_budget);
  if (c.nmed_budget < 0) throw ParseError(source + ": nmed_budget must be >= 0");
  if (kv.has("mred_budget")) {
    c.mred_budget = kv.get_double("mred_budget");
    if (c.mred_budget < 0) throw ParseError(source + ": mred_budget must be >= 0");
  }
  c.optimizer = kv.get_string("optimizer", c.optimizer);
  c.population = static_cast<std::size_t>(non_negative("population", static_cast<long long>(c.population)));
  c.generations = static_cast<int>(non_negative("generations", c.generations));
  c.evaluator = kv.get_string("evaluator", c.evaluator);
  if (kv.has("alphabet")) c.alphabet = split_list(kv.get_string("alphabet"));
  if (kv.has("free_slots")) {
    c.free_slots.clear();
    for (const auto& t : split_list(kv.get_string("free_slots")))
      c.free_slots.push_back(static_cast<int>(parse_integer(t, source + " free_slots", 0)));
  }
  if (kv.has("case_budgets")) c.case_budgets = kv.get_doubles("case_budgets");
  c.gates = kv.get_string("gates", c.gates);
  c.chains_dir = kv.get_string("chains_dir", c.chains_dir);
  if (kv.has("cells")) c.cells = split_list(kv.get_string("cells"));
  c.sizing_method = kv.get_string("sizing_method", c.sizing_method);
  c.sizing_population =
      static_cast<std::size_t>(non_negative("sizing_population", static_cast<long long>(c.sizing_population)));
  c.sizing_generations = static_cast<int>(non_negative("sizing_generations", c.sizing_generations));
  c.sram_coef = kv.get_string("sram_coef", c.sram_coef);
  c.capacity = non_negative("capacity", c.capacity);
  c.sram_method = kv.get_string("sram_method", c.sram_method);
  c.sram_budget = static_cast<std::size_t>(non_negative("sram_budget", static_cast<long long>(c.sram_budget)));
  c.image_a = kv.get_string("image_a", c.image_a);
  c.image_b = kv.get_string("image_b", c.image_b);
  c.image_size = static_cast<int>(non_negative("image_size", c.image_size));
  c.alpha = kv.get_double("alpha", c.alpha);
  c.design = kv.get_string("design", c.design);
  c.designs = kv.get_string("designs", c.designs);
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path), path); }

std::string format_run_config(const RunConfig& c) {
  std::vector<std::string> slots, budgets;
  for (int s : c.free_slots) slots.push_back(std::to_string(s));
  for (double b : c.case_budgets) budgets.push_back(fmt(b));
  std::ostringstream os;
  os << "width = " << c.width << "\nlibrary = " << c.library << "\ntech = " << c.tech << "\nseed = " << c.seed
     << "\nout_dir = " << c.out_dir << "\nexact_verify = " << (c.exact_verify ? "true" : "false")
     << "\ndataset_count = " << c.dataset_count << "\ndataset = " << c.dataset << "\nmodel = " << c.model
     << "\nepochs = " << c.epochs << "\nlr = " << fmt(c.lr) << "\nbatch = " << c.batch
     << "\nnmed_budget = " << fmt(c.nmed_budget);
  if (c.mred_budget >= 0) os << "\nmred_budget = " << fmt(c.mred_budget);
  os << "\noptimizer = " << c.optimizer << "\npopulation = " << c.population << "\ngenerations = " << c.generations
     << "\nevaluator = " << c.evaluator << "\nalphabet = " << join(c.alphabet) << "\nfree_slots = " << join(slots)
     << "\ncase_budgets = " << join(budgets) << "\ngates = " << c.gates << "\nchains_dir = " << c.chains_dir
     << "\ncells = " << join(c.cells) << "\nsizing_method = " << c.sizing_method
     << "\nsizing_population = " << c.sizing_population << "\nsizing_generations = " << c.sizing_generations
     << "\nsram_coef = " << c.sram_coef << "\ncapacity = " << c.capacity << "\nsram_method = " << c.sram_method
     << "\nsram_budget = " << c.sram_budget << "\nimage_a = " << c.image_a << "\nimage_b = " << c.image_b
     << "\nimage_size = " << c.image_size << "\nalpha = " << fmt(c.alpha) << "\ndesign = " << c.design
     << "\ndesigns = " << c.designs << "\n";
  // Empty values do not round-trip through KeyValues; drop those lines.
  std::string out;
  std::istringstream in(os.str());
  for (std::string line; std::getline(in, line);)
    if (line.size() < 3 || line.compare(line.size() - 3, 3, " = ") != 0) out += line + "\n";
  return out;
}

// --------------------------------------------------------------- designs

std::vector<std::size_t> parse_assignment(const std::string& text, const CellLibrary& lib, int width) {
  auto cfg = exact_config(width, lib);
  const auto names = split_list(text);
  if (names.size() == 1 && names[0] == "exact") return cfg.assignment;
  if (names.size() != cfg.assignment.size())
    throw Error("design needs " + std::to_string(cfg.assignment.size()) + " compressor names, got " +
                std::to_string(names.size()) + " in '" + text + "'");
  std::vector<std::size_t> a;
  for (const auto& n : names) {
    const auto idx = lib.find(n);
    if (!idx || !lib.is_compressor(*idx)) throw Error("design: '" + n + "' is not a 4-2 compressor in the library");
    a.push_back(*idx);
  }
  return a;
}

std::string format_assignment(std::span<const std::size_t> a, const CellLibrary& lib) {
  std::string out;
  for (std::size_t i = 0; i < a.size(); ++i) out += (i ? " " : "") + lib.cell(a[i]).name();
  return out;
}

ArchMetrics oracle_metrics(const MultiplierConfig& cfg, const TechTable& tech) {
  const Labels y = label_design(cfg, tech);
  return ArchMetrics{y[0], y[1], y[2], y[3], y[4]};
}

ArchMetrics surrogate_metrics(const SurrogateModel& model, const GraphFactory& factory,
                              std::span<const std::size_t> assignment) {
  const Labels y = model.predict(factory.make(assignment));
  return ArchMetrics{y[0], y[1], y[2], y[3], y[4]};
}

std::vector<std::size_t> ArchSpace::decode(const Design& x) const {
  auto a = exact_config(width, *lib).assignment;
  if (x.size() != free_slots.size()) throw Error("ArchSpace::decode: design length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) {
    const auto k = static_cast<std::size_t>(std::llround(x[i]));
    if (k >= alphabet.size()) throw Error("ArchSpace::decode: gene out of range");
    a[static_cast<std::size_t>(free_slots[i] - 1)] = alphabet[k];
  }
  return a;
}

std::uint64_t ArchSpace::cardinality() const {
  std::uint64_t n = 1;
  for (std::size_t i = 0; i < free_slots.size(); ++i) {
    if (n > std::numeric_limits<std::uint64_t>::max() / alphabet.size()) return std::numeric_limits<std::uint64_t>::max();
    n *= alphabet.size();
  }
  return n;
}

ArchSpace make_arch_space(const CellLibrary& lib, int width, const std::vector<std::string>& alphabet,
                          const std::vector<int>& free_slots) {
  ArchSpace s;
  s.width = width;
  s.lib = &lib;
  if (alphabet.empty()) {
    s.alphabet = lib.compressor_indices();
  } else {
    for (const auto& n : alphabet) {
      const auto idx = lib.find(n);
      if (!idx || !lib.is_compressor(*idx)) throw Error("alphabet: '" + n + "' is not a 4-2 compressor in the library");
      if (std::find(s.alphabet.begin(), s.alphabet.end(), *idx) != s.alphabet.end())
        throw Error("alphabet: duplicate entry '" + n + "'");
      s.alphabet.push_back(*idx);
    }
  }
  const int t = static_cast<int>(slot_layout(width).size());
  if (t == 0) throw Error("width " + std::to_string(width) + " has no configurable slots");
  if (free_slots.empty()) {
    for (int i = 1; i <= t; ++i) s.free_slots.push_back(i);
  } else {
    for (int sl : free_slots) {
      if (sl < 1 || sl > t) throw Error("free_slots: slot " + std::to_string(sl) + " outside 1.." + std::to_string(t));
      if (std::find(s.free_slots.begin(), s.free_slots.end(), sl) != s.free_slots.end())
        throw Error("free_slots: duplicate slot " + std::to_string(sl));
      s.free_slots.push_back(sl);
    }
  }
  return s;
}

// ------------------------------------------------------------ arch search

namespace {

double budget_violation(const ArchMetrics& m, double nmed_budget, double mred_budget) {
  double v = std::max(0.0, m.nmed - nmed_budget);
  if (mred_budget >= 0) v += std::max(0.0, m.mred - mred_budget);
  return v;
}

ObjectiveVector arch_objectives(const ArchMetrics& m, double nmed_budget, double mred_budget) {
  return ObjectiveVector{{m.mred, m.pdp_fj()}, budget_violation(m, nmed_budget, mred_budget)};
}

MultiObjectiveProblem make_problem(const ArchSpace& space, std::function<ArchMetrics(const Design&)> metric,
                                   double nmed_budget, double mred_budget) {
  MultiObjectiveProblem p;
  for (std::size_t i = 0; i < space.free_slots.size(); ++i)
    p.variables.push_back(Variable{0.0, static_cast<double>(space.alphabet.size() - 1), true});
  p.num_objectives = 2;
  p.evaluate = [metric = std::move(metric), nmed_budget, mred_budget](const Design& x) {
    return arch_objectives(metric(x), nmed_budget, mred_budget);
  };
  const auto exact_pos = std::find(space.alphabet.begin(), space.alphabet.end(), space.lib->exact_reference());
  if (exact_pos != space.alphabet.end())
    p.seeds.push_back(Design(space.free_slots.size(), static_cast<double>(exact_pos - space.alphabet.begin())));
  return p;
}

}  // namespace

MultiObjectiveProblem arch_problem(const ArchSpace& space, const TechTable& tech, double nmed_budget,
                                   double mred_budget) {
  return make_problem(
      space,
      [&space, &tech](const Design& x) {
        return oracle_metrics(MultiplierConfig{space.width, space.decode(x), space.lib}, tech);
      },
      nmed_budget, mred_budget);
}

ArchSearchResult search_arch(const ArchSpace& space, const TechTable& tech, const SurrogateModel* model,
                             const ArchSearchOptions& opt) {
  if (!(opt.nmed_budget >= 0)) throw Error("search_arch: NMED budget must be >= 0");
  std::optional<GraphFactory> factory;
  if (model) {
    factory.emplace(space.width, *space.lib, 0.5, model->shape().feature_dim);
    model->check_compatible(*factory->topology());
  }
  std::size_t evaluations = 0;
  std::map<std::vector<std::size_t>, ArchMetrics> oracle_cache;
  auto oracle = [&](const std::vector<std::size_t>& a) {
    auto it = oracle_cache.find(a);
    if (it == oracle_cache.end())
      it = oracle_cache.emplace(a, oracle_metrics(MultiplierConfig{space.width, a, space.lib}, tech)).first;
    return it->second;
  };
  auto metric = [&](const Design& x) {
    ++evaluations;
    const auto a = space.decode(x);
    return model ? surrogate_metrics(*model, *factory, a) : oracle(a);
  };
  const auto problem = make_problem(space, metric, opt.nmed_budget, opt.mred_budget);

  ParetoArchive archive;
  if (opt.optimizer == "nsga2") {
    Nsga2Options o;
    o.population = opt.population + (opt.population % 2);
    o.generations = opt.generations;
    o.seed = opt.seed;
    archive = nsga2(problem, o);
  } else if (opt.optimizer == "moead") {
    MoeadOptions o;
    o.subproblems = opt.population;
    o.generations = opt.generations;
    o.seed = opt.seed;
    archive = moead(problem, o);
  } else {
    throw Error("search_arch: unknown optimizer '" + opt.optimizer + "'");
  }

  ArchSearchResult r;
  r.evaluations = evaluations;
  r.least_violation = std::numeric_limits<double>::infinity();
  // Budget re-check against the oracle; search values are kept for ranking.
  std::vector<ArchPoint> kept;
  for (const auto& e : archive.entries()) {
    ArchPoint p;
    p.assignment = space.decode(e.x);
    p.search = model ? surrogate_metrics(*model, *factory, p.assignment) : oracle(p.assignment);
    const ArchMetrics truth = oracle(p.assignment);
    p.oracle = truth;
    p.generation = e.generation;
    const double v = budget_violation(truth, opt.nmed_budget, opt.mred_budget);
    r.least_violation = std::min(r.least_violation, v);
    if (v > 0) {
      ++r.dropped;
      continue;
    }
    kept.push_back(std::move(p));
  }
  // Survivors of an infeasible-only archive need not be mutually non-dominated.
  for (std::size_t i = 0; i < kept.size(); ++i) {
    const ObjectiveVector fi{{kept[i].search.mred, kept[i].search.pdp_fj()}, 0.0};
    bool dominated = false;
    for (std::size_t j = 0; j < kept.size() && !dominated; ++j)
      dominated = j != i && dominates(ObjectiveVector{{kept[j].search.mred, kept[j].search.pdp_fj()}, 0.0}, fi);
    if (!dominated) r.front.push_back(kept[i]);
  }
  std::sort(r.front.begin(), r.front.end(), [](const ArchPoint& a, const ArchPoint& b) {
    if (a.search.mred != b.search.mred) return a.search.mred < b.search.mred;
    if (a.search.pdp_fj() != b.search.pdp_fj()) return a.search.pdp_fj() < b.search.pdp_fj();
    return a.assignment < b.assignment;
  });
  r.infeasible = r.front.empty();
  return r;
}

std::string format_front_csv(const ArchSearchResult& r, const CellLibrary& lib, bool with_oracle) {
  std::ostringstream os;
  os << "assignment,mred,nmed,delay_ps,area_um2,power_uw,pdp_fj,generation";
  if (with_oracle) os << ",oracle_mred,oracle_nmed,oracle_pdp_fj";
  os << '\n';
  for (const auto& p : r.front) {
    os << format_assignment(p.assignment, lib) << ',' << fmt(p.search.mred) << ',' << fmt(p.search.nmed) << ','
       << fmt(p.search.delay_ps) << ',' << fmt(p.search.area_um2) << ',' << fmt(p.search.power_uw) << ','
       << fmt(p.search.pdp_fj()) << ',' << p.generation;
    if (with_oracle) {
      if (!p.oracle) throw Error("format_front_csv: point lacks oracle values");
      os << ',' << fmt(p.oracle->mred) << ',' << fmt(p.oracle->nmed) << ',' << fmt(p.oracle->pdp_fj());
    }
    os << '\n';
  }
  return os.str();
}

std::vector<BudgetCase> pick_budget_cases(const ArchSearchResult& r, const std::vector<double>& budgets) {
  std::vector<BudgetCase> out;
  for (double b : budgets) {
    BudgetCase c{b, std::nullopt};
    for (const auto& p : r.front) {
      const ArchMetrics& m = p.oracle ? *p.oracle : p.search;
      if (m.nmed > b) continue;
      if (!c.point) {
        c.point = p;
        continue;
      }
      const ArchMetrics& best = c.point->oracle ? *c.point->oracle : c.point->search;
      if (m.pdp_fj() < best.pdp_fj() || (m.pdp_fj() == best.pdp_fj() && m.mred < best.mred)) c.point = p;
    }
    out.push_back(std::move(c));
  }
  return out;
}

// ---------------------------------------------------------------- commands

CommandResult cmd_gen_dataset(const RunConfig& cfg) {
  const auto in = load_inputs(cfg);
  if (cfg.dataset_count == 0) throw Error("dataset_count must be positive");
  prepare_out_dir(cfg);
  const auto ds = generate_dataset(cfg.width, in.lib, in.tech, cfg.dataset_count, cfg.seed, true);
  const auto path = cfg.dataset_path();
  write_text_file(path, format_dataset_csv(ds, in.lib));
  const std::string summary = "gen-dataset samples=" + std::to_string(ds.samples.size()) +
                              " train=" + std::to_string(ds.train.size()) +
                              " validation=" + std::to_string(ds.validation.size()) +
                              " test=" + std::to_string(ds.test.size()) + " path=" + path;
  write_manifest(cfg, "gen-dataset", {path}, summary);
  return {summary, 0};
}

CommandResult cmd_train(const RunConfig& cfg) {
  const auto in = load_inputs(cfg);
  const auto dpath = cfg.dataset_path();
  require_file(dpath, "dataset");
  const auto ds = parse_dataset_csv(read_text_file(dpath), in.lib);
  if (ds.width != cfg.width)
    throw Error("dataset " + dpath + " has width " + std::to_string(ds.width) + ", config says " +
                std::to_string(cfg.width));
  if (ds.train.empty()) throw Error("dataset " + dpath + " has no training samples");
  prepare_out_dir(cfg);

  const GraphFactory factory(cfg.width, in.lib);
  auto graphs_of = [&](const std::vector<std::size_t>& idx, std::vector<StageGraph>& g, std::vector<Labels>& y) {
    for (auto i : idx) {
      g.push_back(factory.make(ds.samples[i].assignment));
      y.push_back(ds.samples[i].y);
    }
  };
  std::vector<StageGraph> tg, vg, eg;
  std::vector<Labels> ty, vy, ey;
  graphs_of(ds.train, tg, ty);
  graphs_of(ds.validation, vg, vy);
  graphs_of(ds.test.empty() ? ds.validation : ds.test, eg, ey);

  SurrogateModel model(ModelShape::for_topology(*factory.topology()), cfg.seed);
  TrainOptions opt;
  opt.epochs = cfg.epochs;
  opt.lr = cfg.lr;
  opt.batch = cfg.batch;
  opt.seed = cfg.seed;
  const auto tr = train(model, tg, ty, vg, vy, opt);
  const auto mpath = cfg.model_path();
  save_model(model, mpath);

  std::ostringstream log;
  log << "epoch,train_loss,validation_loss\n";
  for (std::size_t e = 0; e < tr.train_loss.size(); ++e)
    log << e << ',' << fmt(tr.train_loss[e]) << ','
        << (e < tr.validation_loss.size() ? fmt(tr.validation_loss[e]) : std::string("nan")) << '\n';
  write_text_file(out_path(cfg, "train_log.csv"), log.str());

  std::string r2s;
  std::ostringstream met;
  met << "target,mse,mre_percent,r2\n";
  if (!eg.empty()) {
    const auto m = eval_metrics(model, eg, ey);
    for (int t = 0; t < kNumTargets; ++t) {
      met << kTargetNames[t] << ',' << fmt(m[t].mse) << ',' << fmt(m[t].mre_percent) << ',' << fmt(m[t].r2) << '\n';
      r2s += std::string(" r2_") + kTargetNames[t] + "=" + fixed(m[t].r2, 4);
    }
  }
  write_text_file(out_path(cfg, "train_metrics.csv"), met.str());
  const std::string summary = "train epochs=" + std::to_string(tr.train_loss.size()) +
                              " best_epoch=" + std::to_string(tr.best_epoch) + r2s + " model=" + mpath;
  write_manifest(cfg, "train", {mpath, out_path(cfg, "train_log.csv"), out_path(cfg, "train_metrics.csv")}, summary);
  return {summary, 0};
}

CommandResult cmd_search_arch(const RunConfig& cfg) {
  const auto in = load_inputs(cfg);
  const auto space = make_arch_space(in.lib, cfg.width, cfg.alphabet, cfg.free_slots);
  std::optional<SurrogateModel> model;
  if (cfg.evaluator == "surrogate") {
    const auto mpath = cfg.model_path();
    if (!fs::is_regular_file(mpath))
      throw Error("no trained model at " + mpath + " (run train first or set evaluator = oracle)");
    const GraphFactory factory(cfg.width, in.lib);
    model = load_model(mpath, *factory.topology());
  }
  prepare_out_dir(cfg);
  ArchSearchOptions opt;
  opt.optimizer = cfg.optimizer;
  opt.population = cfg.population;
  opt.generations = cfg.generations;
  opt.seed = cfg.seed;
  opt.nmed_budget = cfg.nmed_budget;
  opt.mred_budget = cfg.mred_budget;
  opt.exact_verify = cfg.exact_verify;
  const auto r = search_arch(space, in.tech, model ? &*model : nullptr, opt);

  const bool with_oracle = cfg.exact_verify || !model;
  write_text_file(out_path(cfg, "front.csv"), format_front_csv(r, in.lib, with_oracle));

  std::ostringstream cs;
  cs << "case,budget,assignment,mred,nmed,pdp_fj\n";
  int n = 0;
  for (const auto& c : pick_budget_cases(r, cfg.case_budgets)) {
    ++n;
    cs << "case" << n << ',' << fmt(c.budget) << ',';
    if (!c.point) {
      cs << "none,,,\n";
      continue;
    }
    const ArchMetrics& m = *c.point->oracle;
    cs << format_assignment(c.point->assignment, in.lib) << ',' << fmt(m.mred) << ',' << fmt(m.nmed) << ','
       << fmt(m.pdp_fj()) << '\n';
  }
  write_text_file(out_path(cfg, "cases.csv"), cs.str());

  std::string summary = "search-arch optimizer=" + cfg.optimizer + " evaluator=" + cfg.evaluator +
                        " nmed_budget=" + fmt(cfg.nmed_budget) + " space=" + std::to_string(space.cardinality()) +
                        " evaluations=" + std::to_string(r.evaluations) + " front=" + std::to_string(r.front.size()) +
                        " dropped=" + std::to_string(r.dropped);
  int status = 0;
  if (r.infeasible) {
    summary += " status=infeasible least_nmed_excess=" + fmt(r.least_violation);
    status = 3;
  } else {
    summary += " status=ok";
  }
  write_manifest(cfg, "search-arch", {out_path(cfg, "front.csv"), out_path(cfg, "cases.csv")}, summary);
  return {summary, status};
}

CommandResult cmd_size_cells(const RunConfig& cfg) {
  require_file(cfg.gates, "gate parameter file");
  const auto params = load_gate_params(cfg.gates);
  std::vector<std::string> names = cfg.cells;
  if (names.empty()) {
    if (!fs::is_directory(cfg.chains_dir)) throw Error("chains directory not found: " + cfg.chains_dir);
    for (const auto& e : fs::directory_iterator(cfg.chains_dir))
      if (e.path().extension() == ".chain") names.push_back(e.path().stem().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw Error("no .chain files in " + cfg.chains_dir);
  }
  if (cfg.sizing_population < 2) throw Error("sizing_population must be >= 2");
  SizingOptions opt;
  if (cfg.sizing_method == "moead") opt.method = SizingMethod::Moead;
  else if (cfg.sizing_method == "nsga2") opt.method = SizingMethod::Nsga2;
  else throw Error("sizing_method must be moead or nsga2");
  opt.population = cfg.sizing_population;
  opt.generations = cfg.sizing_generations;
  opt.seed = cfg.seed;
  prepare_out_dir(cfg);

  std::vector<std::string> artifacts;
  std::ostringstream sum;
  sum << "cell,archive_size,ref_pdp_fj,ref_area_um2,best_pdp_fj,best_pdp_area_um2,min_area_um2,pdp_reduction_percent\n";
  double worst_gain = std::numeric_limits<double>::infinity();
  for (const auto& name : names) {
    const auto path = (fs::path(cfg.chains_dir) / (name + ".chain")).string();
    require_file(path, "chain file");
    const auto chain = load_chain_file(path, params);
    const auto res = optimize_cell(chain, params, params.corners, opt);
    std::vector<std::string> vars;
    for (const auto& g : chain.groups) vars.push_back(g.name);
    const std::vector<std::string> objs{"pdp_fj", "area_um2"};
    const auto apath = out_path(cfg, "sizing_" + name + ".csv");
    write_text_file(apath, format_archive_csv(res.archive, vars, objs));
    artifacts.push_back(apath);
    double best_pdp = std::numeric_limits<double>::infinity(), best_area = 0, min_area = best_pdp;
    for (const auto& e : res.archive.entries()) {
      if (!e.f.feasible()) continue;
      if (e.f.values[0] < best_pdp) {
        best_pdp = e.f.values[0];
        best_area = e.f.values[1];
      }
      min_area = std::min(min_area, e.f.values[1]);
    }
    const double gain = 100.0 * (res.reference_metrics.pdp_fj - best_pdp) / res.reference_metrics.pdp_fj;
    worst_gain = std::min(worst_gain, gain);
    sum << name << ',' << res.archive.size() << ',' << fmt(res.reference_metrics.pdp_fj) << ','
        << fmt(res.reference_metrics.area_um2) << ',' << fmt(best_pdp) << ',' << fmt(best_area) << ','
        << fmt(min_area) << ',' << fixed(gain, 3) << '\n';
  }
  const auto spath = out_path(cfg, "sizing_summary.csv");
  write_text_file(spath, sum.str());
  artifacts.insert(artifacts.begin(), spath);
  const std::string summary = "size-cells cells=" + std::to_string(names.size()) + " method=" + cfg.sizing_method +
                              " min_pdp_reduction_percent=" + fixed(worst_gain, 3) + " summary=" + spath;
  write_manifest(cfg, "size-cells", artifacts, summary);
  return {summary, 0};
}

CommandResult cmd_sram(const RunConfig& cfg) {
  require_file(cfg.sram_coef, "SRAM coefficient file");
  const auto k = load_sram_coefficients(cfg.sram_coef);
  BankSearchOptions opt;
  if (cfg.sram_method == "scan") opt.method = SearchMethod::Scan;
  else if (cfg.sram_method == "pso") opt.method = SearchMethod::Pso;
  else if (cfg.sram_method == "sa") opt.method = SearchMethod::Sa;
  else throw Error("sram_method must be scan, pso or sa");
  opt.seed = cfg.seed;
  opt.budget = cfg.sram_budget;
  prepare_out_dir(cfg);
  const auto r = search_bank(cfg.capacity, k, opt);

  auto rows = [](const std::vector<BankResult>& v) {
    std::ostringstream os;
    os << "r,c,mu,n_a,d_rd_ps,d_wr_ps,p_rd_uw,p_wr_uw,area_um2,fom\n";
    for (const auto& b : v)
      os << b.cfg.r << ',' << b.cfg.c << ',' << b.cfg.mu << ',' << b.cfg.n_a << ',' << fmt(b.metrics.d_rd) << ','
         << fmt(b.metrics.d_wr) << ',' << fmt(b.metrics.p_rd) << ',' << fmt(b.metrics.p_wr) << ','
         << fmt(b.metrics.area) << ',' << fmt(b.fom) << '\n';
    return os.str();
  };
  const auto rpath = out_path(cfg, "sram_" + cfg.sram_method + ".csv");
  const auto fpath = out_path(cfg, "sram_front.csv");
  write_text_file(rpath, rows(r.ranked));
  write_text_file(fpath, rows(r.front));
  const auto& b = r.best;
  const std::string summary = "sram method=" + cfg.sram_method + " capacity=" + std::to_string(cfg.capacity) +
                              " evaluations=" + std::to_string(r.evaluations) + " rows=" +
                              std::to_string(r.ranked.size()) + " best=r" + std::to_string(b.cfg.r) + ":c" +
                              std::to_string(b.cfg.c) + ":mu" + std::to_string(b.cfg.mu) + ":n_a" +
                              std::to_string(b.cfg.n_a) + " fom=" + fixed(b.fom, 4) +
                              " front=" + std::to_string(r.front.size());
  write_manifest(cfg, "sram", {rpath, fpath}, summary);
  return {summary, 0};
}

namespace {

struct NamedDesign {
  std::string label;
  std::vector<std::size_t> assignment;
};

std::vector<NamedDesign> blend_designs(const RunConfig& cfg, const CellLibrary& lib) {
  std::vector<NamedDesign> out;
  if (cfg.designs.empty()) {
    out.push_back({"design", parse_assignment(cfg.design, lib, cfg.width)});
    return out;
  }
  require_file(cfg.designs, "designs CSV");
  std::istringstream in(read_text_file(cfg.designs));
  std::string line;
  std::vector<std::string> header;
  int col_a = -1, col_case = -1, number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line[0] == '#') continue;
    const auto f = csv_fields(line);
    if (header.empty()) {
      header = f;
      for (std::size_t i = 0; i < f.size(); ++i) {
        if (f[i] == "assignment") col_a = static_cast<int>(i);
        if (f[i] == "case") col_case = static_cast<int>(i);
      }
      if (col_a < 0) throw ParseError(cfg.designs + ": no 'assignment' column");
      continue;
    }
    if (static_cast<int>(f.size()) <= col_a) throw ParseError(cfg.designs + " line " + std::to_string(number) + ": short row");
    if (f[col_a] == "none") continue;
    const std::string label = col_case >= 0 ? f[col_case] : "row" + std::to_string(out.size() + 1);
    out.push_back({label, parse_assignment(f[col_a], lib, cfg.width)});
  }
  if (out.empty()) throw Error(cfg.designs + ": no designs");
  return out;
}

}  // namespace

CommandResult cmd_blend(const RunConfig& cfg) {
  const auto in = load_inputs(cfg);
  if (cfg.width != 8) throw Error("blend uses the 8-bit multiplier; set width = 8");
  if (cfg.image_size <= 0) throw Error("image_size must be positive");
  const GrayImage a = cfg.image_a.empty() ? synthetic_gradient(cfg.image_size, cfg.image_size) : read_pgm(cfg.image_a);
  const GrayImage b =
      cfg.image_b.empty() ? synthetic_checker_noise(cfg.image_size, cfg.image_size, 2024) : read_pgm(cfg.image_b);
  const auto designs = blend_designs(cfg, in.lib);
  prepare_out_dir(cfg);

  const GrayImage reference = blend(a, b, cfg.alpha, exact_product_table());
  std::vector<std::string> artifacts{out_path(cfg, "blend_exact.pgm")};
  write_pgm(artifacts.back(), reference);
  std::ostringstream os;
  os << "label,assignment,mred,nmed,psnr_db\n";
  std::string psnrs;
  for (const auto& d : designs) {
    const MultiplierConfig mc{cfg.width, d.assignment, &in.lib};
    const auto net = build_tree(mc);
    const GrayImage out = blend(a, b, cfg.alpha, product_table(net));
    const double db = psnr(out, reference);
    const auto rep = error_report(net, InputSet::standard(cfg.width));
    os << d.label << ',' << format_assignment(d.assignment, in.lib) << ',' << fmt(rep.mred) << ',' << fmt(rep.nmed)
       << ',' << format_psnr(db) << '\n';
    artifacts.push_back(out_path(cfg, "blend_" + d.label + ".pgm"));
    write_pgm(artifacts.back(), out);
    psnrs += (psnrs.empty() ? "" : ",") + format_psnr(db);
  }
  const auto cpath = out_path(cfg, "blend.csv");
  write_text_file(cpath, os.str());
  artifacts.insert(artifacts.begin(), cpath);
  const std::string summary = "blend designs=" + std::to_string(designs.size()) + " alpha=" + fmt(cfg.alpha) +
                              " size=" + std::to_string(a.width) + "x" + std::to_string(a.height) +
                              " psnr_db=" + psnrs;
  write_manifest(cfg, "blend", artifacts, summary);
  return {summary, 0};
}

CommandResult cmd_eval(const RunConfig& cfg) {
  const auto in = load_inputs(cfg);
  const auto a = parse_assignment(cfg.design, in.lib, cfg.width);
  prepare_out_dir(cfg);
  const MultiplierConfig mc{cfg.width, a, &in.lib};
  const auto net = build_tree(mc);
  const auto inputs = InputSet::standard(cfg.width);
  const auto rep = error_report(net, inputs);
  const auto ppa = ppa_report(net, in.tech);
  std::ostringstream os;
  os << "assignment,inputs,mred,nmed,max_ed,delay_ps,area_um2,power_uw,pdp_fj\n"
     << format_assignment(a, in.lib) << ',' << csv_quote(rep.inputs) << ',' << fmt(rep.mred) << ',' << fmt(rep.nmed)
     << ',' << rep.max_ed << ',' << fmt(ppa.delay_ps) << ',' << fmt(ppa.area_um2) << ',' << fmt(ppa.power_uw) << ','
     << fmt(ppa.pdp_fj) << '\n';
  const auto path = out_path(cfg, "eval.csv");
  write_text_file(path, os.str());
  const std::string summary = "eval width=" + std::to_string(cfg.width) + " mred=" + fmt(rep.mred) +
                              " nmed=" + fmt(rep.nmed) + " delay_ps=" + fmt(ppa.delay_ps) +
                              " area_um2=" + fmt(ppa.area_um2) + " power_uw=" + fmt(ppa.power_uw) +
                              " pdp_fj=" + fmt(ppa.pdp_fj);
  write_manifest(cfg, "eval", {path}, summary);
  return {summary, 0};
}

}  // namespace acco
