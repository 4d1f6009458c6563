// rtdlab: staged experiment runner. Every stage reads the previous stages'
// documents from the --out workspace and writes one document per instance.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rtdlab/cnf.hpp"
#include "rtdlab/dist.hpp"
#include "rtdlab/error.hpp"
#include "rtdlab/eval.hpp"
#include "rtdlab/features.hpp"
#include "rtdlab/io.hpp"
#include "rtdlab/parallel.hpp"
#include "rtdlab/pipeline.hpp"
#include "rtdlab/restart.hpp"
#include "rtdlab/rng.hpp"
#include "rtdlab/rtd.hpp"

namespace fs = std::filesystem;
using namespace rtdlab;
using io::json;

namespace {

// Per-instance seed streams hang off the instance seed.
enum Stream : std::uint64_t { kFormula = 0, kSampling = 1, kProbing = 2, kTraining = 3, kEvaluation = 4 };

struct ExperimentConfig {
  std::uint64_t seed = 1;
  cnf::Var vars_min = 150, vars_max = 150;
  double ratio_min = 4.26, ratio_max = 4.26;
  std::size_t count = 10;
  std::uint64_t dpll_budget = 5'000'000;
  double cb = 2.3;
  std::uint64_t runs = 100;
  std::uint64_t timeout = 10'000'000;
  double alpha = rtd::kDefaultAlpha;
  std::uint64_t probe_budget = 2000;
  std::size_t trees = ml::kDefaultTrees;
  std::size_t max_epochs = 2000;
  std::size_t patience = 100;
  std::vector<std::string> policies = {"none", "luby:20n", "predicted"};
  std::uint64_t budget = 10'000'000;
  std::uint64_t eval_runs = 100;
};

// The worker count is deliberately absent: it never changes results.
json to_json(const ExperimentConfig& c) {
  return {{"seed", c.seed},           {"vars_min", c.vars_min},       {"vars_max", c.vars_max},
          {"ratio_min", c.ratio_min}, {"ratio_max", c.ratio_max},     {"count", c.count},
          {"dpll_budget", c.dpll_budget}, {"cb", c.cb},               {"runs", c.runs},
          {"timeout", c.timeout},     {"alpha", c.alpha},             {"probe_budget", c.probe_budget},
          {"trees", c.trees},         {"max_epochs", c.max_epochs},   {"patience", c.patience},
          {"policies", c.policies},   {"budget", c.budget},           {"eval_runs", c.eval_runs}};
}

template <class T>
void take(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void merge_config(const json& j, ExperimentConfig& c) {
  try {
    take(j, "seed", c.seed);
    take(j, "vars_min", c.vars_min);
    take(j, "vars_max", c.vars_max);
    take(j, "ratio_min", c.ratio_min);
    take(j, "ratio_max", c.ratio_max);
    take(j, "count", c.count);
    take(j, "dpll_budget", c.dpll_budget);
    take(j, "cb", c.cb);
    take(j, "runs", c.runs);
    take(j, "timeout", c.timeout);
    take(j, "alpha", c.alpha);
    take(j, "probe_budget", c.probe_budget);
    take(j, "trees", c.trees);
    take(j, "max_epochs", c.max_epochs);
    take(j, "patience", c.patience);
    take(j, "policies", c.policies);
    take(j, "budget", c.budget);
    take(j, "eval_runs", c.eval_runs);
  } catch (const json::exception& e) {
    throw DataError(std::string("config: ") + e.what());
  }
}

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Context {
  ExperimentConfig config;
  fs::path out;
  int workers = 1;

  [[nodiscard]] probsat::SolverConfig solver() const {
    probsat::SolverConfig s;
    s.cb = config.cb;
    s.max_flips = config.timeout;
    return s;
  }

  [[nodiscard]] json stamp(json body) const {
    body["config"] = to_json(config);
    return body;
  }

  void write(const fs::path& rel, std::string_view kind, json body) const {
    io::write_document(out / rel, io::document(kind, stamp(std::move(body))));
  }
};

struct ManifestEntry {
  std::string id;
  std::string file;
  std::uint64_t instance_seed = 0;
};

std::vector<ManifestEntry> read_manifest(const fs::path& path, std::string_view kind, const char* list) {
  const auto doc = io::read_document(path, kind);
  std::vector<ManifestEntry> out;
  try {
    for (const auto& e : doc.at(list)) {
      out.push_back({e.at("id").get<std::string>(), e.at("file").get<std::string>(),
                     e.at("instance_seed").get<std::uint64_t>()});
    }
  } catch (const json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
  return out;
}

json manifest_entry(const ManifestEntry& e) {
  return {{"id", e.id}, {"file", e.file}, {"instance_seed", e.instance_seed}};
}

std::vector<ManifestEntry> satisfiable(const Context& ctx) {
  return read_manifest(ctx.out / "filter.json", "filter", "satisfiable");
}

std::vector<ManifestEntry> fitted(const Context& ctx) { return read_manifest(ctx.out / "fit.json", "fit-manifest", "fitted"); }

cnf::Formula load_formula(const Context& ctx, const ManifestEntry& e) {
  return cnf::parse_dimacs(io::read_text(ctx.out / e.file));
}

fs::path per_instance(const char* dir, const std::string& id, const char* ext = ".json") {
  return fs::path(dir) / (id + ext);
}

// ---- stages ----

void generate(const Context& ctx) {
  const auto& c = ctx.config;
  if (c.vars_min < 3 || c.vars_max < c.vars_min) throw UsageError("need 3 <= vars-min <= vars-max");
  if (!(c.ratio_min > 0) || c.ratio_max < c.ratio_min) throw UsageError("need 0 < ratio-min <= ratio-max");
  json entries = json::array();
  for (std::size_t i = 0; i < c.count; ++i) {
    const std::uint64_t inst_seed = substream_seed(c.seed, i);
    Rng rng(inst_seed);
    const auto n = static_cast<cnf::Var>(c.vars_min + rng.below(c.vars_max - c.vars_min + 1));
    const double ratio = c.ratio_min + (c.ratio_max - c.ratio_min) * rng.uniform();
    auto f = cnf::generate_random_3sat(n, ratio, substream_seed(inst_seed, kFormula));
    char id[32];
    std::snprintf(id, sizeof id, "inst_%04zu", i);
    f.metadata.instance_id = id;
    const auto file = per_instance("instances", id, ".cnf");
    io::write_atomic(ctx.out / file, cnf::write_dimacs(f));
    auto e = manifest_entry({id, file.string(), inst_seed});
    e["vars"] = n;
    e["clauses"] = f.clauses.size();
    e["ratio"] = ratio;
    entries.push_back(std::move(e));
  }
  ctx.write("generate.json", "generate", {{"instances", entries}});
}

void filter(const Context& ctx) {
  const auto all = read_manifest(ctx.out / "generate.json", "generate", "instances");
  json verdicts = json::array(), sat = json::array();
  for (const auto& e : all) {
    const auto v = cnf::dpll_satisfiable(load_formula(ctx, e), ctx.config.dpll_budget);
    verdicts.push_back({{"id", e.id}, {"verdict", cnf::to_string(v.kind)}, {"decisions", v.decisions}});
    if (v.kind == cnf::SatVerdict::Kind::Satisfiable) sat.push_back(manifest_entry(e));
  }
  ctx.write("filter.json", "filter", {{"method", "dpll"}, {"verdicts", verdicts}, {"satisfiable", sat}});
}

void sample(const Context& ctx) {
  for (const auto& e : satisfiable(ctx)) {
    const auto seed = substream_seed(e.instance_seed, kSampling);
    auto s = rtd::sample_rtd(load_formula(ctx, e), ctx.solver(), ctx.config.runs, seed, ctx.config.timeout,
                             ctx.workers);
    s.instance_id = e.id;
    ctx.write(per_instance("samples", e.id), "sample", io::to_json(s));
  }
}

rtd::RtdSample load_sample(const Context& ctx, const std::string& id) {
  return io::sample_from_json(io::read_document(ctx.out / per_instance("samples", id), "sample"));
}

std::string ecdf_overlay(const rtd::RtdSample& s, const rtd::WinnerSelection& sel) {
  std::string out = "x,ecdf,fitted_cdf_weibull,fitted_cdf_lognormal,fitted_cdf_gp\n";
  char buf[160];
  for (const auto& [x, level] : rtd::ecdf(s)) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g", x, level);
    out += buf;
    for (const auto& f : sel.fits) {
      std::snprintf(buf, sizeof buf, ",%.17g", dist::cdf(f.family, f.params, x));
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void fit(const Context& ctx) {
  json ok = json::array(), skipped = json::array();
  for (const auto& e : satisfiable(ctx)) {
    const auto s = load_sample(ctx, e.id);
    rtd::WinnerSelection sel;
    try {
      sel = rtd::fit_all(s, ctx.config.alpha);
    } catch (const DataError& err) {
      std::cerr << e.id << ": not fitted: " << err.what() << '\n';
      skipped.push_back({{"id", e.id}, {"reason", err.what()}});
      continue;
    }
    const auto opt = rtd::empirical_optimal(s);
    auto body = io::to_json(sel);
    body["instance_id"] = e.id;
    body["master_seed"] = s.master_seed;
    body["empirical_optimum"] = {{"x_star", opt.x_star}, {"e_hat", opt.e_hat}};
    body["empirical_mean"] = rtd::empirical_mean(s);
    ctx.write(per_instance("fits", e.id), "fit", body);
    io::write_atomic(ctx.out / per_instance("fits", e.id, ".ecdf.csv"), ecdf_overlay(s, sel));
    ok.push_back(manifest_entry(e));
  }
  ctx.write("fit.json", "fit-manifest", {{"fitted", ok}, {"skipped", skipped}});
}

rtd::WinnerSelection load_fits(const Context& ctx, const std::string& id) {
  return io::selection_from_json(io::read_document(ctx.out / per_instance("fits", id), "fit"));
}

void restart_time(const Context& ctx) {
  for (const auto& e : fitted(ctx)) {
    const auto sel = load_fits(ctx, e.id);
    json recs = json::object();
    for (const auto& f : sel.fits) recs[dist::to_string(f.family)] = io::to_json(dist::optimal_restart_time(f.family, f.params));
    json body = {{"instance_id", e.id}, {"recommendations", recs}};
    body["winner"] = sel.winner ? json(dist::to_string(*sel.winner)) : json(nullptr);
    ctx.write(per_instance("restart", e.id), "restart-time", body);
  }
}

void extract(const Context& ctx) {
  features::FeatureOptions fo;
  fo.workers = ctx.workers;
  for (const auto& e : satisfiable(ctx)) {
    auto probe = ctx.solver();
    probe.seed = substream_seed(e.instance_seed, kProbing);
    const auto report = features::extract_features(load_formula(ctx, e), probe, ctx.config.probe_budget, fo);
    json body = {{"instance_id", e.id},
                 {"probe_seed", probe.seed},
                 {"clause_graph_nodes", report.clause_graph_nodes},
                 {"features", io::to_json(report.features)}};
    ctx.write(per_instance("features", e.id), "features", body);
  }
}

features::FeatureVector load_features(const Context& ctx, const std::string& id) {
  const auto doc = io::read_document(ctx.out / per_instance("features", id), "features");
  return io::features_from_json(doc.at("features"));
}

pipeline::PipelineOptions pipeline_options(const Context& ctx) {
  pipeline::PipelineOptions o;
  o.n_trees = ctx.config.trees;
  o.train.max_epochs = ctx.config.max_epochs;
  o.train.patience = ctx.config.patience;
  o.workers = ctx.workers;
  return o;
}

void train(const Context& ctx) {
  std::vector<pipeline::InstanceData> data;
  for (const auto& e : fitted(ctx)) {
    data.push_back({e.id, load_features(ctx, e.id), load_sample(ctx, e.id), load_fits(ctx, e.id)});
  }
  const auto seed = substream_seed(ctx.config.seed, kTraining);
  const auto m = pipeline::train_pipeline(data, pipeline_options(ctx), seed);
  json body = io::to_json(m);
  body["training_seed"] = seed;
  body["instances"] = data.size();
  ctx.write("model.json", "model", body);
}

pipeline::PipelineModel load_model(const Context& ctx) {
  return io::pipeline_from_json(io::read_document(ctx.out / "model.json", "model"));
}

void predict(const Context& ctx) {
  const auto m = load_model(ctx);
  for (const auto& e : satisfiable(ctx)) {
    const auto p = pipeline::pipeline_predict(m, load_features(ctx, e.id));
    json body = io::to_json(p);
    body["instance_id"] = e.id;
    ctx.write(per_instance("predictions", e.id), "prediction", body);
  }
}

std::string file_safe(std::string s) {
  for (auto& ch : s) {
    if (ch == ':' || ch == '/') ch = '-';
  }
  return s;
}

void evaluate(const Context& ctx) {
  const auto& policies = ctx.config.policies;
  if (policies.size() < 2) throw UsageError("evaluate needs at least two policies");
  std::vector<eval::H2HInstance> instances;
  for (const auto& e : satisfiable(ctx)) {
    eval::H2HInstance inst{e.id, load_formula(ctx, e), {}};
    for (const auto& text : policies) {
      if (text == "predicted") {
        const auto doc = io::read_document(ctx.out / per_instance("predictions", e.id), "prediction");
        inst.policies.push_back(pipeline::to_policy(io::prediction_from_json(doc)));
      } else {
        inst.policies.push_back(restart::parse_policy(text, inst.formula.num_vars));
      }
    }
    instances.push_back(std::move(inst));
  }
  eval::H2HOptions o;
  o.runs_per_instance = ctx.config.eval_runs;
  o.budget = ctx.config.budget;
  o.master_seed = substream_seed(ctx.config.seed, kEvaluation);
  o.solver = ctx.solver();
  o.workers = ctx.workers;
  const auto r = eval::head_to_head(instances, policies, o);

  json comparisons = json::array();
  for (std::size_t j = 1; j < policies.size(); ++j) {
    auto c = io::to_json(eval::compare(r, 0, j));
    const auto restarting = eval::compare_restarting(r, 0, j);
    if (restarting.records.size() >= 2) c["restarting_subset"] = io::to_json(restarting);
    comparisons.push_back(std::move(c));
    io::write_atomic(ctx.out / ("scatter_" + file_safe(policies[0]) + "_vs_" + file_safe(policies[j]) + ".csv"),
                     eval::scatter_csv(r, 0, j));
  }
  ctx.write("evaluate.json", "evaluate",
            {{"master_seed", o.master_seed}, {"head_to_head", io::to_json(r)}, {"comparisons", comparisons}});
}

void report(const Context& ctx) {
  std::vector<eval::InstanceFits> all;
  std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // passed, won
  for (const auto& e : fitted(ctx)) {
    const auto sel = load_fits(ctx, e.id);
    for (const auto& f : sel.fits) {
      auto& t = tally[dist::to_string(f.family)];
      t.first += f.p_value >= sel.alpha;
      t.second += sel.winner == f.family;
    }
    all.push_back({e.id, load_sample(ctx, e.id), sel});
  }
  if (all.empty()) throw DataError("report: no fitted instances");
  std::string family_rows = "family,passed,won,instances\n";
  for (const auto family : {dist::Family::Lognormal, dist::Family::Weibull, dist::Family::GP}) {
    const auto& [passed, won] = tally[dist::to_string(family)];
    family_rows += dist::to_string(family) + "," + std::to_string(passed) + "," + std::to_string(won) + "," +
          std::to_string(all.size()) + "\n";
  }
  io::write_atomic(ctx.out / "families.csv", family_rows);

  const auto table = eval::subset_speedup_table(all);
  std::string subset_rows = "subset,ks_best,speedup_best,instances\n";
  char buf[160];
  for (const auto& row : table.rows) {
    std::snprintf(buf, sizeof buf, "\"%s\",%.17g,%.17g,%zu\n", row.label.c_str(), row.ks_best, row.speedup_best,
                  table.included.size());
    subset_rows += buf;
  }
  io::write_atomic(ctx.out / "subsets.csv", subset_rows);
  ctx.write("report.json", "report", {{"subset_table", io::to_json(table)}});
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Runtime-distribution lab for probSAT restarts"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::optional<std::uint64_t> seed;
  int workers = default_workers();
  std::string out = "rtdlab_out";
  app.add_option("--config", config_path, "JSON file with experiment settings")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--workers", workers, "OpenMP worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "workspace directory");

  // Flags mirror the config keys and override the config file.
  json overrides = json::object();
  std::map<std::string, std::string> raw;
  for (const char* key : {"vars-min", "vars-max", "ratio-min", "ratio-max", "count", "dpll-budget", "cb", "runs",
                          "timeout", "alpha", "probe-budget", "trees", "max-epochs", "patience", "budget",
                          "eval-runs"}) {
    app.add_option(std::string("--") + key, raw[key]);
  }
  std::string vars, ratio, policies;
  app.add_option("--vars", vars, "sets vars-min and vars-max");
  app.add_option("--ratio", ratio, "sets ratio-min and ratio-max");
  app.add_option("--policies", policies, "comma-separated, e.g. none,luby:20n,predicted");

  const std::map<std::string, void (*)(const Context&)> stages = {
      {"generate", generate}, {"filter", filter},   {"sample", sample},     {"fit", fit},
      {"restart-time", restart_time}, {"features", extract}, {"train", train}, {"predict", predict},
      {"evaluate", evaluate}, {"report", report}};
  for (const auto& [name, fn] : stages) app.add_subcommand(name);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    Context ctx;
    ctx.out = out;
    ctx.workers = workers;
    if (!config_path.empty()) merge_config(io::json::parse(io::read_text(config_path), nullptr, true, true), ctx.config);
    if (!vars.empty()) raw["vars-min"] = raw["vars-max"] = vars;
    if (!ratio.empty()) raw["ratio-min"] = raw["ratio-max"] = ratio;
    for (const auto& [key, value] : raw) {
      if (value.empty()) continue;
      std::string field = key;
      for (auto& ch : field) {
        if (ch == '-') ch = '_';
      }
      try {
        overrides[field] = json::parse(value);
      } catch (const json::exception&) {
        throw UsageError("--" + key + ": not a number: " + value);
      }
    }
    if (!policies.empty()) {
      std::vector<std::string> list;
      std::stringstream in(policies);
      for (std::string item; std::getline(in, item, ',');) list.push_back(item);
      overrides["policies"] = list;
    }
    merge_config(overrides, ctx.config);
    if (seed) ctx.config.seed = *seed;

    const auto* sub = app.get_subcommands().front();
    stages.at(sub->get_name())(ctx);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
