#include "rtdlab/features.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "propagator.hpp"
#include "rtdlab/error.hpp"
#include "rtdlab/parallel.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::features {

const std::array<std::string_view, kNumFeatures> kFeatureNames = {
    "nvarsOrig",
    "nclausesOrig",
    "nvars",
    "nclauses",
    "VCG-CLAUSE-mean",
    "VCG-CLAUSE-min",
    "VCG-CLAUSE-max",
    "VCG-VAR-mean",
    "VCG-VAR-min",
    "VCG-VAR-max",
    "HORNY-VAR-mean",
    "HORNY-VAR-min",
    "VG-mean",
    "VG-min",
    "VG-max",
    "CG-mean",
    "CG-max",
    "CG-featuretime",
    "saps_BestSolution_Mean",
    "saps_BestSolution_CoeffVariance",
    "saps_FirstLocalMinStep_Mean",
    "saps_FirstLocalMinStep_CoeffVariance",
    "saps_FirstLocalMinStep_Median",
    "saps_FirstLocalMinStep_Q.10",
    "saps_FirstLocalMinStep_Q.90",
    "saps_BestAvgImprovement_Mean",
    "gsat_BestSolution_Mean",
    "gsat_FirstLocalMinStep_Mean",
    "gsat_FirstLocalMinStep_CoeffVariance",
    "gsat_FirstLocalMinStep_Median",
    "gsat_FirstLocalMinStep_Q.10",
    "gsat_FirstLocalMinStep_Q.90",
    "gsat_BestAvgImprovement_Mean",
    "lobjois-mean-depth-over-vars",
};

std::optional<std::size_t> feature_index(std::string_view name) {
  const auto it = std::find(kFeatureNames.begin(), kFeatureNames.end(), name);
  if (it == kFeatureNames.end()) return std::nullopt;
  return static_cast<std::size_t>(it - kFeatureNames.begin());
}

namespace {

std::size_t require_index(std::string_view name) {
  const auto idx = feature_index(name);
  if (!idx) throw DataError("unknown feature '" + std::string(name) + "'");
  return *idx;
}

struct Summary {
  double mean = 0.0, min = 0.0, max = 0.0;
};

template <class T>
Summary summarize(const std::vector<T>& xs) {
  if (xs.empty()) return {};
  Summary s;
  s.min = static_cast<double>(*std::min_element(xs.begin(), xs.end()));
  s.max = static_cast<double>(*std::max_element(xs.begin(), xs.end()));
  double total = 0.0;
  for (const auto x : xs) total += static_cast<double>(x);
  s.mean = total / static_cast<double>(xs.size());
  return s;
}

double mean_of(const std::vector<double>& xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

double coeff_variation(const std::vector<double>& xs) {
  const double m = mean_of(xs);
  if (xs.empty() || m == 0.0) return 0.0;
  double ss = 0.0;
  for (const double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size())) / m;
}

// Linear interpolation between order statistics.
double quantile_of(std::vector<double> xs, double q) {
  if (xs.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  const double pos = q * static_cast<double>(xs.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, xs.size() - 1);
  return xs[lo] + (pos - static_cast<double>(lo)) * (xs[hi] - xs[lo]);
}

std::vector<std::vector<std::uint32_t>> occurrence_lists(const cnf::Formula& f) {
  std::vector<std::vector<std::uint32_t>> occ(2 * static_cast<std::size_t>(f.num_vars));
  for (std::size_t c = 0; c < f.clauses.size(); ++c) {
    for (const auto lit : f.clauses[c].literals) occ[lit.code()].push_back(static_cast<std::uint32_t>(c));
  }
  return occ;
}

void graph_features(const cnf::Formula& f, const FeatureOptions& options, std::uint64_t seed, FeatureVector& out,
                    std::size_t& cg_nodes) {
  const auto n = f.num_vars;
  const auto occ = occurrence_lists(f);

  std::vector<std::size_t> clause_degree;
  clause_degree.reserve(f.clauses.size());
  for (const auto& c : f.clauses) clause_degree.push_back(c.size());
  const auto vcg_clause = summarize(clause_degree);

  std::vector<std::size_t> var_degree(n, 0), horn_degree(n, 0), vg_degree(n, 0);
  for (const auto& c : f.clauses) {
    const bool horn = c.is_horn();
    // A tautology mentions its variable twice but is one edge.
    std::vector<cnf::Var> vars;
    for (const auto lit : c.literals) vars.push_back(lit.variable);
    std::sort(vars.begin(), vars.end());
    vars.erase(std::unique(vars.begin(), vars.end()), vars.end());
    for (const auto v : vars) {
      ++var_degree[v - 1];
      if (horn) ++horn_degree[v - 1];
    }
  }

  std::vector<std::uint32_t> mark(n + 1, 0);
  std::uint32_t stamp = 0;
  for (cnf::Var v = 1; v <= n; ++v) {
    ++stamp;
    mark[v] = stamp;
    std::size_t degree = 0;
    for (const bool negated : {false, true}) {
      for (const auto c : occ[cnf::Literal{v, negated}.code()]) {
        for (const auto lit : f.clauses[c].literals) {
          if (mark[lit.variable] != stamp) {
            mark[lit.variable] = stamp;
            ++degree;
          }
        }
      }
    }
    vg_degree[v - 1] = degree;
  }

  // Clause graph: clauses are adjacent when they share a variable with
  // opposite signs. Large formulas use a seeded uniform sample of nodes.
  std::vector<std::uint32_t> nodes(f.clauses.size());
  std::iota(nodes.begin(), nodes.end(), 0U);
  if (nodes.size() > options.clause_graph_max_nodes) {
    Rng rng(substream_seed(seed, 0xC6));
    for (std::size_t i = 0; i < options.clause_graph_max_nodes; ++i) {
      const auto j = i + rng.below(nodes.size() - i);
      std::swap(nodes[i], nodes[j]);
    }
    nodes.resize(options.clause_graph_max_nodes);
    std::sort(nodes.begin(), nodes.end());
  }
  cg_nodes = nodes.size();
  std::vector<std::uint32_t> cmark(f.clauses.size(), 0);
  std::uint32_t cstamp = 0;
  std::vector<std::size_t> cg_degree;
  cg_degree.reserve(nodes.size());
  for (const auto c : nodes) {
    ++cstamp;
    cmark[c] = cstamp;
    std::size_t degree = 0;
    for (const auto lit : f.clauses[c].literals) {
      for (const auto d : occ[(~lit).code()]) {
        if (cmark[d] != cstamp) {
          cmark[d] = cstamp;
          ++degree;
        }
      }
    }
    cg_degree.push_back(degree);
  }

  const auto vcg_var = summarize(var_degree);
  const auto horny = summarize(horn_degree);
  const auto vg = summarize(vg_degree);
  const auto cg = summarize(cg_degree);
  out.set("VCG-CLAUSE-mean", vcg_clause.mean);
  out.set("VCG-CLAUSE-min", vcg_clause.min);
  out.set("VCG-CLAUSE-max", vcg_clause.max);
  out.set("VCG-VAR-mean", vcg_var.mean);
  out.set("VCG-VAR-min", vcg_var.min);
  out.set("VCG-VAR-max", vcg_var.max);
  out.set("HORNY-VAR-mean", horny.mean);
  out.set("HORNY-VAR-min", horny.min);
  out.set("VG-mean", vg.mean);
  out.set("VG-min", vg.min);
  out.set("VG-max", vg.max);
  out.set("CG-mean", cg.mean);
  out.set("CG-max", cg.max);
}

// Random probing in the style of Lobjois: assign random free variables
// randomly, propagating units, until a conflict or a model; report the mean
// number of decisions divided by the variable count.
double lobjois_depth(const cnf::Formula& f, std::size_t probes, std::uint64_t seed) {
  if (f.num_vars == 0 || probes == 0) return 0.0;
  cnf::Propagator prop(f);
  if (!prop.propagate()) return 0.0;
  const auto root = prop.trail_size();
  double total = 0.0;
  for (std::size_t probe = 0; probe < probes; ++probe) {
    Rng rng(substream_seed(seed, probe));
    std::size_t depth = 0;
    while (!prop.conflict() && !prop.all_satisfied()) {
      const auto free = prop.active_variables();
      if (free.empty()) break;
      const auto v = free[rng.below(free.size())];
      ++depth;
      prop.assign(cnf::Literal{v, rng.coin()});
    }
    total += static_cast<double>(depth);
    prop.backtrack(root);
  }
  return total / static_cast<double>(probes) / static_cast<double>(f.num_vars);
}

void probe_features(const cnf::Formula& f, const probsat::SolverConfig& base, std::string_view prefix,
                    std::uint64_t profile_seed, std::uint64_t budget, const FeatureOptions& options,
                    FeatureVector& out) {
  const std::size_t runs = options.probes_per_profile;
  std::vector<probsat::ProbeTrace> traces(runs);
  parallel_for(runs, options.workers, [&](std::size_t r) {
    probsat::SolverConfig cfg = base;
    cfg.seed = substream_seed(profile_seed, r);
    traces[r] = probsat::probe_run(f, cfg, budget);
  });

  std::vector<double> best, first_min, improvement;
  for (const auto& t : traces) {
    best.push_back(static_cast<double>(t.best_solution_unsat));
    first_min.push_back(static_cast<double>(t.first_local_min_step));
    const double gained = static_cast<double>(t.initial_unsat) - static_cast<double>(t.best_solution_unsat);
    improvement.push_back(gained / static_cast<double>(std::max<std::uint64_t>(t.best_step, 1)));
  }

  const std::string p(prefix);
  out.set(p + "_BestSolution_Mean", mean_of(best));
  if (feature_index(p + "_BestSolution_CoeffVariance")) out.set(p + "_BestSolution_CoeffVariance", coeff_variation(best));
  out.set(p + "_FirstLocalMinStep_Mean", mean_of(first_min));
  out.set(p + "_FirstLocalMinStep_CoeffVariance", coeff_variation(first_min));
  out.set(p + "_FirstLocalMinStep_Median", quantile_of(first_min, 0.5));
  out.set(p + "_FirstLocalMinStep_Q.10", quantile_of(first_min, 0.1));
  out.set(p + "_FirstLocalMinStep_Q.90", quantile_of(first_min, 0.9));
  out.set(p + "_BestAvgImprovement_Mean", mean_of(improvement));
}

}  // namespace

double FeatureVector::get(std::string_view name) const { return values[require_index(name)]; }

void FeatureVector::set(std::string_view name, double value) { values[require_index(name)] = value; }

FeatureReport extract_features(const cnf::Formula& f, const probsat::SolverConfig& probe_cfg,
                               std::uint64_t probe_budget, const FeatureOptions& options) {
  probe_cfg.validate();
  if (probe_budget < 1) throw DataError("extract_features: probe budget must be at least 1");
  const auto started = std::chrono::steady_clock::now();

  FeatureReport report;
  auto& out = report.features;
  out.set("nvarsOrig", f.num_vars);
  out.set("nclausesOrig", static_cast<double>(f.clauses.size()));
  const auto simplified = cnf::simplify(f);
  out.set("nvars", simplified.remaining_vars);
  out.set("nclauses", static_cast<double>(simplified.conflict ? 0 : simplified.formula.clauses.size()));

  graph_features(f, options, probe_cfg.seed, out, report.clause_graph_nodes);

  probsat::SolverConfig greedy = probe_cfg;
  greedy.cb = probe_cfg.cb * options.greedy_cb_factor;
  probe_features(f, probe_cfg, "saps", substream_seed(probe_cfg.seed, 1), probe_budget, options, out);
  probe_features(f, greedy, "gsat", substream_seed(probe_cfg.seed, 2), probe_budget, options, out);

  out.set("lobjois-mean-depth-over-vars", lobjois_depth(f, options.lobjois_probes, substream_seed(probe_cfg.seed, 3)));

  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - started;
  out.set(kTimingFeature, elapsed.count());
  return report;
}

NormalizationSpec fit_normalization(std::span<const FeatureVector> corpus) {
  if (corpus.empty()) throw DataError("fit_normalization: empty corpus");
  NormalizationSpec spec;
  spec.min = corpus.front().values;
  spec.max = corpus.front().values;
  for (const auto& v : corpus) {
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      spec.min[i] = std::min(spec.min[i], v.values[i]);
      spec.max[i] = std::max(spec.max[i], v.values[i]);
    }
  }
  return spec;
}

FeatureVector apply_normalization(const NormalizationSpec& spec, const FeatureVector& v) {
  FeatureVector out;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    const double range = spec.max[i] - spec.min[i];
    out.values[i] = range > 0 ? std::clamp((v.values[i] - spec.min[i]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

std::vector<std::string> default_handpicked() {
  return {"nvarsOrig", "nclausesOrig", "VCG-VAR-mean", "lobjois-mean-depth-over-vars"};
}

std::vector<std::string> select_by_variance(std::span<const FeatureVector> normalized, double threshold,
                                            std::span<const std::string> handpicked,
                                            std::span<const std::string> excluded) {
  if (normalized.empty()) throw DataError("select_by_variance: empty corpus");
  std::array<bool, kNumFeatures> keep{};
  for (const auto& name : handpicked) keep[require_index(name)] = true;

  const double n = static_cast<double>(normalized.size());
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    double mean = 0.0;
    for (const auto& v : normalized) mean += v.values[i];
    mean /= n;
    double var = 0.0;
    for (const auto& v : normalized) var += (v.values[i] - mean) * (v.values[i] - mean);
    var /= n;
    if (var > threshold) keep[i] = true;
  }
  for (const auto& name : excluded) keep[require_index(name)] = false;

  std::vector<std::string> names;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (keep[i]) names.emplace_back(kFeatureNames[i]);
  }
  return names;
}

std::vector<double> project(const FeatureVector& v, std::span<const std::string> names) {
  std::vector<double> out;
  out.reserve(names.size());
  for (const auto& name : names) out.push_back(v.get(name));
  return out;
}

}  // namespace rtdlab::features
