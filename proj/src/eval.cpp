#include "rtdlab/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/students_t.hpp>

#include "rtdlab/error.hpp"
#include "rtdlab/parallel.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::eval {

double speedup(double baseline_mean, double candidate_mean) {
  if (!(baseline_mean > 0) || !(candidate_mean > 0)) throw DataError("speedup: means must be positive");
  return baseline_mean / candidate_mean;
}

double geometric_mean(std::span<const double> values) {
  if (values.empty()) throw DataError("geometric_mean: empty list");
  double log_sum = 0.0;
  for (const double v : values) {
    if (!(v > 0)) throw DataError("geometric_mean: entries must be positive");
    log_sum += std::log(v);
  }
  return std::exp(log_sum / static_cast<double>(values.size()));
}

TestResult paired_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw DataError("paired_t_test: need two equal-length samples of size >= 2");
  const auto n = x.size();
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) throw DataError("paired_t_test: means must be positive");
    d[i] = std::log(x[i]) - std::log(y[i]);
  }
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (const double v : d) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(n - 1));
  if (sd == 0.0) {
    if (mean == 0.0) return {0.0, 1.0};
    return {std::copysign(std::numeric_limits<double>::infinity(), mean), kPValueFloor};
  }
  const double t = mean / (sd / std::sqrt(static_cast<double>(n)));
  const boost::math::students_t dist(static_cast<double>(n - 1));
  const double p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  return {t, std::clamp(p, kPValueFloor, 1.0)};
}

WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DataError("wilcoxon: samples differ in length");
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] != y[i]) d.push_back(x[i] - y[i]);
  }
  if (d.empty()) throw DataError("wilcoxon: all differences are zero");
  if (d.size() < kWilcoxonMinPairs) throw DataError("wilcoxon: fewer than five nonzero differences");
  const auto n = d.size();

  // Doubled average ranks are integers, which keeps the exact null
  // distribution on an integer lattice.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<long> rank2(n);
  double tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[order[j + 1]]) == std::abs(d[order[i]])) ++j;
    const long doubled = static_cast<long>(i + 1 + j + 1);  // 2 * average of ranks i+1..j+1
    for (std::size_t k = i; k <= j; ++k) rank2[order[k]] = doubled;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }

  WilcoxonResult r;
  r.n = n;
  long w2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w2 += rank2[i];
  }
  r.w_plus = static_cast<double>(w2) / 2.0;

  if (n <= kWilcoxonExactMax) {
    const long total = static_cast<long>(n * (n + 1));
    std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
    count[0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (long s = total; s >= rank2[i]; --s) count[s] += count[s - rank2[i]];
    }
    double below = 0.0, above = 0.0;
    for (long s = 0; s <= total; ++s) {
      if (s <= w2) below += count[s];
      if (s >= w2) above += count[s];
    }
    const double patterns = std::ldexp(1.0, static_cast<int>(n));
    r.p_value = std::min(1.0, 2.0 * std::min(below, above) / patterns);
    r.exact = true;
    return r;
  }

  const double nn = static_cast<double>(n);
  const double mean = nn * (nn + 1) / 4.0;
  const double var = nn * (nn + 1) * (2 * nn + 1) / 24.0 - tie_term / 48.0;
  const double z = std::max(0.0, std::abs(r.w_plus - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::min(1.0, std::erfc(z / std::sqrt(2.0)));
  return r;
}

std::optional<double> fitted_speedup(const InstanceFits& inst, dist::Family family) {
  const auto rec = dist::optimal_restart_time(family, inst.fits.fit(family).params);
  const double base = rtd::empirical_mean(inst.sample);
  if (!rec.restart_at) return 1.0;
  const auto restarted = rtd::empirical_runtime_under_cutoff(inst.sample, rec.restart_at->t);
  if (!restarted) return std::nullopt;
  return speedup(base, *restarted);
}

std::string subset_label(std::span<const dist::Family> subset) {
  std::string s = "{";
  for (std::size_t i = 0; i < subset.size(); ++i) {
    if (i) s += ",";
    switch (subset[i]) {
      case dist::Family::Lognormal:
        s += "L";
        break;
      case dist::Family::Weibull:
        s += "W";
        break;
      case dist::Family::GP:
        s += "GP";
        break;
    }
  }
  return s + "}";
}

SubsetTable subset_speedup_table(std::span<const InstanceFits> instances) {
  constexpr std::array<dist::Family, 3> order = {dist::Family::Lognormal, dist::Family::Weibull, dist::Family::GP};
  SubsetTable table;
  struct Scored {
    const InstanceFits* inst;
    std::array<double, 3> speedup;  // indexed like `order`
    double baseline;
  };
  std::vector<Scored> kept;
  for (const auto& inst : instances) {
    if (!inst.fits.winner) {
      table.excluded_no_winner.push_back(inst.instance_id);
      continue;
    }
    Scored s{&inst, {}, 0.0};
    bool below = false;
    for (std::size_t f = 0; f < order.size(); ++f) {
      const auto v = fitted_speedup(inst, order[f]);
      if (!v) {
        below = true;
        break;
      }
      s.speedup[f] = *v;
    }
    if (below) {
      table.excluded_below_sample.push_back(inst.instance_id);
      continue;
    }
    s.baseline = speedup(rtd::empirical_mean(inst.sample), rtd::empirical_optimal(inst.sample).e_hat);
    kept.push_back(s);
    table.included.push_back(inst.instance_id);
  }
  if (kept.empty()) throw DataError("subset_speedup_table: no instance left after exclusions");

  std::vector<double> base;
  for (const auto& s : kept) base.push_back(s.baseline);
  const double base_gm = geometric_mean(base);
  table.rows.push_back({{}, "{}", base_gm, base_gm});

  for (unsigned mask = 1; mask < 8; ++mask) {
    SubsetRow row;
    for (std::size_t f = 0; f < 3; ++f) {
      if (mask & (1U << f)) row.subset.push_back(order[f]);
    }
    row.label = subset_label(row.subset);
    std::vector<double> ks, best;
    for (const auto& s : kept) {
      std::size_t ks_pick = 3, best_pick = 3;
      for (std::size_t f = 0; f < 3; ++f) {
        if (!(mask & (1U << f))) continue;
        const double p = s.inst->fits.fit(order[f]).p_value;
        if (ks_pick == 3 || p > s.inst->fits.fit(order[ks_pick]).p_value) ks_pick = f;
        if (best_pick == 3 || s.speedup[f] > s.speedup[best_pick]) best_pick = f;
      }
      ks.push_back(s.speedup[ks_pick]);
      best.push_back(s.speedup[best_pick]);
    }
    row.ks_best = geometric_mean(ks);
    row.speedup_best = geometric_mean(best);
    table.rows.push_back(std::move(row));
  }
  return table;
}

std::uint64_t h2h_run_seed(std::uint64_t master_seed, std::size_t instance, std::uint64_t run) {
  return substream_seed(substream_seed(master_seed, instance), run);
}

namespace {

void check_h2h(std::span<const H2HInstance> instances, std::span<const std::string> columns,
               const H2HOptions& options) {
  if (instances.empty()) throw DataError("head_to_head: no instances");
  if (columns.size() < 2) throw DataError("head_to_head: need at least two policies");
  if (options.runs_per_instance < 1 || options.budget < 1) throw DataError("head_to_head: empty run budget");
  for (const auto& inst : instances) {
    if (inst.policies.size() != columns.size()) {
      throw DataError("head_to_head: instance '" + inst.instance_id + "' has the wrong number of policies");
    }
  }
}

restart::RestartedRunOutcome one_run(const H2HInstance& inst, std::size_t i, std::size_t p, std::uint64_t r,
                                     const H2HOptions& options) {
  auto cfg = options.solver;
  cfg.seed = h2h_run_seed(options.master_seed, i, r);
  auto outcome = restart::run_with_policy(inst.formula, cfg, inst.policies[p], options.budget);
  outcome.per_try_flips.clear();
  return outcome;
}

H2HResult aggregate(std::span<const H2HInstance> instances, std::span<const std::string> columns,
                    const H2HOptions& options, const std::vector<restart::RestartedRunOutcome>& runs) {
  H2HResult result;
  result.columns.assign(columns.begin(), columns.end());
  const auto runs_per = options.runs_per_instance;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    H2HRow row;
    row.instance_id = instances[i].instance_id;
    for (std::size_t p = 0; p < columns.size(); ++p) {
      row.policies.push_back(restart::to_string(instances[i].policies[p]));
      H2HCell cell;
      double total = 0.0;
      for (std::uint64_t r = 0; r < runs_per; ++r) {
        const auto& o = runs[(i * columns.size() + p) * runs_per + r];
        total += static_cast<double>(o.total_flips);
        if (!o.solved) ++cell.timeouts;
      }
      cell.mean_flips = total / static_cast<double>(runs_per);
      if (cell.timeouts == runs_per) row.excluded = true;
      row.cells.push_back(cell);
    }
    result.rows.push_back(std::move(row));
  }
  return result;
}

}  // namespace

H2HResult head_to_head(std::span<const H2HInstance> instances, std::span<const std::string> columns,
                       const H2HOptions& options) {
  check_h2h(instances, columns, options);
  const auto runs_per = options.runs_per_instance;
  const std::size_t total = instances.size() * columns.size() * runs_per;
  std::vector<restart::RestartedRunOutcome> runs(total);
  parallel_for(total, options.workers, [&](std::size_t k) {
    const auto r = k % runs_per;
    const auto p = (k / runs_per) % columns.size();
    const auto i = k / runs_per / columns.size();
    runs[k] = one_run(instances[i], i, p, r, options);
  });
  return aggregate(instances, columns, options, runs);
}

H2HResult head_to_head_serial(std::span<const H2HInstance> instances, std::span<const std::string> columns,
                              const H2HOptions& options) {
  check_h2h(instances, columns, options);
  std::vector<restart::RestartedRunOutcome> runs;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (std::size_t p = 0; p < columns.size(); ++p) {
      for (std::uint64_t r = 0; r < options.runs_per_instance; ++r) {
        runs.push_back(one_run(instances[i], i, p, r, options));
      }
    }
  }
  return aggregate(instances, columns, options, runs);
}

namespace {

Comparison compare_rows(const H2HResult& r, std::size_t baseline, std::size_t candidate, bool restarting_only) {
  if (baseline >= r.columns.size() || candidate >= r.columns.size()) throw DataError("compare: column out of range");
  Comparison c;
  c.baseline = r.columns[baseline];
  c.candidate = r.columns[candidate];
  std::vector<double> cand, base, log_cand, log_base;
  for (const auto& row : r.rows) {
    if (row.excluded) continue;
    const bool restarts = row.policies[candidate] != "none";
    if (restarting_only && !restarts) continue;
    ++(restarts ? c.restart_predicted : c.no_restart_predicted);
    const double b = row.cells[baseline].mean_flips;
    const double k = row.cells[candidate].mean_flips;
    c.records.push_back({row.instance_id, b, k, speedup(b, k)});
    base.push_back(b);
    cand.push_back(k);
    log_base.push_back(std::log(b));
    log_cand.push_back(std::log(k));
  }
  if (c.records.empty()) return c;
  std::vector<double> s;
  for (const auto& rec : c.records) s.push_back(rec.speedup);
  c.geometric_mean = geometric_mean(s);
  if (c.records.size() >= 2) c.t_test = paired_t_test(cand, base);
  std::size_t nonzero = 0;
  for (std::size_t i = 0; i < log_cand.size(); ++i) nonzero += log_cand[i] != log_base[i];
  if (nonzero >= kWilcoxonMinPairs) c.wilcoxon = wilcoxon_signed_rank(log_cand, log_base);
  return c;
}

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

}  // namespace

Comparison compare(const H2HResult& r, std::size_t baseline, std::size_t candidate) {
  return compare_rows(r, baseline, candidate, false);
}

Comparison compare_restarting(const H2HResult& r, std::size_t baseline, std::size_t candidate) {
  return compare_rows(r, baseline, candidate, true);
}

std::string scatter_csv(const H2HResult& r, std::size_t a, std::size_t b) {
  std::string out = "instance_id,log_mean_" + r.columns.at(a) + ",log_mean_" + r.columns.at(b) + "\n";
  for (const auto& row : r.rows) {
    if (row.excluded) continue;
    out += row.instance_id + "," + format_double(std::log(row.cells[a].mean_flips)) + "," +
           format_double(std::log(row.cells[b].mean_flips)) + "\n";
  }
  return out;
}

}  // namespace rtdlab::eval
