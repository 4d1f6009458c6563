#include "rtdlab/rtd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rtdlab/error.hpp"
#include "rtdlab/parallel.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::rtd {

std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run) { return substream_seed(master_seed, run); }

namespace {

RtdSample collect(const std::vector<probsat::RunOutcome>& outcomes, std::uint64_t master_seed,
                  std::uint64_t per_run_timeout) {
  RtdSample s;
  s.master_seed = master_seed;
  s.per_run_timeout = per_run_timeout;
  s.instance_id = {};
  for (const auto& o : outcomes) {
    if (o.solved) {
      s.flips.push_back(o.flips);
    } else {
      ++s.censored;
    }
  }
  std::sort(s.flips.begin(), s.flips.end());
  return s;
}

probsat::SolverConfig run_config(const probsat::SolverConfig& cfg, std::uint64_t master_seed, std::uint64_t run,
                                 std::uint64_t per_run_timeout) {
  probsat::SolverConfig c = cfg;
  c.seed = run_seed(master_seed, run);
  c.max_flips = per_run_timeout;
  return c;
}

void check_sampling_args(std::uint64_t n_runs, std::uint64_t per_run_timeout) {
  if (n_runs < 1) throw DataError("sample_rtd: need at least one run");
  if (per_run_timeout < 1) throw DataError("sample_rtd: per-run timeout must be at least 1");
}

}  // namespace

RtdSample sample_rtd(const cnf::Formula& f, const probsat::SolverConfig& cfg, std::uint64_t n_runs,
                     std::uint64_t master_seed, std::uint64_t per_run_timeout, int workers) {
  check_sampling_args(n_runs, per_run_timeout);
  std::vector<probsat::RunOutcome> outcomes(n_runs);
  parallel_for(n_runs, workers, [&](std::size_t run) {
    auto outcome = probsat::solve_once(f, run_config(cfg, master_seed, run, per_run_timeout));
    outcome.assignment.reset();
    outcomes[run] = std::move(outcome);
  });
  auto s = collect(outcomes, master_seed, per_run_timeout);
  if (f.metadata.instance_id) s.instance_id = *f.metadata.instance_id;
  return s;
}

RtdSample sample_rtd_serial(const cnf::Formula& f, const probsat::SolverConfig& cfg, std::uint64_t n_runs,
                            std::uint64_t master_seed, std::uint64_t per_run_timeout) {
  check_sampling_args(n_runs, per_run_timeout);
  std::vector<probsat::RunOutcome> outcomes;
  outcomes.reserve(n_runs);
  for (std::uint64_t run = 0; run < n_runs; ++run) {
    outcomes.push_back(probsat::solve_once(f, run_config(cfg, master_seed, run, per_run_timeout)));
  }
  auto s = collect(outcomes, master_seed, per_run_timeout);
  if (f.metadata.instance_id) s.instance_id = *f.metadata.instance_id;
  return s;
}

std::vector<std::pair<double, double>> ecdf(const RtdSample& s) {
  if (s.flips.empty()) throw DataError("ecdf: no successful runs");
  const double n = static_cast<double>(s.total_runs());
  std::vector<std::pair<double, double>> points;
  for (std::size_t i = 0; i < s.flips.size(); ++i) {
    const double x = static_cast<double>(s.flips[i]);
    const double level = static_cast<double>(i + 1) / n;
    if (!points.empty() && points.back().first == x) {
      points.back().second = level;
    } else {
      points.emplace_back(x, level);
    }
  }
  return points;
}

const dist::FitResult& WinnerSelection::fit(dist::Family family) const {
  for (const auto& f : fits) {
    if (f.family == family) return f;
  }
  throw DataError("winner selection: missing fit for " + dist::to_string(family));
}

std::optional<dist::Family> select_winner(const std::array<dist::FitResult, 3>& fits, double alpha) {
  std::optional<dist::Family> winner;
  double best = -1.0;
  for (const auto& f : fits) {
    if (f.p_value >= alpha && f.p_value > best) {
      best = f.p_value;
      winner = f.family;
    }
  }
  return winner;
}

WinnerSelection fit_all(const RtdSample& s, double alpha) {
  if (s.flips.size() < dist::kMinSamples) {
    throw DataError("fit_all: need at least 10 uncensored runs for '" + s.instance_id + "'");
  }
  const double censored_fraction = static_cast<double>(s.censored) / static_cast<double>(s.total_runs());
  if (censored_fraction > kMaxCensoredFraction) {
    throw DataError("fit_all: " + std::to_string(s.censored) + " of " + std::to_string(s.total_runs()) +
                    " runs censored for '" + s.instance_id + "'");
  }
  const auto x = s.runtimes();
  WinnerSelection w;
  w.alpha = alpha;
  for (std::size_t i = 0; i < dist::kAllFamilies.size(); ++i) w.fits[i] = dist::fit_and_test(dist::kAllFamilies[i], x);
  w.winner = select_winner(w.fits, alpha);
  return w;
}

double empirical_restart_runtime(const RtdSample& s, double x) {
  const auto end = std::upper_bound(s.flips.begin(), s.flips.end(), x,
                                    [](double v, std::uint64_t f) { return v < static_cast<double>(f); });
  const auto below = static_cast<double>(end - s.flips.begin());
  if (below == 0) return std::numeric_limits<double>::infinity();
  double sum = 0.0;
  for (auto it = s.flips.begin(); it != end; ++it) sum += static_cast<double>(*it);
  const double p = below / static_cast<double>(s.total_runs());
  return (1.0 - p) / p * x + sum / below;
}

EmpiricalOptimum empirical_optimal(const RtdSample& s) {
  if (s.flips.empty()) throw DataError("empirical_optimal: no successful runs");
  const double n = static_cast<double>(s.total_runs());
  EmpiricalOptimum best{0.0, std::numeric_limits<double>::infinity()};
  double prefix = 0.0;
  for (std::size_t i = 0; i < s.flips.size(); ++i) {
    prefix += static_cast<double>(s.flips[i]);
    // Evaluate once per distinct value, with every tie included in X_{<=x}.
    if (i + 1 < s.flips.size() && s.flips[i + 1] == s.flips[i]) continue;
    const double count = static_cast<double>(i + 1);
    const double x = static_cast<double>(s.flips[i]);
    const double p = count / n;
    const double value = (1.0 - p) / p * x + prefix / count;
    if (value < best.e_hat) best = {x, value};
  }
  return best;
}

std::optional<double> empirical_runtime_under_cutoff(const RtdSample& s, double t) {
  if (s.flips.empty()) throw DataError("empirical_runtime_under_cutoff: no successful runs");
  if (t < static_cast<double>(s.flips.front())) return std::nullopt;
  const double x = std::min(t, static_cast<double>(s.flips.back()));
  const auto it = std::upper_bound(s.flips.begin(), s.flips.end(), x,
                                   [](double v, std::uint64_t f) { return v < static_cast<double>(f); });
  return empirical_restart_runtime(s, static_cast<double>(*(it - 1)));
}

double empirical_mean(const RtdSample& s) {
  if (s.total_runs() == 0) throw DataError("empirical_mean: empty sample");
  double sum = 0.0;
  for (const auto f : s.flips) sum += static_cast<double>(f);
  sum += static_cast<double>(s.censored) * static_cast<double>(s.per_run_timeout);
  return sum / static_cast<double>(s.total_runs());
}

}  // namespace rtdlab::rtd
