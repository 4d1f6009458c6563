#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "rtdlab/cnf.hpp"
#include "rtdlab/dist.hpp"
#include "rtdlab/probsat.hpp"

namespace rtdlab::rtd {

// Empirical runtime distribution of probSAT on one instance, in flips.
struct RtdSample {
  std::string instance_id;
  std::vector<std::uint64_t> flips;  // successful runs, ascending
  std::uint64_t censored = 0;        // runs that hit per_run_timeout
  std::uint64_t per_run_timeout = 0;
  std::uint64_t master_seed = 0;

  [[nodiscard]] std::uint64_t total_runs() const { return flips.size() + censored; }
  [[nodiscard]] std::vector<double> runtimes() const { return {flips.begin(), flips.end()}; }

  friend bool operator==(const RtdSample&, const RtdSample&) = default;
};

// Seed of run `run` in a batch under `master_seed`.
[[nodiscard]] std::uint64_t run_seed(std::uint64_t master_seed, std::uint64_t run);

// n_runs independent probSAT runs; run j uses run_seed(master_seed, j) and a
// budget of per_run_timeout flips. Runs are spread over `workers` OpenMP
// threads; the result does not depend on the worker count.
[[nodiscard]] RtdSample sample_rtd(const cnf::Formula& f, const probsat::SolverConfig& cfg, std::uint64_t n_runs,
                                   std::uint64_t master_seed, std::uint64_t per_run_timeout, int workers);

// Single-threaded reference for sample_rtd.
[[nodiscard]] RtdSample sample_rtd_serial(const cnf::Formula& f, const probsat::SolverConfig& cfg,
                                          std::uint64_t n_runs, std::uint64_t master_seed,
                                          std::uint64_t per_run_timeout);

// Step points (x, F_n(x)) with n counting censored runs; ties merge into the
// higher level.
[[nodiscard]] std::vector<std::pair<double, double>> ecdf(const RtdSample& s);

struct WinnerSelection {
  std::optional<dist::Family> winner;
  std::array<dist::FitResult, 3> fits;  // Weibull, Lognormal, GP
  double alpha = 0.05;

  [[nodiscard]] const dist::FitResult& fit(dist::Family family) const;
};

inline constexpr double kDefaultAlpha = 0.05;
inline constexpr double kMaxCensoredFraction = 0.10;

// Highest p-value among fits with p >= alpha; ties go to Weibull, then
// lognormal, then GP (the order of `fits`).
[[nodiscard]] std::optional<dist::Family> select_winner(const std::array<dist::FitResult, 3>& fits, double alpha);

// Fits all three families to the uncensored runtimes and KS-tests each.
// Throws DataError with fewer than 10 uncensored runs or more than 10%
// censored runs.
[[nodiscard]] WinnerSelection fit_all(const RtdSample& s, double alpha = kDefaultAlpha);

struct EmpiricalOptimum {
  double x_star = 0.0;
  double e_hat = 0.0;
};

// Expected runtime of restarting at observed runtime x, estimated from the
// sample: ((1 - p) / p) x + mean(X <= x) with p = |X <= x| / |X|, censored
// runs counting in |X| only. +inf if no observation is <= x.
[[nodiscard]] double empirical_restart_runtime(const RtdSample& s, double x);

// Minimizes empirical_restart_runtime over the observed runtimes.
[[nodiscard]] EmpiricalOptimum empirical_optimal(const RtdSample& s);

// empirical_restart_runtime at the largest observation <= t; with t beyond
// every observation this is the plain mean (restart never triggers).
// Returns nullopt if t is below the smallest observation.
[[nodiscard]] std::optional<double> empirical_runtime_under_cutoff(const RtdSample& s, double t);

// Mean of the observed runtimes, treating censored runs at the timeout.
[[nodiscard]] double empirical_mean(const RtdSample& s);

}  // namespace rtdlab::rtd
