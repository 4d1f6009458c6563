#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtdlab/cnf.hpp"
#include "rtdlab/dist.hpp"
#include "rtdlab/probsat.hpp"
#include "rtdlab/restart.hpp"
#include "rtdlab/rtd.hpp"

namespace rtdlab::eval {

// baseline_mean / candidate_mean; both must be positive.
[[nodiscard]] double speedup(double baseline_mean, double candidate_mean);
// Computed in log space. Throws DataError on an empty list or a
// non-positive entry.
[[nodiscard]] double geometric_mean(std::span<const double> values);

struct SpeedupRecord {
  std::string instance_id;
  double mean_runtime_baseline = 0.0;
  double mean_runtime_candidate = 0.0;
  double speedup = 1.0;
};

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Paired two-sided t-test on d_i = log x_i - log y_i with n-1 degrees of
// freedom. Zero-variance differences give p = 1 when all are zero and the
// floor kPValueFloor otherwise.
inline constexpr double kPValueFloor = 1e-300;
[[nodiscard]] TestResult paired_t_test(std::span<const double> x, std::span<const double> y);

struct WilcoxonResult {
  double w_plus = 0.0;  // sum of ranks of positive differences x - y
  double p_value = 1.0;
  std::size_t n = 0;    // differences left after dropping zeros
  bool exact = false;
};

inline constexpr std::size_t kWilcoxonExactMax = 20;
inline constexpr std::size_t kWilcoxonMinPairs = 5;

// Signed-rank test with average ranks for tied magnitudes. Two-sided p is
// exact over all 2^n sign patterns for n <= 20 and from the normal
// approximation with continuity and tie correction above. Throws DataError
// with fewer than five nonzero differences.
[[nodiscard]] WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y);

// One instance's fitted families and its observed sample.
struct InstanceFits {
  std::string instance_id;
  rtd::RtdSample sample;
  rtd::WinnerSelection fits;
};

// Speedup on the observed sample of restarting at `family`'s optimal time;
// nullopt when that time lies below every observation.
[[nodiscard]] std::optional<double> fitted_speedup(const InstanceFits& inst, dist::Family family);

struct SubsetRow {
  std::vector<dist::Family> subset;  // empty for the baseline row
  std::string label;                 // e.g. "{L,W}"; "{}" for the baseline
  double ks_best = 1.0;              // geometric mean over included instances
  double speedup_best = 1.0;
};

struct SubsetTable {
  std::vector<SubsetRow> rows;  // the baseline first, then the 7 non-empty subsets
  std::vector<std::string> included;
  std::vector<std::string> excluded_no_winner;
  std::vector<std::string> excluded_below_sample;
};

// Per subset, per instance: KS-best picks the highest p-value in the subset,
// speedup-best the largest fitted_speedup. The baseline row uses the
// in-sample empirical optimum for both columns. Instances without a KS
// winner, or where some family's optimal time falls below every
// observation, are dropped from every row and listed.
[[nodiscard]] SubsetTable subset_speedup_table(std::span<const InstanceFits> instances);

[[nodiscard]] std::string subset_label(std::span<const dist::Family> subset);

// ---- Policy head-to-head ----

struct H2HInstance {
  std::string instance_id;
  cnf::Formula formula;
  std::vector<restart::RestartPolicy> policies;  // one per column
};

struct H2HOptions {
  std::uint64_t runs_per_instance = 100;
  std::uint64_t budget = 1'000'000;  // total flips per restarted run
  std::uint64_t master_seed = 0;
  probsat::SolverConfig solver;
  int workers = 1;
};

struct H2HCell {
  double mean_flips = 0.0;  // timed-out runs count their full budget
  std::uint64_t timeouts = 0;
};

struct H2HRow {
  std::string instance_id;
  std::vector<std::string> policies;  // to_string of each column's policy
  std::vector<H2HCell> cells;
  bool excluded = false;  // some column timed out on every run
};

struct H2HResult {
  std::vector<std::string> columns;
  std::vector<H2HRow> rows;
};

// Seed of run r on instance i, shared by every policy column so the columns
// see common random numbers.
[[nodiscard]] std::uint64_t h2h_run_seed(std::uint64_t master_seed, std::size_t instance, std::uint64_t run);

[[nodiscard]] H2HResult head_to_head(std::span<const H2HInstance> instances, std::span<const std::string> columns,
                                     const H2HOptions& options);
[[nodiscard]] H2HResult head_to_head_serial(std::span<const H2HInstance> instances,
                                            std::span<const std::string> columns, const H2HOptions& options);

struct Comparison {
  std::string baseline;
  std::string candidate;
  std::vector<SpeedupRecord> records;  // non-excluded instances
  double geometric_mean = 1.0;
  TestResult t_test;
  std::optional<WilcoxonResult> wilcoxon;  // absent with fewer than five nonzero differences
  std::size_t restart_predicted = 0;       // candidate policy restarts
  std::size_t no_restart_predicted = 0;
};

// Speedups of `candidate` over `baseline`; both tests run on the log means.
[[nodiscard]] Comparison compare(const H2HResult& r, std::size_t baseline, std::size_t candidate);

// Rows restricted to instances whose candidate policy restarts.
[[nodiscard]] Comparison compare_restarting(const H2HResult& r, std::size_t baseline, std::size_t candidate);

// instance_id, log_mean_<a>, log_mean_<b> for every non-excluded row.
[[nodiscard]] std::string scatter_csv(const H2HResult& r, std::size_t a, std::size_t b);

}  // namespace rtdlab::eval
