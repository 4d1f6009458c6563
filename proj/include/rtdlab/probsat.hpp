#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "rtdlab/cnf.hpp"

namespace rtdlab::probsat {

struct SolverConfig {
  double cb = 2.3;  // break exponent
  double cm = 0.0;  // make exponent; 0 selects the break-only polynomial
  std::uint64_t max_flips = 1'000'000;
  std::uint64_t seed = 0;

  // Throws DataError unless cb > 0, cm >= 0 and max_flips >= 1.
  void validate() const;
};

struct RunOutcome {
  bool solved = false;
  std::uint64_t flips = 0;
  std::optional<cnf::Assignment> assignment;  // present iff solved

  friend bool operator==(const RunOutcome&, const RunOutcome&) = default;
};

struct ProbeTrace {
  // (flip index, best unsatisfied count so far), one entry per improvement,
  // starting with the initial assignment at flip 0.
  std::vector<std::pair<std::uint64_t, std::size_t>> best_unsat_trajectory;
  std::uint64_t first_local_min_step = 0;
  std::size_t best_solution_unsat = 0;
  std::size_t initial_unsat = 0;
  std::uint64_t best_step = 0;    // flip index where the best count was reached
  std::uint64_t total_flips = 0;  // flips actually performed
};

// Non-improving flips after which the walk counts as stuck in its first
// local minimum.
inline constexpr std::uint64_t kStallWindow = 50;

// probSAT selection distribution over the literals of one unsatisfied clause:
// f(x) = make(x)^cm / (1 + break(x))^cb, normalized. 0^0 is taken as 1.
[[nodiscard]] std::vector<double> flip_probabilities(std::span<const std::uint32_t> break_values,
                                                     std::span<const std::uint32_t> make_values,
                                                     const SolverConfig& cfg);

// Invoked with the variable of every flip.
using FlipObserver = std::function<void(cnf::Var)>;

// One probSAT try from a uniformly random assignment, bounded by
// cfg.max_flips. Deterministic in (f, cfg).
[[nodiscard]] RunOutcome solve_once(const cnf::Formula& f, const SolverConfig& cfg,
                                    const FlipObserver& observer = {});

// probSAT for exactly `probe_flips` flips (or until solved), tracking the
// best unsatisfied-clause count.
[[nodiscard]] ProbeTrace probe_run(const cnf::Formula& f, const SolverConfig& cfg,
                                   std::uint64_t probe_flips);

}  // namespace rtdlab::probsat
