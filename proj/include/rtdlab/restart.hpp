#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "rtdlab/cnf.hpp"
#include "rtdlab/probsat.hpp"

namespace rtdlab::restart {

struct NoRestart {
  friend bool operator==(const NoRestart&, const NoRestart&) = default;
};
struct FixedCutoff {
  std::uint64_t t = 1;  // flips per try
  friend bool operator==(const FixedCutoff&, const FixedCutoff&) = default;
};
struct Luby {
  std::uint64_t a = 1;  // multiplier on the Luby terms
  friend bool operator==(const Luby&, const Luby&) = default;
};

using RestartPolicy = std::variant<NoRestart, FixedCutoff, Luby>;

// "none", "fixed:<t>", "luby:<a>".
[[nodiscard]] std::string to_string(const RestartPolicy& policy);

// Inverse of to_string. Also accepts "luby:<k>n" and "fixed:<k>n", scaled by
// `num_vars`. Throws DataError on malformed text or a zero cutoff.
[[nodiscard]] RestartPolicy parse_policy(std::string_view text, cnf::Var num_vars = 0);

// i-th term (1-based) of the Luby sequence 1,1,2,1,1,2,4,...
[[nodiscard]] std::uint64_t luby_term(std::uint64_t i);

struct RestartedRunOutcome {
  bool solved = false;
  std::uint64_t total_flips = 0;
  std::uint64_t restarts = 0;
  std::vector<std::uint64_t> per_try_flips;

  friend bool operator==(const RestartedRunOutcome&, const RestartedRunOutcome&) = default;
};

// Seed for try `index` of a restarted run under `cfg.seed`.
[[nodiscard]] std::uint64_t try_seed(std::uint64_t run_seed, std::uint64_t index);

// Runs probSAT tries under `policy` until one succeeds or `total_budget`
// flips are spent; the final try is truncated to the remaining budget.
// cfg.max_flips is ignored in favour of the policy's per-try budgets.
[[nodiscard]] RestartedRunOutcome run_with_policy(const cnf::Formula& f, const probsat::SolverConfig& cfg,
                                                  const RestartPolicy& policy, std::uint64_t total_budget);

}  // namespace rtdlab::restart
