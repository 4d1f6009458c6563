#include "rtdlab/restart.hpp"

#include <bit>
#include <charconv>
#include <limits>

#include "rtdlab/error.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::restart {

std::string to_string(const RestartPolicy& policy) {
  struct Visitor {
    std::string operator()(const NoRestart&) const { return "none"; }
    std::string operator()(const FixedCutoff& p) const { return "fixed:" + std::to_string(p.t); }
    std::string operator()(const Luby& p) const { return "luby:" + std::to_string(p.a); }
  };
  return std::visit(Visitor{}, policy);
}

namespace {

std::uint64_t parse_amount(std::string_view text, cnf::Var num_vars, std::string_view original) {
  bool per_var = false;
  if (!text.empty() && text.back() == 'n') {
    per_var = true;
    text.remove_suffix(1);
  }
  std::uint64_t value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc{} || ptr != end) throw DataError("bad restart policy '" + std::string(original) + "'");
  if (per_var) {
    if (num_vars == 0) throw DataError("policy '" + std::string(original) + "' needs a variable count");
    value *= num_vars;
  }
  if (value < 1) throw DataError("restart policy '" + std::string(original) + "' must be at least 1");
  return value;
}

}  // namespace

RestartPolicy parse_policy(std::string_view text, cnf::Var num_vars) {
  if (text == "none") return NoRestart{};
  if (text.starts_with("fixed:")) return FixedCutoff{parse_amount(text.substr(6), num_vars, text)};
  if (text.starts_with("luby:")) return Luby{parse_amount(text.substr(5), num_vars, text)};
  throw DataError("unknown restart policy '" + std::string(text) + "'");
}

std::uint64_t luby_term(std::uint64_t i) {
  if (i == 0) throw DataError("luby_term: index is 1-based");
  while (true) {
    // Smallest k with 2^k - 1 >= i.
    const int k = std::bit_width(i);
    const std::uint64_t top = (std::uint64_t{1} << k) - 1;
    const std::uint64_t half = std::uint64_t{1} << (k - 1);
    if (i == top) return half;
    i = i - half + 1;
  }
}

std::uint64_t try_seed(std::uint64_t run_seed, std::uint64_t index) { return substream_seed(run_seed, index); }

RestartedRunOutcome run_with_policy(const cnf::Formula& f, const probsat::SolverConfig& cfg,
                                    const RestartPolicy& policy, std::uint64_t total_budget) {
  if (total_budget < 1) throw DataError("run_with_policy: total budget must be at least 1");
  constexpr auto kMax = std::numeric_limits<std::uint64_t>::max();

  auto try_budget = [&](std::uint64_t index) -> std::uint64_t {
    if (std::holds_alternative<FixedCutoff>(policy)) return std::get<FixedCutoff>(policy).t;
    if (std::holds_alternative<Luby>(policy)) {
      const auto a = std::get<Luby>(policy).a;
      const auto term = luby_term(index + 1);
      return term > kMax / a ? kMax : a * term;
    }
    return kMax;
  };

  RestartedRunOutcome out;
  for (std::uint64_t index = 0; out.total_flips < total_budget; ++index) {
    probsat::SolverConfig try_cfg = cfg;
    try_cfg.seed = try_seed(cfg.seed, index);
    try_cfg.max_flips = std::min(try_budget(index), total_budget - out.total_flips);
    const auto result = probsat::solve_once(f, try_cfg);
    out.per_try_flips.push_back(result.flips);
    out.total_flips += result.flips;
    if (result.solved) {
      out.solved = true;
      break;
    }
  }
  out.restarts = out.per_try_flips.empty() ? 0 : out.per_try_flips.size() - 1;
  return out;
}

}  // namespace rtdlab::restart
