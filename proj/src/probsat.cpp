#include "rtdlab/probsat.hpp"

#include <algorithm>
#include <cmath>

#include "rtdlab/error.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::probsat {

void SolverConfig::validate() const {
  if (!(cb > 0)) throw DataError("solver config: cb must be positive");
  if (!(cm >= 0)) throw DataError("solver config: cm must be non-negative");
  if (max_flips < 1) throw DataError("solver config: max_flips must be at least 1");
}

namespace {

double selection_weight(std::uint32_t brk, std::uint32_t make, double cb, double cm) {
  const double make_term = cm == 0.0 ? 1.0 : std::pow(static_cast<double>(make), cm);
  return make_term / std::pow(1.0 + brk, cb);
}

// Incremental probSAT state. Break values follow the per-clause true-literal
// counts: a variable breaks a clause iff it is the clause's only true literal.
class Walker {
 public:
  Walker(const cnf::Formula& f, const SolverConfig& cfg)
      : cfg_(cfg), rng_(cfg.seed), num_vars_(f.num_vars) {
    const std::size_t num_lits = 2 * static_cast<std::size_t>(num_vars_);
    clause_start_.reserve(f.clauses.size() + 1);
    clause_start_.push_back(0);
    std::vector<std::uint32_t> occ_count(num_lits, 0);
    for (const auto& clause : f.clauses) {
      for (const auto lit : clause.literals) {
        clause_lits_.push_back(lit.code());
        ++occ_count[lit.code()];
      }
      clause_start_.push_back(static_cast<std::uint32_t>(clause_lits_.size()));
    }
    occ_start_.assign(num_lits + 1, 0);
    for (std::size_t l = 0; l < num_lits; ++l) occ_start_[l + 1] = occ_start_[l] + occ_count[l];
    occ_.resize(occ_start_.back());
    std::vector<std::uint32_t> fill(occ_start_.begin(), occ_start_.end() - 1);
    for (std::uint32_t c = 0; c + 1 < clause_start_.size(); ++c) {
      for (auto i = clause_start_[c]; i < clause_start_[c + 1]; ++i) occ_[fill[clause_lits_[i]]++] = c;
    }

    std::uint32_t max_occ = 0;
    for (cnf::Var v = 0; v < num_vars_; ++v) max_occ = std::max(max_occ, occ_count[2 * v] + occ_count[2 * v + 1]);
    break_weight_.resize(max_occ + 2);
    for (std::uint32_t b = 0; b < break_weight_.size(); ++b) break_weight_[b] = std::pow(1.0 + b, -cfg_.cb);

    value_.resize(num_vars_);
    for (cnf::Var v = 0; v < num_vars_; ++v) value_[v] = rng_.coin();

    const auto m = clause_start_.size() - 1;
    num_true_.assign(m, 0);
    crit_var_.assign(m, 0);
    breaks_.assign(num_vars_, 0);
    unsat_pos_.assign(m, kNotUnsat);
    for (std::uint32_t c = 0; c < m; ++c) {
      for (auto i = clause_start_[c]; i < clause_start_[c + 1]; ++i) {
        if (literal_true(clause_lits_[i])) {
          ++num_true_[c];
          crit_var_[c] = clause_lits_[i] >> 1;
        }
      }
      if (num_true_[c] == 0) add_unsat(c);
      if (num_true_[c] == 1) ++breaks_[crit_var_[c]];
    }
  }

  [[nodiscard]] std::size_t unsat_count() const { return unsat_.size(); }

  // One probSAT step; returns the flipped variable (0-based).
  cnf::Var step() {
    const auto c = unsat_[rng_.below(unsat_.size())];
    const auto begin = clause_start_[c];
    const auto end = clause_start_[c + 1];
    scratch_.clear();
    double total = 0.0;
    for (auto i = begin; i < end; ++i) {
      const auto var = clause_lits_[i] >> 1;
      double w = 0.0;
      if (cfg_.cm == 0.0) {
        w = break_weight_[breaks_[var]];
      } else {
        w = selection_weight(breaks_[var], make_of(clause_lits_[i]), cfg_.cb, cfg_.cm);
      }
      total += w;
      scratch_.push_back(total);
    }
    const double r = rng_.uniform() * total;
    std::size_t pick = 0;
    while (pick + 1 < scratch_.size() && scratch_[pick] <= r) ++pick;
    const auto var = clause_lits_[begin + pick] >> 1;
    flip(var);
    return var;
  }

  [[nodiscard]] cnf::Assignment assignment() const {
    cnf::Assignment a(static_cast<std::size_t>(num_vars_) + 1, false);
    for (cnf::Var v = 0; v < num_vars_; ++v) a[v + 1] = value_[v];
    return a;
  }

 private:
  static constexpr std::uint32_t kNotUnsat = UINT32_MAX;

  // Literal code 2v is positive, 2v+1 negated.
  [[nodiscard]] bool literal_true(std::uint32_t code) const { return value_[code >> 1] != (code & 1U); }

  // Unsatisfied clauses that flipping the variable of `code` would satisfy.
  [[nodiscard]] std::uint32_t make_of(std::uint32_t code) const {
    std::uint32_t make = 0;
    for (auto i = occ_start_[code]; i < occ_start_[code + 1]; ++i) make += num_true_[occ_[i]] == 0;
    return make;
  }

  void add_unsat(std::uint32_t c) {
    unsat_pos_[c] = static_cast<std::uint32_t>(unsat_.size());
    unsat_.push_back(c);
  }

  void remove_unsat(std::uint32_t c) {
    const auto pos = unsat_pos_[c];
    const auto last = unsat_.back();
    unsat_[pos] = last;
    unsat_pos_[last] = pos;
    unsat_.pop_back();
    unsat_pos_[c] = kNotUnsat;
  }

  void flip(std::uint32_t var) {
    value_[var] = !value_[var];
    const std::uint32_t made_true = 2 * var + (value_[var] ? 0U : 1U);
    const std::uint32_t made_false = made_true ^ 1U;
    for (auto i = occ_start_[made_true]; i < occ_start_[made_true + 1]; ++i) {
      const auto c = occ_[i];
      const auto t = ++num_true_[c];
      if (t == 1) {
        remove_unsat(c);
        crit_var_[c] = var;
        ++breaks_[var];
      } else if (t == 2) {
        --breaks_[crit_var_[c]];
      }
    }
    for (auto i = occ_start_[made_false]; i < occ_start_[made_false + 1]; ++i) {
      const auto c = occ_[i];
      const auto t = --num_true_[c];
      if (t == 0) {
        add_unsat(c);
        --breaks_[var];
      } else if (t == 1) {
        for (auto j = clause_start_[c]; j < clause_start_[c + 1]; ++j) {
          if (literal_true(clause_lits_[j])) {
            crit_var_[c] = clause_lits_[j] >> 1;
            break;
          }
        }
        ++breaks_[crit_var_[c]];
      }
    }
  }

  SolverConfig cfg_;
  Rng rng_;
  cnf::Var num_vars_;
  std::vector<std::uint32_t> clause_start_;
  std::vector<std::uint32_t> clause_lits_;
  std::vector<std::uint32_t> occ_start_;
  std::vector<std::uint32_t> occ_;
  std::vector<double> break_weight_;
  std::vector<bool> value_;
  std::vector<std::uint32_t> num_true_;
  std::vector<std::uint32_t> crit_var_;
  std::vector<std::uint32_t> breaks_;
  std::vector<std::uint32_t> unsat_;
  std::vector<std::uint32_t> unsat_pos_;
  std::vector<double> scratch_;
};

}  // namespace

std::vector<double> flip_probabilities(std::span<const std::uint32_t> break_values,
                                       std::span<const std::uint32_t> make_values, const SolverConfig& cfg) {
  if (break_values.empty()) throw DataError("flip_probabilities: empty clause");
  if (cfg.cm != 0.0 && make_values.size() != break_values.size()) {
    throw DataError("flip_probabilities: break and make lists differ in length");
  }
  std::vector<double> p(break_values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const std::uint32_t make = make_values.empty() ? 0 : make_values[i];
    p[i] = selection_weight(break_values[i], make, cfg.cb, cfg.cm);
    total += p[i];
  }
  if (!(total > 0)) {
    // Every candidate has make 0 under cm > 0: fall back to uniform.
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return p;
  }
  for (auto& x : p) x /= total;
  return p;
}

RunOutcome solve_once(const cnf::Formula& f, const SolverConfig& cfg, const FlipObserver& observer) {
  cfg.validate();
  Walker walker(f, cfg);
  RunOutcome out;
  while (walker.unsat_count() > 0 && out.flips < cfg.max_flips) {
    const auto var = walker.step();
    ++out.flips;
    if (observer) observer(var + 1);
  }
  out.solved = walker.unsat_count() == 0;
  if (out.solved) out.assignment = walker.assignment();
  return out;
}

ProbeTrace probe_run(const cnf::Formula& f, const SolverConfig& cfg, std::uint64_t probe_flips) {
  if (probe_flips < 1) throw DataError("probe_run: probe_flips must be at least 1");
  SolverConfig probe_cfg = cfg;
  probe_cfg.max_flips = probe_flips;
  probe_cfg.validate();

  Walker walker(f, probe_cfg);
  ProbeTrace trace;
  trace.initial_unsat = walker.unsat_count();
  trace.best_solution_unsat = trace.initial_unsat;
  trace.best_unsat_trajectory.emplace_back(0, trace.initial_unsat);
  bool local_min_found = false;

  std::uint64_t flips = 0;
  while (walker.unsat_count() > 0 && flips < probe_flips) {
    walker.step();
    ++flips;
    const auto unsat = walker.unsat_count();
    if (unsat < trace.best_solution_unsat) {
      trace.best_solution_unsat = unsat;
      trace.best_step = flips;
      trace.best_unsat_trajectory.emplace_back(flips, unsat);
    } else if (!local_min_found && flips - trace.best_step >= kStallWindow) {
      local_min_found = true;
      trace.first_local_min_step = trace.best_step;
    }
  }
  if (!local_min_found) trace.first_local_min_step = trace.best_step;
  trace.total_flips = flips;
  return trace;
}

}  // namespace rtdlab::probsat
