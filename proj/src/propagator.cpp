#include "propagator.hpp"

namespace rtdlab::cnf {

Propagator::Propagator(const Formula& f)
    : formula_(&f),
      occurrences_(2 * static_cast<std::size_t>(f.num_vars)),
      sat_count_(f.clauses.size(), 0),
      unassigned_(f.clauses.size(), 0),
      open_occurrences_(2 * static_cast<std::size_t>(f.num_vars), 0),
      values_(static_cast<std::size_t>(f.num_vars) + 1, 0),
      open_clauses_(f.clauses.size()) {
  for (std::size_t c = 0; c < f.clauses.size(); ++c) {
    const auto& clause = f.clauses[c];
    unassigned_[c] = static_cast<std::uint32_t>(clause.size());
    for (const Literal lit : clause.literals) {
      occurrences_[lit.code()].push_back(static_cast<std::uint32_t>(c));
      ++open_occurrences_[lit.code()];
    }
    if (clause.size() == 0) conflict_ = true;
    if (clause.size() == 1) unit_queue_.push_back(static_cast<std::uint32_t>(c));
  }
}

void Propagator::set(Literal lit) {
  values_[lit.variable] = lit.negated ? -1 : 1;
  trail_.push_back(lit);
  for (const auto c : occurrences_[lit.code()]) {
    --unassigned_[c];
    if (sat_count_[c]++ == 0) {
      --open_clauses_;
      for (const Literal other : formula_->clauses[c].literals) --open_occurrences_[other.code()];
    }
  }
  for (const auto c : occurrences_[(~lit).code()]) {
    --unassigned_[c];
    if (sat_count_[c] != 0) continue;
    if (unassigned_[c] == 0) {
      conflict_ = true;
    } else if (unassigned_[c] == 1) {
      unit_queue_.push_back(c);
    }
  }
}

void Propagator::unset(Literal lit) {
  for (const auto c : occurrences_[(~lit).code()]) ++unassigned_[c];
  for (const auto c : occurrences_[lit.code()]) {
    ++unassigned_[c];
    if (--sat_count_[c] == 0) {
      ++open_clauses_;
      for (const Literal other : formula_->clauses[c].literals) ++open_occurrences_[other.code()];
    }
  }
  values_[lit.variable] = 0;
}

bool Propagator::assign(Literal lit) {
  if (conflict_) return false;
  const int current = value(lit);
  if (current > 0) return propagate();
  if (current < 0) {
    conflict_ = true;
    return false;
  }
  set(lit);
  return propagate();
}

bool Propagator::propagate() {
  while (!conflict_ && !unit_queue_.empty()) {
    const auto c = unit_queue_.back();
    unit_queue_.pop_back();
    if (sat_count_[c] != 0) continue;
    if (unassigned_[c] == 0) {
      conflict_ = true;
      break;
    }
    if (unassigned_[c] != 1) continue;
    for (const Literal lit : formula_->clauses[c].literals) {
      if (values_[lit.variable] == 0) {
        set(lit);
        break;
      }
    }
  }
  return !conflict_;
}

void Propagator::backtrack(std::size_t mark) {
  while (trail_.size() > mark) {
    const Literal lit = trail_.back();
    trail_.pop_back();
    unset(lit);
  }
  unit_queue_.clear();
  conflict_ = false;
  // Clauses that were unit before the mark are re-queued so that callers
  // resuming at the mark observe a consistent fixpoint.
  for (std::size_t c = 0; c < sat_count_.size(); ++c) {
    if (sat_count_[c] == 0) {
      if (unassigned_[c] == 0) conflict_ = true;
      if (unassigned_[c] == 1) unit_queue_.push_back(static_cast<std::uint32_t>(c));
    }
  }
}

std::vector<Literal> Propagator::pure_literals() const {
  std::vector<Literal> pure;
  for (Var v = 1; v <= formula_->num_vars; ++v) {
    if (values_[v] != 0) continue;
    const Literal pos{v, false};
    const auto p = open_occurrences_[pos.code()];
    const auto n = open_occurrences_[(~pos).code()];
    if (p > 0 && n == 0) pure.push_back(pos);
    if (n > 0 && p == 0) pure.push_back(~pos);
  }
  return pure;
}

void Propagator::eliminate_pure_literals() {
  for (auto pure = pure_literals(); !pure.empty() && !conflict_; pure = pure_literals()) {
    for (const Literal lit : pure) {
      if (value(lit) == 0) set(lit);
    }
  }
}

std::vector<Var> Propagator::active_variables() const {
  std::vector<Var> active;
  for (Var v = 1; v <= formula_->num_vars; ++v) {
    if (values_[v] != 0) continue;
    const Literal pos{v, false};
    if (open_occurrences_[pos.code()] + open_occurrences_[(~pos).code()] > 0) active.push_back(v);
  }
  return active;
}

std::optional<Literal> Propagator::branch_literal() const {
  std::uint32_t shortest = UINT32_MAX;
  for (std::size_t c = 0; c < sat_count_.size(); ++c) {
    if (sat_count_[c] == 0 && unassigned_[c] < shortest) shortest = unassigned_[c];
  }
  if (shortest == UINT32_MAX || shortest == 0) return std::nullopt;

  std::vector<std::uint32_t> counts(2 * static_cast<std::size_t>(formula_->num_vars), 0);
  for (std::size_t c = 0; c < sat_count_.size(); ++c) {
    if (sat_count_[c] != 0 || unassigned_[c] != shortest) continue;
    for (const Literal lit : formula_->clauses[c].literals) {
      if (values_[lit.variable] == 0) ++counts[lit.code()];
    }
  }
  std::optional<Literal> best;
  std::uint32_t best_total = 0;
  for (Var v = 1; v <= formula_->num_vars; ++v) {
    const Literal pos{v, false};
    const auto p = counts[pos.code()];
    const auto n = counts[(~pos).code()];
    if (p + n > best_total) {
      best_total = p + n;
      best = p >= n ? pos : ~pos;
    }
  }
  return best;
}

Assignment Propagator::model() const {
  Assignment a(static_cast<std::size_t>(formula_->num_vars) + 1, false);
  for (Var v = 1; v <= formula_->num_vars; ++v) a[v] = values_[v] > 0;
  return a;
}

}  // namespace rtdlab::cnf
