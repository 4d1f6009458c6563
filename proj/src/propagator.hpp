#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "rtdlab/cnf.hpp"

namespace rtdlab::cnf {

// Counter-based unit propagation over an immutable formula, with a trail for
// chronological backtracking. Shared by DPLL, simplification and the DPLL
// probing feature.
class Propagator {
 public:
  explicit Propagator(const Formula& f);

  // 0 unassigned, +1 true, -1 false.
  [[nodiscard]] int value(Var v) const { return values_[v]; }
  [[nodiscard]] int value(Literal lit) const {
    const int v = values_[lit.variable];
    return lit.negated ? -v : v;
  }

  // Assigns `lit` and propagates. Returns false on conflict; the caller must
  // then backtrack before assigning again.
  bool assign(Literal lit);
  bool propagate();

  [[nodiscard]] std::size_t trail_size() const { return trail_.size(); }
  void backtrack(std::size_t mark);

  [[nodiscard]] bool conflict() const { return conflict_; }
  [[nodiscard]] bool all_satisfied() const { return open_clauses_ == 0; }
  [[nodiscard]] std::size_t open_clauses() const { return open_clauses_; }
  [[nodiscard]] bool clause_open(std::size_t c) const { return sat_count_[c] == 0; }
  [[nodiscard]] std::uint32_t unassigned_in(std::size_t c) const { return unassigned_[c]; }

  // Unassigned literals whose negation occurs in no open clause while they
  // occur in at least one.
  [[nodiscard]] std::vector<Literal> pure_literals() const;
  // Assigns pure literals until none are left. Never conflicts.
  void eliminate_pure_literals();

  // Unassigned variables occurring in at least one open clause.
  [[nodiscard]] std::vector<Var> active_variables() const;

  // Most frequent variable among the shortest open clauses; the returned
  // polarity is the one occurring more often there.
  [[nodiscard]] std::optional<Literal> branch_literal() const;

  // Model with unassigned variables set to false.
  [[nodiscard]] Assignment model() const;

  [[nodiscard]] const Formula& formula() const { return *formula_; }

 private:
  void set(Literal lit);
  void unset(Literal lit);

  const Formula* formula_;
  std::vector<std::vector<std::uint32_t>> occurrences_;  // by literal code
  std::vector<std::uint32_t> sat_count_;
  std::vector<std::uint32_t> unassigned_;
  std::vector<std::uint32_t> open_occurrences_;  // by literal code
  std::vector<int> values_;
  std::vector<Literal> trail_;
  std::vector<std::uint32_t> unit_queue_;
  std::size_t open_clauses_ = 0;
  bool conflict_ = false;
};

}  // namespace rtdlab::cnf
