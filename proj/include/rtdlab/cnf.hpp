#pragma once

#include <compare>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rtdlab::cnf {

using Var = std::uint32_t;

struct Literal {
  Var variable = 1;  // 1-based
  bool negated = false;

  [[nodiscard]] int to_dimacs() const {
    return negated ? -static_cast<int>(variable) : static_cast<int>(variable);
  }
  [[nodiscard]] static Literal from_dimacs(int lit) {
    return {static_cast<Var>(lit < 0 ? -lit : lit), lit < 0};
  }
  // Dense code: 2*(v-1) for positive, 2*(v-1)+1 for negated.
  [[nodiscard]] std::uint32_t code() const { return 2 * (variable - 1) + (negated ? 1 : 0); }
  [[nodiscard]] Literal operator~() const { return {variable, !negated}; }

  friend auto operator<=>(const Literal&, const Literal&) = default;
};

struct Clause {
  std::vector<Literal> literals;

  [[nodiscard]] std::size_t size() const { return literals.size(); }
  [[nodiscard]] bool is_tautology() const;
  // At most one positive literal.
  [[nodiscard]] bool is_horn() const;

  friend bool operator==(const Clause&, const Clause&) = default;
};

struct FormulaMetadata {
  std::optional<std::string> instance_id;
  std::optional<std::uint64_t> seed;
  std::optional<double> ratio;
  bool has_tautology = false;
};

struct Formula {
  Var num_vars = 0;
  std::vector<Clause> clauses;
  FormulaMetadata metadata;

  [[nodiscard]] double clause_var_ratio() const {
    return num_vars == 0 ? 0.0 : static_cast<double>(clauses.size()) / num_vars;
  }

  // Structural equality: variable count and clause list; metadata ignored.
  friend bool operator==(const Formula& a, const Formula& b) {
    return a.num_vars == b.num_vars && a.clauses == b.clauses;
  }
};

// Indexed by variable; slot 0 is unused.
using Assignment = std::vector<bool>;

[[nodiscard]] bool satisfies(const Formula& f, const Assignment& assignment);
[[nodiscard]] std::size_t count_unsatisfied(const Formula& f, const Assignment& assignment);

// DIMACS CNF. Throws DataError on malformed input.
[[nodiscard]] Formula parse_dimacs(std::istream& in);
[[nodiscard]] Formula parse_dimacs(std::string_view text);
void write_dimacs(std::ostream& out, const Formula& f);
[[nodiscard]] std::string write_dimacs(const Formula& f);

// Uniform random 3-SAT: floor(ratio * n) clauses over 3 distinct variables,
// each literal negated with probability 1/2.
[[nodiscard]] Formula generate_random_3sat(Var n, double ratio, std::uint64_t seed);

struct SatVerdict {
  enum class Kind { Satisfiable, Unsatisfiable, Unknown };
  Kind kind = Kind::Unknown;
  Assignment model;  // set iff Satisfiable
  std::uint64_t decisions = 0;

  [[nodiscard]] bool satisfiable() const { return kind == Kind::Satisfiable; }
};

[[nodiscard]] std::string to_string(SatVerdict::Kind kind);

// DPLL with unit propagation and pure-literal elimination. Branches on the
// most frequent variable of the shortest open clauses. Returns Unknown once
// more than `node_budget` decisions have been made.
[[nodiscard]] SatVerdict dpll_satisfiable(const Formula& f, std::uint64_t node_budget);

struct Simplification {
  // Clauses left after the fixpoint, with assigned literals removed. On a
  // conflict this holds exactly one empty clause.
  Formula formula;
  bool conflict = false;
  Var remaining_vars = 0;  // distinct variables occurring in `formula`
  Var removed_vars = 0;
  std::size_t removed_clauses = 0;
};

// Fixpoint of unit propagation and pure-literal elimination.
[[nodiscard]] Simplification simplify(const Formula& f);

}  // namespace rtdlab::cnf
