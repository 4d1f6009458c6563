#include <cmath>

#include "doctest.h"
#include "rtdlab/cnf.hpp"
#include "rtdlab/error.hpp"
#include "rtdlab/rng.hpp"

using namespace rtdlab;
using namespace rtdlab::cnf;

namespace {

Clause clause(std::initializer_list<int> lits) {
  Clause c;
  for (const int l : lits) c.literals.push_back(Literal::from_dimacs(l));
  return c;
}

Formula formula(Var n, std::initializer_list<std::initializer_list<int>> clauses) {
  Formula f;
  f.num_vars = n;
  for (const auto& c : clauses) f.clauses.push_back(clause(c));
  return f;
}

// Exhaustive truth-table oracle.
bool brute_force_sat(const Formula& f) {
  const Var n = f.num_vars;
  for (std::uint64_t bits = 0; bits < (std::uint64_t{1} << n); ++bits) {
    Assignment a(n + 1, false);
    for (Var v = 1; v <= n; ++v) a[v] = (bits >> (v - 1)) & 1U;
    bool all = true;
    for (const auto& c : f.clauses) {
      bool sat = false;
      for (const auto lit : c.literals) sat = sat || (a[lit.variable] != lit.negated);
      if (!sat) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

Formula random_formula(Var n, std::size_t m, std::size_t max_len, std::uint64_t seed) {
  Rng rng(seed);
  Formula f;
  f.num_vars = n;
  for (std::size_t i = 0; i < m; ++i) {
    Clause c;
    const auto len = 1 + rng.below(max_len);
    for (std::size_t k = 0; k < len; ++k) {
      const auto v = static_cast<Var>(1 + rng.below(n));
      bool dup = false;
      for (const auto lit : c.literals) dup = dup || lit.variable == v;
      if (!dup) c.literals.push_back({v, rng.coin()});
    }
    f.clauses.push_back(c);
  }
  return f;
}

}  // namespace

TEST_CASE("literal encodings") {
  CHECK(Literal::from_dimacs(-3).variable == 3);
  CHECK(Literal::from_dimacs(-3).negated);
  CHECK(Literal::from_dimacs(4).to_dimacs() == 4);
  CHECK(Literal{2, true}.code() == 3);
  CHECK((~Literal{2, true}) == Literal{2, false});
}

TEST_CASE("parse_dimacs maps syntax directly") {
  const auto f = parse_dimacs("p cnf 2 2\n1 2 0\n-1 2 0\n");
  CHECK(f == formula(2, {{1, 2}, {-1, 2}}));
  CHECK(parse_dimacs("c comment\np cnf 1 1\n1 0\n") == formula(1, {{1}}));
}

TEST_CASE("parse_dimacs rejects malformed input") {
  CHECK_THROWS_AS((void)parse_dimacs("p cnf 1 2\n1 0\n"), DataError);
  CHECK_THROWS_AS((void)parse_dimacs("p cnf 2 1\n3 0\n"), DataError);
  CHECK_THROWS_AS((void)parse_dimacs("p cnf 2 1\n1 2\n"), DataError);
  CHECK_THROWS_AS((void)parse_dimacs("p dnf 2 1\n1 2 0\n"), DataError);
  CHECK_THROWS_AS((void)parse_dimacs("1 2 0\n"), DataError);
  CHECK_THROWS_AS((void)parse_dimacs("p cnf 2 2\n1 2 0\n0\n"), DataError);
}

TEST_CASE("parse_dimacs deduplicates literals and flags tautologies") {
  const auto f = parse_dimacs("p cnf 2 2\n1 1 2 0\n1 -1 0\n");
  CHECK(f.clauses[0] == clause({1, 2}));
  CHECK(f.clauses[1].is_tautology());
  CHECK(f.metadata.has_tautology);
}

TEST_CASE("write_dimacs output") {
  CHECK(write_dimacs(formula(1, {{1}})) == "p cnf 1 1\n1 0\n");
  CHECK(write_dimacs(formula(2, {{-1, 2}})) == "p cnf 2 1\n-1 2 0\n");
}

TEST_CASE("write then parse is the identity, metadata included") {
  const auto f = generate_random_3sat(100, 4.26, 7);
  const auto g = parse_dimacs(write_dimacs(f));
  CHECK(g == f);
  REQUIRE(g.metadata.seed);
  CHECK(*g.metadata.seed == 7);
  REQUIRE(g.metadata.ratio);
  CHECK(*g.metadata.ratio == 4.26);
}

TEST_CASE("generate_random_3sat shape and determinism") {
  const auto f = generate_random_3sat(100, 4.26, 7);
  CHECK(f.clauses.size() == 426);
  for (const auto& c : f.clauses) {
    REQUIRE(c.size() == 3);
    CHECK(c.literals[0].variable != c.literals[1].variable);
    CHECK(c.literals[0].variable != c.literals[2].variable);
    CHECK(c.literals[1].variable != c.literals[2].variable);
    for (const auto lit : c.literals) CHECK(lit.variable <= 100);
  }
  CHECK(generate_random_3sat(1500, 4.27, 1).clauses.size() == 6405);
  CHECK(generate_random_3sat(100, 4.26, 7) == f);
  CHECK_FALSE(generate_random_3sat(100, 4.26, 8) == f);
  CHECK_THROWS_AS((void)generate_random_3sat(2, 4.26, 1), DataError);
}

TEST_CASE("generated literal signs are balanced") {
  const auto f = generate_random_3sat(1000, 4.26, 3);
  std::size_t negated = 0;
  for (const auto& c : f.clauses) {
    for (const auto lit : c.literals) negated += lit.negated;
  }
  const double frac = static_cast<double>(negated) / (3.0 * static_cast<double>(f.clauses.size()));
  CHECK(std::abs(frac - 0.5) < 0.02);
}

TEST_CASE("clause predicates") {
  CHECK(clause({-1, -2, 3}).is_horn());
  CHECK_FALSE(clause({1, 2, 3}).is_horn());
  CHECK(clause({-1, -2}).is_horn());
  CHECK_FALSE(clause({1, 2}).is_tautology());
}

TEST_CASE("dpll examples") {
  CHECK(dpll_satisfiable(formula(1, {{1}, {-1}}), 1000).kind == SatVerdict::Kind::Unsatisfiable);
  const auto v = dpll_satisfiable(formula(2, {{1, 2}, {-1, 2}}), 1000);
  REQUIRE(v.satisfiable());
  CHECK(v.model[2]);
  const auto hard = generate_random_3sat(200, 4.26, 11);
  CHECK(dpll_satisfiable(hard, 1).kind == SatVerdict::Kind::Unknown);
}

TEST_CASE("dpll agrees with the truth table on small formulas") {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const Var n = static_cast<Var>(1 + seed % 12);
    const auto f = random_formula(n, 1 + seed % 40, 3, seed);
    const auto v = dpll_satisfiable(f, 1'000'000);
    REQUIRE(v.kind != SatVerdict::Kind::Unknown);
    CHECK(v.satisfiable() == brute_force_sat(f));
    if (v.satisfiable()) CHECK(satisfies(f, v.model));
  }
}

TEST_CASE("simplify examples") {
  auto s = simplify(formula(2, {{1}, {1, 2}}));
  CHECK_FALSE(s.conflict);
  CHECK(s.formula.clauses.empty());
  CHECK(s.removed_clauses == 2);

  s = simplify(formula(3, {{1, 2, 3}}));
  CHECK(s.formula.clauses.empty());
  CHECK(s.remaining_vars == 0);

  s = simplify(formula(3, {{1}, {-1}, {2, 3}}));
  CHECK(s.conflict);
  REQUIRE(s.formula.clauses.size() == 1);
  CHECK(s.formula.clauses[0].literals.empty());
}

TEST_CASE("simplify preserves satisfiability") {
  for (std::uint64_t seed = 1000; seed < 1200; ++seed) {
    const Var n = static_cast<Var>(3 + seed % 10);
    const auto f = random_formula(n, 2 + seed % 30, 3, seed);
    const auto s = simplify(f);
    const bool before = dpll_satisfiable(f, 1'000'000).satisfiable();
    if (s.conflict) {
      CHECK_FALSE(before);
      continue;
    }
    CHECK(before == brute_force_sat(s.formula));
  }
}

TEST_CASE("count_unsatisfied") {
  const auto f = formula(2, {{1, 2}, {-1}, {-2}});
  Assignment a = {false, true, false};
  CHECK(count_unsatisfied(f, a) == 1);
  CHECK_FALSE(satisfies(f, a));
}
