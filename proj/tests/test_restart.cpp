#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "rtdlab/error.hpp"
#include "rtdlab/restart.hpp"

using namespace rtdlab;
using namespace rtdlab::restart;

namespace {

cnf::Formula unsat_toy() { return cnf::parse_dimacs(std::string_view("p cnf 1 2\n1 0\n-1 0\n")); }

}  // namespace

TEST_CASE("luby terms") {
  CHECK(luby_term(1) == 1);
  CHECK(luby_term(3) == 2);
  CHECK(luby_term(7) == 4);
  CHECK(luby_term(4) == 1);
  const std::vector<std::uint64_t> first = {1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8};
  for (std::size_t i = 0; i < first.size(); ++i) CHECK(luby_term(i + 1) == first[i]);
  CHECK_THROWS_AS((void)luby_term(0), DataError);
}

TEST_CASE("luby matches the recursive definition up to 2^15") {
  const auto expected = oracles::luby_recursive(1U << 15);
  for (std::uint64_t i = 1; i <= (1U << 15); ++i) REQUIRE(luby_term(i) == expected[i - 1]);
  for (unsigned k = 1; k <= 20; ++k) CHECK(luby_term((std::uint64_t{1} << k) - 1) == (std::uint64_t{1} << (k - 1)));
}

TEST_CASE("policy strings") {
  CHECK(to_string(NoRestart{}) == "none");
  CHECK(to_string(FixedCutoff{42}) == "fixed:42");
  CHECK(to_string(Luby{3}) == "luby:3");
  CHECK(parse_policy("none") == RestartPolicy{NoRestart{}});
  CHECK(parse_policy("fixed:17") == RestartPolicy{FixedCutoff{17}});
  CHECK(parse_policy("luby:20n", 150) == RestartPolicy{Luby{3000}});
  CHECK_THROWS_AS((void)parse_policy("fixed:0"), DataError);
  CHECK_THROWS_AS((void)parse_policy("geometric:2"), DataError);
  CHECK_THROWS_AS((void)parse_policy("luby:x"), DataError);
}

TEST_CASE("fixed cutoff budget arithmetic") {
  const auto r = run_with_policy(unsat_toy(), {}, FixedCutoff{10}, 35);
  CHECK_FALSE(r.solved);
  CHECK(r.per_try_flips == std::vector<std::uint64_t>{10, 10, 10, 5});
  CHECK(r.restarts == 3);
  CHECK(r.total_flips == 35);
}

TEST_CASE("luby budget arithmetic") {
  const auto r = run_with_policy(unsat_toy(), {}, Luby{2}, 12);
  CHECK(r.per_try_flips == std::vector<std::uint64_t>{2, 2, 4, 2, 2});
  CHECK(r.total_flips == 12);
}

TEST_CASE("NoRestart equals a single solve_once with the try-0 seed") {
  const auto f = cnf::generate_random_3sat(60, 4.2, 21);
  probsat::SolverConfig cfg;
  cfg.seed = 77;
  const auto r = run_with_policy(f, cfg, NoRestart{}, 50'000);
  probsat::SolverConfig once = cfg;
  once.seed = try_seed(cfg.seed, 0);
  once.max_flips = 50'000;
  const auto o = probsat::solve_once(f, once);
  CHECK(r.solved == o.solved);
  CHECK(r.total_flips == o.flips);
  CHECK(r.restarts == 0);
}

TEST_CASE("a cutoff beyond the budget behaves like NoRestart") {
  const auto f = cnf::generate_random_3sat(60, 4.2, 22);
  probsat::SolverConfig cfg;
  cfg.seed = 5;
  const auto a = run_with_policy(f, cfg, FixedCutoff{1'000'000}, 30'000);
  const auto b = run_with_policy(f, cfg, NoRestart{}, 30'000);
  CHECK(a.total_flips == b.total_flips);
  CHECK(a.solved == b.solved);
}

TEST_CASE("run_with_policy invariants") {
  const auto f = cnf::generate_random_3sat(80, 4.26, 23);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    probsat::SolverConfig cfg;
    cfg.seed = seed;
    for (const RestartPolicy& p : {RestartPolicy{FixedCutoff{200}}, RestartPolicy{Luby{50}}}) {
      const auto r = run_with_policy(f, cfg, p, 20'000);
      CHECK(r.total_flips <= 20'000);
      CHECK(r.total_flips == std::accumulate(r.per_try_flips.begin(), r.per_try_flips.end(), std::uint64_t{0}));
      CHECK(r.restarts + 1 == r.per_try_flips.size());
      CHECK((r.total_flips == 20'000) == !r.solved);
      const auto again = run_with_policy(f, cfg, p, 20'000);
      CHECK(again.per_try_flips == r.per_try_flips);
    }
  }
}
