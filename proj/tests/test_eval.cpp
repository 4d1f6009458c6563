#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "rtdlab/error.hpp"
#include "rtdlab/eval.hpp"
#include "rtdlab/rng.hpp"

using namespace rtdlab;
using namespace rtdlab::eval;
using dist::Family;

namespace {

std::vector<double> exps(std::initializer_list<double> logs) {
  std::vector<double> out;
  for (const double v : logs) out.push_back(std::exp(v));
  return out;
}

// Normal approximation written out from the textbook moments, with the
// continuity correction and no ties.
double normal_wilcoxon(double w, double n) {
  const double mean = n * (n + 1) / 4;
  const double sd = std::sqrt(n * (n + 1) * (2 * n + 1) / 24);
  const double z = (std::abs(w - mean) - 0.5) / sd;
  return std::erfc(z / std::sqrt(2.0));
}

rtd::WinnerSelection toy_fits(const dist::DistParams& w, double pw, const dist::DistParams& gp, double pgp) {
  rtd::WinnerSelection s;
  s.fits[0] = {Family::Weibull, w, 0.1, pw, 0.0};
  s.fits[1] = {Family::Lognormal, {0.3, 1.0, 0.0}, 0.1, 0.01, 0.0};
  s.fits[2] = {Family::GP, gp, 0.1, pgp, 0.0};
  s.winner = pw >= pgp ? Family::Weibull : Family::GP;
  return s;
}

}  // namespace

TEST_CASE("speedup and geometric mean") {
  CHECK(speedup(10, 5) == 2.0);
  const std::vector<double> a = {2, 0.5}, b = {4, 1};
  CHECK(geometric_mean(a) == doctest::Approx(1.0));
  CHECK(geometric_mean(b) == doctest::Approx(2.0));
  CHECK_THROWS_AS((void)speedup(0, 1), DataError);
  const std::vector<double> bad = {1, -1};
  CHECK_THROWS_AS((void)geometric_mean(bad), DataError);
  CHECK_THROWS_AS((void)geometric_mean(std::vector<double>{}), DataError);
}

TEST_CASE("geometric mean is permutation invariant and multiplicative") {
  Rng rng(1);
  std::vector<double> s(17);
  for (auto& v : s) v = 0.1 + 5 * rng.uniform();
  const double g = geometric_mean(s);
  auto r = s;
  std::reverse(r.begin(), r.end());
  CHECK(geometric_mean(r) == doctest::Approx(g).epsilon(1e-12));
  for (auto& v : r) v *= 3.5;
  CHECK(geometric_mean(r) == doctest::Approx(3.5 * g).epsilon(1e-12));
}

TEST_CASE("paired t-test") {
  const std::vector<double> same = {1, 2, 3, 4};
  CHECK(paired_t_test(same, same).p_value == 1.0);
  const auto x = exps({2, 3, 4, 5, 6});
  const auto y = exps({1, 2, 3, 4, 5});
  CHECK(paired_t_test(x, y).p_value == kPValueFloor);

  // Textbook pairs: differences of logs.
  const auto a = exps({5.1, 4.8, 6.3, 5.9, 5.5});
  const auto b = exps({4.7, 4.9, 5.6, 5.2, 5.4});
  const std::vector<double> d = {0.4, -0.1, 0.7, 0.7, 0.1};
  const double mean = std::accumulate(d.begin(), d.end(), 0.0) / 5;
  double ss = 0;
  for (const double v : d) ss += (v - mean) * (v - mean);
  const double t = mean / std::sqrt(ss / 4 / 5);
  const auto r = paired_t_test(a, b);
  CHECK(r.statistic == doctest::Approx(t).epsilon(1e-10));
  CHECK(r.p_value == doctest::Approx(oracles::t_two_sided(t, 4)).epsilon(1e-6));
  CHECK_THROWS_AS((void)paired_t_test(std::vector<double>{1}, std::vector<double>{1}), DataError);
}

TEST_CASE("wilcoxon small exact cases") {
  const std::vector<double> x = {2, 3, 4, 5, 6}, y = {1, 1, 1, 1, 1};
  const auto r = wilcoxon_signed_rank(x, y);
  CHECK(r.w_plus == 15);
  CHECK(r.exact);
  CHECK(r.p_value == doctest::Approx(0.0625).epsilon(1e-12));
  CHECK_THROWS_AS((void)wilcoxon_signed_rank(y, y), DataError);
  const std::vector<double> four = {1, 2, 3, 4, 0}, zero(5, 0.0);
  CHECK_THROWS_AS((void)wilcoxon_signed_rank(four, zero), DataError);
}

TEST_CASE("wilcoxon symmetry") {
  std::vector<double> x = {1.3, 2.9, 0.4, 5.5, 3.1, 2.2};
  std::vector<double> y = {0.5, 3.8, 1.1, 4.0, 2.0, 2.9};
  const auto a = wilcoxon_signed_rank(x, y);
  const auto b = wilcoxon_signed_rank(y, x);
  CHECK(a.w_plus + b.w_plus == doctest::Approx(6.0 * 7 / 2));
  CHECK(a.p_value == doctest::Approx(b.p_value));
}

TEST_CASE("wilcoxon exact p matches full enumeration") {
  Rng rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 5 + rng.below(8);
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = static_cast<double>(rng.below(7));
      y[i] = static_cast<double>(rng.below(7)) + (rng.coin() ? 0.0 : 0.5);
    }
    std::vector<double> d(n);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < n; ++i) {
      d[i] = x[i] - y[i];
      nonzero += d[i] != 0.0;
    }
    if (nonzero < kWilcoxonMinPairs) continue;
    const auto r = wilcoxon_signed_rank(x, y);
    CHECK(r.exact);
    CHECK(r.p_value == doctest::Approx(oracles::wilcoxon_enumerated(d)).epsilon(1e-12));
  }
}

TEST_CASE("wilcoxon normal approximation") {
  std::vector<double> x(25), y(25, 0.0);
  std::iota(x.begin(), x.end(), 1.0);
  const auto r = wilcoxon_signed_rank(x, y);
  CHECK_FALSE(r.exact);
  CHECK(r.p_value < 1e-4);

  // At the n = 20 boundary the exact p and the textbook approximation agree.
  std::vector<double> a(20), b(20, 0.0);
  for (int i = 0; i < 20; ++i) a[i] = (i % 3 == 0 ? -1.0 : 1.0) * (i + 1);
  const auto e = wilcoxon_signed_rank(a, b);
  REQUIRE(e.exact);
  CHECK(e.p_value > 0.01);
  CHECK(std::abs(normal_wilcoxon(e.w_plus, 20) / e.p_value - 1) < 0.10);
}

TEST_CASE("subset table on a two-instance toy") {
  // Both instances share the sample {1, 7}: restarting at any t in [1, 7)
  // costs 2 flips against a plain mean of 4.
  rtd::RtdSample s;
  s.flips = {1, 7};
  s.per_run_timeout = 100;
  const dist::DistParams restarting_w{0.5, 1.0, 1.0};
  const dist::DistParams flat_w{2.0, 3.0, 0.0};
  const dist::DistParams restarting_gp{0.9, 1.0, 1.0};
  const dist::DistParams flat_gp{-0.4, 5.0, 0.0};

  for (const auto& [family, p] : {std::pair{Family::Weibull, restarting_w}, std::pair{Family::GP, restarting_gp}}) {
    const auto rec = dist::optimal_restart_time(family, p);
    REQUIRE(rec.restarts());
    REQUIRE(rec.restart_at->t >= 1.0);
    REQUIRE(rec.restart_at->t < 7.0);
  }
  for (const auto& [family, p] : {std::pair{Family::Weibull, flat_w}, std::pair{Family::GP, flat_gp},
                                  std::pair{Family::Lognormal, dist::DistParams{0.3, 1.0, 0.0}}}) {
    REQUIRE_FALSE(dist::optimal_restart_time(family, p).restarts());
  }

  std::vector<InstanceFits> instances = {{"a", s, toy_fits(restarting_w, 0.9, flat_gp, 0.1)},
                                         {"b", s, toy_fits(flat_w, 0.9, restarting_gp, 0.1)}};
  CHECK(*fitted_speedup(instances[0], Family::Weibull) == doctest::Approx(2.0));
  CHECK(*fitted_speedup(instances[0], Family::GP) == 1.0);

  const auto table = subset_speedup_table(instances);
  REQUIRE(table.rows.size() == 8);
  CHECK(table.rows[0].label == "{}");
  CHECK(table.rows[0].speedup_best == doctest::Approx(2.0));
  const auto row = std::find_if(table.rows.begin(), table.rows.end(), [](const auto& r) { return r.label == "{W,GP}"; });
  REQUIRE(row != table.rows.end());
  CHECK(row->speedup_best == doctest::Approx(2.0));
  CHECK(row->ks_best == doctest::Approx(std::sqrt(2.0)));
  for (const auto& r : table.rows) CHECK(r.speedup_best >= r.ks_best - 1e-12);
  CHECK(table.included.size() == 2);

  instances.push_back({"c", s, toy_fits(flat_w, 0.01, flat_gp, 0.01)});
  instances.back().fits.winner.reset();
  const auto t2 = subset_speedup_table(instances);
  CHECK(t2.excluded_no_winner == std::vector<std::string>{"c"});
}

TEST_CASE("subset labels") {
  const std::vector<Family> s = {Family::Lognormal, Family::Weibull, Family::GP};
  CHECK(subset_label(s) == "{L,W,GP}");
  CHECK(subset_label(std::vector<Family>{}) == "{}");
}

TEST_CASE("identical policies give unit speedups") {
  std::vector<H2HInstance> inst;
  for (std::uint64_t k = 0; k < 6; ++k) {
    inst.push_back({"i" + std::to_string(k), cnf::generate_random_3sat(50, 4.1, 300 + k),
                    {restart::Luby{100}, restart::Luby{100}}});
  }
  const std::vector<std::string> cols = {"a", "b"};
  H2HOptions opts;
  opts.runs_per_instance = 10;
  opts.budget = 200'000;
  opts.master_seed = 4;
  const auto r = head_to_head(inst, cols, opts);
  const auto c = compare(r, 0, 1);
  for (const auto& rec : c.records) CHECK(rec.speedup == 1.0);
  CHECK(c.geometric_mean == 1.0);
  CHECK(c.t_test.p_value == 1.0);
  CHECK_FALSE(c.wilcoxon);
}

TEST_CASE("head to head is reproducible and worker independent") {
  std::vector<H2HInstance> inst;
  for (std::uint64_t k = 0; k < 4; ++k) {
    inst.push_back({"i" + std::to_string(k), cnf::generate_random_3sat(60, 4.2, 400 + k),
                    {restart::NoRestart{}, restart::FixedCutoff{300}, restart::Luby{60}}});
  }
  const std::vector<std::string> cols = {"none", "fixed", "luby"};
  H2HOptions opts;
  opts.runs_per_instance = 8;
  opts.budget = 100'000;
  opts.master_seed = 9;
  opts.workers = 4;
  const auto a = head_to_head(inst, cols, opts);
  const auto b = head_to_head_serial(inst, cols, opts);
  REQUIRE(a.rows.size() == b.rows.size());
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    for (std::size_t p = 0; p < 3; ++p) {
      CHECK(a.rows[i].cells[p].mean_flips == b.rows[i].cells[p].mean_flips);
      CHECK(a.rows[i].cells[p].timeouts == b.rows[i].cells[p].timeouts);
    }
  }
  CHECK(scatter_csv(a, 0, 2) == scatter_csv(b, 0, 2));
  CHECK(scatter_csv(a, 0, 2).rfind("instance_id,log_mean_none,log_mean_luby\n", 0) == 0);
}

TEST_CASE("cells average run_with_policy outcomes with common seeds") {
  const H2HInstance inst{"x", cnf::generate_random_3sat(50, 4.2, 77), {restart::NoRestart{}, restart::Luby{40}}};
  const std::vector<std::string> cols = {"none", "luby"};
  H2HOptions opts;
  opts.runs_per_instance = 5;
  opts.budget = 50'000;
  opts.master_seed = 13;
  const auto r = head_to_head(std::span(&inst, 1), cols, opts);
  for (std::size_t p = 0; p < 2; ++p) {
    double total = 0;
    for (std::uint64_t run = 0; run < 5; ++run) {
      auto cfg = opts.solver;
      cfg.seed = h2h_run_seed(13, 0, run);
      total += static_cast<double>(restart::run_with_policy(inst.formula, cfg, inst.policies[p], 50'000).total_flips);
    }
    CHECK(r.rows[0].cells[p].mean_flips == doctest::Approx(total / 5));
  }
}

TEST_CASE("instances where a policy always times out are excluded") {
  const auto unsat = cnf::parse_dimacs(std::string_view("p cnf 1 2\n1 0\n-1 0\n"));
  std::vector<H2HInstance> inst = {{"u", unsat, {restart::NoRestart{}, restart::FixedCutoff{3}}},
                                   {"s", cnf::generate_random_3sat(40, 4.0, 5), {restart::NoRestart{}, restart::FixedCutoff{500}}}};
  const std::vector<std::string> cols = {"none", "fixed"};
  H2HOptions opts;
  opts.runs_per_instance = 4;
  opts.budget = 1000;
  const auto r = head_to_head(inst, cols, opts);
  CHECK(r.rows[0].excluded);
  CHECK(r.rows[0].cells[0].timeouts == 4);
  CHECK(r.rows[0].cells[0].mean_flips == 1000);
  const auto c = compare(r, 0, 1);
  for (const auto& rec : c.records) CHECK(rec.instance_id != "u");
}

TEST_CASE("comparison tallies restarting candidates") {
  H2HResult r;
  r.columns = {"luby", "pred"};
  const double base[] = {100, 200, 300, 400, 500, 600};
  for (int i = 0; i < 6; ++i) {
    H2HRow row;
    row.instance_id = std::to_string(i);
    row.policies = {"luby:10", i < 4 ? "fixed:50" : "none"};
    row.cells = {{base[i], 0}, {base[i] / 2, 0}};
    r.rows.push_back(row);
  }
  const auto c = compare(r, 0, 1);
  CHECK(c.geometric_mean == doctest::Approx(2.0));
  CHECK(c.restart_predicted == 4);
  CHECK(c.no_restart_predicted == 2);
  REQUIRE(c.wilcoxon);
  CHECK(c.wilcoxon->w_plus == 0);
  const auto cr = compare_restarting(r, 0, 1);
  CHECK(cr.records.size() == 4);
}
