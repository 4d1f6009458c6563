// Serial reference vs OpenMP for the two parallel kernels. Also confirms the
// outputs agree, since a fast wrong answer is no answer.
//
//   bench_kernels [workers] [vars] [runs]

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "rtdlab/cnf.hpp"
#include "rtdlab/eval.hpp"
#include "rtdlab/parallel.hpp"
#include "rtdlab/restart.hpp"
#include "rtdlab/rng.hpp"
#include "rtdlab/rtd.hpp"

using namespace rtdlab;

namespace {

template <class F>
double time_it(F&& f) {
  const auto start = std::chrono::steady_clock::now();
  f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void line(const char* kernel, double serial, double parallel, int workers, bool same) {
  std::printf("%-14s serial %8.3f s  omp(%d) %8.3f s  speedup %5.2fx  %s\n", kernel, serial, workers, parallel,
              serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  const int workers = argc > 1 ? std::atoi(argv[1]) : default_workers();
  const auto vars = static_cast<cnf::Var>(argc > 2 ? std::atoi(argv[2]) : 150);
  const std::uint64_t runs = argc > 3 ? std::strtoull(argv[3], nullptr, 10) : 200;

  // First satisfiable instances of the stream, as the study would pick them.
  std::vector<cnf::Formula> formulas;
  for (std::uint64_t i = 0; formulas.size() < 8; ++i) {
    auto f = cnf::generate_random_3sat(vars, 4.2, substream_seed(99, i));
    if (cnf::dpll_satisfiable(f, 5'000'000).kind == cnf::SatVerdict::Kind::Satisfiable) formulas.push_back(std::move(f));
  }
  std::printf("%zu instances, %u vars, %llu runs, %d workers\n", formulas.size(), vars,
              static_cast<unsigned long long>(runs), workers);

  probsat::SolverConfig cfg;
  std::vector<rtd::RtdSample> a, b;
  const double s1 = time_it([&] {
    for (const auto& f : formulas) a.push_back(rtd::sample_rtd_serial(f, cfg, runs, 5, 10'000'000));
  });
  const double p1 = time_it([&] {
    for (const auto& f : formulas) b.push_back(rtd::sample_rtd(f, cfg, runs, 5, 10'000'000, workers));
  });
  line("sample_rtd", s1, p1, workers, a == b);

  std::vector<eval::H2HInstance> inst;
  for (std::size_t i = 0; i < formulas.size(); ++i) {
    inst.push_back({"b" + std::to_string(i), formulas[i],
                    {restart::NoRestart{}, restart::parse_policy("luby:20n", vars)}});
  }
  const std::vector<std::string> columns = {"none", "luby:20n"};
  eval::H2HOptions o;
  o.runs_per_instance = runs / 2;
  o.budget = 10'000'000;
  o.master_seed = 6;
  eval::H2HResult ra, rb;
  const double s2 = time_it([&] { ra = eval::head_to_head_serial(inst, columns, o); });
  o.workers = workers;
  const double p2 = time_it([&] { rb = eval::head_to_head(inst, columns, o); });
  bool same = ra.rows.size() == rb.rows.size();
  for (std::size_t i = 0; same && i < ra.rows.size(); ++i) {
    for (std::size_t c = 0; c < ra.rows[i].cells.size(); ++c) {
      same &= ra.rows[i].cells[c].mean_flips == rb.rows[i].cells[c].mean_flips &&
              ra.rows[i].cells[c].timeouts == rb.rows[i].cells[c].timeouts;
    }
  }
  line("head_to_head", s2, p2, workers, same);
  return same && a == b ? 0 : 1;
}
