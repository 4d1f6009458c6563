#pragma once

// Reference implementations written independently of the library, used as
// test oracles. Deliberately naive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

namespace oracles {

// Direct transcription of the recursive Luby definition, memoized.
inline std::vector<std::uint64_t> luby_recursive(std::uint64_t count) {
  std::vector<std::uint64_t> t(count + 1, 0);
  for (std::uint64_t i = 1; i <= count; ++i) {
    std::uint64_t k = 1;
    while ((std::uint64_t{1} << k) - 1 < i) ++k;
    if (i == (std::uint64_t{1} << k) - 1) {
      t[i] = std::uint64_t{1} << (k - 1);
    } else {
      t[i] = t[i - (std::uint64_t{1} << (k - 1)) + 1];
    }
  }
  return {t.begin() + 1, t.end()};
}

// Composite Simpson rule with n (even) panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return s * h / 3.0;
}

// Restart estimator by double loop over candidate cutoffs and partial sums.
// `total` counts censored runs too.
inline std::pair<double, double> empirical_optimal(const std::vector<double>& xs, std::size_t total) {
  double best_x = 0.0, best = std::numeric_limits<double>::infinity();
  for (const double x : xs) {
    double sum = 0.0;
    std::size_t below = 0;
    for (const double y : xs) {
      if (y <= x) {
        sum += y;
        ++below;
      }
    }
    const double p = static_cast<double>(below) / static_cast<double>(total);
    const double e = (1.0 - p) / p * x + sum / static_cast<double>(below);
    if (e < best || (e == best && x < best_x)) {
      best = e;
      best_x = x;
    }
  }
  return {best_x, best};
}

// Two-sided exact signed-rank p-value by enumerating all 2^n sign patterns.
// Ranks are doubled so midranks stay integral.
inline double wilcoxon_enumerated(const std::vector<double>& diffs) {
  std::vector<double> d;
  for (const double v : diffs) {
    if (v != 0.0) d.push_back(v);
  }
  const std::size_t n = d.size();
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return std::abs(d[a]) < std::abs(d[b]); });
  std::vector<long> rank2(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && std::abs(d[idx[j + 1]]) == std::abs(d[idx[i]])) ++j;
    for (std::size_t k = i; k <= j; ++k) rank2[idx[k]] = static_cast<long>(i + j + 2);
    i = j + 1;
  }
  long observed = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) observed += rank2[i];
  }
  std::uint64_t le = 0, ge = 0;
  const std::uint64_t patterns = std::uint64_t{1} << n;
  for (std::uint64_t m = 0; m < patterns; ++m) {
    long w = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((m >> i) & 1U) w += rank2[i];
    }
    le += w <= observed;
    ge += w >= observed;
  }
  const double tail = static_cast<double>(std::min(le, ge)) / static_cast<double>(patterns);
  return std::min(1.0, 2.0 * tail);
}

// Student t density.
inline double t_pdf(double x, double nu) {
  return std::exp(std::lgamma((nu + 1) / 2) - std::lgamma(nu / 2)) / std::sqrt(nu * M_PI) *
         std::pow(1 + x * x / nu, -(nu + 1) / 2);
}

// Two-sided tail of Student t by integrating the density.
inline double t_two_sided(double t, double nu) {
  const double a = std::abs(t);
  const double mass = simpson([nu](double x) { return t_pdf(x, nu); }, 0.0, a, 200000);
  return std::max(0.0, 1.0 - 2.0 * mass);
}

}  // namespace oracles
