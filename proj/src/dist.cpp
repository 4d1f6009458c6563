#include "rtdlab/dist.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "rtdlab/error.hpp"

namespace rtdlab::dist {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSqrt2 = 1.41421356237309504880;
constexpr double kSqrt2Pi = 2.50662827463100050242;
constexpr double kGpExponentialBand = 1e-9;

bool near_exponential(double xi) { return std::abs(xi) < kGpExponentialBand; }

// log(1 + xi z) / xi, continuous through xi = 0.
double gp_log_term(double xi, double z) { return near_exponential(xi) ? z : std::log1p(xi * z) / xi; }

// Upper end of the GP support relative to the location (inf for xi >= 0).
double gp_support_width(const DistParams& p) { return p.shape < 0 ? -p.scale / p.shape : kInf; }

}  // namespace

std::string to_string(Family family) {
  switch (family) {
    case Family::Lognormal: return "lognormal";
    case Family::Weibull: return "weibull";
    case Family::GP: return "gp";
  }
  return "unknown";
}

Family parse_family(std::string_view name) {
  if (name == "lognormal") return Family::Lognormal;
  if (name == "weibull") return Family::Weibull;
  if (name == "gp") return Family::GP;
  throw DataError("unknown distribution family '" + std::string(name) + "'");
}

void validate(Family family, const DistParams& p) {
  const bool finite = std::isfinite(p.shape) && std::isfinite(p.scale) && std::isfinite(p.location);
  if (!finite) throw DataError(to_string(family) + ": non-finite parameter");
  switch (family) {
    case Family::Lognormal:
      if (!(p.shape > 0)) throw DataError("lognormal: sigma must be positive");
      if (p.location != 0.0) throw DataError("lognormal: location must be 0");
      return;
    case Family::Weibull:
      if (!(p.shape > 0)) throw DataError("weibull: shape must be positive");
      break;
    case Family::GP: break;
  }
  if (!(p.scale > 0)) throw DataError(to_string(family) + ": scale must be positive");
  if (!(p.location >= 0)) throw DataError(to_string(family) + ": location must be non-negative");
}

double cdf(Family family, const DistParams& p, double x) {
  switch (family) {
    case Family::Lognormal:
      if (x <= 0) return 0.0;
      return 0.5 * std::erfc(-(std::log(x) - p.scale) / (p.shape * kSqrt2));
    case Family::Weibull: {
      if (x <= p.location) return 0.0;
      const double z = (x - p.location) / p.scale;
      return -std::expm1(-std::pow(z, p.shape));
    }
    case Family::GP: {
      if (x <= p.location) return 0.0;
      const double z = (x - p.location) / p.scale;
      if (z * p.scale >= gp_support_width(p)) return 1.0;
      return -std::expm1(-gp_log_term(p.shape, z));
    }
  }
  return 0.0;
}

double survival(Family family, const DistParams& p, double x) {
  switch (family) {
    case Family::Lognormal:
      if (x <= 0) return 1.0;
      return 0.5 * std::erfc((std::log(x) - p.scale) / (p.shape * kSqrt2));
    case Family::Weibull: {
      if (x <= p.location) return 1.0;
      const double z = (x - p.location) / p.scale;
      return std::exp(-std::pow(z, p.shape));
    }
    case Family::GP: {
      if (x <= p.location) return 1.0;
      const double z = (x - p.location) / p.scale;
      if (z * p.scale >= gp_support_width(p)) return 0.0;
      return std::exp(-gp_log_term(p.shape, z));
    }
  }
  return 1.0;
}

double pdf(Family family, const DistParams& p, double x) {
  switch (family) {
    case Family::Lognormal: {
      if (x <= 0) return 0.0;
      const double u = (std::log(x) - p.scale) / p.shape;
      return std::exp(-0.5 * u * u) / (x * p.shape * kSqrt2Pi);
    }
    case Family::Weibull: {
      if (x <= p.location) return 0.0;
      const double z = (x - p.location) / p.scale;
      const double zk = std::pow(z, p.shape);
      return p.shape / p.scale * zk / z * std::exp(-zk);
    }
    case Family::GP: {
      if (x <= p.location) return 0.0;
      const double z = (x - p.location) / p.scale;
      if (z * p.scale >= gp_support_width(p)) return 0.0;
      if (near_exponential(p.shape)) return std::exp(-z) / p.scale;
      return std::exp(-(1.0 / p.shape + 1.0) * std::log1p(p.shape * z)) / p.scale;
    }
  }
  return 0.0;
}

double quantile(Family family, const DistParams& p, double q) {
  if (!(q > 0 && q < 1)) throw DataError("quantile: level must lie in (0, 1)");
  switch (family) {
    case Family::Lognormal:
      return std::exp(p.scale - p.shape * kSqrt2 * boost::math::erfc_inv(2.0 * q));
    case Family::Weibull:
      return p.location + p.scale * std::pow(-std::log1p(-q), 1.0 / p.shape);
    case Family::GP: {
      const double log_survival = std::log1p(-q);
      if (near_exponential(p.shape)) return p.location - p.scale * log_survival;
      return p.location + p.scale * std::expm1(-p.shape * log_survival) / p.shape;
    }
  }
  return 0.0;
}

double mean(Family family, const DistParams& p) {
  switch (family) {
    case Family::Lognormal: return std::exp(p.scale + 0.5 * p.shape * p.shape);
    case Family::Weibull: return p.location + p.scale * std::tgamma(1.0 + 1.0 / p.shape);
    case Family::GP: return p.shape < 1.0 ? p.location + p.scale / (1.0 - p.shape) : kInf;
  }
  return kInf;
}

double log_likelihood(Family family, const DistParams& p, std::span<const double> samples) {
  double ll = 0.0;
  for (const double x : samples) {
    const double d = pdf(family, p, x);
    if (!(d > 0)) return -kInf;
    ll += std::log(d);
  }
  return ll;
}

double fitted_location(std::span<const double> samples) {
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  const double delta = (*hi - *lo) / (2.0 * static_cast<double>(samples.size()));
  return std::max(0.0, *lo - delta);
}

namespace {

void check_samples(std::span<const double> samples) {
  if (samples.size() < kMinSamples) {
    throw DataError("fit: need at least " + std::to_string(kMinSamples) + " samples, got " +
                    std::to_string(samples.size()));
  }
  for (const double x : samples) {
    if (!(x > 0) || !std::isfinite(x)) throw DataError("fit: samples must be positive and finite");
  }
  const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
  if (*lo == *hi) throw DataError("fit: degenerate sample (all values equal)");
}

DistParams fit_lognormal(std::span<const double> samples) {
  const double n = static_cast<double>(samples.size());
  double sum = 0.0;
  for (const double x : samples) sum += std::log(x);
  const double mu = sum / n;
  double ss = 0.0;
  for (const double x : samples) ss += (std::log(x) - mu) * (std::log(x) - mu);
  return {std::sqrt(ss / n), mu, 0.0};
}

// Profile-likelihood Weibull fit on positive data y. With z = ln y - mean(ln y)
// the shape solves g(k) = sum(z e^{kz}) / sum(e^{kz}) - 1/k = 0, and g is
// strictly increasing.
DistParams fit_weibull_shifted(std::span<const double> samples) {
  const double location = fitted_location(samples);
  std::vector<double> z(samples.size());
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = std::log(samples[i] - location);
  const double center = std::accumulate(z.begin(), z.end(), 0.0) / static_cast<double>(z.size());
  for (auto& v : z) v -= center;
  const double z_max = *std::max_element(z.begin(), z.end());

  auto eval = [&](double k, double& g, double& dg) {
    double s0 = 0.0, s1 = 0.0, s2 = 0.0;
    for (const double v : z) {
      const double w = std::exp(k * (v - z_max));
      s0 += w;
      s1 += w * v;
      s2 += w * v * v;
    }
    const double m1 = s1 / s0;
    g = m1 - 1.0 / k;
    dg = (s2 / s0 - m1 * m1) + 1.0 / (k * k);
  };

  double lo = 1e-3, hi = 1.0, g = 0.0, dg = 0.0;
  eval(lo, g, dg);
  while (g > 0 && lo > 1e-12) {
    lo *= 0.1;
    eval(lo, g, dg);
  }
  eval(hi, g, dg);
  while (g < 0 && hi < 1e6) {
    hi *= 2.0;
    eval(hi, g, dg);
  }

  double k = std::clamp(1.0, lo, hi);
  for (int iter = 0; iter < 200; ++iter) {
    eval(k, g, dg);
    if (g < 0) lo = k; else hi = k;
    if (std::abs(g) < 1e-14 || (hi - lo) < 1e-14 * k) break;
    double next = k - g / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - k) < 1e-15 * k) {
      k = next;
      break;
    }
    k = next;
  }

  // scale = (mean y^k)^(1/k), evaluated in the centred log domain.
  double s0 = 0.0;
  for (const double v : z) s0 += std::exp(k * (v - z_max));
  const double log_mean = k * z_max + std::log(s0 / static_cast<double>(z.size()));
  return {k, std::exp(center + log_mean / k), location};
}

using Objective = std::function<double(const std::array<double, 2>&)>;

// Plain Nelder-Mead on two variables; returns the best vertex.
std::array<double, 2> nelder_mead(const Objective& f, std::array<double, 2> start, double step) {
  using Point = std::array<double, 2>;
  std::array<Point, 3> x = {start, Point{start[0] + step, start[1]}, Point{start[0], start[1] + step}};
  std::array<double, 3> fx{};
  for (int i = 0; i < 3; ++i) fx[i] = f(x[i]);

  auto blend = [](const Point& a, const Point& b, double t) {
    return Point{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
  };

  for (int iter = 0; iter < 5000; ++iter) {
    std::array<int, 3> order = {0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) { return fx[a] < fx[b]; });
    const int best = order[0], mid = order[1], worst = order[2];
    const double spread = std::abs(fx[worst] - fx[best]);
    const double size = std::max({std::abs(x[worst][0] - x[best][0]), std::abs(x[worst][1] - x[best][1]),
                                  std::abs(x[mid][0] - x[best][0]), std::abs(x[mid][1] - x[best][1])});
    if (std::isfinite(fx[worst]) && spread <= 1e-13 * (1.0 + std::abs(fx[best])) && size < 1e-10) break;

    const Point centroid{0.5 * (x[best][0] + x[mid][0]), 0.5 * (x[best][1] + x[mid][1])};
    const Point reflected = blend(centroid, x[worst], -1.0);
    const double fr = f(reflected);
    if (fr < fx[best]) {
      const Point expanded = blend(centroid, x[worst], -2.0);
      const double fe = f(expanded);
      if (fe < fr) {
        x[worst] = expanded;
        fx[worst] = fe;
      } else {
        x[worst] = reflected;
        fx[worst] = fr;
      }
      continue;
    }
    if (fr < fx[mid]) {
      x[worst] = reflected;
      fx[worst] = fr;
      continue;
    }
    const bool outside = fr < fx[worst];
    const Point contracted = outside ? blend(centroid, reflected, 0.5) : blend(centroid, x[worst], 0.5);
    const double fc = f(contracted);
    if (fc < (outside ? fr : fx[worst])) {
      x[worst] = contracted;
      fx[worst] = fc;
      continue;
    }
    for (const int i : {mid, worst}) {
      x[i] = blend(x[best], x[i], 0.5);
      fx[i] = f(x[i]);
    }
  }
  const auto best = std::min_element(fx.begin(), fx.end()) - fx.begin();
  return x[static_cast<std::size_t>(best)];
}

DistParams fit_gp_shifted(std::span<const double> samples) {
  const double location = fitted_location(samples);
  std::vector<double> y(samples.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = samples[i] - location;
  const double n = static_cast<double>(y.size());
  const double y_max = *std::max_element(y.begin(), y.end());

  // Work relative to the sample mean so the simplex step is scale-free.
  const double m = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double var = 0.0;
  for (const double v : y) var += (v - m) * (v - m);
  var /= n;

  auto neg_ll = [&](const std::array<double, 2>& theta) {
    const double xi = theta[0];
    const double scale = m * std::exp(theta[1]);
    if (!(xi > -0.5) || !(scale > 0) || !std::isfinite(scale)) return kInf;
    if (xi < 0 && y_max >= -scale / xi) return kInf;
    double sum = 0.0;
    for (const double v : y) sum += gp_log_term(xi, v / scale) * (1.0 + xi);
    if (near_exponential(xi)) {
      sum = 0.0;
      for (const double v : y) sum += v / scale;
    }
    const double nll = n * std::log(scale) + sum;
    return std::isfinite(nll) ? nll : kInf;
  };

  double xi0 = var > 0 ? 0.5 * (1.0 - m * m / var) : 0.0;
  xi0 = std::clamp(xi0, -0.4, 0.9);
  double scale0 = 0.5 * m * (m * m / var + 1.0);
  if (!(scale0 > 0) || !std::isfinite(scale0)) scale0 = m;
  std::array<double, 2> theta{xi0, std::log(scale0 / m)};
  if (!std::isfinite(neg_ll(theta))) theta = {0.1, 0.0};

  for (int round = 0; round < 3; ++round) theta = nelder_mead(neg_ll, theta, round == 0 ? 0.1 : 0.01);
  return {theta[0], m * std::exp(theta[1]), location};
}

}  // namespace

DistParams fit_mle(Family family, std::span<const double> samples) {
  check_samples(samples);
  switch (family) {
    case Family::Lognormal: return fit_lognormal(samples);
    case Family::Weibull: return fit_weibull_shifted(samples);
    case Family::GP: return fit_gp_shifted(samples);
  }
  throw DataError("fit: unknown family");
}

double kolmogorov_survival(double lambda) {
  if (!(lambda > 0)) return 1.0;
  constexpr int kMaxTerms = 100;
  constexpr double kTermFloor = 1e-10;
  constexpr double kPi2 = 9.86960440108935861883;
  if (lambda < 1.18) {
    // Dual theta-function form of P(K <= lambda); converges fast for small lambda.
    double sum = 0.0;
    for (int j = 1; j <= kMaxTerms; ++j) {
      const double odd = 2.0 * j - 1.0;
      const double term = std::exp(-odd * odd * kPi2 / (8.0 * lambda * lambda));
      sum += term;
      if (term < kTermFloor) break;
    }
    return std::clamp(1.0 - kSqrt2Pi / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  for (int j = 1; j <= kMaxTerms; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    sum += (j % 2 == 1) ? term : -term;
    if (term < kTermFloor) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

double ks_statistic(std::span<const double> samples, Family family, const DistParams& p) {
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(family, p, sorted[i]);
    const double upper = static_cast<double>(i + 1) / n;
    const double lower = static_cast<double>(i) / n;
    d = std::max({d, std::abs(upper - f), std::abs(lower - f)});
  }
  return d;
}

KsResult ks_test(std::span<const double> samples, Family family, const DistParams& p) {
  if (samples.size() < kMinSamples) throw DataError("ks_test: need at least 10 samples");
  KsResult r;
  r.statistic = ks_statistic(samples, family, p);
  r.p_value = kolmogorov_survival(std::sqrt(static_cast<double>(samples.size())) * r.statistic);
  return r;
}

FitResult fit_and_test(Family family, std::span<const double> samples) {
  FitResult r;
  r.family = family;
  r.params = fit_mle(family, samples);
  const auto ks = ks_test(samples, family, r.params);
  r.ks_stat = ks.statistic;
  r.p_value = ks.p_value;
  r.log_likelihood = log_likelihood(family, r.params, samples);
  return r;
}

namespace {

// integral_lo^hi S(x) dx, with lo the start of the support. Substituting
// x = lo + e^w makes the integrand smooth even where the density blows up at
// lo (Weibull shapes below one); the first 1e-12 of the range contributes
// its length, since S is 1 there to that precision.
double integrate_survival(Family family, const DistParams& p, double lo, double hi) {
  if (hi <= lo) return 0.0;
  const double span = hi - lo;
  const double head = span * 1e-12;
  auto g = [&](double w) {
    const double u = std::exp(w);
    return u * survival(family, p, lo + u);
  };
  return head + boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, std::log(head), std::log(span), 15,
                                                                              1e-10);
}

}  // namespace

double expected_runtime_with_restart(Family family, const DistParams& p, double t) {
  validate(family, p);
  if (!(t > 0) || !std::isfinite(t)) throw DataError("expected_runtime_with_restart: t must be positive");

  if (family != Family::Lognormal && p.location > 0) {
    const double anchor = quantile(family, p, kExtensionAnchor);
    if (t < anchor) {
      const double rate = pdf(family, p, anchor) / kExtensionAnchor;
      if (!(rate > 0) || !std::isfinite(rate)) {
        throw DataError("expected_runtime_with_restart: no lower-tail extension at this location");
      }
      const double f_t = kExtensionAnchor * std::exp(rate * (t - anchor));
      if (!(f_t > 0)) return kInf;
      const double mass_below =
          kExtensionAnchor / rate * (std::exp(rate * (t - anchor)) - std::exp(-rate * anchor));
      return (t - mass_below) / f_t;
    }
  }

  const double f_t = cdf(family, p, t);
  if (!(f_t > 0)) throw DataError("expected_runtime_with_restart: F(t) = 0");
  const double start = family == Family::Lognormal ? 0.0 : p.location;
  return (start + integrate_survival(family, p, start, t)) / f_t;
}

RestartRecommendation optimal_restart_time(Family family, const DistParams& p, const RestartSearchOptions& options) {
  validate(family, p);
  RestartRecommendation rec;
  rec.unrestarted_mean = mean(family, p);

  const double base = family == Family::Lognormal ? 0.0 : p.location;
  const double top = quantile(family, p, options.upper_quantile) - base;
  const double bottom = std::max(quantile(family, p, kExtensionAnchor) - base, top * 1e-12);
  if (!(top > bottom) || options.grid_points < 3) return rec;

  auto runtime_at = [&](double log_offset) {
    const double t = base + std::exp(log_offset);
    if (!(cdf(family, p, t) > 0)) return kInf;
    return expected_runtime_with_restart(family, p, t);
  };

  const double log_lo = std::log(bottom);
  const double log_hi = std::log(top);
  const std::size_t n = options.grid_points;
  std::vector<double> grid(n), values(n);
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = log_lo + (log_hi - log_lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    values[i] = runtime_at(grid[i]);
    if (values[i] < values[best]) best = i;
  }

  // Golden-section search between the neighbours of the best grid point.
  double a = grid[best == 0 ? 0 : best - 1];
  double b = grid[best + 1 < n ? best + 1 : n - 1];
  constexpr double kInvPhi = 0.61803398874989484820;
  double c = b - kInvPhi * (b - a);
  double d = a + kInvPhi * (b - a);
  double fc = runtime_at(c), fd = runtime_at(d);
  while (b - a > options.relative_tolerance) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = runtime_at(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = runtime_at(d);
    }
  }
  double best_log = grid[best];
  double best_value = values[best];
  if (fc < best_value) {
    best_log = c;
    best_value = fc;
  }
  if (fd < best_value) {
    best_log = d;
    best_value = fd;
  }

  const bool improves = !std::isfinite(rec.unrestarted_mean)
                            ? std::isfinite(best_value)
                            : best_value < rec.unrestarted_mean * (1.0 - options.min_improvement);
  if (improves) rec.restart_at = RestartAt{base + std::exp(best_log), best_value};
  return rec;
}

}  // namespace rtdlab::dist
