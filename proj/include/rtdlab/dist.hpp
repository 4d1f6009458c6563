#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace rtdlab::dist {

// Lognormal (location fixed at 0), shifted Weibull and shifted generalized
// Pareto runtime models.
enum class Family { Lognormal, Weibull, GP };

inline constexpr std::array<Family, 3> kAllFamilies = {Family::Weibull, Family::Lognormal, Family::GP};

[[nodiscard]] std::string to_string(Family family);  // "lognormal", "weibull", "gp"
[[nodiscard]] Family parse_family(std::string_view name);

// shape: sigma (lognormal), k (Weibull), xi (GP).
// scale: mu, the log-scale, for lognormal; the scale parameter otherwise.
// location: always 0 for lognormal.
struct DistParams {
  double shape = 1.0;
  double scale = 1.0;
  double location = 0.0;

  friend bool operator==(const DistParams&, const DistParams&) = default;
};

// Throws DataError when the parameters violate the family's constraints.
void validate(Family family, const DistParams& p);

[[nodiscard]] double cdf(Family family, const DistParams& p, double x);
[[nodiscard]] double survival(Family family, const DistParams& p, double x);
[[nodiscard]] double pdf(Family family, const DistParams& p, double x);
// Inverse cdf; q must lie in (0, 1).
[[nodiscard]] double quantile(Family family, const DistParams& p, double q);
// Unrestarted expected runtime; +inf for GP with xi >= 1.
[[nodiscard]] double mean(Family family, const DistParams& p);

[[nodiscard]] double log_likelihood(Family family, const DistParams& p, std::span<const double> samples);

// Smallest number of samples accepted by fit_mle and ks_test.
inline constexpr std::size_t kMinSamples = 10;

// Shift applied by the shifted fits: min(samples) - (max - min) / (2n).
[[nodiscard]] double fitted_location(std::span<const double> samples);

// Maximum-likelihood fit. Lognormal is closed form; Weibull solves the
// profile-likelihood equation for k by safeguarded Newton; GP maximizes over
// (xi, scale) by Nelder-Mead with xi > -0.5. Throws DataError on fewer than
// kMinSamples samples, non-positive samples or degenerate data.
[[nodiscard]] DistParams fit_mle(Family family, std::span<const double> samples);

// Asymptotic Kolmogorov survival function P(K > lambda).
[[nodiscard]] double kolmogorov_survival(double lambda);

// Two-sided KS statistic sup |F_n - F| over the samples (sorted internally).
[[nodiscard]] double ks_statistic(std::span<const double> samples, Family family, const DistParams& p);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// KS statistic with its asymptotic p-value. Needs kMinSamples samples.
[[nodiscard]] KsResult ks_test(std::span<const double> samples, Family family, const DistParams& p);

struct FitResult {
  Family family = Family::Weibull;
  DistParams params;
  double ks_stat = 0.0;
  double p_value = 0.0;
  double log_likelihood = 0.0;
};

[[nodiscard]] FitResult fit_and_test(Family family, std::span<const double> samples);

// Quantile level at which the below-location exponential extension attaches
// to shifted families.
inline constexpr double kExtensionAnchor = 1e-6;

// Expected runtime of the fixed-cutoff strategy restarting every t:
// E(t) = ((1 - F(t)) / F(t)) t + E[X | X <= t], evaluated as
// (integral_0^t (1 - F(x)) dx) / F(t) by adaptive quadrature. For shifted
// families, t below the extension anchor uses an exponential lower tail that
// matches F and f at the anchor. Throws DataError if F(t) = 0 and no
// extension applies.
[[nodiscard]] double expected_runtime_with_restart(Family family, const DistParams& p, double t);

struct RestartAt {
  double t = 0.0;
  double expected_runtime = 0.0;
};

struct RestartRecommendation {
  std::optional<RestartAt> restart_at;  // empty means "do not restart"
  double unrestarted_mean = 0.0;

  [[nodiscard]] bool restarts() const { return restart_at.has_value(); }
};

struct RestartSearchOptions {
  std::size_t grid_points = 200;
  double relative_tolerance = 1e-6;
  double upper_quantile = 0.99999;
  double min_improvement = 1e-3;  // relative gain over the mean required to restart
};

// Minimizes E(t) over (location, quantile(upper_quantile)] with a log grid
// followed by golden-section refinement.
[[nodiscard]] RestartRecommendation optimal_restart_time(Family family, const DistParams& p,
                                                         const RestartSearchOptions& options = {});

}  // namespace rtdlab::dist
