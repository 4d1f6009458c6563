#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtdlab/cnf.hpp"
#include "rtdlab/probsat.hpp"

namespace rtdlab::features {

inline constexpr std::size_t kNumFeatures = 34;

// Feature names in canonical order; these are also the JSON keys.
extern const std::array<std::string_view, kNumFeatures> kFeatureNames;

// Wall-clock extraction time. Excluded from determinism comparisons and from
// the default model inputs.
inline constexpr std::string_view kTimingFeature = "CG-featuretime";

[[nodiscard]] std::optional<std::size_t> feature_index(std::string_view name);

struct FeatureVector {
  std::array<double, kNumFeatures> values{};

  [[nodiscard]] double get(std::string_view name) const;
  void set(std::string_view name, double value);

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureOptions {
  std::size_t probes_per_profile = 10;
  std::size_t lobjois_probes = 20;
  std::size_t clause_graph_max_nodes = 4000;
  // The second probing profile raises the break exponent by this factor,
  // giving a greedier walk.
  double greedy_cb_factor = 2.0;
  int workers = 1;
};

struct FeatureReport {
  FeatureVector features;
  std::size_t clause_graph_nodes = 0;  // clauses sampled for the CG statistics
};

// Size, graph, Horn-proximity, DPLL-probing and local-search-probing
// features. Probe seeds derive from probe_cfg.seed.
[[nodiscard]] FeatureReport extract_features(const cnf::Formula& f, const probsat::SolverConfig& probe_cfg,
                                             std::uint64_t probe_budget, const FeatureOptions& options = {});

// Per-feature [min, max] over a training corpus.
struct NormalizationSpec {
  std::array<double, kNumFeatures> min{};
  std::array<double, kNumFeatures> max{};
};

[[nodiscard]] NormalizationSpec fit_normalization(std::span<const FeatureVector> corpus);
// Affine map onto [0, 1] with clamping; constant features map to 0.
[[nodiscard]] FeatureVector apply_normalization(const NormalizationSpec& spec, const FeatureVector& v);

inline constexpr double kVarianceThreshold = 0.05;

// Default handpicked features kept regardless of variance. VCG-VAR-mean is
// k times the clause/variable ratio, so it stands in for the ratio.
[[nodiscard]] std::vector<std::string> default_handpicked();

// Names of features with variance > threshold over the normalized corpus,
// united with `handpicked`, in canonical order. Names in `excluded` are
// never selected. Throws DataError on an unknown name.
[[nodiscard]] std::vector<std::string> select_by_variance(std::span<const FeatureVector> normalized,
                                                          double threshold,
                                                          std::span<const std::string> handpicked,
                                                          std::span<const std::string> excluded = {});

[[nodiscard]] std::vector<double> project(const FeatureVector& v, std::span<const std::string> names);

}  // namespace rtdlab::features
