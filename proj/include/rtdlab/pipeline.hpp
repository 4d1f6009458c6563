#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rtdlab/dist.hpp"
#include "rtdlab/features.hpp"
#include "rtdlab/forest.hpp"
#include "rtdlab/mlp.hpp"
#include "rtdlab/restart.hpp"
#include "rtdlab/rtd.hpp"

namespace rtdlab::pipeline {

// Everything the pipeline learns from about one training instance.
struct InstanceData {
  std::string instance_id;
  features::FeatureVector features;  // raw, not normalized
  rtd::RtdSample sample;
  rtd::WinnerSelection fits;
};

// Forest label: the better of Weibull and lognormal by KS p-value among
// those passing at alpha. GP is not modeled by the pipeline.
[[nodiscard]] std::optional<dist::Family> training_label(const rtd::WinnerSelection& fits);

struct Anchor {
  double x = 0.0;     // observed runtime
  double prob = 0.0;  // its ECDF level
};

// The median-rank observation of the sample and its ECDF level.
[[nodiscard]] Anchor median_anchor(const rtd::RtdSample& s);

struct PipelineOptions {
  std::size_t n_trees = ml::kDefaultTrees;
  double variance_threshold = features::kVarianceThreshold;
  std::vector<std::string> handpicked = features::default_handpicked();
  std::vector<std::string> excluded = {std::string(features::kTimingFeature)};
  // A family net trains on instances whose fit of that family passes KS; if
  // fewer than this many pass it uses every labelled instance.
  std::size_t min_net_examples = 10;
  ml::TrainOptions train;
  int workers = 1;
};

struct NetTraining {
  std::size_t examples = 0;
  ml::TrainHistory history;
};

struct PipelineModel {
  std::uint64_t seed = 0;
  features::NormalizationSpec normalization;
  std::vector<std::string> selected;
  ml::ForestModel forest;
  ml::MlpModel weibull_net, lognormal_net, location_net;
  ml::ParamScaler weibull_scaler, lognormal_scaler;
  double location_unit = 1.0;  // location net predicts location / location_unit
  std::array<NetTraining, 3> training;  // Weibull, lognormal, location
};

// Throws DataError when fewer than ml::kMinForestExamples instances carry a
// label or only one class occurs.
[[nodiscard]] PipelineModel train_pipeline(std::span<const InstanceData> instances, const PipelineOptions& options,
                                           std::uint64_t seed);

struct PipelinePrediction {
  dist::Family family = dist::Family::Weibull;
  dist::DistParams params;
  dist::RestartRecommendation recommendation;
};

// Model inputs for a raw feature vector: normalized, then projected onto
// the selected features.
[[nodiscard]] std::vector<double> model_inputs(const PipelineModel& m, const features::FeatureVector& raw);

[[nodiscard]] dist::DistParams predict_params(const PipelineModel& m, dist::Family family,
                                              std::span<const double> inputs);

// Forest family, net parameters, and the optimal restart time for them. A
// recommended cutoff below the predicted location degrades to no restart.
[[nodiscard]] PipelinePrediction pipeline_predict(const PipelineModel& m, const features::FeatureVector& raw);

// FixedCutoff at ceil(t) when the prediction restarts, NoRestart otherwise.
[[nodiscard]] restart::RestartPolicy to_policy(const PipelinePrediction& p);

// Seeded assignment of instances to k folds of near-equal size.
[[nodiscard]] std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed);

// Out-of-fold predictions: instance i is predicted by a pipeline trained on
// the other folds.
[[nodiscard]] std::vector<PipelinePrediction> cross_fit(std::span<const InstanceData> instances, std::size_t folds,
                                                        const PipelineOptions& options, std::uint64_t seed);

struct ForestValidation {
  std::vector<dist::Family> truth;
  std::vector<dist::Family> predicted;
  [[nodiscard]] double balanced_accuracy() const;
};

// k-fold cross-validation of the forest alone on the labelled instances,
// with normalization and selection refit inside every training fold.
[[nodiscard]] ForestValidation cross_validate_forest(std::span<const InstanceData> instances, std::size_t folds,
                                                     const PipelineOptions& options, std::uint64_t seed);

}  // namespace rtdlab::pipeline
