#include "rtdlab/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rtdlab/error.hpp"
#include "rtdlab/parallel.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::pipeline {

std::optional<dist::Family> training_label(const rtd::WinnerSelection& fits) {
  const auto& w = fits.fit(dist::Family::Weibull);
  const auto& l = fits.fit(dist::Family::Lognormal);
  const bool w_ok = w.p_value >= fits.alpha;
  const bool l_ok = l.p_value >= fits.alpha;
  if (w_ok && (!l_ok || w.p_value >= l.p_value)) return dist::Family::Weibull;
  if (l_ok) return dist::Family::Lognormal;
  return std::nullopt;
}

Anchor median_anchor(const rtd::RtdSample& s) {
  if (s.flips.empty()) throw DataError("median_anchor: no successful runs");
  const auto levels = rtd::ecdf(s);
  const double x = static_cast<double>(s.flips[(s.flips.size() - 1) / 2]);
  const auto it = std::find_if(levels.begin(), levels.end(), [x](const auto& p) { return p.first == x; });
  return {x, it->second};
}

namespace {

std::vector<features::FeatureVector> normalized_corpus(const features::NormalizationSpec& spec,
                                                       std::span<const InstanceData> instances) {
  std::vector<features::FeatureVector> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(features::apply_normalization(spec, inst.features));
  return out;
}

struct Design {
  features::NormalizationSpec normalization;
  std::vector<std::string> selected;
  std::vector<std::vector<double>> rows;  // per instance
};

Design design(std::span<const InstanceData> instances, const PipelineOptions& options) {
  Design d;
  std::vector<features::FeatureVector> raw;
  for (const auto& inst : instances) raw.push_back(inst.features);
  d.normalization = features::fit_normalization(raw);
  // Excluded features never reach the models; blanking their ranges keeps
  // the bundle free of values such as wall-clock timings.
  for (const auto& name : options.excluded) {
    if (const auto i = features::feature_index(name)) d.normalization.min[*i] = d.normalization.max[*i] = 0.0;
  }
  const auto normalized = normalized_corpus(d.normalization, instances);
  d.selected = features::select_by_variance(normalized, options.variance_threshold, options.handpicked,
                                            options.excluded);
  if (d.selected.empty()) throw DataError("train_pipeline: no features selected");
  for (const auto& v : normalized) d.rows.push_back(features::project(v, d.selected));
  return d;
}

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows, std::span<const std::size_t> which) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.front().size()), static_cast<Eigen::Index>(which.size()));
  for (std::size_t j = 0; j < which.size(); ++j) {
    const auto& r = rows[which[j]];
    for (std::size_t i = 0; i < r.size(); ++i) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = r[i];
  }
  return x;
}

double log_scale_of(dist::Family family, const dist::DistParams& p) {
  return family == dist::Family::Lognormal ? p.scale : std::log(p.scale);
}

ml::ParamScaler fit_scaler(dist::Family family, std::span<const InstanceData> instances,
                           std::span<const std::size_t> which) {
  ml::ParamScaler s;
  s.shape_min = s.log_scale_min = std::numeric_limits<double>::infinity();
  s.shape_max = s.log_scale_max = -std::numeric_limits<double>::infinity();
  for (const auto i : which) {
    const auto& p = instances[i].fits.fit(family).params;
    s.shape_min = std::min(s.shape_min, p.shape);
    s.shape_max = std::max(s.shape_max, p.shape);
    s.log_scale_min = std::min(s.log_scale_min, log_scale_of(family, p));
    s.log_scale_max = std::max(s.log_scale_max, log_scale_of(family, p));
  }
  return s;
}

}  // namespace

PipelineModel train_pipeline(std::span<const InstanceData> instances, const PipelineOptions& options,
                             std::uint64_t seed) {
  std::vector<std::size_t> labelled;
  std::vector<dist::Family> labels;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (const auto label = training_label(instances[i].fits)) {
      labelled.push_back(i);
      labels.push_back(*label);
    }
  }
  if (labelled.size() < ml::kMinForestExamples) {
    throw DataError("train_pipeline: only " + std::to_string(labelled.size()) +
                    " instances pass KS for Weibull or lognormal");
  }
  std::vector<InstanceData> used;
  for (const auto i : labelled) used.push_back(instances[i]);

  PipelineModel m;
  m.seed = seed;
  auto d = design(used, options);
  m.normalization = d.normalization;
  m.selected = d.selected;
  m.forest = ml::train_forest(d.rows, labels, options.n_trees, substream_seed(seed, 0), options.workers);

  auto net_rows = [&](dist::Family family) {
    std::vector<std::size_t> passing, all(used.size());
    std::iota(all.begin(), all.end(), 0);
    for (std::size_t i = 0; i < used.size(); ++i) {
      if (used[i].fits.fit(family).p_value >= used[i].fits.alpha) passing.push_back(i);
    }
    return passing.size() >= options.min_net_examples ? passing : all;
  };
  const auto weibull_rows = net_rows(dist::Family::Weibull);
  const auto lognormal_rows = net_rows(dist::Family::Lognormal);
  m.weibull_scaler = fit_scaler(dist::Family::Weibull, used, weibull_rows);
  m.lognormal_scaler = fit_scaler(dist::Family::Lognormal, used, lognormal_rows);

  auto anchor_targets = [&](dist::Family family) {
    std::vector<ml::AnchorTarget> targets;
    for (const auto& inst : used) {
      const auto& p = inst.fits.fit(family).params;
      const auto a = median_anchor(inst.sample);
      targets.push_back({p.shape, a.x - p.location, a.prob});
    }
    return targets;
  };
  const ml::AnchorLoss weibull_loss(dist::Family::Weibull, m.weibull_scaler, anchor_targets(dist::Family::Weibull));
  const ml::AnchorLoss lognormal_loss(dist::Family::Lognormal, m.lognormal_scaler,
                                   anchor_targets(dist::Family::Lognormal));

  std::vector<double> locations;
  for (const auto& inst : used) locations.push_back(inst.fits.fit(dist::Family::Weibull).params.location);
  const double mean_location = std::accumulate(locations.begin(), locations.end(), 0.0) / locations.size();
  m.location_unit = mean_location > 0 ? mean_location : 1.0;
  std::vector<double> location_targets;
  for (const double l : locations) location_targets.push_back(l / m.location_unit);
  const ml::RmseLoss location_loss(location_targets);

  // The nets index targets by position in `used`; each sees only its rows.
  const auto n_inputs = m.selected.size();
  std::vector<std::size_t> all_rows(used.size());
  std::iota(all_rows.begin(), all_rows.end(), 0);
  struct Job {
    const ml::Loss* loss;
    std::vector<std::size_t> rows;
    ml::MlpSpec spec;
    ml::MlpModel* out;
  };
  const std::array<Job, 3> jobs = {{
      {&weibull_loss, weibull_rows, ml::parameter_net_spec(n_inputs), &m.weibull_net},
      {&lognormal_loss, lognormal_rows, ml::parameter_net_spec(n_inputs), &m.lognormal_net},
      {&location_loss, all_rows, ml::location_net_spec(n_inputs), &m.location_net},
  }};
  parallel_for(jobs.size(), options.workers, [&](std::size_t j) {
    const auto& job = jobs[j];
    // Re-index the loss targets onto the job's rows.
    const Eigen::MatrixXd x = to_matrix(d.rows, job.rows);
    struct Subset final : ml::Loss {
      const ml::Loss* base;
      const std::vector<std::size_t>* map;
      double evaluate(const Eigen::MatrixXd& outputs, std::span<const std::size_t> rows,
                      Eigen::MatrixXd* grad) const override {
        std::vector<std::size_t> mapped;
        for (const auto r : rows) mapped.push_back((*map)[r]);
        return base->evaluate(outputs, mapped, grad);
      }
    } subset;
    subset.base = job.loss;
    subset.map = &job.rows;
    auto trained = ml::train_mlp(job.spec, x, subset, options.train, substream_seed(seed, 1 + j));
    *job.out = std::move(trained.model);
    m.training[j] = {job.rows.size(), std::move(trained.history)};
  });
  return m;
}

std::vector<double> model_inputs(const PipelineModel& m, const features::FeatureVector& raw) {
  return features::project(features::apply_normalization(m.normalization, raw), m.selected);
}

dist::DistParams predict_params(const PipelineModel& m, dist::Family family, std::span<const double> inputs) {
  if (inputs.size() != m.selected.size()) throw DataError("predict_params: input dimension mismatch");
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(inputs.data(), static_cast<Eigen::Index>(inputs.size()));
  switch (family) {
    case dist::Family::Weibull: {
      const auto out = ml::predict(m.weibull_net, x);
      auto p = ml::params_from(family, m.weibull_scaler.shape(out(0, 0)), m.weibull_scaler.log_scale(out(1, 0)));
      p.location = ml::predict(m.location_net, x)(0, 0) * m.location_unit;
      return p;
    }
    case dist::Family::Lognormal: {
      const auto out = ml::predict(m.lognormal_net, x);
      return ml::params_from(family, m.lognormal_scaler.shape(out(0, 0)), m.lognormal_scaler.log_scale(out(1, 0)));
    }
    case dist::Family::GP:
      break;
  }
  throw DataError("predict_params: GP is not modeled by the pipeline");
}

PipelinePrediction pipeline_predict(const PipelineModel& m, const features::FeatureVector& raw) {
  const auto inputs = model_inputs(m, raw);
  PipelinePrediction p;
  p.family = ml::predict_family(m.forest, inputs);
  p.params = predict_params(m, p.family, inputs);
  p.recommendation = dist::optimal_restart_time(p.family, p.params);
  if (p.recommendation.restart_at && p.recommendation.restart_at->t < p.params.location) {
    p.recommendation.restart_at.reset();
  }
  return p;
}

restart::RestartPolicy to_policy(const PipelinePrediction& p) {
  if (!p.recommendation.restart_at) return restart::NoRestart{};
  const double t = std::ceil(p.recommendation.restart_at->t);
  return restart::FixedCutoff{static_cast<std::uint64_t>(std::max(1.0, t))};
}

std::vector<std::size_t> fold_assignment(std::size_t n, std::size_t folds, std::uint64_t seed) {
  if (folds < 2 || folds > n) throw DataError("fold_assignment: need 2 <= folds <= instances");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::size_t> fold(n);
  for (std::size_t k = 0; k < n; ++k) fold[order[k]] = k % folds;
  return fold;
}

namespace {

void split_fold(std::span<const InstanceData> instances, const std::vector<std::size_t>& fold, std::size_t k,
                std::vector<InstanceData>& train, std::vector<std::size_t>& test) {
  train.clear();
  test.clear();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (fold[i] == k) {
      test.push_back(i);
    } else {
      train.push_back(instances[i]);
    }
  }
}

}  // namespace

std::vector<PipelinePrediction> cross_fit(std::span<const InstanceData> instances, std::size_t folds,
                                          const PipelineOptions& options, std::uint64_t seed) {
  const auto fold = fold_assignment(instances.size(), folds, substream_seed(seed, 0));
  std::vector<PipelinePrediction> out(instances.size());
  std::vector<InstanceData> train;
  std::vector<std::size_t> test;
  for (std::size_t k = 0; k < folds; ++k) {
    split_fold(instances, fold, k, train, test);
    const auto model = train_pipeline(train, options, substream_seed(seed, 1 + k));
    for (const auto i : test) out[i] = pipeline_predict(model, instances[i].features);
  }
  return out;
}

double ForestValidation::balanced_accuracy() const { return ml::balanced_accuracy(truth, predicted); }

ForestValidation cross_validate_forest(std::span<const InstanceData> instances, std::size_t folds,
                                       const PipelineOptions& options, std::uint64_t seed) {
  std::vector<InstanceData> labelled;
  std::vector<dist::Family> labels;
  for (const auto& inst : instances) {
    if (const auto label = training_label(inst.fits)) {
      labelled.push_back(inst);
      labels.push_back(*label);
    }
  }
  const auto fold = fold_assignment(labelled.size(), folds, substream_seed(seed, 0));
  ForestValidation v;
  v.truth = labels;
  v.predicted.resize(labels.size());
  std::vector<InstanceData> train;
  std::vector<std::size_t> test;
  for (std::size_t k = 0; k < folds; ++k) {
    split_fold(labelled, fold, k, train, test);
    const auto d = design(train, options);
    std::vector<dist::Family> y;
    for (const auto& inst : train) y.push_back(*training_label(inst.fits));
    const auto forest = ml::train_forest(d.rows, y, options.n_trees, substream_seed(seed, 1 + k), options.workers);
    for (const auto i : test) {
      const auto x = features::project(features::apply_normalization(d.normalization, labelled[i].features),
                                       d.selected);
      v.predicted[i] = ml::predict_family(forest, x);
    }
  }
  return v;
}

}  // namespace rtdlab::pipeline
