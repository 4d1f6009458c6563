#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "rtdlab/dist.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::ml {

enum class OutputActivation { Sigmoid, Exp };

// Each hidden block is Dense(tanh, l2) -> BatchNorm -> GaussianNoise ->
// Dropout; the input gets its own GaussianNoise. The output layer is Dense
// with l2 followed by the output activation.
struct MlpSpec {
  std::size_t inputs = 0;
  std::vector<std::size_t> hidden = {14, 7};
  std::size_t outputs = 2;
  OutputActivation activation = OutputActivation::Sigmoid;
  double input_noise = 0.01;
  double hidden_noise = 0.12;
  double dropout = 0.01;
  double l2 = 0.01;
  double bn_momentum = 0.99;
  double bn_epsilon = 1e-3;
};

[[nodiscard]] MlpSpec parameter_net_spec(std::size_t inputs);
[[nodiscard]] MlpSpec location_net_spec(std::size_t inputs);

struct DenseLayer {
  Eigen::MatrixXd w;  // outputs x inputs
  Eigen::VectorXd b;
};

struct BatchNormLayer {
  Eigen::VectorXd gamma, beta;
  Eigen::VectorXd moving_mean, moving_var;
};

struct MlpModel {
  MlpSpec spec;
  std::vector<DenseLayer> dense;     // hidden.size() + 1
  std::vector<BatchNormLayer> norm;  // hidden.size()
};

// Glorot-uniform kernels, zero biases, identity batch norm.
[[nodiscard]] MlpModel init_mlp(const MlpSpec& spec, std::uint64_t seed);

// Inference: no noise or dropout, batch norm from the moving statistics.
// `x` holds one example per column.
[[nodiscard]] Eigen::MatrixXd predict(const MlpModel& m, const Eigen::MatrixXd& x);

// One realization of the training-time noise for a batch of `batch` columns.
struct NoiseDraw {
  Eigen::MatrixXd input;               // additive, already scaled
  std::vector<Eigen::MatrixXd> hidden;  // additive, already scaled
  std::vector<Eigen::MatrixXd> keep;    // dropout mask scaled by 1/(1-p)
};

[[nodiscard]] NoiseDraw draw_noise(const MlpSpec& spec, std::size_t batch, Rng& rng);
[[nodiscard]] NoiseDraw no_noise(const MlpSpec& spec, std::size_t batch);

// Batch loss on network outputs. `rows` maps batch columns to dataset rows.
class Loss {
 public:
  virtual ~Loss() = default;
  // Mean loss over the batch; fills `grad` (outputs x batch) with its
  // derivative when non-null.
  virtual double evaluate(const Eigen::MatrixXd& outputs, std::span<const std::size_t> rows,
                          Eigen::MatrixXd* grad) const = 0;
};

struct Gradients {
  std::vector<Eigen::MatrixXd> w;
  std::vector<Eigen::VectorXd> b;
  std::vector<Eigen::VectorXd> gamma, beta;
};

// Training-mode objective (loss plus l2 penalty) and its analytic gradient
// for a fixed noise draw. Updates no state.
double objective(const MlpModel& m, const Eigen::MatrixXd& x, std::span<const std::size_t> rows, const Loss& loss,
                 const NoiseDraw& noise, Gradients* grad);

// Trainable scalars in a fixed order, and gradients flattened in that order.
[[nodiscard]] std::vector<double*> parameter_refs(MlpModel& m);
[[nodiscard]] std::vector<double> flatten(const Gradients& g);

struct TrainOptions {
  std::size_t max_epochs = 2000;
  std::size_t patience = 100;
  double validation_fraction = 0.1;
  std::size_t batch_size = 16;
  double learning_rate = 5e-4;
  double clipnorm = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-7;
};

struct TrainHistory {
  std::vector<double> train_loss;  // per epoch, mean training objective
  std::vector<double> val_loss;    // per epoch, inference-mode objective
  std::size_t best_epoch = 0;
  std::size_t epochs_run = 0;
};

struct TrainedMlp {
  MlpModel model;
  TrainHistory history;
};

// Adam with per-tensor norm clipping, shuffled mini-batches and early
// stopping on a held-out split, restoring the best weights. With fewer than
// ten examples, or validation_fraction 0, it trains on everything for
// max_epochs. Deterministic in seed.
[[nodiscard]] TrainedMlp train_mlp(const MlpSpec& spec, const Eigen::MatrixXd& x, const Loss& loss,
                                   const TrainOptions& options, std::uint64_t seed);

// Root-mean-square error against a scalar target per row.
class RmseLoss final : public Loss {
 public:
  explicit RmseLoss(std::vector<double> targets) : targets_(std::move(targets)) {}
  double evaluate(const Eigen::MatrixXd& outputs, std::span<const std::size_t> rows,
                  Eigen::MatrixXd* grad) const override;

 private:
  std::vector<double> targets_;
};

// Affine de-scaling of the two sigmoid outputs onto the training ranges of
// shape and log-scale. The log-scale is mu itself for lognormal and
// log(scale) for Weibull.
struct ParamScaler {
  double shape_min = 0.0, shape_max = 1.0;
  double log_scale_min = 0.0, log_scale_max = 1.0;

  [[nodiscard]] double shape(double out) const { return shape_min + out * (shape_max - shape_min); }
  [[nodiscard]] double log_scale(double out) const { return log_scale_min + out * (log_scale_max - log_scale_min); }
};

// Shape/scale parameters of `family` (location 0) from the two log-space
// quantities.
[[nodiscard]] dist::DistParams params_from(dist::Family family, double shape, double log_scale);

// |F(x | predicted) - empirical| + |label_shape - predicted shape|, with F
// evaluated at location 0. `pred_scale` is mu for lognormal and the scale
// for Weibull.
[[nodiscard]] double anchor_loss(double pred_shape, double pred_scale, double label_shape, double anchor_x,
                              double anchor_prob, dist::Family family);

struct AnchorTarget {
  double label_shape = 1.0;
  double anchor_x = 1.0;  // location already subtracted
  double anchor_prob = 0.5;
};

class AnchorLoss final : public Loss {
 public:
  AnchorLoss(dist::Family family, ParamScaler scaler, std::vector<AnchorTarget> targets);
  double evaluate(const Eigen::MatrixXd& outputs, std::span<const std::size_t> rows,
                  Eigen::MatrixXd* grad) const override;

 private:
  dist::Family family_;
  ParamScaler scaler_;
  std::vector<AnchorTarget> targets_;
};

}  // namespace rtdlab::ml
