#include "rtdlab/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rtdlab/error.hpp"

namespace rtdlab::ml {

MlpSpec parameter_net_spec(std::size_t inputs) {
  MlpSpec s;
  s.inputs = inputs;
  return s;
}

MlpSpec location_net_spec(std::size_t inputs) {
  MlpSpec s;
  s.inputs = inputs;
  s.hidden = {14, 1};
  s.outputs = 1;
  s.activation = OutputActivation::Exp;
  return s;
}

MlpModel init_mlp(const MlpSpec& spec, std::uint64_t seed) {
  if (spec.inputs == 0 || spec.outputs == 0) throw DataError("init_mlp: empty input or output layer");
  Rng rng(seed);
  MlpModel m;
  m.spec = spec;
  std::size_t fan_in = spec.inputs;
  auto add_dense = [&](std::size_t fan_out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer d;
    d.w.resize(static_cast<Eigen::Index>(fan_out), static_cast<Eigen::Index>(fan_in));
    for (Eigen::Index j = 0; j < d.w.cols(); ++j) {
      for (Eigen::Index i = 0; i < d.w.rows(); ++i) d.w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
    }
    d.b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fan_out));
    m.dense.push_back(std::move(d));
    fan_in = fan_out;
  };
  for (const auto width : spec.hidden) {
    if (width == 0) throw DataError("init_mlp: empty hidden layer");
    add_dense(width);
    const auto n = static_cast<Eigen::Index>(width);
    m.norm.push_back({Eigen::VectorXd::Ones(n), Eigen::VectorXd::Zero(n), Eigen::VectorXd::Zero(n),
                      Eigen::VectorXd::Ones(n)});
  }
  add_dense(spec.outputs);
  return m;
}

namespace {

Eigen::MatrixXd activate(OutputActivation a, const Eigen::MatrixXd& z) {
  if (a == OutputActivation::Exp) return z.array().exp().matrix();
  return (1.0 / (1.0 + (-z.array()).exp())).matrix();
}

void check_input(const MlpModel& m, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.rows()) != m.spec.inputs) throw DataError("mlp: input dimension mismatch");
}

struct Cache {
  std::vector<Eigen::MatrixXd> a;  // a[0] is the noisy input, a[l+1] the output of hidden block l
  std::vector<Eigen::MatrixXd> t;  // tanh outputs
  std::vector<Eigen::MatrixXd> xhat;
  std::vector<Eigen::VectorXd> mean, var, inv_std;
  Eigen::MatrixXd out;
};

Cache forward_train(const MlpModel& m, const Eigen::MatrixXd& xb, const NoiseDraw& noise) {
  Cache c;
  const auto batch = static_cast<double>(xb.cols());
  c.a.push_back(xb + noise.input);
  for (std::size_t l = 0; l < m.norm.size(); ++l) {
    const auto& d = m.dense[l];
    const auto& bn = m.norm[l];
    Eigen::MatrixXd t = ((d.w * c.a.back()).colwise() + d.b).array().tanh().matrix();
    Eigen::VectorXd mu = t.rowwise().sum() / batch;
    Eigen::MatrixXd centered = t.colwise() - mu;
    Eigen::VectorXd var = centered.array().square().rowwise().sum().matrix() / batch;
    Eigen::VectorXd inv_std = (var.array() + m.spec.bn_epsilon).rsqrt().matrix();
    Eigen::MatrixXd xhat = centered.array().colwise() * inv_std.array();
    Eigen::MatrixXd y = (xhat.array().colwise() * bn.gamma.array()).colwise() + bn.beta.array();
    c.a.push_back(((y + noise.hidden[l]).array() * noise.keep[l].array()).matrix());
    c.t.push_back(std::move(t));
    c.xhat.push_back(std::move(xhat));
    c.mean.push_back(std::move(mu));
    c.var.push_back(std::move(var));
    c.inv_std.push_back(std::move(inv_std));
  }
  const auto& out = m.dense.back();
  c.out = activate(m.spec.activation, (out.w * c.a.back()).colwise() + out.b);
  return c;
}

double l2_penalty(const MlpModel& m) {
  double s = 0.0;
  for (const auto& d : m.dense) s += d.w.squaredNorm();
  return m.spec.l2 * s;
}

Eigen::MatrixXd gather(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(rows.size()));
  for (std::size_t j = 0; j < rows.size(); ++j) out.col(static_cast<Eigen::Index>(j)) = x.col(static_cast<Eigen::Index>(rows[j]));
  return out;
}

double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

Eigen::MatrixXd predict(const MlpModel& m, const Eigen::MatrixXd& x) {
  check_input(m, x);
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < m.norm.size(); ++l) {
    const auto& d = m.dense[l];
    const auto& bn = m.norm[l];
    Eigen::MatrixXd t = ((d.w * a).colwise() + d.b).array().tanh().matrix();
    const Eigen::ArrayXd inv_std = (bn.moving_var.array() + m.spec.bn_epsilon).rsqrt();
    a = (((t.colwise() - bn.moving_mean).array().colwise() * (inv_std * bn.gamma.array())).colwise() +
         bn.beta.array())
            .matrix();
  }
  const auto& out = m.dense.back();
  return activate(m.spec.activation, (out.w * a).colwise() + out.b);
}

NoiseDraw draw_noise(const MlpSpec& spec, std::size_t batch, Rng& rng) {
  const auto b = static_cast<Eigen::Index>(batch);
  NoiseDraw n;
  n.input.resize(static_cast<Eigen::Index>(spec.inputs), b);
  for (Eigen::Index j = 0; j < b; ++j) {
    for (Eigen::Index i = 0; i < n.input.rows(); ++i) n.input(i, j) = spec.input_noise * rng.normal();
  }
  const double keep_scale = 1.0 / (1.0 - spec.dropout);
  for (const auto width : spec.hidden) {
    const auto w = static_cast<Eigen::Index>(width);
    Eigen::MatrixXd h(w, b), k(w, b);
    for (Eigen::Index j = 0; j < b; ++j) {
      for (Eigen::Index i = 0; i < w; ++i) {
        h(i, j) = spec.hidden_noise * rng.normal();
        k(i, j) = rng.uniform() < spec.dropout ? 0.0 : keep_scale;
      }
    }
    n.hidden.push_back(std::move(h));
    n.keep.push_back(std::move(k));
  }
  return n;
}

NoiseDraw no_noise(const MlpSpec& spec, std::size_t batch) {
  const auto b = static_cast<Eigen::Index>(batch);
  NoiseDraw n;
  n.input = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(spec.inputs), b);
  for (const auto width : spec.hidden) {
    const auto w = static_cast<Eigen::Index>(width);
    n.hidden.push_back(Eigen::MatrixXd::Zero(w, b));
    n.keep.push_back(Eigen::MatrixXd::Ones(w, b));
  }
  return n;
}

double objective(const MlpModel& m, const Eigen::MatrixXd& x, std::span<const std::size_t> rows, const Loss& loss,
                 const NoiseDraw& noise, Gradients* grad) {
  check_input(m, x);
  if (rows.empty()) throw DataError("mlp: empty batch");
  const auto xb = gather(x, rows);
  const auto c = forward_train(m, xb, noise);
  Eigen::MatrixXd dout;
  const double value = loss.evaluate(c.out, rows, grad ? &dout : nullptr) + l2_penalty(m);
  if (!grad) return value;

  const auto layers = m.dense.size();
  grad->w.assign(layers, {});
  grad->b.assign(layers, {});
  grad->gamma.assign(m.norm.size(), {});
  grad->beta.assign(m.norm.size(), {});

  Eigen::MatrixXd dz = m.spec.activation == OutputActivation::Exp
                           ? Eigen::MatrixXd(dout.array() * c.out.array())
                           : Eigen::MatrixXd(dout.array() * c.out.array() * (1.0 - c.out.array()));
  const double batch = static_cast<double>(xb.cols());
  for (std::size_t l = layers; l-- > 0;) {
    const auto& d = m.dense[l];
    grad->w[l] = dz * c.a[l].transpose() + 2.0 * m.spec.l2 * d.w;
    grad->b[l] = dz.rowwise().sum();
    if (l == 0) break;
    // Back through the hidden block that produced a[l].
    const auto h = l - 1;
    Eigen::MatrixXd dy = (d.w.transpose() * dz).array() * noise.keep[h].array();
    grad->gamma[h] = (dy.array() * c.xhat[h].array()).rowwise().sum().matrix();
    grad->beta[h] = dy.rowwise().sum();
    const Eigen::MatrixXd dxhat = dy.array().colwise() * m.norm[h].gamma.array();
    const Eigen::VectorXd sum_dxhat = dxhat.rowwise().sum();
    const Eigen::VectorXd sum_dxhat_xhat = (dxhat.array() * c.xhat[h].array()).rowwise().sum().matrix();
    Eigen::MatrixXd dt = batch * dxhat;
    dt.colwise() -= sum_dxhat;
    dt.array() -= c.xhat[h].array().colwise() * sum_dxhat_xhat.array();
    dt.array().colwise() *= c.inv_std[h].array() / batch;
    dz = dt.array() * (1.0 - c.t[h].array().square());
  }
  return value;
}

std::vector<double*> parameter_refs(MlpModel& m) {
  std::vector<double*> refs;
  auto add = [&refs](auto& tensor) {
    for (Eigen::Index i = 0; i < tensor.size(); ++i) refs.push_back(tensor.data() + i);
  };
  for (auto& d : m.dense) {
    add(d.w);
    add(d.b);
  }
  for (auto& bn : m.norm) {
    add(bn.gamma);
    add(bn.beta);
  }
  return refs;
}

std::vector<double> flatten(const Gradients& g) {
  std::vector<double> out;
  auto add = [&out](const auto& tensor) { out.insert(out.end(), tensor.data(), tensor.data() + tensor.size()); };
  for (std::size_t l = 0; l < g.w.size(); ++l) {
    add(g.w[l]);
    add(g.b[l]);
  }
  for (std::size_t l = 0; l < g.gamma.size(); ++l) {
    add(g.gamma[l]);
    add(g.beta[l]);
  }
  return out;
}

namespace {

class Adam {
 public:
  Adam(const MlpModel& m, const TrainOptions& o) : o_(o) {
    for (const auto& d : m.dense) {
      zeros(d.w);
      zeros(d.b);
    }
    for (const auto& bn : m.norm) {
      zeros(bn.gamma);
      zeros(bn.beta);
    }
  }

  void step(MlpModel& m, Gradients& g) {
    ++t_;
    const double lr = o_.learning_rate * std::sqrt(1.0 - std::pow(o_.beta2, t_)) / (1.0 - std::pow(o_.beta1, t_));
    std::size_t k = 0;
    for (std::size_t l = 0; l < m.dense.size(); ++l) {
      update(m.dense[l].w, g.w[l], lr, k++);
      update(m.dense[l].b, g.b[l], lr, k++);
    }
    for (std::size_t l = 0; l < m.norm.size(); ++l) {
      update(m.norm[l].gamma, g.gamma[l], lr, k++);
      update(m.norm[l].beta, g.beta[l], lr, k++);
    }
  }

 private:
  template <class T>
  void zeros(const T& tensor) {
    m1_.push_back(Eigen::ArrayXd::Zero(tensor.size()));
    m2_.push_back(Eigen::ArrayXd::Zero(tensor.size()));
  }

  template <class T, class G>
  void update(T& param, G& grad, double lr, std::size_t k) {
    Eigen::Map<Eigen::ArrayXd> p(param.data(), param.size());
    Eigen::Map<Eigen::ArrayXd> gr(grad.data(), grad.size());
    const double norm = std::sqrt(gr.square().sum());
    if (norm > o_.clipnorm) gr *= o_.clipnorm / norm;
    m1_[k] = o_.beta1 * m1_[k] + (1.0 - o_.beta1) * gr;
    m2_[k] = o_.beta2 * m2_[k] + (1.0 - o_.beta2) * gr.square();
    p -= lr * m1_[k] / (m2_[k].sqrt() + o_.adam_epsilon);
  }

  TrainOptions o_;
  std::vector<Eigen::ArrayXd> m1_, m2_;
  int t_ = 0;
};

void update_moving_stats(MlpModel& m, const Eigen::MatrixXd& xb, const NoiseDraw& noise) {
  const auto c = forward_train(m, xb, noise);
  const double mom = m.spec.bn_momentum;
  for (std::size_t l = 0; l < m.norm.size(); ++l) {
    m.norm[l].moving_mean = mom * m.norm[l].moving_mean + (1.0 - mom) * c.mean[l];
    m.norm[l].moving_var = mom * m.norm[l].moving_var + (1.0 - mom) * c.var[l];
  }
}

double inference_objective(const MlpModel& m, const Eigen::MatrixXd& x, std::span<const std::size_t> rows,
                           const Loss& loss) {
  const auto out = predict(m, gather(x, rows));
  return loss.evaluate(out, rows, nullptr) + l2_penalty(m);
}

void shuffle(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

}  // namespace

TrainedMlp train_mlp(const MlpSpec& spec, const Eigen::MatrixXd& x, const Loss& loss, const TrainOptions& options,
                     std::uint64_t seed) {
  if (x.cols() == 0) throw DataError("train_mlp: empty dataset");
  if (options.batch_size == 0) throw DataError("train_mlp: batch size must be positive");
  TrainedMlp result{init_mlp(spec, substream_seed(seed, 0)), {}};
  check_input(result.model, x);
  Rng order_rng(substream_seed(seed, 1));
  Rng noise_rng(substream_seed(seed, 2));

  const auto n = static_cast<std::size_t>(x.cols());
  std::vector<std::size_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0);
  std::vector<std::size_t> val;
  if (options.validation_fraction > 0 && n >= 10) {
    shuffle(rows, order_rng);
    const auto n_val = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(options.validation_fraction * n)));
    val.assign(rows.end() - static_cast<std::ptrdiff_t>(n_val), rows.end());
    rows.resize(n - n_val);
    std::sort(val.begin(), val.end());
  }

  auto& model = result.model;
  auto& history = result.history;
  Adam adam(model, options);
  MlpModel best = model;
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  Gradients grad;
  for (std::size_t epoch = 0; epoch < options.max_epochs; ++epoch) {
    shuffle(rows, order_rng);
    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < rows.size(); start += options.batch_size) {
      const std::span<const std::size_t> batch(rows.data() + start,
                                               std::min(options.batch_size, rows.size() - start));
      const auto noise = draw_noise(spec, batch.size(), noise_rng);
      total += objective(model, x, batch, loss, noise, &grad);
      update_moving_stats(model, gather(x, batch), noise);
      adam.step(model, grad);
      ++batches;
    }
    history.train_loss.push_back(total / static_cast<double>(batches));
    history.epochs_run = epoch + 1;
    if (val.empty()) continue;

    const double v = inference_objective(model, x, val, loss);
    history.val_loss.push_back(v);
    if (v < best_val) {
      best_val = v;
      best = model;
      history.best_epoch = epoch;
      since_best = 0;
    } else if (++since_best >= options.patience) {
      break;
    }
  }
  if (!val.empty()) {
    model = std::move(best);
  } else {
    history.best_epoch = history.epochs_run - 1;
  }
  return result;
}

double RmseLoss::evaluate(const Eigen::MatrixXd& outputs, std::span<const std::size_t> rows,
                          Eigen::MatrixXd* grad) const {
  const auto b = static_cast<double>(rows.size());
  Eigen::RowVectorXd diff(outputs.cols());
  for (std::size_t j = 0; j < rows.size(); ++j) {
    diff(static_cast<Eigen::Index>(j)) = outputs(0, static_cast<Eigen::Index>(j)) - targets_.at(rows[j]);
  }
  const double rmse = std::sqrt(diff.squaredNorm() / b);
  if (grad) {
    *grad = Eigen::MatrixXd::Zero(outputs.rows(), outputs.cols());
    if (rmse > 0) grad->row(0) = diff / (b * rmse);
  }
  return rmse;
}

dist::DistParams params_from(dist::Family family, double shape, double log_scale) {
  dist::DistParams p;
  p.shape = shape;
  p.scale = family == dist::Family::Lognormal ? log_scale : std::exp(log_scale);
  p.location = 0.0;
  return p;
}

namespace {

struct CdfPartials {
  double f = 0.0;
  double d_shape = 0.0;
  double d_log_scale = 0.0;
};

// F(x) at location 0 with derivatives in (shape, log-scale).
CdfPartials cdf_partials(dist::Family family, double shape, double log_scale, double x) {
  constexpr double inv_sqrt_2pi = 0.3989422804014327;
  const double lx = std::log(x);
  CdfPartials c;
  if (family == dist::Family::Lognormal) {
    const double z = (lx - log_scale) / shape;
    const double phi = inv_sqrt_2pi * std::exp(-0.5 * z * z);
    c.f = 0.5 * std::erfc(-z / std::sqrt(2.0));
    c.d_shape = -phi * z / shape;
    c.d_log_scale = -phi / shape;
  } else {
    const double u = std::exp(shape * (lx - log_scale));
    const double e = std::exp(-u);
    c.f = -std::expm1(-u);
    c.d_shape = e * u * (lx - log_scale);
    c.d_log_scale = -e * u * shape;
  }
  return c;
}

}  // namespace

double anchor_loss(double pred_shape, double pred_scale, double label_shape, double anchor_x, double anchor_prob,
                dist::Family family) {
  dist::DistParams p{pred_shape, pred_scale, 0.0};
  const double f = dist::cdf(family, p, anchor_x);
  return std::abs(f - anchor_prob) + std::abs(label_shape - pred_shape);
}

AnchorLoss::AnchorLoss(dist::Family family, ParamScaler scaler, std::vector<AnchorTarget> targets)
    : family_(family), scaler_(scaler), targets_(std::move(targets)) {
  if (family_ == dist::Family::GP) throw DataError("AnchorLoss: GP is not modeled by the networks");
  for (const auto& t : targets_) {
    if (!(t.anchor_x > 0)) throw DataError("AnchorLoss: anchor must be positive");
  }
}

double AnchorLoss::evaluate(const Eigen::MatrixXd& outputs, std::span<const std::size_t> rows,
                         Eigen::MatrixXd* grad) const {
  if (outputs.rows() != 2) throw DataError("AnchorLoss: expects two outputs");
  const auto b = static_cast<double>(rows.size());
  if (grad) *grad = Eigen::MatrixXd::Zero(2, outputs.cols());
  constexpr double min_shape = 1e-6;
  double total = 0.0;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    const auto& t = targets_.at(rows[j]);
    const double raw_shape = scaler_.shape(outputs(0, col));
    const double shape = std::max(raw_shape, min_shape);
    const double log_scale = scaler_.log_scale(outputs(1, col));
    const auto c = cdf_partials(family_, shape, log_scale, t.anchor_x);
    total += std::abs(c.f - t.anchor_prob) + std::abs(t.label_shape - shape);
    if (grad) {
      const double df = sign(c.f - t.anchor_prob);
      const double shape_grad = raw_shape > min_shape ? df * c.d_shape + sign(shape - t.label_shape) : 0.0;
      (*grad)(0, col) = shape_grad * (scaler_.shape_max - scaler_.shape_min) / b;
      (*grad)(1, col) = df * c.d_log_scale * (scaler_.log_scale_max - scaler_.log_scale_min) / b;
    }
  }
  return total / b;
}

}  // namespace rtdlab::ml
