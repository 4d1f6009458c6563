#include <cmath>

#include "doctest.h"
#include "rtdlab/dist.hpp"
#include "rtdlab/mlp.hpp"

using namespace rtdlab;
using namespace rtdlab::ml;

namespace {

// Phi^-1(0.7)
constexpr double kZ70 = 0.52440051270804067;

Eigen::MatrixXd random_inputs(std::size_t d, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd x(d, n);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    for (Eigen::Index i = 0; i < x.rows(); ++i) x(i, j) = rng.uniform();
  }
  return x;
}

// Central differences of the objective over every trainable scalar.
void gradient_check(MlpModel m, const Eigen::MatrixXd& x, const Loss& loss, std::uint64_t seed) {
  const std::vector<std::size_t> rows = {0, 1, 2, 3};
  Rng rng(seed);
  const auto noise = draw_noise(m.spec, rows.size(), rng);
  Gradients g;
  (void)objective(m, x, rows, loss, noise, &g);
  const auto analytic = flatten(g);
  auto refs = parameter_refs(m);
  REQUIRE(refs.size() == analytic.size());
  const double h = 1e-5;
  std::size_t bad = 0;
  for (std::size_t k = 0; k < refs.size(); ++k) {
    const double saved = *refs[k];
    *refs[k] = saved + h;
    const double up = objective(m, x, rows, loss, noise, nullptr);
    *refs[k] = saved - h;
    const double down = objective(m, x, rows, loss, noise, nullptr);
    *refs[k] = saved;
    const double numeric = (up - down) / (2 * h);
    const double rel = std::abs(analytic[k] - numeric) / std::max({std::abs(analytic[k]), std::abs(numeric), 1e-7});
    if (rel >= 1e-4) {
      ++bad;
      MESSAGE("parameter " << k << ": analytic " << analytic[k] << " numeric " << numeric);
    }
  }
  CHECK(bad == 0);
}

}  // namespace

TEST_CASE("network specs") {
  const auto p = parameter_net_spec(20);
  CHECK(p.hidden == std::vector<std::size_t>{14, 7});
  CHECK(p.outputs == 2);
  CHECK(p.activation == OutputActivation::Sigmoid);
  const auto l = location_net_spec(20);
  CHECK(l.hidden == std::vector<std::size_t>{14, 1});
  CHECK(l.outputs == 1);
  CHECK(l.activation == OutputActivation::Exp);
  const auto m = init_mlp(p, 1);
  REQUIRE(m.dense.size() == 3);
  CHECK(m.dense[0].w.rows() == 14);
  CHECK(m.dense[0].w.cols() == 20);
  CHECK(m.dense[2].w.rows() == 2);
  CHECK(m.norm.size() == 2);
  const double limit = std::sqrt(6.0 / (20 + 14));
  CHECK(m.dense[0].w.cwiseAbs().maxCoeff() <= limit);
}

TEST_CASE("zero weights give the activation identities") {
  for (const auto& spec : {parameter_net_spec(5), location_net_spec(5)}) {
    auto m = init_mlp(spec, 3);
    for (auto& d : m.dense) {
      d.w.setZero();
      d.b.setZero();
    }
    const auto out = predict(m, random_inputs(5, 7, 1));
    const double expected = spec.activation == OutputActivation::Sigmoid ? 0.5 : 1.0;
    CHECK((out.array() - expected).abs().maxCoeff() < 1e-15);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  const auto x = random_inputs(6, 4, 2);
  SUBCASE("rmse, location net") {
    auto m = init_mlp(location_net_spec(6), 4);
    RmseLoss loss({0.3, 1.7, 0.9, 2.2});
    gradient_check(m, x, loss, 5);
  }
  SUBCASE("anchor loss, lognormal net") {
    auto m = init_mlp(parameter_net_spec(6), 6);
    const ParamScaler scaler{0.2, 2.0, 1.0, 8.0};
    AnchorLoss loss(dist::Family::Lognormal, scaler,
                 {{0.9, 50.0, 0.3}, {1.4, 400.0, 0.5}, {0.5, 30.0, 0.8}, {1.1, 900.0, 0.45}});
    gradient_check(m, x, loss, 7);
  }
  SUBCASE("anchor loss, Weibull net") {
    auto m = init_mlp(parameter_net_spec(6), 8);
    const ParamScaler scaler{0.3, 1.5, 2.0, 9.0};
    AnchorLoss loss(dist::Family::Weibull, scaler,
                 {{0.6, 120.0, 0.5}, {1.2, 2000.0, 0.5}, {0.9, 40.0, 0.2}, {0.7, 700.0, 0.6}});
    gradient_check(m, x, loss, 9);
  }
}

TEST_CASE("anchor loss values") {
  using dist::Family;
  const double x = std::exp(1.5 * kZ70);
  CHECK(anchor_loss(1.5, 0.0, 1.0, x, 0.6, Family::Lognormal) == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(anchor_loss(1.5, 0.0, 1.5, x, 0.7, Family::Lognormal) == doctest::Approx(0.0).epsilon(1e-12));
  // Scale errors are invisible when F(x) happens to match.
  const double w = 3.0 * std::pow(std::log(2.0), 1 / 0.8);
  CHECK(anchor_loss(0.8, 3.0, 0.8, w, 0.5, Family::Weibull) == doctest::Approx(0.0).epsilon(1e-12));
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double v = anchor_loss(0.1 + rng.uniform(), rng.uniform(), 0.1 + rng.uniform(), 1 + rng.uniform(),
                              rng.uniform(), Family::Lognormal);
    CHECK(v >= 0.0);
  }
}

TEST_CASE("AnchorLoss agrees with the scalar definition") {
  const ParamScaler scaler{0.2, 2.0, 1.0, 8.0};
  const std::vector<AnchorTarget> targets = {{0.9, 50.0, 0.3}, {1.4, 400.0, 0.5}};
  for (const auto family : {dist::Family::Lognormal, dist::Family::Weibull}) {
    AnchorLoss loss(family, scaler, targets);
    Eigen::MatrixXd out(2, 2);
    out << 0.3, 0.8, 0.6, 0.1;
    const std::vector<std::size_t> rows = {0, 1};
    double expected = 0.0;
    for (int j = 0; j < 2; ++j) {
      const double shape = scaler.shape(out(0, j));
      const double ls = scaler.log_scale(out(1, j));
      const double scale = family == dist::Family::Lognormal ? ls : std::exp(ls);
      expected += anchor_loss(shape, scale, targets[j].label_shape, targets[j].anchor_x, targets[j].anchor_prob, family);
    }
    CHECK(loss.evaluate(out, rows, nullptr) == doctest::Approx(expected / 2).epsilon(1e-12));
  }
}

TEST_CASE("rmse loss") {
  RmseLoss loss({1.0, 3.0});
  Eigen::MatrixXd out(1, 2);
  out << 2.0, 1.0;
  const std::vector<std::size_t> rows = {0, 1};
  CHECK(loss.evaluate(out, rows, nullptr) == doctest::Approx(std::sqrt(2.5)));
}

TEST_CASE("params_from maps log-scale per family") {
  const auto ln = params_from(dist::Family::Lognormal, 0.7, 3.0);
  CHECK(ln.shape == 0.7);
  CHECK(ln.scale == 3.0);
  const auto wb = params_from(dist::Family::Weibull, 0.7, 3.0);
  CHECK(wb.scale == doctest::Approx(std::exp(3.0)));
  CHECK(wb.location == 0.0);
}

TEST_CASE("constant target is learnt") {
  const std::size_t n = 160;
  const auto x = random_inputs(5, n, 11);
  RmseLoss loss(std::vector<double>(n, 0.8));
  TrainOptions opts;
  opts.max_epochs = 500;
  const auto trained = train_mlp(location_net_spec(5), x, loss, opts, 3);
  CHECK(trained.history.epochs_run <= 500);
  const auto out = predict(trained.model, x);
  const double rmse = std::sqrt((out.array() - 0.8).square().mean());
  CHECK(rmse < 1e-3);
}

TEST_CASE("training is deterministic in the seed") {
  const auto x = random_inputs(4, 40, 12);
  std::vector<double> y(40);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 0.5 + x(0, static_cast<Eigen::Index>(i));
  RmseLoss loss(y);
  TrainOptions opts;
  opts.max_epochs = 30;
  const auto a = train_mlp(location_net_spec(4), x, loss, opts, 5);
  const auto b = train_mlp(location_net_spec(4), x, loss, opts, 5);
  CHECK(a.history.train_loss == b.history.train_loss);
  CHECK(predict(a.model, x) == predict(b.model, x));
  const auto c = train_mlp(location_net_spec(4), x, loss, opts, 6);
  CHECK_FALSE(a.history.train_loss == c.history.train_loss);
  CHECK(a.history.val_loss.size() == a.history.epochs_run);
}

TEST_CASE("training reduces the loss on a learnable target") {
  const auto x = random_inputs(4, 120, 13);
  std::vector<double> y(120);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = 1.0 + 2.0 * x(1, static_cast<Eigen::Index>(i));
  RmseLoss loss(y);
  TrainOptions opts;
  opts.max_epochs = 300;
  const auto t = train_mlp(location_net_spec(4), x, loss, opts, 8);
  const std::vector<double>& v = t.history.val_loss;
  CHECK(v[t.history.best_epoch] < 0.5 * v.front());
}
