#include <cmath>

#include "doctest.h"
#include "rtdlab/error.hpp"
#include "rtdlab/forest.hpp"
#include "rtdlab/rng.hpp"

using namespace rtdlab;
using namespace rtdlab::ml;
using dist::Family;

namespace {

struct Corpus {
  std::vector<std::vector<double>> x;
  std::vector<Family> y;
};

// Class follows feature 0 < 0.5; the other features are noise.
Corpus separable(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    c.y.push_back(row[0] < 0.5 ? Family::Weibull : Family::Lognormal);
    c.x.push_back(std::move(row));
  }
  return c;
}

// Noisy labels so trees actually differ.
Corpus noisy(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Corpus c;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row = {rng.uniform(), rng.uniform(), rng.uniform()};
    const bool w = row[0] + 0.5 * row[1] + 0.4 * rng.normal() < 0.75;
    c.y.push_back(w ? Family::Weibull : Family::Lognormal);
    c.x.push_back(std::move(row));
  }
  return c;
}

Family walk(const DecisionTree& t, const std::vector<double>& x) {
  int node = 0;
  while (t.nodes[node].feature >= 0) {
    const auto& n = t.nodes[node];
    node = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return t.nodes[node].label;
}

}  // namespace

TEST_CASE("entropy") {
  CHECK(entropy(5, 0) == 0.0);
  CHECK(entropy(0, 3) == 0.0);
  CHECK(entropy(4, 4) == doctest::Approx(1.0));
  CHECK(entropy(1, 3) == doctest::Approx(-(0.25 * std::log2(0.25) + 0.75 * std::log2(0.75))));
}

TEST_CASE("class encoding") {
  CHECK(class_index(Family::Weibull) == 0);
  CHECK(class_index(Family::Lognormal) == 1);
  CHECK(class_family(0) == Family::Weibull);
  CHECK_THROWS_AS((void)class_index(Family::GP), DataError);
}

TEST_CASE("separable toy corpus is classified perfectly") {
  const auto train = separable(200, 1);
  const auto test = separable(200, 2);
  const auto m = train_forest(train.x, train.y, 50, 7);
  CHECK(m.trees.size() == 50);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.x.size(); ++i) {
    // Points within a hair of the boundary can fall between training points.
    if (std::abs(test.x[i][0] - 0.5) < 0.02) {
      ++correct;
      continue;
    }
    correct += predict_family(m, test.x[i]) == test.y[i];
  }
  CHECK(correct == test.x.size());
}

TEST_CASE("forest training is deterministic and worker-independent") {
  const auto c = noisy(120, 3);
  const auto a = train_forest(c.x, c.y, 20, 9, 1);
  const auto b = train_forest(c.x, c.y, 20, 9, 4);
  CHECK(a.trees == b.trees);
  const auto d = train_forest(c.x, c.y, 20, 10, 1);
  CHECK_FALSE(a.trees == d.trees);
}

TEST_CASE("votes equal independent per-tree traversal") {
  const auto c = noisy(150, 4);
  const auto m = train_forest(c.x, c.y, 31, 5);
  const auto probe = noisy(60, 6);
  for (const auto& x : probe.x) {
    std::size_t w = 0, l = 0;
    for (const auto& t : m.trees) {
      for (const auto& node : t.nodes) {
        if (node.feature >= 0) {
          CHECK(node.feature < 3);
          CHECK(node.left > 0);
          CHECK(node.right > 0);
        } else {
          CHECK(node.label != Family::GP);
        }
      }
      (walk(t, x) == Family::Weibull ? w : l) += 1;
    }
    const auto v = votes(m, x);
    CHECK(v.weibull == w);
    CHECK(v.lognormal == l);
    CHECK(predict_family(m, x) == (w >= l ? Family::Weibull : Family::Lognormal));
  }
}

TEST_CASE("vote ties and unanimity") {
  ForestModel m;
  m.num_features = 1;
  DecisionTree w, l;
  w.nodes.push_back({-1, 0.0, -1, -1, Family::Weibull});
  l.nodes.push_back({-1, 0.0, -1, -1, Family::Lognormal});
  const std::vector<double> x = {0.3};
  m.trees = {w, w, w};
  CHECK(predict_family(m, x) == Family::Weibull);
  m.trees.clear();
  for (int i = 0; i < 25; ++i) {
    m.trees.push_back(w);
    m.trees.push_back(l);
  }
  CHECK(predict_family(m, x) == Family::Weibull);
  m.trees.push_back(l);
  CHECK(predict_family(m, x) == Family::Lognormal);
}

TEST_CASE("bootstrap isolation") {
  const auto c = noisy(80, 8);
  auto extended = c;
  extended.x.push_back(c.x[0]);
  extended.y.push_back(c.y[0]);
  const std::uint64_t seed = 21;
  const auto a = train_forest(c.x, c.y, 40, seed);
  const auto b = train_forest(extended.x, extended.y, 40, seed);
  std::size_t isolated = 0;
  for (std::size_t t = 0; t < 40; ++t) {
    if (bootstrap_count(seed, t, c.x.size()) == 0) {
      ++isolated;
      CHECK(a.trees[t] == b.trees[t]);
    }
  }
  // Poisson(1) leaves an example out of roughly e^-1 of the trees.
  CHECK(isolated >= 5);
}

TEST_CASE("bootstrap counts look Poisson(1)") {
  double sum = 0, sq = 0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double k = bootstrap_count(3, static_cast<std::size_t>(i % 50), static_cast<std::size_t>(i / 50));
    sum += k;
    sq += k * k;
  }
  const double mean = sum / n;
  CHECK(mean == doctest::Approx(1.0).epsilon(0.03));
  CHECK(sq / n - mean * mean == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("training preconditions") {
  const auto c = separable(10, 1);
  CHECK_THROWS_AS((void)train_forest(c.x, c.y, 5, 1), DataError);
  auto one = separable(40, 2);
  for (auto& y : one.y) y = Family::Weibull;
  CHECK_THROWS_AS((void)train_forest(one.x, one.y, 5, 1), DataError);
  auto ragged = separable(40, 3);
  ragged.x[5].pop_back();
  CHECK_THROWS_AS((void)train_forest(ragged.x, ragged.y, 5, 1), DataError);
}

TEST_CASE("balanced accuracy") {
  const std::vector<Family> truth = {Family::Weibull, Family::Weibull, Family::Weibull, Family::Lognormal};
  const std::vector<Family> pred = {Family::Weibull, Family::Weibull, Family::Weibull, Family::Weibull};
  CHECK(balanced_accuracy(truth, pred) == doctest::Approx(0.5));
  const std::vector<Family> mixed = {Family::Weibull, Family::Lognormal, Family::Weibull, Family::Lognormal};
  CHECK(balanced_accuracy(truth, mixed) == doctest::Approx((2.0 / 3 + 1.0) / 2));
  CHECK(balanced_accuracy(truth, truth) == 1.0);
}
