#include "rtdlab/forest.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rtdlab/error.hpp"
#include "rtdlab/parallel.hpp"
#include "rtdlab/rng.hpp"

namespace rtdlab::ml {

int class_index(dist::Family family) {
  switch (family) {
    case dist::Family::Weibull:
      return 0;
    case dist::Family::Lognormal:
      return 1;
    case dist::Family::GP:
      break;
  }
  throw DataError("forest: GP is not a forest class");
}

dist::Family class_family(int index) { return index == 0 ? dist::Family::Weibull : dist::Family::Lognormal; }

double entropy(double weight_a, double weight_b) {
  const double total = weight_a + weight_b;
  if (total <= 0) return 0.0;
  double h = 0.0;
  for (const double w : {weight_a, weight_b}) {
    if (w > 0) h -= (w / total) * std::log2(w / total);
  }
  return h;
}

dist::Family DecisionTree::predict(std::span<const double> x) const {
  int at = 0;
  while (nodes[at].feature >= 0) {
    const auto& n = nodes[at];
    at = x[n.feature] <= n.threshold ? n.left : n.right;
  }
  return nodes[at].label;
}

unsigned bootstrap_count(std::uint64_t seed, std::size_t tree, std::size_t example) {
  Rng rng(substream_seed(substream_seed(seed, tree), example));
  return rng.poisson1();
}

namespace {

struct Sample {
  std::size_t row;
  double weight;
  int cls;
};

struct Split {
  int feature = -1;
  double threshold = 0.0;
  double child_entropy = 0.0;
};

class TreeGrower {
 public:
  TreeGrower(std::span<const std::vector<double>> x, std::size_t num_features, std::uint64_t split_seed)
      : x_(x), d_(num_features), rng_(split_seed) {
    m_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(d_)))));
  }

  DecisionTree grow(std::vector<Sample> samples) {
    tree_.nodes.clear();
    build(samples);
    return std::move(tree_);
  }

 private:
  int build(std::vector<Sample>& samples) {
    std::array<double, 2> w{};
    for (const auto& s : samples) w[s.cls] += s.weight;
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[id].label = w[1] > w[0] ? dist::Family::Lognormal : dist::Family::Weibull;
    if (w[0] == 0 || w[1] == 0 || w[0] + w[1] < 2) return id;

    const auto split = best_split(samples, w);
    if (split.feature < 0) return id;

    std::vector<Sample> left, right;
    for (const auto& s : samples) {
      (x_[s.row][split.feature] <= split.threshold ? left : right).push_back(s);
    }
    samples.clear();
    samples.shrink_to_fit();
    const int l = build(left);
    const int r = build(right);
    auto& node = tree_.nodes[id];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = l;
    node.right = r;
    return id;
  }

  // Visits features in a random order, scoring at least m of them and
  // continuing past m only while no candidate admitted a split.
  Split best_split(const std::vector<Sample>& samples, const std::array<double, 2>& totals) {
    std::vector<std::size_t> order(d_);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = 0; i + 1 < d_; ++i) std::swap(order[i], order[i + rng_.below(d_ - i)]);

    Split best;
    double best_score = std::numeric_limits<double>::infinity();
    const double total = totals[0] + totals[1];
    std::vector<std::pair<double, const Sample*>> sorted;
    for (std::size_t visited = 0; visited < d_; ++visited) {
      if (visited >= m_ && best.feature >= 0) break;
      const auto feature = order[visited];
      sorted.clear();
      for (const auto& s : samples) sorted.emplace_back(x_[s.row][feature], &s);
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      std::array<double, 2> left{};
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        left[sorted[i].second->cls] += sorted[i].second->weight;
        if (sorted[i].first == sorted[i + 1].first) continue;
        const double wl = left[0] + left[1];
        const double wr = total - wl;
        const double score =
            (wl * entropy(left[0], left[1]) + wr * entropy(totals[0] - left[0], totals[1] - left[1])) / total;
        if (score < best_score) {
          best_score = score;
          best.feature = static_cast<int>(feature);
          best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
          best.child_entropy = score;
        }
      }
    }
    return best;
  }

  std::span<const std::vector<double>> x_;
  std::size_t d_;
  std::size_t m_;
  Rng rng_;
  DecisionTree tree_;
};

}  // namespace

ForestModel train_forest(std::span<const std::vector<double>> x, std::span<const dist::Family> y,
                         std::size_t n_trees, std::uint64_t seed, int workers) {
  if (x.size() != y.size()) throw DataError("train_forest: feature and label counts differ");
  if (x.size() < kMinForestExamples) {
    throw DataError("train_forest: need at least " + std::to_string(kMinForestExamples) + " examples");
  }
  if (n_trees < 1) throw DataError("train_forest: need at least one tree");
  const std::size_t d = x.front().size();
  if (d == 0) throw DataError("train_forest: no features");
  std::array<std::size_t, 2> per_class{};
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].size() != d) throw DataError("train_forest: ragged feature rows");
    ++per_class[class_index(y[i])];
  }
  if (per_class[0] == 0 || per_class[1] == 0) throw DataError("train_forest: single-class corpus");

  ForestModel m;
  m.num_features = d;
  m.seed = seed;
  m.trees.resize(n_trees);
  parallel_for(n_trees, workers, [&](std::size_t t) {
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto count = bootstrap_count(seed, t, i);
      if (count > 0) samples.push_back({i, static_cast<double>(count), class_index(y[i])});
    }
    // The split stream is keyed apart from the per-example bootstrap streams.
    TreeGrower grower(x, d, substream_seed(substream_seed(seed, t), ~std::uint64_t{0}));
    m.trees[t] = grower.grow(std::move(samples));
  });
  return m;
}

VoteCount votes(const ForestModel& m, std::span<const double> x) {
  if (x.size() != m.num_features) throw DataError("forest: feature count mismatch");
  VoteCount v;
  for (const auto& tree : m.trees) {
    if (tree.predict(x) == dist::Family::Weibull) {
      ++v.weibull;
    } else {
      ++v.lognormal;
    }
  }
  return v;
}

dist::Family predict_family(const ForestModel& m, std::span<const double> x) {
  const auto v = votes(m, x);
  return v.lognormal > v.weibull ? dist::Family::Lognormal : dist::Family::Weibull;
}

double balanced_accuracy(std::span<const dist::Family> truth, std::span<const dist::Family> predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw DataError("balanced_accuracy: size mismatch");
  std::array<double, 3> hits{}, counts{};
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto c = static_cast<std::size_t>(truth[i]);
    counts[c] += 1;
    if (predicted[i] == truth[i]) hits[c] += 1;
  }
  double sum = 0.0;
  int classes = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    if (counts[c] > 0) {
      sum += hits[c] / counts[c];
      ++classes;
    }
  }
  return sum / classes;
}

}  // namespace rtdlab::ml
