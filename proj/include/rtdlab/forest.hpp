#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "rtdlab/dist.hpp"

namespace rtdlab::ml {

// Binary classifier over {Weibull, Lognormal}. Class 0 is Weibull.
[[nodiscard]] int class_index(dist::Family family);
[[nodiscard]] dist::Family class_family(int index);

// Shannon entropy in bits of a two-class node with the given weights.
[[nodiscard]] double entropy(double weight_a, double weight_b);

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  dist::Family label = dist::Family::Weibull;

  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  [[nodiscard]] dist::Family predict(std::span<const double> x) const;
  friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestModel {
  std::size_t num_features = 0;
  std::uint64_t seed = 0;
  std::vector<DecisionTree> trees;
};

inline constexpr std::size_t kDefaultTrees = 50;
inline constexpr std::size_t kMinForestExamples = 20;

// Bootstrap multiplicity of example `example` in tree `tree`. Each count is
// an independent Poisson(1) draw keyed by (seed, tree, example), so adding
// examples never perturbs the resample of the existing ones.
[[nodiscard]] unsigned bootstrap_count(std::uint64_t seed, std::size_t tree, std::size_t example);

// Bagged entropy trees with floor(sqrt(d)) candidate features per split,
// grown until pure or below two samples. Throws DataError with fewer than
// kMinForestExamples examples, a single class, GP labels or ragged rows.
[[nodiscard]] ForestModel train_forest(std::span<const std::vector<double>> x, std::span<const dist::Family> y,
                                       std::size_t n_trees, std::uint64_t seed, int workers = 1);

struct VoteCount {
  std::size_t weibull = 0;
  std::size_t lognormal = 0;
};

[[nodiscard]] VoteCount votes(const ForestModel& m, std::span<const double> x);
// Majority vote; ties go to Weibull.
[[nodiscard]] dist::Family predict_family(const ForestModel& m, std::span<const double> x);

// Mean of per-class recall over the classes present in `truth`.
[[nodiscard]] double balanced_accuracy(std::span<const dist::Family> truth, std::span<const dist::Family> predicted);

}  // namespace rtdlab::ml
