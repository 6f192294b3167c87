#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/cart.hpp"

namespace kneehar::ml {

struct DecisionTreeParams {
  MaxFeatures max_features = MaxFeatures::All;
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;
  std::size_t max_depth = 0;  // 0: grow until pure or constrained

  bool operator==(const DecisionTreeParams&) const = default;

  void validate() const {
    if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
    if (min_samples_split < 2) throw UsageError("min_samples_split must be >= 2");
  }
};

/// Single Gini CART classifier. Leaves hold class frequencies.
class DecisionTree {
 public:
  DecisionTree() = default;

  static DecisionTree fit(const Matrix& X, std::span<const int> y, const DecisionTreeParams& p,
                          std::uint64_t seed) {
    check_training_input(X, y, "decision tree");
    p.validate();
    const auto ci = index_classes(y);
    const FeatureOrder order(X);
    const GiniCriterion criterion(ci.index, ci.size());
    const TreeLimits limits{p.min_samples_split, p.min_samples_leaf, p.max_depth,
                            resolve_max_features(p.max_features, X.cols())};
    std::mt19937_64 rng(seed);
    TreeBuilder<GiniCriterion> builder(X, order, criterion, limits, rng);
    const std::vector<std::uint32_t> once(X.rows(), 1);

    DecisionTree m;
    m.classes_ = ci.classes;
    m.n_features_ = X.cols();
    m.tree_ = builder.build(once);
    return m;
  }

  Matrix predict_scores(const Matrix& X) const {
    check_dimension(n_features_, X.cols());
    Matrix out(X.rows(), classes_.size());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      auto v = tree_.value(X.row(i));
      std::copy(v.begin(), v.end(), out.row(i).begin());
    }
    return out;
  }

  const std::vector<int>& classes() const noexcept { return classes_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const Tree& tree() const noexcept { return tree_; }

  nlohmann::json to_json() const {
    return {{"classes", classes_}, {"n_features", n_features_}, {"tree", tree_.to_json()}};
  }

  static DecisionTree from_json(const nlohmann::json& j) {
    DecisionTree m;
    m.classes_ = j.at("classes").get<std::vector<int>>();
    m.n_features_ = j.at("n_features").get<std::size_t>();
    m.tree_ = Tree::from_json(j.at("tree"));
    return m;
  }

 private:
  std::vector<int> classes_;
  std::size_t n_features_ = 0;
  Tree tree_;
};

}  // namespace kneehar::ml
