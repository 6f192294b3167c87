#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/cart.hpp"

namespace kneehar::ml {

struct RandomForestParams {
  std::size_t n_estimators = 100;
  MaxFeatures max_features = MaxFeatures::Sqrt;
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;
  std::size_t max_depth = 0;
  bool bootstrap = true;

  bool operator==(const RandomForestParams&) const = default;

  void validate() const {
    if (n_estimators < 1) throw UsageError("n_estimators must be >= 1");
    if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
    if (min_samples_split < 2) throw UsageError("min_samples_split must be >= 2");
  }
};

/// Bagged Gini trees with per-split feature subsampling. Scores are the
/// mean of the trees' leaf class frequencies.
class RandomForest {
 public:
  RandomForest() = default;

  static RandomForest fit(const Matrix& X, std::span<const int> y, const RandomForestParams& p,
                          std::uint64_t seed) {
    check_training_input(X, y, "random forest");
    p.validate();
    const auto ci = index_classes(y);
    const FeatureOrder order(X);
    const GiniCriterion criterion(ci.index, ci.size());
    const TreeLimits limits{p.min_samples_split, p.min_samples_leaf, p.max_depth,
                            resolve_max_features(p.max_features, X.cols())};

    RandomForest m;
    m.classes_ = ci.classes;
    m.n_features_ = X.cols();
    std::mt19937_64 master(seed);
    std::vector<std::uint32_t> multiplicity(X.rows());
    for (std::size_t t = 0; t < p.n_estimators; ++t) {
      std::mt19937_64 rng(master());
      if (p.bootstrap) {
        std::fill(multiplicity.begin(), multiplicity.end(), 0u);
        std::uniform_int_distribution<std::size_t> draw(0, X.rows() - 1);
        for (std::size_t i = 0; i < X.rows(); ++i) ++multiplicity[draw(rng)];
      } else {
        std::fill(multiplicity.begin(), multiplicity.end(), 1u);
      }
      TreeBuilder<GiniCriterion> builder(X, order, criterion, limits, rng);
      m.trees_.push_back(builder.build(multiplicity));
    }
    return m;
  }

  Matrix predict_scores(const Matrix& X) const {
    check_dimension(n_features_, X.cols());
    Matrix out(X.rows(), classes_.size());
    const double inv = 1.0 / static_cast<double>(trees_.size());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      auto row = out.row(i);
      for (const auto& tree : trees_) {
        auto v = tree.value(X.row(i));
        for (std::size_t c = 0; c < v.size(); ++c) row[c] += v[c];
      }
      for (double& s : row) s *= inv;
    }
    return out;
  }

  const std::vector<int>& classes() const noexcept { return classes_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const std::vector<Tree>& trees() const noexcept { return trees_; }

  nlohmann::json to_json() const {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) trees.push_back(t.to_json());
    return {{"classes", classes_}, {"n_features", n_features_}, {"trees", trees}};
  }

  static RandomForest from_json(const nlohmann::json& j) {
    RandomForest m;
    m.classes_ = j.at("classes").get<std::vector<int>>();
    m.n_features_ = j.at("n_features").get<std::size_t>();
    for (const auto& t : j.at("trees")) m.trees_.push_back(Tree::from_json(t));
    if (m.trees_.empty()) throw DataError("random forest without trees");
    return m;
  }

 private:
  std::vector<int> classes_;
  std::size_t n_features_ = 0;
  std::vector<Tree> trees_;
};

}  // namespace kneehar::ml
