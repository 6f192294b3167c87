#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/cart.hpp"

namespace kneehar::ml {

struct GradientBoostingParams {
  double learning_rate = 0.1;
  std::size_t n_estimators = 100;
  std::size_t max_depth = 3;
  double subsample = 1.0;
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;

  bool operator==(const GradientBoostingParams&) const = default;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw UsageError("learning_rate must be >= 0");
    if (n_estimators < 1) throw UsageError("n_estimators must be >= 1");
    if (max_depth < 1) throw UsageError("max_depth must be >= 1");
    if (!(subsample > 0.0 && subsample <= 1.0)) throw UsageError("subsample must lie in (0, 1]");
    if (min_samples_leaf < 1) throw UsageError("min_samples_leaf must be >= 1");
    if (min_samples_split < 2) throw UsageError("min_samples_split must be >= 2");
  }
};

/// Multiclass gradient boosting on the multinomial deviance. Each stage
/// fits one squared-error regression tree per class to the residuals
/// (one-hot minus softmax) and replaces its leaf values by a Newton step.
class GradientBoosting {
 public:
  GradientBoosting() = default;

  static GradientBoosting fit(const Matrix& X, std::span<const int> y,
                              const GradientBoostingParams& p, std::uint64_t seed) {
    check_training_input(X, y, "gradient boosting");
    p.validate();
    const auto ci = index_classes(y);
    const std::size_t k = ci.size();
    const std::size_t n = X.rows();
    if (k < 2) throw DataError("gradient boosting: need at least two classes");

    GradientBoosting m;
    m.classes_ = ci.classes;
    m.n_features_ = X.cols();
    m.learning_rate_ = p.learning_rate;

    std::vector<double> counts(k, 0.0);
    for (auto c : ci.index) counts[c] += 1.0;
    for (double c : counts) m.init_.push_back(std::log(c / static_cast<double>(n)));

    Matrix raw(n, k);
    for (std::size_t i = 0; i < n; ++i) std::copy(m.init_.begin(), m.init_.end(), raw.row(i).begin());

    const FeatureOrder order(X);
    const TreeLimits limits{p.min_samples_split, p.min_samples_leaf, p.max_depth, 0};
    std::mt19937_64 rng(seed);
    const auto n_inbag = std::max<std::size_t>(
        1, static_cast<std::size_t>(p.subsample * static_cast<double>(n)));
    std::vector<std::size_t> perm(n);
    std::vector<std::uint32_t> multiplicity(n, 1);
    Matrix prob(n, k);
    std::vector<double> residual(n);

    for (std::size_t stage = 0; stage < p.n_estimators; ++stage) {
      for (std::size_t i = 0; i < n; ++i) {
        auto pr = prob.row(i);
        auto r = raw.row(i);
        std::copy(r.begin(), r.end(), pr.begin());
        softmax_inplace(pr);
      }
      if (n_inbag < n) {
        std::iota(perm.begin(), perm.end(), 0);
        for (std::size_t i = 0; i < n_inbag; ++i) {
          std::uniform_int_distribution<std::size_t> pick(i, n - 1);
          std::swap(perm[i], perm[pick(rng)]);
        }
        std::fill(multiplicity.begin(), multiplicity.end(), 0u);
        for (std::size_t i = 0; i < n_inbag; ++i) multiplicity[perm[i]] = 1;
      }

      std::vector<Tree> stage_trees;
      for (std::size_t c = 0; c < k; ++c) {
        for (std::size_t i = 0; i < n; ++i) {
          residual[i] = (ci.index[i] == c ? 1.0 : 0.0) - prob(i, c);
        }
        const SquaredErrorCriterion criterion(residual);
        TreeBuilder<SquaredErrorCriterion> builder(X, order, criterion, limits, rng);
        Tree tree = builder.build(multiplicity);

        // Newton step per leaf over the in-bag samples.
        auto& nodes = tree.mutable_nodes();
        std::vector<double> num(nodes.size(), 0.0);
        std::vector<double> den(nodes.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          if (multiplicity[i] == 0) continue;
          const auto leaf = tree.apply(X.row(i));
          const double pc = prob(i, c);
          num[leaf] += residual[i];
          den[leaf] += pc * (1.0 - pc);
        }
        const double scale = static_cast<double>(k - 1) / static_cast<double>(k);
        for (std::size_t leaf = 0; leaf < nodes.size(); ++leaf) {
          if (!nodes[leaf].is_leaf()) continue;
          nodes[leaf].value = {std::abs(den[leaf]) < 1e-150 ? 0.0 : scale * num[leaf] / den[leaf]};
        }
        for (std::size_t i = 0; i < n; ++i) {
          raw(i, c) += m.learning_rate_ * tree.value(X.row(i))[0];
        }
        stage_trees.push_back(std::move(tree));
      }
      m.stages_.push_back(std::move(stage_trees));
      m.train_deviance_.push_back(deviance(raw, ci.index));
    }
    return m;
  }

  /// Mean negative log-likelihood of the softmax model.
  static double deviance(const Matrix& raw, std::span<const std::size_t> class_index) {
    double total = 0.0;
    std::vector<double> p(raw.cols());
    for (std::size_t i = 0; i < raw.rows(); ++i) {
      auto r = raw.row(i);
      std::copy(r.begin(), r.end(), p.begin());
      softmax_inplace(p);
      total -= std::log(std::max(p[class_index[i]], 1e-300));
    }
    return total / static_cast<double>(raw.rows());
  }

  /// Accumulated additive scores before the softmax.
  Matrix decision_function(const Matrix& X) const {
    check_dimension(n_features_, X.cols());
    Matrix raw(X.rows(), classes_.size());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      auto r = raw.row(i);
      std::copy(init_.begin(), init_.end(), r.begin());
      for (const auto& stage : stages_) {
        for (std::size_t c = 0; c < stage.size(); ++c) {
          r[c] += learning_rate_ * stage[c].value(X.row(i))[0];
        }
      }
    }
    return raw;
  }

  Matrix predict_scores(const Matrix& X) const {
    Matrix out = decision_function(X);
    for (std::size_t i = 0; i < out.rows(); ++i) softmax_inplace(out.row(i));
    return out;
  }

  const std::vector<int>& classes() const noexcept { return classes_; }
  std::size_t n_features() const noexcept { return n_features_; }
  const std::vector<double>& train_deviance() const noexcept { return train_deviance_; }
  std::size_t n_stages() const noexcept { return stages_.size(); }

  nlohmann::json to_json() const {
    nlohmann::json stages = nlohmann::json::array();
    for (const auto& stage : stages_) {
      nlohmann::json trees = nlohmann::json::array();
      for (const auto& t : stage) trees.push_back(t.to_json());
      stages.push_back(trees);
    }
    return {{"classes", classes_},
            {"n_features", n_features_},
            {"learning_rate", learning_rate_},
            {"init", init_},
            {"train_deviance", train_deviance_},
            {"stages", stages}};
  }

  static GradientBoosting from_json(const nlohmann::json& j) {
    GradientBoosting m;
    m.classes_ = j.at("classes").get<std::vector<int>>();
    m.n_features_ = j.at("n_features").get<std::size_t>();
    m.learning_rate_ = j.at("learning_rate").get<double>();
    m.init_ = j.at("init").get<std::vector<double>>();
    m.train_deviance_ = j.at("train_deviance").get<std::vector<double>>();
    for (const auto& stage : j.at("stages")) {
      std::vector<Tree> trees;
      for (const auto& t : stage) trees.push_back(Tree::from_json(t));
      if (trees.size() != m.classes_.size()) throw DataError("gradient boosting: malformed stage");
      m.stages_.push_back(std::move(trees));
    }
    if (m.init_.size() != m.classes_.size()) throw DataError("gradient boosting: malformed init");
    return m;
  }

 private:
  std::vector<int> classes_;
  std::size_t n_features_ = 0;
  double learning_rate_ = 0.1;
  std::vector<double> init_;
  std::vector<std::vector<Tree>> stages_;
  std::vector<double> train_deviance_;
};

}  // namespace kneehar::ml
