#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/common.hpp"

namespace kneehar::ml {

struct NaiveBayesParams {
  // Fraction of the largest per-feature variance added to every variance.
  double var_smoothing = 1e-9;

  bool operator==(const NaiveBayesParams&) const = default;
};

/// Gaussian naive Bayes with variance smoothing.
class NaiveBayes {
 public:
  NaiveBayes() = default;

  static NaiveBayes fit(const Matrix& X, std::span<const int> y, const NaiveBayesParams& p) {
    check_training_input(X, y, "naive bayes");
    if (!(p.var_smoothing >= 0.0)) throw UsageError("var_smoothing must be >= 0");
    const auto ci = index_classes(y);
    const std::size_t k = ci.size();
    const std::size_t d = X.cols();
    const std::size_t n = X.rows();

    NaiveBayes m;
    m.classes_ = ci.classes;
    m.mean_ = Matrix(k, d);
    m.var_ = Matrix(k, d);
    std::vector<double> count(k, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      count[ci.index[i]] += 1.0;
      auto row = X.row(i);
      auto mu = m.mean_.row(ci.index[i]);
      for (std::size_t j = 0; j < d; ++j) mu[j] += row[j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      for (double& v : m.mean_.row(c)) v /= count[c];
    }
    for (std::size_t i = 0; i < n; ++i) {
      auto row = X.row(i);
      auto mu = m.mean_.row(ci.index[i]);
      auto var = m.var_.row(ci.index[i]);
      for (std::size_t j = 0; j < d; ++j) var[j] += (row[j] - mu[j]) * (row[j] - mu[j]);
    }

    // Largest total (all-class) population variance across features.
    double max_var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += X(i, j);
      const double mu = s / static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (X(i, j) - mu) * (X(i, j) - mu);
      max_var = std::max(max_var, ss / static_cast<double>(n));
    }
    m.epsilon_ = p.var_smoothing * max_var;

    for (std::size_t c = 0; c < k; ++c) {
      for (double& v : m.var_.row(c)) {
        v = v / count[c] + m.epsilon_;
        if (!(v > 0.0)) {
          throw NumericalError("naive bayes: zero variance feature; increase var_smoothing");
        }
      }
      m.log_prior_.push_back(std::log(count[c] / static_cast<double>(n)));
    }
    return m;
  }

  /// Per-class log prior plus Gaussian log likelihood.
  std::vector<double> joint_log_likelihood(std::span<const double> x) const {
    check_dimension(mean_.cols(), x.size());
    std::vector<double> jll(classes_.size());
    for (std::size_t c = 0; c < classes_.size(); ++c) {
      auto mu = mean_.row(c);
      auto var = var_.row(c);
      double s = log_prior_[c];
      for (std::size_t j = 0; j < x.size(); ++j) {
        const double d = x[j] - mu[j];
        s -= 0.5 * std::log(2.0 * std::numbers::pi * var[j]) + 0.5 * d * d / var[j];
      }
      jll[c] = s;
    }
    return jll;
  }

  /// Posterior class probabilities.
  Matrix predict_scores(const Matrix& X) const {
    check_dimension(mean_.cols(), X.cols());
    Matrix out(X.rows(), classes_.size());
    for (std::size_t i = 0; i < X.rows(); ++i) {
      auto jll = joint_log_likelihood(X.row(i));
      softmax_inplace(jll);
      std::copy(jll.begin(), jll.end(), out.row(i).begin());
    }
    return out;
  }

  const std::vector<int>& classes() const noexcept { return classes_; }
  std::size_t n_features() const noexcept { return mean_.cols(); }
  double epsilon() const noexcept { return epsilon_; }
  const Matrix& means() const noexcept { return mean_; }
  const Matrix& variances() const noexcept { return var_; }

  nlohmann::json to_json() const {
    return {{"classes", classes_},
            {"log_prior", log_prior_},
            {"n_features", mean_.cols()},
            {"epsilon", epsilon_},
            {"mean", std::vector<double>(mean_.data().begin(), mean_.data().end())},
            {"var", std::vector<double>(var_.data().begin(), var_.data().end())}};
  }

  static NaiveBayes from_json(const nlohmann::json& j) {
    NaiveBayes m;
    m.classes_ = j.at("classes").get<std::vector<int>>();
    m.log_prior_ = j.at("log_prior").get<std::vector<double>>();
    m.epsilon_ = j.at("epsilon").get<double>();
    const auto d = j.at("n_features").get<std::size_t>();
    m.mean_ = unflatten(j.at("mean").get<std::vector<double>>(), m.classes_.size(), d);
    m.var_ = unflatten(j.at("var").get<std::vector<double>>(), m.classes_.size(), d);
    return m;
  }

 private:
  static Matrix unflatten(const std::vector<double>& v, std::size_t rows, std::size_t cols) {
    if (v.size() != rows * cols) throw DataError("naive bayes: malformed parameter block");
    Matrix m(rows, cols);
    std::copy(v.begin(), v.end(), m.row(0).data());
    return m;
  }

  std::vector<int> classes_;
  std::vector<double> log_prior_;
  Matrix mean_;
  Matrix var_;
  double epsilon_ = 0.0;
};

}  // namespace kneehar::ml
