#pragma once

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/common.hpp"

namespace kneehar::ml {

struct KnnParams {
  std::size_t n_neighbors = 5;

  bool operator==(const KnnParams&) const = default;
};

/// Uniform-vote k nearest neighbours by exact Euclidean search. Distance
/// ties go to the lower training index.
class Knn {
 public:
  Knn() = default;

  static Knn fit(const Matrix& X, std::span<const int> y, const KnnParams& p) {
    check_training_input(X, y, "knn");
    if (p.n_neighbors < 1) throw UsageError("n_neighbors must be >= 1");
    if (p.n_neighbors > X.rows()) {
      throw DataError("knn: n_neighbors " + std::to_string(p.n_neighbors) + " exceeds " +
                      std::to_string(X.rows()) + " training samples");
    }
    const auto ci = index_classes(y);
    Knn m;
    m.k_ = p.n_neighbors;
    m.X_ = X;
    m.classes_ = ci.classes;
    m.class_of_row_ = ci.index;
    return m;
  }

  /// Training-row indices of the k nearest neighbours of `x`, nearest first.
  std::vector<std::size_t> neighbors(std::span<const double> x) const {
    check_dimension(X_.cols(), x.size());
    std::vector<std::pair<double, std::size_t>> dist(X_.rows());
    for (std::size_t i = 0; i < X_.rows(); ++i) {
      auto row = X_.row(i);
      double s = 0.0;
      for (std::size_t j = 0; j < row.size(); ++j) {
        const double d = row[j] - x[j];
        s += d * d;
      }
      dist[i] = {s, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_), dist.end());
    std::vector<std::size_t> out(k_);
    for (std::size_t i = 0; i < k_; ++i) out[i] = dist[i].second;
    return out;
  }

  /// Neighbour class frequencies.
  Matrix predict_scores(const Matrix& X) const {
    check_dimension(X_.cols(), X.cols());
    Matrix out(X.rows(), classes_.size());
    const double w = 1.0 / static_cast<double>(k_);
    for (std::size_t i = 0; i < X.rows(); ++i) {
      for (std::size_t nb : neighbors(X.row(i))) out(i, class_of_row_[nb]) += w;
    }
    return out;
  }

  const std::vector<int>& classes() const noexcept { return classes_; }
  std::size_t n_features() const noexcept { return X_.cols(); }
  std::size_t k() const noexcept { return k_; }

  nlohmann::json to_json() const {
    std::vector<int> labels;
    for (auto c : class_of_row_) labels.push_back(classes_[c]);
    return {{"n_neighbors", k_},
            {"n_features", X_.cols()},
            {"X", std::vector<double>(X_.data().begin(), X_.data().end())},
            {"y", labels}};
  }

  static Knn from_json(const nlohmann::json& j) {
    const auto d = j.at("n_features").get<std::size_t>();
    const auto flat = j.at("X").get<std::vector<double>>();
    const auto y = j.at("y").get<std::vector<int>>();
    if (d == 0 || flat.size() != y.size() * d) throw DataError("knn: malformed training block");
    Matrix X(y.size(), d);
    std::copy(flat.begin(), flat.end(), X.row(0).data());
    return fit(X, y, {j.at("n_neighbors").get<std::size_t>()});
  }

 private:
  std::size_t k_ = 1;
  Matrix X_;
  std::vector<int> classes_;
  std::vector<std::size_t> class_of_row_;
};

}  // namespace kneehar::ml
