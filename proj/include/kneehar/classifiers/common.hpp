#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kneehar/error.hpp"
#include "kneehar/matrix.hpp"

namespace kneehar::ml {

/// Maps arbitrary integer labels onto dense indices 0..K-1 in ascending
/// label order.
struct ClassIndex {
  std::vector<int> classes;       // sorted distinct labels
  std::vector<std::size_t> index;  // per training sample, position in `classes`

  std::size_t size() const noexcept { return classes.size(); }
};

inline ClassIndex index_classes(std::span<const int> labels) {
  ClassIndex ci;
  ci.classes.assign(labels.begin(), labels.end());
  std::sort(ci.classes.begin(), ci.classes.end());
  ci.classes.erase(std::unique(ci.classes.begin(), ci.classes.end()), ci.classes.end());
  ci.index.reserve(labels.size());
  for (int y : labels) {
    ci.index.push_back(static_cast<std::size_t>(
        std::lower_bound(ci.classes.begin(), ci.classes.end(), y) - ci.classes.begin()));
  }
  return ci;
}

inline void check_training_input(const Matrix& X, std::span<const int> y, const char* who) {
  if (X.rows() == 0) throw DataError(std::string(who) + ": no training samples");
  if (X.rows() != y.size()) {
    throw DataError(std::string(who) + ": " + std::to_string(X.rows()) + " rows but " +
                    std::to_string(y.size()) + " labels");
  }
  if (X.cols() == 0) throw DataError(std::string(who) + ": no features");
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw DataError(std::string(who) + ": non-finite feature value");
  }
}

inline void check_dimension(std::size_t expected, std::size_t got) {
  if (expected != got) {
    throw DataError("feature dimension mismatch: model expects " + std::to_string(expected) +
                    ", input has " + std::to_string(got));
  }
}

/// Index of the largest value; the first (lowest) index wins ties.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

inline void softmax_inplace(std::span<double> v) {
  const double mx = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

/// Row-wise argmax mapped back to class labels.
inline std::vector<int> labels_from_scores(const Matrix& scores, std::span<const int> classes) {
  std::vector<int> out(scores.rows());
  for (std::size_t i = 0; i < scores.rows(); ++i) out[i] = classes[argmax(scores.row(i))];
  return out;
}

}  // namespace kneehar::ml
