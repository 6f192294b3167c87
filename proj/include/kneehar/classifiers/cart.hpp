#pragma once

// Binary CART trees shared by the decision tree, random forest and gradient
// boosting learners. Splits are axis-aligned "x[f] <= threshold" tests with
// thresholds at midpoints between consecutive distinct values.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/common.hpp"

namespace kneehar::ml {

enum class MaxFeatures { All, Sqrt, Log2 };

inline std::string_view max_features_name(MaxFeatures m) {
  switch (m) {
    case MaxFeatures::All:
      return "all";
    case MaxFeatures::Sqrt:
      return "sqrt";
    case MaxFeatures::Log2:
      return "log2";
  }
  return "all";
}

/// "auto" is an alias of "sqrt"; "none" of "all".
inline MaxFeatures parse_max_features(std::string_view s) {
  if (s == "all" || s == "none") return MaxFeatures::All;
  if (s == "sqrt" || s == "auto") return MaxFeatures::Sqrt;
  if (s == "log2") return MaxFeatures::Log2;
  throw UsageError("unknown max_features '" + std::string(s) + "' (valid: all, sqrt, auto, log2)");
}

/// Number of candidate features per split, at least 1.
inline std::size_t resolve_max_features(MaxFeatures m, std::size_t n_features) {
  const double d = static_cast<double>(n_features);
  switch (m) {
    case MaxFeatures::All:
      return n_features;
    case MaxFeatures::Sqrt:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(d))));
    case MaxFeatures::Log2:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::log2(d))));
  }
  return n_features;
}

struct TreeLimits {
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  std::size_t max_depth = 0;     // 0: unlimited
  std::size_t max_features = 0;  // 0 or >= n_features: every feature
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  std::vector<double> value;  // leaves only

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {}

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
  std::vector<TreeNode>& mutable_nodes() noexcept { return nodes_; }

  /// Index of the leaf reached by `x`.
  std::size_t apply(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
      const auto& n = nodes_[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left
                                                                                          : n.right);
    }
    return i;
  }

  std::span<const double> value(std::span<const double> x) const {
    return nodes_[apply(x)].value;
  }

  std::size_t depth() const { return nodes_.empty() ? 0 : depth_from(0); }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  bool operator==(const Tree&) const = default;

  nlohmann::json to_json() const {
    std::vector<int> feature, left, right;
    std::vector<double> threshold;
    std::vector<std::vector<double>> value;
    for (const auto& n : nodes_) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    return {{"feature", feature}, {"threshold", threshold}, {"left", left},
            {"right", right},     {"value", value}};
  }

  static Tree from_json(const nlohmann::json& j) {
    const auto feature = j.at("feature").get<std::vector<int>>();
    const auto threshold = j.at("threshold").get<std::vector<double>>();
    const auto left = j.at("left").get<std::vector<int>>();
    const auto right = j.at("right").get<std::vector<int>>();
    const auto value = j.at("value").get<std::vector<std::vector<double>>>();
    const std::size_t n = feature.size();
    if (threshold.size() != n || left.size() != n || right.size() != n || value.size() != n || n == 0) {
      throw DataError("malformed tree");
    }
    std::vector<TreeNode> nodes(n);
    for (std::size_t i = 0; i < n; ++i) {
      nodes[i] = {feature[i], threshold[i], left[i], right[i], value[i]};
      if (!nodes[i].is_leaf()) {
        const auto in_range = [&](int c) { return c > static_cast<int>(i) && c < static_cast<int>(n); };
        if (!in_range(left[i]) || !in_range(right[i])) throw DataError("malformed tree links");
      }
    }
    return Tree(std::move(nodes));
  }

 private:
  std::size_t depth_from(std::size_t i) const {
    const auto& n = nodes_[i];
    if (n.is_leaf()) return 0;
    return 1 + std::max(depth_from(static_cast<std::size_t>(n.left)),
                        depth_from(static_cast<std::size_t>(n.right)));
  }

  std::vector<TreeNode> nodes_;
};

/// Row indices of X sorted by each feature (ties by row index). Computed
/// once per training matrix and shared across trees.
class FeatureOrder {
 public:
  explicit FeatureOrder(const Matrix& X) : rows_(X.rows()), order_(X.rows() * X.cols()) {
    for (std::size_t f = 0; f < X.cols(); ++f) {
      auto first = order_.begin() + static_cast<std::ptrdiff_t>(f * rows_);
      std::iota(first, first + static_cast<std::ptrdiff_t>(rows_), 0u);
      std::stable_sort(first, first + static_cast<std::ptrdiff_t>(rows_),
                       [&](std::uint32_t a, std::uint32_t b) { return X(a, f) < X(b, f); });
    }
  }

  std::span<const std::uint32_t> feature(std::size_t f) const {
    return {order_.data() + f * rows_, rows_};
  }

 private:
  std::size_t rows_;
  std::vector<std::uint32_t> order_;
};

/// Gini impurity over class indices. cost() is n * gini.
class GiniCriterion {
 public:
  struct Stats {
    std::vector<double> counts;
    double n = 0.0;
  };

  GiniCriterion(std::span<const std::size_t> class_of_row, std::size_t n_classes)
      : class_of_row_(class_of_row), n_classes_(n_classes) {}

  Stats empty() const { return {std::vector<double>(n_classes_, 0.0), 0.0}; }
  void add(Stats& s, std::uint32_t row) const {
    s.counts[class_of_row_[row]] += 1.0;
    s.n += 1.0;
  }
  void remove(Stats& s, std::uint32_t row) const {
    s.counts[class_of_row_[row]] -= 1.0;
    s.n -= 1.0;
  }
  double cost(const Stats& s) const {
    if (s.n <= 0.0) return 0.0;
    double sq = 0.0;
    for (double c : s.counts) sq += c * c;
    return s.n - sq / s.n;
  }
  bool pure(const Stats& s) const {
    return std::count_if(s.counts.begin(), s.counts.end(), [](double c) { return c > 0.0; }) <= 1;
  }
  std::vector<double> leaf_value(const Stats& s) const {
    std::vector<double> v(s.counts);
    for (double& x : v) x /= s.n;
    return v;
  }

 private:
  std::span<const std::size_t> class_of_row_;
  std::size_t n_classes_;
};

/// Squared error around the node mean. cost() is the node's sum of
/// squared deviations.
class SquaredErrorCriterion {
 public:
  struct Stats {
    double n = 0.0;
    double sum = 0.0;
    double sumsq = 0.0;
  };

  explicit SquaredErrorCriterion(std::span<const double> target) : target_(target) {}

  Stats empty() const { return {}; }
  void add(Stats& s, std::uint32_t row) const {
    const double t = target_[row];
    s.n += 1.0;
    s.sum += t;
    s.sumsq += t * t;
  }
  void remove(Stats& s, std::uint32_t row) const {
    const double t = target_[row];
    s.n -= 1.0;
    s.sum -= t;
    s.sumsq -= t * t;
  }
  double cost(const Stats& s) const {
    if (s.n <= 0.0) return 0.0;
    return std::max(0.0, s.sumsq - s.sum * s.sum / s.n);
  }
  bool pure(const Stats& s) const { return cost(s) <= 1e-15 * s.n; }
  std::vector<double> leaf_value(const Stats& s) const { return {s.sum / s.n}; }

 private:
  std::span<const double> target_;
};

/// Depth-first greedy tree growth. Candidate splits are scanned feature by
/// feature in ascending index and threshold order; a candidate replaces the
/// incumbent only when strictly better, so ties go to the lowest feature
/// and then the lowest threshold.
template <class Criterion>
class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const FeatureOrder& order, const Criterion& criterion,
              const TreeLimits& limits, std::mt19937_64& rng)
      : X_(X), order_(order), criterion_(criterion), limits_(limits), rng_(rng) {}

  /// `multiplicity[r]` copies of row r take part in training.
  Tree build(std::span<const std::uint32_t> multiplicity) {
    const std::size_t d = X_.cols();
    m_ = 0;
    for (auto c : multiplicity) m_ += c;
    if (m_ == 0) throw DataError("tree: no training samples");
    lists_.assign(d * m_, 0);
    for (std::size_t f = 0; f < d; ++f) {
      std::size_t k = f * m_;
      for (std::uint32_t r : order_.feature(f)) {
        for (std::uint32_t c = 0; c < multiplicity[r]; ++c) lists_[k++] = r;
      }
    }
    buffer_.resize(m_);
    goes_left_.assign(X_.rows(), 0);
    nodes_.clear();
    grow(0, m_, 0);
    return Tree(std::move(nodes_));
  }

 private:
  struct Split {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double cost = 0.0;
  };

  static bool better(double cost, const Split& best) {
    return !best.found || cost < best.cost - 1e-12 * std::max(1.0, std::abs(best.cost));
  }

  bool constant_in(std::size_t f, std::size_t start, std::size_t end) const {
    return X_(lists_[f * m_ + start], f) == X_(lists_[f * m_ + end - 1], f);
  }

  std::vector<std::size_t> candidate_features(std::size_t start, std::size_t end) {
    const std::size_t d = X_.cols();
    std::vector<std::size_t> chosen;
    if (limits_.max_features == 0 || limits_.max_features >= d) {
      chosen.resize(d);
      std::iota(chosen.begin(), chosen.end(), 0);
      return chosen;
    }
    // Draw without replacement until max_features non-constant features
    // are found; constant ones do not count toward the budget.
    std::vector<std::size_t> perm(d);
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t visited = 0; visited < d && chosen.size() < limits_.max_features; ++visited) {
      std::uniform_int_distribution<std::size_t> pick(visited, d - 1);
      std::swap(perm[visited], perm[pick(rng_)]);
      const std::size_t f = perm[visited];
      if (!constant_in(f, start, end)) chosen.push_back(f);
    }
    std::sort(chosen.begin(), chosen.end());
    return chosen;
  }

  int make_leaf(const typename Criterion::Stats& stats) {
    TreeNode leaf;
    leaf.value = criterion_.leaf_value(stats);
    nodes_.push_back(std::move(leaf));
    return static_cast<int>(nodes_.size() - 1);
  }

  int grow(std::size_t start, std::size_t end, std::size_t depth) {
    auto stats = criterion_.empty();
    for (std::size_t k = start; k < end; ++k) criterion_.add(stats, lists_[k]);
    const std::size_t n = end - start;
    if (n < limits_.min_samples_split || n < 2 * limits_.min_samples_leaf || criterion_.pure(stats) ||
        (limits_.max_depth != 0 && depth >= limits_.max_depth)) {
      return make_leaf(stats);
    }

    Split best;
    for (std::size_t f : candidate_features(start, end)) {
      const std::size_t base = f * m_;
      auto left = criterion_.empty();
      auto right = stats;
      for (std::size_t k = start; k + 1 < end; ++k) {
        const std::uint32_t row = lists_[base + k];
        criterion_.add(left, row);
        criterion_.remove(right, row);
        const std::size_t n_left = k - start + 1;
        if (n_left < limits_.min_samples_leaf) continue;
        if (n - n_left < limits_.min_samples_leaf) break;
        const double v = X_(row, f);
        const double next = X_(lists_[base + k + 1], f);
        if (!(next > v)) continue;
        const double cost = criterion_.cost(left) + criterion_.cost(right);
        if (better(cost, best)) {
          double threshold = std::midpoint(v, next);
          if (threshold >= next) threshold = v;
          best = {true, f, threshold, cost};
        }
      }
    }
    if (!best.found) return make_leaf(stats);

    // Stable partition of every feature list so each child occupies a
    // contiguous, still sorted range.
    for (std::size_t k = start; k < end; ++k) {
      const std::uint32_t row = lists_[best.feature * m_ + k];
      goes_left_[row] = X_(row, best.feature) <= best.threshold ? 1 : 0;
    }
    std::size_t n_left = 0;
    for (std::size_t f = 0; f < X_.cols(); ++f) {
      auto* list = lists_.data() + f * m_;
      std::size_t l = start;
      std::size_t r = 0;
      for (std::size_t k = start; k < end; ++k) {
        if (goes_left_[list[k]]) list[l++] = list[k];
        else buffer_[r++] = list[k];
      }
      std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(r), list + l);
      n_left = l - start;
    }

    const int self = static_cast<int>(nodes_.size());
    TreeNode node;
    node.feature = static_cast<int>(best.feature);
    node.threshold = best.threshold;
    nodes_.push_back(std::move(node));
    const int left = grow(start, start + n_left, depth + 1);
    const int right = grow(start + n_left, end, depth + 1);
    nodes_[static_cast<std::size_t>(self)].left = left;
    nodes_[static_cast<std::size_t>(self)].right = right;
    return self;
  }

  const Matrix& X_;
  const FeatureOrder& order_;
  const Criterion& criterion_;
  TreeLimits limits_;
  std::mt19937_64& rng_;

  std::size_t m_ = 0;
  std::vector<std::uint32_t> lists_;
  std::vector<std::uint32_t> buffer_;
  std::vector<unsigned char> goes_left_;
  std::vector<TreeNode> nodes_;
};

}  // namespace kneehar::ml
