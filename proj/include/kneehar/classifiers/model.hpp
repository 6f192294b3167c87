#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/common.hpp"
#include "kneehar/classifiers/decision_tree.hpp"
#include "kneehar/classifiers/gradient_boosting.hpp"
#include "kneehar/classifiers/knn.hpp"
#include "kneehar/classifiers/naive_bayes.hpp"
#include "kneehar/classifiers/random_forest.hpp"
#include "kneehar/classifiers/svm.hpp"
#include "kneehar/config.hpp"

namespace kneehar {

enum class Algorithm {
  NaiveBayes,
  DecisionTree,
  RandomForest,
  Knn,
  GradientBoosting,
  Svm,
};

inline constexpr std::array<Algorithm, 6> kAllAlgorithms = {
    Algorithm::NaiveBayes, Algorithm::DecisionTree,     Algorithm::RandomForest,
    Algorithm::Knn,        Algorithm::GradientBoosting, Algorithm::Svm};

constexpr std::string_view algorithm_tag(Algorithm a) noexcept {
  switch (a) {
    case Algorithm::NaiveBayes:
      return "nb";
    case Algorithm::DecisionTree:
      return "dt";
    case Algorithm::RandomForest:
      return "rf";
    case Algorithm::Knn:
      return "knn";
    case Algorithm::GradientBoosting:
      return "gb";
    case Algorithm::Svm:
      return "svm";
  }
  return "?";
}

inline Algorithm parse_algorithm(std::string_view tag) {
  for (auto a : kAllAlgorithms) {
    if (algorithm_tag(a) == tag) return a;
  }
  throw UsageError("unknown algorithm '" + std::string(tag) +
                   "' (valid: nb, dt, rf, knn, gb, svm)");
}

using ClassifierParams = std::variant<ml::NaiveBayesParams, ml::DecisionTreeParams,
                                      ml::RandomForestParams, ml::KnnParams,
                                      ml::GradientBoostingParams, ml::SvmParams>;

/// Algorithm identity, hyperparameters and seed. The variant index equals
/// the Algorithm enumerator.
struct ClassifierSpec {
  ClassifierParams params;
  std::uint64_t random_state = 0;

  Algorithm algorithm() const noexcept { return static_cast<Algorithm>(params.index()); }
  bool operator==(const ClassifierSpec&) const = default;
};

inline ClassifierSpec default_spec(Algorithm a) {
  switch (a) {
    case Algorithm::NaiveBayes:
      return {ml::NaiveBayesParams{}, 0};
    case Algorithm::DecisionTree:
      return {ml::DecisionTreeParams{}, 0};
    case Algorithm::RandomForest:
      return {ml::RandomForestParams{}, 0};
    case Algorithm::Knn:
      return {ml::KnnParams{}, 0};
    case Algorithm::GradientBoosting:
      return {ml::GradientBoostingParams{}, 0};
    case Algorithm::Svm:
      return {ml::SvmParams{}, 0};
  }
  return {ml::NaiveBayesParams{}, 0};
}

/// Tuned hyperparameters per algorithm and input representation. Uniform
/// weights belong to KNN and subsample 0.5 to boosting; the SVM does not
/// subsample.
inline ClassifierSpec tuned_spec(Algorithm a, Representation r) {
  const bool raw = r == Representation::Raw;
  switch (a) {
    case Algorithm::NaiveBayes:
      return {ml::NaiveBayesParams{raw ? 0.000187382 : 0.0004328761}, 0};
    case Algorithm::DecisionTree: {
      ml::DecisionTreeParams p;
      p.max_features = raw ? ml::MaxFeatures::Log2 : ml::MaxFeatures::Sqrt;
      p.min_samples_leaf = raw ? 2 : 5;
      p.min_samples_split = raw ? 10 : 13;
      return {p, 100};
    }
    case Algorithm::RandomForest: {
      ml::RandomForestParams p;
      p.min_samples_leaf = raw ? 2 : 1;
      p.min_samples_split = raw ? 9 : 5;
      p.n_estimators = raw ? 16 : 8;
      return {p, raw ? 100u : 123u};
    }
    case Algorithm::Knn:
      return {ml::KnnParams{6}, 0};
    case Algorithm::GradientBoosting: {
      ml::GradientBoostingParams p;
      p.learning_rate = 0.01;
      p.max_depth = raw ? 7 : 6;
      p.n_estimators = 50;
      p.subsample = 0.5;
      return {p, 100};
    }
    case Algorithm::Svm: {
      ml::SvmParams p;
      p.C = raw ? 1.0 : 1e-4;
      p.gamma = raw ? 1e-5 : 1e-6;
      p.kernel = raw ? ml::Kernel::Rbf : ml::Kernel::Linear;
      return {p, 0};
    }
  }
  return default_spec(a);
}

namespace detail {

template <class T>
T json_as(const nlohmann::ordered_json& v, std::string_view name) {
  try {
    if constexpr (std::is_same_v<T, std::size_t>) {
      if (!v.is_number_integer() || v.get<std::int64_t>() < 0) throw UsageError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw UsageError("invalid value " + v.dump() + " for parameter '" + std::string(name) + "'");
  }
}

inline void expect_value(const nlohmann::ordered_json& v, std::string_view name,
                         std::string_view only) {
  if (json_as<std::string>(v, name) != only) {
    throw UsageError("parameter '" + std::string(name) + "' only supports '" + std::string(only) +
                     "'");
  }
}

}  // namespace detail

/// Sets one named hyperparameter. Names follow the usual scikit-learn
/// spelling; a few accepted-but-inert settings ("criterion": "gini",
/// KNN "algorithm"/"leaf_size"/"weights": "uniform", "metric": "euclidean")
/// exist for config fidelity only.
inline void set_param(ClassifierSpec& spec, std::string_view name, const nlohmann::ordered_json& v) {
  using detail::expect_value;
  using detail::json_as;
  if (name == "random_state") {
    spec.random_state = json_as<std::uint64_t>(v, name);
    return;
  }
  const auto unknown = [&] {
    throw UsageError("parameter '" + std::string(name) + "' is not valid for algorithm '" +
                     std::string(algorithm_tag(spec.algorithm())) + "'");
  };
  std::visit(
      [&](auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ml::NaiveBayesParams>) {
          if (name == "var_smoothing") p.var_smoothing = json_as<double>(v, name);
          else unknown();
        } else if constexpr (std::is_same_v<P, ml::DecisionTreeParams> ||
                             std::is_same_v<P, ml::RandomForestParams>) {
          if (name == "criterion") expect_value(v, name, "gini");
          else if (name == "max_features") p.max_features = ml::parse_max_features(json_as<std::string>(v, name));
          else if (name == "min_samples_leaf") p.min_samples_leaf = json_as<std::size_t>(v, name);
          else if (name == "min_samples_split") p.min_samples_split = json_as<std::size_t>(v, name);
          else if (name == "max_depth") p.max_depth = v.is_null() ? 0 : json_as<std::size_t>(v, name);
          else if constexpr (std::is_same_v<P, ml::RandomForestParams>) {
            if (name == "n_estimators") p.n_estimators = json_as<std::size_t>(v, name);
            else if (name == "bootstrap") p.bootstrap = json_as<bool>(v, name);
            else unknown();
          } else {
            unknown();
          }
        } else if constexpr (std::is_same_v<P, ml::KnnParams>) {
          if (name == "n_neighbors") p.n_neighbors = json_as<std::size_t>(v, name);
          else if (name == "weights") expect_value(v, name, "uniform");
          else if (name == "metric") expect_value(v, name, "euclidean");
          else if (name == "algorithm") json_as<std::string>(v, name);
          else if (name == "leaf_size") json_as<std::size_t>(v, name);
          else unknown();
        } else if constexpr (std::is_same_v<P, ml::GradientBoostingParams>) {
          if (name == "learning_rate") p.learning_rate = json_as<double>(v, name);
          else if (name == "n_estimators") p.n_estimators = json_as<std::size_t>(v, name);
          else if (name == "max_depth") p.max_depth = json_as<std::size_t>(v, name);
          else if (name == "subsample") p.subsample = json_as<double>(v, name);
          else if (name == "min_samples_leaf") p.min_samples_leaf = json_as<std::size_t>(v, name);
          else if (name == "min_samples_split") p.min_samples_split = json_as<std::size_t>(v, name);
          else unknown();
        } else if constexpr (std::is_same_v<P, ml::SvmParams>) {
          if (name == "C") p.C = json_as<double>(v, name);
          else if (name == "gamma") p.gamma = json_as<double>(v, name);
          else if (name == "kernel") p.kernel = ml::parse_kernel(json_as<std::string>(v, name));
          else if (name == "tol") p.tol = json_as<double>(v, name);
          else if (name == "max_iter") p.max_iter = json_as<std::size_t>(v, name);
          else unknown();
        }
      },
      spec.params);
}

inline nlohmann::ordered_json params_to_json(const ClassifierSpec& spec) {
  nlohmann::ordered_json j;
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ml::NaiveBayesParams>) {
          j["var_smoothing"] = p.var_smoothing;
        } else if constexpr (std::is_same_v<P, ml::DecisionTreeParams> ||
                             std::is_same_v<P, ml::RandomForestParams>) {
          if constexpr (std::is_same_v<P, ml::RandomForestParams>) j["n_estimators"] = p.n_estimators;
          j["criterion"] = "gini";
          j["max_features"] = ml::max_features_name(p.max_features);
          j["min_samples_leaf"] = p.min_samples_leaf;
          j["min_samples_split"] = p.min_samples_split;
          j["max_depth"] = p.max_depth == 0 ? nlohmann::ordered_json() : nlohmann::ordered_json(p.max_depth);
          if constexpr (std::is_same_v<P, ml::RandomForestParams>) j["bootstrap"] = p.bootstrap;
        } else if constexpr (std::is_same_v<P, ml::KnnParams>) {
          j["n_neighbors"] = p.n_neighbors;
          j["weights"] = "uniform";
          j["metric"] = "euclidean";
        } else if constexpr (std::is_same_v<P, ml::GradientBoostingParams>) {
          j["learning_rate"] = p.learning_rate;
          j["n_estimators"] = p.n_estimators;
          j["max_depth"] = p.max_depth;
          j["subsample"] = p.subsample;
          j["min_samples_leaf"] = p.min_samples_leaf;
          j["min_samples_split"] = p.min_samples_split;
        } else if constexpr (std::is_same_v<P, ml::SvmParams>) {
          j["C"] = p.C;
          j["gamma"] = p.gamma;
          j["kernel"] = ml::kernel_name(p.kernel);
          j["tol"] = p.tol;
          j["max_iter"] = p.max_iter;
        }
      },
      spec.params);
  return j;
}

inline nlohmann::ordered_json to_json(const ClassifierSpec& spec) {
  nlohmann::ordered_json j;
  j["algorithm"] = algorithm_tag(spec.algorithm());
  j["random_state"] = spec.random_state;
  j["params"] = params_to_json(spec);
  return j;
}

/// Starts from the algorithm defaults and applies every listed parameter.
inline ClassifierSpec classifier_spec_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || !j.contains("algorithm")) {
    throw UsageError("classifier spec needs an 'algorithm' field");
  }
  auto spec = default_spec(parse_algorithm(detail::json_as<std::string>(j["algorithm"], "algorithm")));
  if (j.contains("random_state")) set_param(spec, "random_state", j["random_state"]);
  if (j.contains("params")) {
    const auto& params = j["params"];
    if (!params.is_object()) throw UsageError("'params' must be an object");
    for (auto it = params.begin(); it != params.end(); ++it) set_param(spec, it.key(), it.value());
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() != "algorithm" && it.key() != "random_state" && it.key() != "params") {
      throw UsageError("unknown classifier spec key '" + it.key() + "'");
    }
  }
  return spec;
}

using FittedModel = std::variant<ml::NaiveBayes, ml::DecisionTree, ml::RandomForest, ml::Knn,
                                 ml::GradientBoosting, ml::Svm>;

inline constexpr std::string_view kModelFormatName = "kneehar-model";
inline constexpr int kModelFormatVersion = 1;

/// A fitted classifier of any of the six families behind one interface.
/// Score columns follow classes() order (ascending label).
class TrainedModel {
 public:
  explicit TrainedModel(FittedModel model) : model_(std::move(model)) {}

  Algorithm algorithm() const noexcept { return static_cast<Algorithm>(model_.index()); }

  const std::vector<int>& classes() const {
    return std::visit([](const auto& m) -> const std::vector<int>& { return m.classes(); }, model_);
  }

  std::size_t n_features() const {
    return std::visit([](const auto& m) { return m.n_features(); }, model_);
  }

  /// True when scores are class probabilities (every algorithm except SVM).
  bool probabilistic() const noexcept { return algorithm() != Algorithm::Svm; }

  Matrix predict_scores(const Matrix& X) const {
    return std::visit([&](const auto& m) { return m.predict_scores(X); }, model_);
  }

  /// Row-wise argmax of predict_scores; ties go to the lower class label.
  std::vector<int> predict(const Matrix& X) const {
    return ml::labels_from_scores(predict_scores(X), classes());
  }

  const FittedModel& fitted() const noexcept { return model_; }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["format"] = kModelFormatName;
    j["version"] = kModelFormatVersion;
    j["algorithm"] = algorithm_tag(algorithm());
    j["model"] = std::visit([](const auto& m) { return m.to_json(); }, model_);
    return j;
  }

  static TrainedModel from_json(const nlohmann::json& j) {
    try {
      if (j.at("format").get<std::string>() != kModelFormatName) throw DataError("not a kneehar model");
      if (j.at("version").get<int>() != kModelFormatVersion) throw DataError("unsupported model version");
      const auto& m = j.at("model");
      switch (parse_algorithm(j.at("algorithm").get<std::string>())) {
        case Algorithm::NaiveBayes:
          return TrainedModel(ml::NaiveBayes::from_json(m));
        case Algorithm::DecisionTree:
          return TrainedModel(ml::DecisionTree::from_json(m));
        case Algorithm::RandomForest:
          return TrainedModel(ml::RandomForest::from_json(m));
        case Algorithm::Knn:
          return TrainedModel(ml::Knn::from_json(m));
        case Algorithm::GradientBoosting:
          return TrainedModel(ml::GradientBoosting::from_json(m));
        case Algorithm::Svm:
          return TrainedModel(ml::Svm::from_json(m));
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("malformed model: ") + e.what());
    }
    throw DataError("malformed model");
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json().dump() << '\n';
  }

  static TrainedModel load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    try {
      return from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
      throw DataError("cannot parse " + path.string() + ": " + e.what());
    }
  }

 private:
  FittedModel model_;
};

/// Fits `spec` on (X, y). `seed` drives every random choice.
inline TrainedModel train(const ClassifierSpec& spec, const Matrix& X, std::span<const int> y,
                          std::uint64_t seed) {
  return std::visit(
      [&](const auto& p) -> TrainedModel {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ml::NaiveBayesParams>) {
          return TrainedModel(ml::NaiveBayes::fit(X, y, p));
        } else if constexpr (std::is_same_v<P, ml::DecisionTreeParams>) {
          return TrainedModel(ml::DecisionTree::fit(X, y, p, seed));
        } else if constexpr (std::is_same_v<P, ml::RandomForestParams>) {
          return TrainedModel(ml::RandomForest::fit(X, y, p, seed));
        } else if constexpr (std::is_same_v<P, ml::KnnParams>) {
          return TrainedModel(ml::Knn::fit(X, y, p));
        } else if constexpr (std::is_same_v<P, ml::GradientBoostingParams>) {
          return TrainedModel(ml::GradientBoosting::fit(X, y, p, seed));
        } else {
          return TrainedModel(ml::Svm::fit(X, y, p));
        }
      },
      spec.params);
}

/// Fits with the spec's own random_state.
inline TrainedModel train(const ClassifierSpec& spec, const Matrix& X, std::span<const int> y) {
  return train(spec, X, y, spec.random_state);
}

}  // namespace kneehar
