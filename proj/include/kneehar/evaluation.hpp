#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/classifiers/model.hpp"
#include "kneehar/config.hpp"
#include "kneehar/dataset_io.hpp"
#include "kneehar/features.hpp"
#include "kneehar/pipeline.hpp"

namespace kneehar {

// ---------------------------------------------------------------------------
// Folds and metrics

/// Leave-one-subject-out split.
struct Fold {
  std::vector<int> train_subjects;
  int test_subject = 0;
};

/// One fold per subject, ordered by subject id.
inline std::vector<Fold> loso_folds(std::span<const int> subject_ids) {
  std::vector<int> ids(subject_ids.begin(), subject_ids.end());
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  if (ids.size() < 2) throw DataError("leave-one-subject-out needs at least 2 subjects");
  std::vector<Fold> folds;
  for (int test : ids) {
    Fold f;
    f.test_subject = test;
    for (int id : ids) {
      if (id != test) f.train_subjects.push_back(id);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

inline std::vector<Fold> loso_folds(const Dataset& ds) { return loso_folds(ds.subject_ids()); }

/// Fraction of exact matches.
inline double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.size() != truth.size()) throw DataError("accuracy: length mismatch");
  if (truth.empty()) throw DataError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predicted[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Mann-Whitney AUC of `scores` for the positive set; tied scores earn half
/// credit through average ranks.
inline double binary_auc(std::span<const double> scores, std::span<const char> positive) {
  const std::size_t n = scores.size();
  if (positive.size() != n) throw DataError("auc: length mismatch");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  double n_pos = 0.0;
  double rank_sum = 0.0;
  for (std::size_t k = 0; k < n;) {
    std::size_t e = k;
    while (e + 1 < n && scores[order[e + 1]] == scores[order[k]]) ++e;
    const double avg_rank = (static_cast<double>(k + 1) + static_cast<double>(e + 1)) / 2.0;
    for (std::size_t t = k; t <= e; ++t) {
      if (positive[order[t]]) {
        rank_sum += avg_rank;
        n_pos += 1.0;
      }
    }
    k = e + 1;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0.0 || n_neg == 0.0) throw DataError("auc: needs both positive and negative samples");
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

/// One-vs-rest AUC averaged without weights over the classes present in
/// `truth`. Column c of `scores` belongs to label `classes[c]`.
inline double auc_ovr_macro(const Matrix& scores, std::span<const int> truth,
                            std::span<const int> classes) {
  if (scores.rows() != truth.size()) throw DataError("auc: score rows do not match labels");
  if (scores.cols() != classes.size()) throw DataError("auc: score columns do not match classes");
  std::set<int> present(truth.begin(), truth.end());
  if (present.size() < 2) throw DataError("auc: undefined for single-class truth");
  double total = 0.0;
  std::vector<double> column(truth.size());
  std::vector<char> positive(truth.size());
  for (int label : present) {
    auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) {
      throw DataError("auc: no score column for class " + std::to_string(label));
    }
    const auto c = static_cast<std::size_t>(it - classes.begin());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      column[i] = scores(i, c);
      positive[i] = truth[i] == label ? 1 : 0;
    }
    total += binary_auc(column, positive);
  }
  return total / static_cast<double>(present.size());
}

/// Columns are labels 0..cols-1.
inline double auc_ovr_macro(const Matrix& scores, std::span<const int> truth) {
  std::vector<int> classes(scores.cols());
  std::iota(classes.begin(), classes.end(), 0);
  return auc_ovr_macro(scores, truth, classes);
}

// ---------------------------------------------------------------------------
// Execution helpers

/// Stateless 64-bit mixer (splitmix64 finalizer).
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Seed of the model trained for one fold; independent of scheduling.
constexpr std::uint64_t fold_seed(std::uint64_t master_seed, std::uint64_t random_state,
                                  int held_out_subject) noexcept {
  return mix64(mix64(mix64(master_seed) ^ random_state) ^
               static_cast<std::uint64_t>(static_cast<std::int64_t>(held_out_subject)));
}

inline std::size_t effective_jobs(std::size_t requested, std::size_t tasks) {
  std::size_t jobs = requested;
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  return std::max<std::size_t>(1, std::min(jobs, tasks));
}

/// Runs fn(0..count-1) on up to `jobs` threads. The exception of the
/// lowest failing index is rethrown after all workers finish.
inline void parallel_for(std::size_t count, std::size_t jobs,
                         const std::function<void(std::size_t)>& fn) {
  jobs = effective_jobs(jobs, count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (std::size_t t = 0; t < jobs; ++t) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

// ---------------------------------------------------------------------------
// Cross-validation

struct FoldResult {
  int held_out_subject = 0;
  double accuracy = 0.0;
  double auc = 0.0;
  double train_time_s = 0.0;
  double test_time_s = 0.0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  std::size_t input_dim = 0;
  std::vector<int> train_subjects;
};

struct Split {
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
};

/// Rows of `data` belonging to the fold's train and test subjects. Throws
/// if any subject lands on both sides.
inline Split split_rows(const LabeledMatrix& data, const Fold& fold) {
  const std::set<int> train(fold.train_subjects.begin(), fold.train_subjects.end());
  if (train.count(fold.test_subject)) {
    throw DataError("leakage: subject " + std::to_string(fold.test_subject) +
                    " is both training and held out");
  }
  Split s;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.subjects[i] == fold.test_subject) s.test_rows.push_back(i);
    else if (train.count(data.subjects[i])) s.train_rows.push_back(i);
  }
  for (auto r : s.train_rows) {
    if (data.subjects[r] == fold.test_subject) {
      throw DataError("leakage: held-out subject " + std::to_string(fold.test_subject) +
                      " found in training rows");
    }
  }
  return s;
}

inline std::vector<int> gather_labels(const LabeledMatrix& data, std::span<const std::size_t> rows) {
  std::vector<int> y;
  y.reserve(rows.size());
  for (auto r : rows) y.push_back(data.labels[r]);
  return y;
}

struct HoldoutScore {
  double accuracy = 0.0;
  double auc = 0.0;
  double train_time_s = 0.0;
  double test_time_s = 0.0;
  std::size_t input_dim = 0;
};

/// Trains on `train_rows`, scores `test_rows`. The training clock starts
/// just before the model is constructed; the test clock covers scoring the
/// whole held-out set.
inline HoldoutScore train_and_score(const LabeledMatrix& data, const Split& split,
                                    const ClassifierSpec& spec, std::uint64_t seed,
                                    const std::string& where) {
  if (split.train_rows.empty()) throw DataError(where + ": no training windows");
  if (split.test_rows.empty()) throw DataError(where + ": no held-out windows");
  const Matrix X_train = data.X.select_rows(split.train_rows);
  const auto y_train = gather_labels(data, split.train_rows);
  const Matrix X_test = data.X.select_rows(split.test_rows);
  const auto y_test = gather_labels(data, split.test_rows);

  using Clock = std::chrono::steady_clock;
  HoldoutScore out;
  const auto t0 = Clock::now();
  std::optional<TrainedModel> model;
  try {
    model.emplace(train(spec, X_train, y_train, seed));
  } catch (const Error& e) {
    throw Error(e.kind(), where + ": " + e.what());
  }
  const auto t1 = Clock::now();
  const Matrix scores = model->predict_scores(X_test);
  const auto predicted = ml::labels_from_scores(scores, model->classes());
  const auto t2 = Clock::now();
  out.train_time_s = std::chrono::duration<double>(t1 - t0).count();
  out.test_time_s = std::chrono::duration<double>(t2 - t1).count();
  out.input_dim = model->n_features();
  out.accuracy = accuracy(predicted, y_test);
  try {
    out.auc = auc_ovr_macro(scores, y_test, model->classes());
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  }
  return out;
}

/// Leave-one-subject-out evaluation of one classifier on prepared instances.
inline std::vector<FoldResult> cross_validate(const LabeledMatrix& data, const ClassifierSpec& spec,
                                              const PipelineConfig& cfg) {
  std::vector<int> ids(data.subjects.begin(), data.subjects.end());
  const auto folds = loso_folds(ids);
  std::vector<FoldResult> results(folds.size());
  parallel_for(folds.size(), cfg.jobs, [&](std::size_t f) {
    const auto& fold = folds[f];
    const auto split = split_rows(data, fold);
    const auto where = std::string(algorithm_tag(spec.algorithm())) + " fold (held-out subject " +
                       std::to_string(fold.test_subject) + ")";
    const auto score = train_and_score(data, split, spec,
                                       fold_seed(cfg.master_seed, spec.random_state, fold.test_subject),
                                       where);
    FoldResult r;
    r.held_out_subject = fold.test_subject;
    r.accuracy = score.accuracy;
    r.auc = score.auc;
    r.train_time_s = score.train_time_s;
    r.test_time_s = score.test_time_s;
    r.n_train = split.train_rows.size();
    r.n_test = split.test_rows.size();
    r.input_dim = score.input_dim;
    r.train_subjects = fold.train_subjects;
    results[f] = std::move(r);
  });
  return results;
}

/// Preprocess, window and (optionally) featurize `ds`, then cross-validate.
inline std::vector<FoldResult> cross_validate(const Dataset& ds, const ClassifierSpec& spec,
                                              Representation representation,
                                              const PipelineConfig& cfg) {
  return cross_validate(build_matrix(ds, cfg, representation), spec, cfg);
}

struct MetricSummary {
  double mean = 0.0;
  double stdev = 0.0;  // sample standard deviation; 0 for a single value
};

inline MetricSummary summarize(std::span<const double> values) {
  MetricSummary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return s;
}

/// All folds of one (algorithm, representation) pair.
struct CellResult {
  ClassifierSpec spec;
  Representation representation = Representation::Raw;
  std::vector<FoldResult> folds;

  template <class Getter>
  MetricSummary metric(Getter get) const {
    std::vector<double> v;
    for (const auto& f : folds) v.push_back(get(f));
    return summarize(v);
  }
  MetricSummary accuracy() const { return metric([](const FoldResult& f) { return f.accuracy; }); }
  MetricSummary auc() const { return metric([](const FoldResult& f) { return f.auc; }); }
  MetricSummary train_time() const { return metric([](const FoldResult& f) { return f.train_time_s; }); }
  MetricSummary test_time() const { return metric([](const FoldResult& f) { return f.test_time_s; }); }
};

// ---------------------------------------------------------------------------
// Grid search

/// Candidate values per parameter; enumeration order is the Cartesian
/// product with the last parameter varying fastest.
struct GridSpec {
  ClassifierSpec base;
  std::vector<std::pair<std::string, std::vector<nlohmann::ordered_json>>> params;

  Algorithm algorithm() const noexcept { return base.algorithm(); }

  std::size_t size() const {
    std::size_t n = 1;
    for (const auto& [name, values] : params) n *= values.size();
    return n;
  }

  /// Parameter assignment of the combination at `index`.
  std::vector<std::pair<std::string, nlohmann::ordered_json>> combination(std::size_t index) const {
    std::vector<std::pair<std::string, nlohmann::ordered_json>> out(params.size());
    for (std::size_t p = params.size(); p-- > 0;) {
      const auto& values = params[p].second;
      out[p] = {params[p].first, values[index % values.size()]};
      index /= values.size();
    }
    return out;
  }

  ClassifierSpec spec_at(std::size_t index) const {
    ClassifierSpec spec = base;
    for (const auto& [name, value] : combination(index)) set_param(spec, name, value);
    return spec;
  }

  void validate() const {
    if (params.empty()) throw UsageError("grid has no parameters");
    for (const auto& [name, values] : params) {
      if (values.empty()) throw UsageError("grid parameter '" + name + "' has no values");
      for (const auto& v : values) {
        ClassifierSpec probe = base;
        set_param(probe, name, v);
      }
    }
  }
};

/// {"algorithm": "knn", "random_state": 0, "params": [["n_neighbors", [1, 3]], ...]}
/// An object for "params" is accepted too; its key order is kept.
inline GridSpec grid_from_json(const nlohmann::ordered_json& j) {
  if (!j.is_object() || !j.contains("algorithm")) throw UsageError("grid needs an 'algorithm' field");
  GridSpec g;
  nlohmann::ordered_json base{{"algorithm", j["algorithm"]}};
  if (j.contains("random_state")) base["random_state"] = j["random_state"];
  g.base = classifier_spec_from_json(base);
  if (!j.contains("params")) throw UsageError("grid needs a 'params' field");
  const auto& params = j["params"];
  auto add = [&](const std::string& name, const nlohmann::ordered_json& values) {
    if (!values.is_array()) throw UsageError("grid values for '" + name + "' must be a list");
    g.params.emplace_back(name, std::vector<nlohmann::ordered_json>(values.begin(), values.end()));
  };
  if (params.is_object()) {
    for (auto it = params.begin(); it != params.end(); ++it) add(it.key(), it.value());
  } else if (params.is_array()) {
    for (const auto& entry : params) {
      if (!entry.is_array() || entry.size() != 2 || !entry[0].is_string()) {
        throw UsageError("grid params entries must be [name, [values...]]");
      }
      add(entry[0].get<std::string>(), entry[1]);
    }
  } else {
    throw UsageError("grid 'params' must be an object or a list");
  }
  g.validate();
  return g;
}

struct GridRow {
  std::size_t index = 0;
  std::vector<std::pair<std::string, nlohmann::ordered_json>> values;
  ClassifierSpec spec;
  double accuracy = 0.0;
  double auc = 0.0;
};

struct GridSearchResult {
  int validation_subject = 0;
  std::size_t best_index = 0;
  ClassifierSpec best;
  std::vector<GridRow> rows;
};

inline int resolve_validation_subject(const LabeledMatrix& data, const PipelineConfig& cfg) {
  if (data.size() == 0) throw DataError("no windows to search on");
  const std::set<int> ids(data.subjects.begin(), data.subjects.end());
  if (ids.size() < 2) throw DataError("grid search needs at least 2 subjects");
  const int subject = cfg.validation_subject.value_or(*ids.rbegin());
  if (!ids.count(subject)) {
    throw DataError("validation subject " + std::to_string(subject) + " not present");
  }
  return subject;
}

/// Fits every grid combination on all subjects but the validation subject
/// and scores it there. The highest validation AUC wins; ties go to the
/// earlier combination.
inline GridSearchResult grid_search(const LabeledMatrix& data, const GridSpec& grid,
                                    const PipelineConfig& cfg) {
  grid.validate();
  GridSearchResult result;
  result.validation_subject = resolve_validation_subject(data, cfg);
  Fold fold;
  fold.test_subject = result.validation_subject;
  for (int id : std::set<int>(data.subjects.begin(), data.subjects.end())) {
    if (id != fold.test_subject) fold.train_subjects.push_back(id);
  }
  const auto split = split_rows(data, fold);

  result.rows.resize(grid.size());
  parallel_for(grid.size(), cfg.jobs, [&](std::size_t i) {
    GridRow row;
    row.index = i;
    row.values = grid.combination(i);
    row.spec = grid.spec_at(i);
    std::string where = "grid cell " + std::to_string(i) + " {";
    for (std::size_t k = 0; k < row.values.size(); ++k) {
      where += (k ? ", " : "") + row.values[k].first + "=" + row.values[k].second.dump();
    }
    where += "}";
    const auto score = train_and_score(
        data, split, row.spec,
        fold_seed(cfg.master_seed, row.spec.random_state, result.validation_subject), where);
    row.accuracy = score.accuracy;
    row.auc = score.auc;
    result.rows[i] = std::move(row);
  });

  for (std::size_t i = 1; i < result.rows.size(); ++i) {
    if (result.rows[i].auc > result.rows[result.best_index].auc) result.best_index = i;
  }
  result.best = result.rows[result.best_index].spec;
  return result;
}

// ---------------------------------------------------------------------------
// Timing study

struct TimingPair {
  double train_s = 0.0;
  double test_s = 0.0;
};

/// (features - raw) / raw * 100.
inline double percent_delta(double raw, double features) {
  if (raw == features) return 0.0;
  return (features - raw) / raw * 100.0;
}

struct BenchmarkResult {
  Algorithm algorithm = Algorithm::NaiveBayes;
  TimingPair raw;
  TimingPair features;
  std::size_t repeats = 1;

  double train_delta_pct() const { return percent_delta(raw.train_s, features.train_s); }
  double test_delta_pct() const { return percent_delta(raw.test_s, features.test_s); }
};

inline double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

/// Mean per-fold train/test seconds for both representations; with
/// repeats > 1 the median over repeats of those means.
inline BenchmarkResult benchmark_pair(const LabeledMatrix& raw, const LabeledMatrix& features,
                                      const ClassifierSpec& raw_spec,
                                      const ClassifierSpec& features_spec,
                                      const PipelineConfig& cfg, std::size_t repeats = 1) {
  if (raw_spec.algorithm() != features_spec.algorithm()) {
    throw UsageError("benchmark_pair: specs name different algorithms");
  }
  if (repeats < 1) throw UsageError("repeats must be >= 1");
  std::vector<double> rtr, rte, ftr, fte;
  for (std::size_t r = 0; r < repeats; ++r) {
    CellResult rc{raw_spec, Representation::Raw, cross_validate(raw, raw_spec, cfg)};
    CellResult fc{features_spec, Representation::Features, cross_validate(features, features_spec, cfg)};
    rtr.push_back(rc.train_time().mean);
    rte.push_back(rc.test_time().mean);
    ftr.push_back(fc.train_time().mean);
    fte.push_back(fc.test_time().mean);
  }
  BenchmarkResult b;
  b.algorithm = raw_spec.algorithm();
  b.repeats = repeats;
  b.raw = {median_of(rtr), median_of(rte)};
  b.features = {median_of(ftr), median_of(fte)};
  return b;
}

}  // namespace kneehar
