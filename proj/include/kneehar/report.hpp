#pragma once

#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/evaluation.hpp"
#include "kneehar/text.hpp"

namespace kneehar::report {

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

inline void write_text(const std::filesystem::path& path, const std::string& content) {
  auto out = open_output(path);
  out << content;
  if (!out) throw DataError("failed writing " + path.string());
}

inline void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

inline constexpr std::string_view kFoldHeader =
    "algorithm,representation,subject,accuracy,auc,train_s,test_s,n_train,n_test";

/// One row per fold per cell.
inline void write_folds_csv(std::ostream& out, const std::vector<CellResult>& cells) {
  using text::format_double;
  out << kFoldHeader << '\n';
  for (const auto& cell : cells) {
    for (const auto& f : cell.folds) {
      out << algorithm_tag(cell.spec.algorithm()) << ',' << representation_name(cell.representation)
          << ',' << f.held_out_subject << ',' << format_double(f.accuracy) << ','
          << format_double(f.auc) << ',' << format_double(f.train_time_s) << ','
          << format_double(f.test_time_s) << ',' << f.n_train << ',' << f.n_test << '\n';
    }
  }
}

inline nlohmann::ordered_json summary_json(const MetricSummary& s) {
  return {{"mean", s.mean}, {"stdev", s.stdev}};
}

inline nlohmann::ordered_json cell_json(const CellResult& cell) {
  nlohmann::ordered_json j;
  j["algorithm"] = algorithm_tag(cell.spec.algorithm());
  j["representation"] = representation_name(cell.representation);
  j["params"] = to_json(cell.spec);
  j["folds"] = cell.folds.size();
  j["input_dim"] = cell.folds.empty() ? 0 : cell.folds.front().input_dim;
  j["accuracy"] = summary_json(cell.accuracy());
  j["auc"] = summary_json(cell.auc());
  j["train_s"] = summary_json(cell.train_time());
  j["test_s"] = summary_json(cell.test_time());
  return j;
}

inline nlohmann::ordered_json experiment_summary(const std::vector<CellResult>& cells,
                                                 const PipelineConfig& cfg) {
  nlohmann::ordered_json j;
  j["format"] = "kneehar-report";
  j["version"] = 1;
  j["auc_averaging"] = "ovr-macro";
  j["stdev"] = "sample";
  j["config"] = to_json(cfg);
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& c : cells) j["cells"].push_back(cell_json(c));
  return j;
}

/// Writes folds.csv and summary.json under `dir`.
inline void write_experiment(const std::filesystem::path& dir, const std::vector<CellResult>& cells,
                             const PipelineConfig& cfg) {
  {
    auto out = open_output(dir / "folds.csv");
    write_folds_csv(out, cells);
  }
  write_json(dir / "summary.json", experiment_summary(cells, cfg));
}

inline void write_grid_scores_csv(std::ostream& out, const GridSearchResult& r) {
  out << "index";
  if (!r.rows.empty()) {
    for (const auto& [name, v] : r.rows.front().values) out << ',' << name;
  }
  out << ",accuracy,auc\n";
  for (const auto& row : r.rows) {
    out << row.index;
    for (const auto& [name, v] : row.values) {
      const std::string s = v.is_string() ? v.get<std::string>() : v.dump();
      out << ',' << s;
    }
    out << ',' << text::format_double(row.accuracy) << ',' << text::format_double(row.auc) << '\n';
  }
}

inline nlohmann::ordered_json grid_best_json(const GridSearchResult& r, Representation repr) {
  nlohmann::ordered_json j;
  j["representation"] = representation_name(repr);
  j["validation_subject"] = r.validation_subject;
  j["best_index"] = r.best_index;
  j["validation_auc"] = r.rows.at(r.best_index).auc;
  j["validation_accuracy"] = r.rows.at(r.best_index).accuracy;
  j["best"] = to_json(r.best);
  return j;
}

inline void write_grid(const std::filesystem::path& dir, const GridSearchResult& r,
                       Representation repr) {
  {
    auto out = open_output(dir / "grid_scores.csv");
    write_grid_scores_csv(out, r);
  }
  write_json(dir / "best_params.json", grid_best_json(r, repr));
}

inline constexpr std::string_view kBenchmarkHeader =
    "algorithm,representation,train_s,test_s,train_delta_pct,test_delta_pct";

/// Two rows per algorithm; the delta columns repeat on both rows.
inline void write_benchmark_csv(std::ostream& out, const std::vector<BenchmarkResult>& results) {
  using text::format_double;
  out << kBenchmarkHeader << '\n';
  for (const auto& b : results) {
    const auto tag = algorithm_tag(b.algorithm);
    const auto dtr = format_double(b.train_delta_pct());
    const auto dte = format_double(b.test_delta_pct());
    out << tag << ",raw," << format_double(b.raw.train_s) << ',' << format_double(b.raw.test_s)
        << ',' << dtr << ',' << dte << '\n';
    out << tag << ",features," << format_double(b.features.train_s) << ','
        << format_double(b.features.test_s) << ',' << dtr << ',' << dte << '\n';
  }
}

inline nlohmann::ordered_json benchmark_json(const std::vector<BenchmarkResult>& results,
                                             const PipelineConfig& cfg, std::size_t repeats,
                                             const std::string& env_note) {
  nlohmann::ordered_json j;
  j["format"] = "kneehar-benchmark";
  j["version"] = 1;
  j["environment"] = env_note;
  j["repeats"] = repeats;
  j["aggregate"] = repeats > 1 ? "median of per-run fold means" : "mean over folds";
  j["config"] = to_json(cfg);
  j["algorithms"] = nlohmann::ordered_json::array();
  for (const auto& b : results) {
    nlohmann::ordered_json a;
    a["algorithm"] = algorithm_tag(b.algorithm);
    a["raw"] = {{"train_s", b.raw.train_s}, {"test_s", b.raw.test_s}};
    a["features"] = {{"train_s", b.features.train_s}, {"test_s", b.features.test_s}};
    a["train_delta_pct"] = b.train_delta_pct();
    a["test_delta_pct"] = b.test_delta_pct();
    j["algorithms"].push_back(a);
  }
  return j;
}

inline void write_benchmark(const std::filesystem::path& dir, const std::vector<BenchmarkResult>& results,
                            const PipelineConfig& cfg, std::size_t repeats,
                            const std::string& env_note) {
  {
    auto out = open_output(dir / "benchmark.csv");
    write_benchmark_csv(out, results);
  }
  write_json(dir / "benchmark.json", benchmark_json(results, cfg, repeats, env_note));
}

}  // namespace kneehar::report
