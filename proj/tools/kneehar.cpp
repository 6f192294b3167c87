// kneehar command-line front end.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "kneehar/kneehar.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

using namespace kneehar;

/// Pipeline flags shared by every data-consuming command. Unset optionals
/// leave the config-file (or built-in default) value alone.
struct CommonOptions {
  std::string config_path;
  std::string data_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> jobs;
  std::optional<double> cutoff_hz;
  std::optional<int> filter_order;
  std::optional<double> target_hz;
  std::optional<std::size_t> window;
  std::optional<std::size_t> stride;
  std::optional<std::string> median;
  std::optional<int> validation_subject;
  std::string subjects;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config_path, "JSON config file (pipeline keys, plus 'grid' / 'classifiers')");
  cmd->add_option("--data", o.data_path,
                  "Dataset CSV, or a directory holding dataset.csv (default: $KNEEHAR_DATA)");
  cmd->add_option("--out", o.out_dir, "Output directory (default: config output_dir, else 'out')");
  cmd->add_option("--seed", o.seed, "Master seed (default 100)");
  cmd->add_option("--jobs", o.jobs, "Worker threads; 0 = one per fold up to the hardware thread count");
  cmd->add_option("--cutoff", o.cutoff_hz, "Low-pass cutoff in Hz (default 20)");
  cmd->add_option("--order", o.filter_order, "Butterworth order (default 4)");
  cmd->add_option("--target-hz", o.target_hz, "Rate after downsampling in Hz (default 40)");
  cmd->add_option("--window", o.window, "Window length in samples (default 80)");
  cmd->add_option("--stride", o.stride, "Window stride in samples (default 40)");
  cmd->add_option("--median", o.median, "Even-length median convention: midpoint | lower (default midpoint)");
  cmd->add_option("--validation-subject", o.validation_subject,
                  "Grid-search validation subject (default: highest id)");
  cmd->add_option("--subjects", o.subjects, "Comma-separated subject ids to keep (default: all)");
}

ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("cannot parse " + path + ": " + e.what());
  }
}

struct Loaded {
  ordered_json file = ordered_json::object();
  PipelineConfig cfg;
};

Loaded resolve_config(const CommonOptions& o) {
  Loaded l;
  if (!o.config_path.empty()) {
    l.file = read_json_file(o.config_path);
    l.cfg = pipeline_config_from_json(l.file, {"grid", "classifiers"});
  }
  auto& c = l.cfg;
  if (o.seed) c.master_seed = *o.seed;
  if (o.jobs) c.jobs = *o.jobs;
  if (o.cutoff_hz) c.cutoff_hz = *o.cutoff_hz;
  if (o.filter_order) c.filter_order = *o.filter_order;
  if (o.target_hz) c.target_hz = *o.target_hz;
  if (o.window) c.window_size = *o.window;
  if (o.stride) c.stride = *o.stride;
  if (o.median) c.median = parse_median_convention(*o.median);
  if (o.validation_subject) c.validation_subject = *o.validation_subject;
  if (!o.out_dir.empty()) c.output_dir = o.out_dir;
  c.validate();
  return l;
}

fs::path resolve_data_path(const CommonOptions& o) {
  std::string p = o.data_path;
  if (p.empty()) {
    if (const char* env = std::getenv("KNEEHAR_DATA")) p = env;
  }
  if (p.empty()) throw UsageError("no dataset given (use --data or set KNEEHAR_DATA)");
  fs::path path(p);
  if (fs::is_directory(path)) path /= "dataset.csv";
  return path;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  for (auto part : text::split(s, ',')) {
    auto t = text::trim(part);
    if (!t.empty()) out.emplace_back(t);
  }
  return out;
}

Dataset load_selected(const CommonOptions& o) {
  Dataset ds = load_dataset(resolve_data_path(o));
  if (!o.subjects.empty()) {
    std::set<int> keep;
    for (const auto& s : split_list(o.subjects)) {
      auto id = text::parse_int(s);
      if (!id) throw UsageError("bad subject id '" + s + "'");
      keep.insert(*id);
    }
    ds = filter_subjects(ds, keep);
  }
  return ds;
}

std::vector<Algorithm> parse_algorithms(const std::string& list) {
  std::vector<Algorithm> out;
  for (const auto& tag : split_list(list)) {
    if (tag == "all") {
      for (auto a : kAllAlgorithms) {
        if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
      }
      continue;
    }
    auto a = parse_algorithm(tag);
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  }
  if (out.empty()) throw UsageError("no algorithms selected");
  return out;
}

std::vector<Representation> parse_representations(const std::string& list) {
  std::vector<Representation> out;
  for (const auto& s : split_list(list)) {
    auto r = parse_representation(s);
    if (std::find(out.begin(), out.end(), r) == out.end()) out.push_back(r);
  }
  if (out.empty()) throw UsageError("no representations selected");
  return out;
}

/// Classifier settings per representation: tuned or library defaults,
/// then any "classifiers" overrides from the config file.
class SpecTable {
 public:
  SpecTable(const std::string& preset, const ordered_json& file) {
    if (preset != "tuned" && preset != "default") {
      throw UsageError("--params must be 'tuned' or 'default'");
    }
    tuned_ = preset == "tuned";
    if (file.contains("classifiers")) {
      const auto& c = file["classifiers"];
      if (!c.is_object()) throw UsageError("'classifiers' must map representation to a list of specs");
      for (auto it = c.begin(); it != c.end(); ++it) {
        const auto repr = parse_representation(it.key());
        if (!it.value().is_array()) throw UsageError("'classifiers." + it.key() + "' must be a list");
        for (const auto& s : it.value()) {
          auto spec = classifier_spec_from_json(s);
          overrides_[{repr, spec.algorithm()}] = spec;
        }
      }
    }
  }

  ClassifierSpec get(Algorithm a, Representation r) const {
    if (auto it = overrides_.find({r, a}); it != overrides_.end()) return it->second;
    return tuned_ ? tuned_spec(a, r) : default_spec(a);
  }

 private:
  bool tuned_ = true;
  std::map<std::pair<Representation, Algorithm>, ClassifierSpec> overrides_;
};

/// Raw and featurized matrices, built once per command.
struct Instances {
  LabeledMatrix raw;
  std::optional<LabeledMatrix> features;

  const LabeledMatrix& get(Representation r, const PipelineConfig& cfg) {
    if (r == Representation::Raw) return raw;
    if (!features) features = featurize_matrix(raw, cfg.median);
    return *features;
  }
};

void print_cell(const CellResult& cell) {
  const auto acc = cell.accuracy();
  const auto auc = cell.auc();
  const auto tr = cell.train_time();
  std::cout << algorithm_tag(cell.spec.algorithm()) << " " << representation_name(cell.representation)
            << ": accuracy " << text::format_double(acc.mean) << " (sd " << text::format_double(acc.stdev)
            << "), auc " << text::format_double(auc.mean) << " (sd " << text::format_double(auc.stdev)
            << "), train " << text::format_double(tr.mean) << " s/fold\n";
}

int cmd_synth(int subjects, double seconds, std::uint64_t seed, double rate, const std::string& out) {
  const auto ds = synthesize_dataset(subjects, seconds, seed, rate);
  fs::path path(out);
  if (path.extension() != ".csv") path /= "dataset.csv";
  write_dataset(ds, path);
  std::cout << "wrote " << ds.recordings().size() << " recordings for " << ds.subject_ids().size()
            << " subjects to " << path.string() << "\n";
  return 0;
}

int cmd_evaluate(const CommonOptions& o, const std::string& algos, const std::string& reprs,
                 const std::string& preset) {
  auto [file, cfg] = resolve_config(o);
  const auto algorithms = parse_algorithms(algos);
  const auto representations = parse_representations(reprs);
  const SpecTable specs(preset, file);
  const auto ds = load_selected(o);
  Instances inst{build_raw_matrix(ds, cfg), std::nullopt};

  std::vector<CellResult> cells;
  for (auto a : algorithms) {
    for (auto r : representations) {
      CellResult cell{specs.get(a, r), r, {}};
      cell.folds = cross_validate(inst.get(r, cfg), cell.spec, cfg);
      print_cell(cell);
      cells.push_back(std::move(cell));
    }
  }
  report::write_experiment(cfg.output_dir, cells, cfg);
  std::cout << "reports written to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_gridsearch(const CommonOptions& o, const std::string& reprs) {
  auto [file, cfg] = resolve_config(o);
  if (!file.contains("grid")) throw UsageError("gridsearch needs a 'grid' entry in the --config file");
  std::vector<GridSpec> grids;
  if (file["grid"].is_array()) {
    for (const auto& g : file["grid"]) grids.push_back(grid_from_json(g));
  } else {
    grids.push_back(grid_from_json(file["grid"]));
  }
  if (grids.empty()) throw UsageError("'grid' is empty");
  const auto representations = parse_representations(reprs);
  const auto ds = load_selected(o);
  Instances inst{build_raw_matrix(ds, cfg), std::nullopt};

  const bool nested = grids.size() > 1 || representations.size() > 1;
  for (const auto& grid : grids) {
    for (auto r : representations) {
      const auto result = grid_search(inst.get(r, cfg), grid, cfg);
      fs::path dir = cfg.output_dir;
      if (nested) {
        dir /= std::string(algorithm_tag(grid.algorithm())) + "_" + std::string(representation_name(r));
      }
      report::write_grid(dir, result, r);
      std::cout << algorithm_tag(grid.algorithm()) << " " << representation_name(r) << ": "
                << result.rows.size() << " cells, best #" << result.best_index << " auc "
                << text::format_double(result.rows[result.best_index].auc) << " on subject "
                << result.validation_subject << " -> " << dir.string() << "\n";
    }
  }
  return 0;
}

int cmd_benchmark(const CommonOptions& o, const std::string& algos, const std::string& preset,
                  std::size_t repeats, const std::string& env_note) {
  auto [file, cfg] = resolve_config(o);
  const auto algorithms = parse_algorithms(algos);
  const SpecTable specs(preset, file);
  const auto ds = load_selected(o);
  Instances inst{build_raw_matrix(ds, cfg), std::nullopt};
  const auto& features = inst.get(Representation::Features, cfg);

  std::vector<BenchmarkResult> results;
  for (auto a : algorithms) {
    auto b = benchmark_pair(inst.raw, features, specs.get(a, Representation::Raw),
                            specs.get(a, Representation::Features), cfg, repeats);
    std::cout << algorithm_tag(a) << ": train " << text::format_double(b.raw.train_s) << " -> "
              << text::format_double(b.features.train_s) << " s (" << text::format_double(b.train_delta_pct())
              << "%), test " << text::format_double(b.raw.test_s) << " -> "
              << text::format_double(b.features.test_s) << " s (" << text::format_double(b.test_delta_pct())
              << "%)\n";
    results.push_back(b);
  }
  report::write_benchmark(cfg.output_dir, results, cfg, repeats, env_note);
  std::cout << "benchmark written to " << cfg.output_dir << "\n";
  return 0;
}

int cmd_features(const CommonOptions& o, const std::string& repr, const std::string& out) {
  auto [file, cfg] = resolve_config(o);
  const auto r = parse_representation(repr);
  const auto ds = load_selected(o);
  Instances inst{build_raw_matrix(ds, cfg), std::nullopt};
  const auto& m = inst.get(r, cfg);
  if (out.empty() || out == "-") {
    write_labeled_matrix(std::cout, m);
  } else {
    auto f = report::open_output(out);
    write_labeled_matrix(f, m);
    std::cout << "wrote " << m.size() << " windows x " << m.X.cols() << " columns to " << out << "\n";
  }
  return 0;
}

int cmd_inspect(const CommonOptions& o) {
  auto [file, cfg] = resolve_config(o);
  const auto ds = load_selected(o);
  const auto windows = build_windows(ds, cfg);
  std::map<std::pair<int, Activity>, std::size_t> counts;
  for (const auto& w : windows) ++counts[{w.subject_id, w.label}];

  std::cout << "subjects: " << ds.subject_ids().size() << ", recordings: " << ds.recordings().size()
            << ", windows: " << windows.size() << "\n";
  std::cout << "subject,activity,samples,source_hz,seconds,windows\n";
  for (int id : ds.subject_ids()) {
    for (auto a : kAllActivities) {
      const auto* rec = ds.find(id, a);
      if (!rec) continue;
      std::cout << id << ',' << activity_name(a) << ',' << rec->samples.size() << ','
                << text::format_double(rec->source_rate_hz) << ','
                << text::format_double(static_cast<double>(rec->samples.size()) / rec->source_rate_hz)
                << ',' << counts[{id, a}] << '\n';
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Knee-angle activity recognition: synthesize, evaluate, tune and benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "kneehar 1.0.0");

  int synth_subjects = 11;
  double synth_seconds = 120.0;
  std::uint64_t synth_seed = 100;
  double synth_rate = 1000.0;
  std::string synth_out = "data";
  auto* synth = app.add_subcommand("synth", "Generate a synthetic knee-angle dataset");
  synth->add_option("--subjects", synth_subjects, "Number of subjects (>= 2)")->capture_default_str();
  synth->add_option("--seconds", synth_seconds, "Seconds per recording (>= 4)")->capture_default_str();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();
  synth->add_option("--rate", synth_rate, "Sampling rate in Hz")->capture_default_str();
  synth->add_option("--out", synth_out, "Output directory, or a .csv path")->capture_default_str();

  CommonOptions eval_opts;
  std::string eval_algos = "all";
  std::string eval_repr = "raw,features";
  std::string eval_preset = "tuned";
  auto* evaluate = app.add_subcommand("evaluate", "Leave-one-subject-out evaluation");
  add_common(evaluate, eval_opts);
  evaluate->add_option("--algos", eval_algos, "Comma-separated tags (nb,dt,rf,knn,gb,svm) or 'all'")
      ->capture_default_str();
  evaluate->add_option("--repr", eval_repr, "Representations: raw, features")->capture_default_str();
  evaluate->add_option("--params", eval_preset, "Hyperparameter preset: tuned | default")
      ->capture_default_str();

  CommonOptions grid_opts;
  std::string grid_repr = "raw";
  auto* gridsearch = app.add_subcommand("gridsearch", "Grid search scored on one validation subject");
  add_common(gridsearch, grid_opts);
  gridsearch->add_option("--repr", grid_repr, "Representations: raw, features")->capture_default_str();

  CommonOptions bench_opts;
  std::string bench_algos = "all";
  std::string bench_preset = "tuned";
  std::size_t bench_repeats = 1;
  std::string bench_env;
  auto* benchmark = app.add_subcommand("benchmark", "Raw vs feature timing study");
  add_common(benchmark, bench_opts);
  benchmark->add_option("--algos", bench_algos, "Comma-separated tags or 'all'")->capture_default_str();
  benchmark->add_option("--params", bench_preset, "Hyperparameter preset: tuned | default")
      ->capture_default_str();
  benchmark->add_option("--repeats", bench_repeats, "Repetitions; medians are reported")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  benchmark->add_option("--env-note", bench_env, "Free-form hardware/environment note");

  CommonOptions feat_opts;
  std::string feat_repr = "features";
  std::string feat_out;
  auto* features = app.add_subcommand("features", "Dump the instance matrix as CSV");
  add_common(features, feat_opts);
  features->add_option("--repr", feat_repr, "raw | features")->capture_default_str();
  features->add_option("--file", feat_out, "Output CSV (default: stdout)");

  CommonOptions inspect_opts;
  auto* inspect = app.add_subcommand("inspect", "Summarize a dataset");
  add_common(inspect, inspect_opts);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ErrorKind::Usage);
  }

  try {
    if (*synth) return cmd_synth(synth_subjects, synth_seconds, synth_seed, synth_rate, synth_out);
    if (*evaluate) return cmd_evaluate(eval_opts, eval_algos, eval_repr, eval_preset);
    if (*gridsearch) return cmd_gridsearch(grid_opts, grid_repr);
    if (*benchmark) return cmd_benchmark(bench_opts, bench_algos, bench_preset, bench_repeats, bench_env);
    if (*features) return cmd_features(feat_opts, feat_repr, feat_out);
    if (*inspect) return cmd_inspect(inspect_opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(ErrorKind::Data);
  }
  return static_cast<int>(ErrorKind::Usage);
}
