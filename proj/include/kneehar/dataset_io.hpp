#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "kneehar/activity.hpp"
#include "kneehar/error.hpp"
#include "kneehar/text.hpp"

namespace kneehar {

/// One subject performing one exercise: a knee-angle trace in degrees.
struct RawRecording {
  int subject_id = 0;
  Activity activity = Activity::Gait;
  std::vector<double> samples;
  double source_rate_hz = 0.0;

  bool operator==(const RawRecording&) const = default;
};

/// Immutable collection of recordings with at most one recording per
/// (subject, activity) pair.
class Dataset {
 public:
  Dataset() = default;

  explicit Dataset(std::vector<RawRecording> recordings)
      : recordings_(std::move(recordings)) {
    std::set<std::pair<int, int>> seen;
    std::set<int> ids;
    for (const auto& rec : recordings_) {
      const auto where = "subject " + std::to_string(rec.subject_id) + " / " +
                         std::string(activity_name(rec.activity));
      if (rec.samples.empty()) throw DataError("recording has no samples: " + where);
      if (!(rec.source_rate_hz > 0.0) || !std::isfinite(rec.source_rate_hz)) {
        throw DataError("source rate must be positive: " + where);
      }
      for (double v : rec.samples) {
        if (!std::isfinite(v)) throw DataError("non-finite angle in " + where);
      }
      if (!seen.emplace(rec.subject_id, activity_code(rec.activity)).second) {
        throw DataError("duplicate recording for " + where);
      }
      ids.insert(rec.subject_id);
    }
    subject_ids_.assign(ids.begin(), ids.end());
  }

  const std::vector<RawRecording>& recordings() const noexcept { return recordings_; }
  const std::vector<int>& subject_ids() const noexcept { return subject_ids_; }
  bool empty() const noexcept { return recordings_.empty(); }

  const RawRecording* find(int subject, Activity activity) const {
    for (const auto& rec : recordings_) {
      if (rec.subject_id == subject && rec.activity == activity) return &rec;
    }
    return nullptr;
  }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<RawRecording> recordings_;
  std::vector<int> subject_ids_;
};

/// Column names of the delimited interchange format. The defaults match the
/// files written by write_dataset.
struct DatasetSchema {
  std::string subject = "subject";
  std::string activity = "activity";
  std::string ordinal = "ordinal";
  std::string angle = "angle_deg";
  char delimiter = ',';
  // Used when the sidecar metadata file is absent.
  std::optional<double> source_rate_hz;
};

inline constexpr std::string_view kDatasetFormatName = "kneehar-dataset";
inline constexpr int kDatasetFormatVersion = 1;

inline std::filesystem::path metadata_path(const std::filesystem::path& csv) {
  auto p = csv;
  p += ".meta.json";
  return p;
}

/// Writes `csv` plus its sidecar metadata. All recordings must share one
/// source rate.
inline void write_dataset(const Dataset& ds, const std::filesystem::path& csv) {
  if (ds.empty()) throw DataError("refusing to write an empty dataset");
  const double rate = ds.recordings().front().source_rate_hz;
  for (const auto& rec : ds.recordings()) {
    if (rec.source_rate_hz != rate) {
      throw DataError("write_dataset requires a single source rate across recordings");
    }
  }
  if (csv.has_parent_path()) std::filesystem::create_directories(csv.parent_path());

  std::ofstream out(csv, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + csv.string() + " for writing");
  out << "subject,activity,ordinal,angle_deg\n";
  std::string line;
  for (const auto& rec : ds.recordings()) {
    const auto prefix =
        std::to_string(rec.subject_id) + "," + std::string(activity_name(rec.activity)) + ",";
    for (std::size_t i = 0; i < rec.samples.size(); ++i) {
      line.assign(prefix);
      line += std::to_string(i);
      line += ',';
      line += text::format_double(rec.samples[i]);
      line += '\n';
      out << line;
    }
  }
  if (!out) throw DataError("write failed for " + csv.string());

  nlohmann::ordered_json meta;
  meta["format"] = kDatasetFormatName;
  meta["version"] = kDatasetFormatVersion;
  meta["source_rate_hz"] = rate;
  meta["columns"] = {"subject", "activity", "ordinal", "angle_deg"};
  std::ofstream mout(metadata_path(csv), std::ios::binary | std::ios::trunc);
  mout << meta.dump(2) << "\n";
  if (!mout) throw DataError("write failed for " + metadata_path(csv).string());
}

namespace detail {

inline double read_source_rate(const std::filesystem::path& csv,
                               const DatasetSchema& schema) {
  const auto meta_file = metadata_path(csv);
  if (!std::filesystem::exists(meta_file)) {
    if (schema.source_rate_hz) return *schema.source_rate_hz;
    throw DataError("missing metadata file " + meta_file.string() +
                    " (or supply the source rate explicitly)");
  }
  std::ifstream in(meta_file);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse " + meta_file.string() + ": " + e.what());
  }
  if (meta.value("format", std::string()) != kDatasetFormatName) {
    throw DataError(meta_file.string() + " is not a kneehar dataset metadata file");
  }
  if (meta.value("version", 0) != kDatasetFormatVersion) {
    throw DataError("unsupported dataset format version in " + meta_file.string());
  }
  if (!meta.contains("source_rate_hz") || !meta["source_rate_hz"].is_number()) {
    throw DataError(meta_file.string() + " lacks a numeric source_rate_hz");
  }
  return meta["source_rate_hz"].get<double>();
}

}  // namespace detail

/// Loads a delimited file of (subject, activity, ordinal, angle) rows.
/// Rows of one (subject, activity) group must appear with strictly
/// increasing ordinals; groups keep their order of first appearance.
inline Dataset load_dataset(const std::filesystem::path& csv, const DatasetSchema& schema = {}) {
  if (!std::filesystem::exists(csv)) throw DataError("dataset file not found: " + csv.string());
  const double rate = detail::read_source_rate(csv, schema);

  std::ifstream in(csv, std::ios::binary);
  if (!in) throw DataError("cannot open " + csv.string());
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  std::size_t pos = 0;
  std::size_t line_no = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= content.size()) return false;
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    line = std::string_view(content).substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    return true;
  };
  auto fail = [&](const std::string& why) {
    throw DataError(csv.string() + ":" + std::to_string(line_no) + ": " + why);
  };

  std::string_view line;
  if (!next_line(line)) throw DataError(csv.string() + ": empty file (no header)");
  const auto header = text::split(line, schema.delimiter);
  auto column = [&](const std::string& name) {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail("missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t c_subject = column(schema.subject);
  const std::size_t c_activity = column(schema.activity);
  const std::size_t c_ordinal = column(schema.ordinal);
  const std::size_t c_angle = column(schema.angle);
  const std::size_t needed = std::max({c_subject, c_activity, c_ordinal, c_angle}) + 1;

  std::vector<RawRecording> recordings;
  std::vector<double> last_ordinal;
  std::map<std::pair<int, int>, std::size_t> group_index;

  while (next_line(line)) {
    if (text::trim(line).empty()) continue;
    const auto fields = text::split(line, schema.delimiter);
    if (fields.size() < needed) fail("expected at least " + std::to_string(needed) + " fields");
    const auto subject = text::parse_int(fields[c_subject]);
    if (!subject) fail("unparseable subject '" + std::string(fields[c_subject]) + "'");
    const auto activity = parse_activity(fields[c_activity]);
    if (!activity) fail("unknown activity '" + std::string(fields[c_activity]) + "'");
    const auto ordinal = text::parse_double(fields[c_ordinal]);
    if (!ordinal || !std::isfinite(*ordinal)) {
      fail("unparseable ordinal '" + std::string(fields[c_ordinal]) + "'");
    }
    const auto angle = text::parse_double(fields[c_angle]);
    if (!angle || !std::isfinite(*angle)) {
      fail("unparseable angle '" + std::string(fields[c_angle]) + "'");
    }

    const auto key = std::make_pair(static_cast<int>(*subject), activity_code(*activity));
    auto [it, inserted] = group_index.emplace(key, recordings.size());
    if (inserted) {
      recordings.push_back({key.first, *activity, {}, rate});
      last_ordinal.push_back(*ordinal);
    } else {
      double& last = last_ordinal[it->second];
      if (*ordinal == last) fail("duplicate ordinal " + std::string(fields[c_ordinal]));
      if (*ordinal < last) fail("non-monotonic ordinal " + std::string(fields[c_ordinal]));
      last = *ordinal;
    }
    recordings[it->second].samples.push_back(*angle);
  }
  if (recordings.empty()) throw DataError(csv.string() + ": no data rows");
  return Dataset(std::move(recordings));
}

/// Keeps the recordings of the listed subjects, in their original order.
inline Dataset filter_subjects(const Dataset& ds, const std::set<int>& keep) {
  if (keep.empty()) throw DataError("filter_subjects: empty subject set");
  for (int id : keep) {
    if (!std::binary_search(ds.subject_ids().begin(), ds.subject_ids().end(), id)) {
      throw DataError("filter_subjects: unknown subject " + std::to_string(id));
    }
  }
  std::vector<RawRecording> kept;
  for (const auto& rec : ds.recordings()) {
    if (keep.count(rec.subject_id)) kept.push_back(rec);
  }
  return Dataset(std::move(kept));
}

/// Per-activity shape of a synthetic knee trace: baseline +/- amplitude
/// times a two-harmonic pulse in [0, 1].
struct SyntheticActivityProfile {
  double period_lo_s, period_hi_s;
  double baseline_lo, baseline_hi;
  double amplitude_lo, amplitude_hi;
  double direction;   // +1 flexes up from baseline, -1 extends down
  double harmonic1;   // cos(theta) coefficient
  double harmonic2;   // cos(2 theta) coefficient
  double skew;        // sin(2 theta) coefficient
};

inline const SyntheticActivityProfile& synthetic_profile(Activity a) {
  // Gait cycles are roughly three times faster than either exercise. Each
  // activity keeps to its own angle band (sitting high, standing low, gait
  // in between) so window statistics separate the classes.
  static const SyntheticActivityProfile kGait{1.00, 1.25, 8.0, 16.0, 45.0, 55.0,
                                              +1.0, -0.5, 0.0, 0.15};
  static const SyntheticActivityProfile kSit{3.4, 4.2, 100.0, 108.0, 35.0, 45.0,
                                             -1.0, -0.5, 0.125, 0.0};
  static const SyntheticActivityProfile kStand{3.4, 4.2, 1.0, 5.0, 35.0, 45.0,
                                               +1.0, -0.5, 0.125, 0.0};
  switch (a) {
    case Activity::Gait:
      return kGait;
    case Activity::SitExtension:
      return kSit;
    case Activity::StandFlexion:
      return kStand;
  }
  return kGait;
}

/// Surrogate recordings: per subject, one trace per activity, with
/// subject-specific amplitude, offset, period, phase and noise.
/// Angles are clamped to [0, 120] degrees and quantized to 0.001 degree.
inline Dataset synthesize_dataset(int n_subjects, double duration_s, std::uint64_t seed,
                                  double rate_hz = 1000.0) {
  if (n_subjects < 2) throw UsageError("synthesize_dataset: need at least 2 subjects");
  if (!(duration_s >= 4.0)) throw UsageError("synthesize_dataset: duration must be >= 4 s");
  if (!(rate_hz > 0.0)) throw UsageError("synthesize_dataset: rate must be positive");

  std::mt19937_64 rng(seed);
  auto uniform = [&](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  const auto n = static_cast<std::size_t>(std::ceil(duration_s * rate_hz));
  constexpr double kTwoPi = 2.0 * std::numbers::pi;

  std::vector<RawRecording> recordings;
  for (int subject = 1; subject <= n_subjects; ++subject) {
    for (Activity activity : kAllActivities) {
      const auto& prof = synthetic_profile(activity);
      const double period = uniform(prof.period_lo_s, prof.period_hi_s);
      const double baseline = uniform(prof.baseline_lo, prof.baseline_hi);
      const double amplitude = uniform(prof.amplitude_lo, prof.amplitude_hi);
      const double phase = uniform(0.0, kTwoPi);
      const double noise_sd = uniform(0.5, 1.5);
      const double pulse_offset = -prof.harmonic1 - prof.harmonic2;
      std::normal_distribution<double> noise(0.0, noise_sd);

      RawRecording rec{subject, activity, {}, rate_hz};
      rec.samples.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        const double theta = kTwoPi * static_cast<double>(i) / (rate_hz * period) + phase;
        const double pulse = pulse_offset + prof.harmonic1 * std::cos(theta) +
                             prof.harmonic2 * std::cos(2.0 * theta) +
                             prof.skew * std::sin(2.0 * theta);
        double angle = baseline + prof.direction * amplitude * pulse + noise(rng);
        angle = std::clamp(angle, 0.0, 120.0);
        rec.samples.push_back(std::round(angle * 1000.0) / 1000.0);
      }
      recordings.push_back(std::move(rec));
    }
  }
  return Dataset(std::move(recordings));
}

}  // namespace kneehar
