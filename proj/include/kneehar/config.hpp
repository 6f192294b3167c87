#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "kneehar/error.hpp"

namespace kneehar {

enum class Representation { Raw, Features };

constexpr std::string_view representation_name(Representation r) noexcept {
  return r == Representation::Raw ? "raw" : "features";
}

inline Representation parse_representation(std::string_view s) {
  if (s == "raw") return Representation::Raw;
  if (s == "features") return Representation::Features;
  throw UsageError("unknown representation '" + std::string(s) + "' (valid: raw, features)");
}

/// How the median of an even-length window is taken.
enum class MedianConvention {
  Midpoint,     // mean of the two central order statistics
  LowerMiddle,  // the single order statistic X(n/2), 1-based
};

constexpr std::string_view median_convention_name(MedianConvention m) noexcept {
  return m == MedianConvention::Midpoint ? "midpoint" : "lower";
}

inline MedianConvention parse_median_convention(std::string_view s) {
  if (s == "midpoint") return MedianConvention::Midpoint;
  if (s == "lower") return MedianConvention::LowerMiddle;
  throw UsageError("unknown median convention '" + std::string(s) + "' (valid: midpoint, lower)");
}

/// Every knob of the preprocessing and evaluation pipeline. The defaults
/// are a 20 Hz cutoff, 40 Hz output rate and 80-sample windows.
struct PipelineConfig {
  double cutoff_hz = 20.0;
  int filter_order = 4;
  double target_hz = 40.0;
  std::size_t window_size = 80;
  std::size_t stride = 40;
  Representation representation = Representation::Raw;
  MedianConvention median = MedianConvention::Midpoint;
  std::uint64_t master_seed = 100;
  std::optional<int> validation_subject;  // default: highest subject id
  std::string output_dir = "out";
  std::size_t jobs = 0;  // 0: one worker per fold, capped at hardware threads

  bool operator==(const PipelineConfig&) const = default;

  void validate() const {
    if (!(cutoff_hz > 0.0)) throw UsageError("cutoff_hz must be positive");
    if (filter_order < 1) throw UsageError("filter_order must be >= 1");
    if (!(target_hz > 0.0)) throw UsageError("target_hz must be positive");
    if (window_size < 1) throw UsageError("window_size must be >= 1");
    if (stride < 1) throw UsageError("stride must be >= 1");
  }
};

inline nlohmann::ordered_json to_json(const PipelineConfig& c) {
  nlohmann::ordered_json j;
  j["cutoff_hz"] = c.cutoff_hz;
  j["filter_order"] = c.filter_order;
  j["target_hz"] = c.target_hz;
  j["window_size"] = c.window_size;
  j["stride"] = c.stride;
  j["representation"] = representation_name(c.representation);
  j["median"] = median_convention_name(c.median);
  j["master_seed"] = c.master_seed;
  j["validation_subject"] =
      c.validation_subject ? nlohmann::ordered_json(*c.validation_subject) : nlohmann::ordered_json();
  j["output_dir"] = c.output_dir;
  j["jobs"] = c.jobs;
  return j;
}

/// Reads the pipeline keys of `j`; keys it does not know are rejected
/// except those listed in `extra_keys` (e.g. "grid").
inline PipelineConfig pipeline_config_from_json(const nlohmann::ordered_json& j,
                                                std::initializer_list<std::string_view> extra_keys = {}) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  PipelineConfig c;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const auto& key = it.key();
      const auto& v = it.value();
      if (key == "cutoff_hz") c.cutoff_hz = v.get<double>();
      else if (key == "filter_order") c.filter_order = v.get<int>();
      else if (key == "target_hz") c.target_hz = v.get<double>();
      else if (key == "window_size") c.window_size = v.get<std::size_t>();
      else if (key == "stride") c.stride = v.get<std::size_t>();
      else if (key == "representation") c.representation = parse_representation(v.get<std::string>());
      else if (key == "median") c.median = parse_median_convention(v.get<std::string>());
      else if (key == "master_seed") c.master_seed = v.get<std::uint64_t>();
      else if (key == "validation_subject") {
        if (v.is_null()) c.validation_subject.reset();
        else c.validation_subject = v.get<int>();
      } else if (key == "output_dir") c.output_dir = v.get<std::string>();
      else if (key == "jobs") c.jobs = v.get<std::size_t>();
      else if (std::find(extra_keys.begin(), extra_keys.end(), key) == extra_keys.end()) {
        throw UsageError("unknown config key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("invalid config value: ") + e.what());
  }
  c.validate();
  return c;
}

}  // namespace kneehar
