#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <optional>
#include <string>
#include <string_view>

namespace kneehar {

/// The three exercises recorded per subject. Integer codes are stable and
/// used as class labels throughout.
enum class Activity : int {
  Gait = 0,
  SitExtension = 1,
  StandFlexion = 2,
};

inline constexpr int kNumActivities = 3;

inline constexpr std::array<Activity, kNumActivities> kAllActivities = {
    Activity::Gait, Activity::SitExtension, Activity::StandFlexion};

constexpr int activity_code(Activity a) noexcept { return static_cast<int>(a); }

inline std::optional<Activity> activity_from_code(int code) noexcept {
  if (code < 0 || code >= kNumActivities) return std::nullopt;
  return static_cast<Activity>(code);
}

constexpr std::string_view activity_name(Activity a) noexcept {
  switch (a) {
    case Activity::Gait:
      return "gait";
    case Activity::SitExtension:
      return "sit_extension";
    case Activity::StandFlexion:
      return "stand_flexion";
  }
  return "unknown";
}

/// Case-insensitive; accepts canonical names, integer codes and a few
/// common aliases ("march" and "walk" are gait).
inline std::optional<Activity> parse_activity(std::string_view text) {
  std::string key;
  key.reserve(text.size());
  for (char c : text) {
    if (c == '-' || c == ' ') c = '_';
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  struct Alias {
    std::string_view name;
    Activity activity;
  };
  static constexpr std::array<Alias, 17> kAliases = {{
      {"gait", Activity::Gait},
      {"march", Activity::Gait},
      {"walk", Activity::Gait},
      {"walking", Activity::Gait},
      {"0", Activity::Gait},
      {"sit_extension", Activity::SitExtension},
      {"sitextension", Activity::SitExtension},
      {"sit", Activity::SitExtension},
      {"extension", Activity::SitExtension},
      {"leg_extension", Activity::SitExtension},
      {"1", Activity::SitExtension},
      {"stand_flexion", Activity::StandFlexion},
      {"standflexion", Activity::StandFlexion},
      {"stand", Activity::StandFlexion},
      {"flexion", Activity::StandFlexion},
      {"knee_flexion", Activity::StandFlexion},
      {"2", Activity::StandFlexion},
  }};
  auto it = std::find_if(kAliases.begin(), kAliases.end(),
                         [&](const Alias& a) { return a.name == key; });
  if (it == kAliases.end()) return std::nullopt;
  return it->activity;
}

}  // namespace kneehar
