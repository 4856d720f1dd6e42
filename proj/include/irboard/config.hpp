#pragma once

// Persisted session options (default file ./irboard.json).
//
// {
//   "zone_config": {"enabled": false, "band_width": 0.03,
//                   "left":  ["none", "none", "double_click"],
//                   "right": ["right_click", "middle_click", "none"]},
//   "touchpad_mode": false,
//   "save_on_exit": false,
//   "tracker": {"dropout_frames": 3, "smoothing_alpha": 1.0},
//   "calibration": {"samples_per_corner": 10, "corner_gap_frames": 5, "sample_radius": 5.0},
//   "screen_resolution": {"width": 1024, "height": 768},
//   "alignment_margin": 0.0
// }
//
// Absent fields take their defaults; unknown fields are rejected.

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "irboard/tracker.hpp"
#include "irboard/zones.hpp"

namespace irboard::config {

inline constexpr const char* kDefaultConfigPath = "irboard.json";

struct CalibrationConfig {
  int samples_per_corner = 10;  // M
  int corner_gap_frames = 5;    // G
  double sample_radius = 5.0;   // R, camera units
  friend bool operator==(const CalibrationConfig&, const CalibrationConfig&) = default;
};

struct ScreenResolution {
  int width = 1024;
  int height = 768;
  friend bool operator==(const ScreenResolution&, const ScreenResolution&) = default;
};

struct SessionConfig {
  zones::ZoneConfig zone_config;
  // Relative pointer mode. Accepted in the file, refused when a session starts.
  bool touchpad_mode = false;
  bool save_on_exit = false;
  tracker::TrackerConfig tracker;
  CalibrationConfig calibration;
  ScreenResolution screen_resolution;
  // Minimum distance of an alignment blob from the camera frame edge.
  double alignment_margin = 0.0;

  std::optional<std::string> validate() const;
  friend bool operator==(const SessionConfig&, const SessionConfig&) = default;
};

class ConfigParseError : public std::runtime_error {
 public:
  ConfigParseError(const std::string& source, int line, const std::string& field, const std::string& message);

  int line() const noexcept { return line_; }  // 0 when not tied to a line
  const std::string& field() const noexcept { return field_; }
  const std::string& message() const noexcept { return message_; }

 private:
  int line_;
  std::string field_;
  std::string message_;
};

nlohmann::json to_json(const zones::ZoneConfig& zones);
nlohmann::json to_json(const SessionConfig& cfg);

/// `field_prefix` is used in diagnostics ("zone_config" when parsing the
/// nested object, empty for a standalone zone document).
zones::ZoneConfig zones_from_json(const nlohmann::json& j, const std::string& field_prefix = "");
SessionConfig config_from_json(const nlohmann::json& j);

SessionConfig parse_config(const std::string& text, const std::string& source = "<string>");

/// Missing file yields defaults.
SessionConfig load_config(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`.
void save_config(const SessionConfig& cfg, const std::filesystem::path& path);

}  // namespace irboard::config
