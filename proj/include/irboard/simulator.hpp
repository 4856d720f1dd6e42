#pragma once

// Deterministic virtual device and classroom.
//
// A scene is the projected trapezoid measured on the wall (side lengths and
// lamp-to-surface distances). build_scene places that trapezoid in the IR
// camera image and derives the surface -> camera ground-truth homography;
// run_script turns scripted pen gestures into encoded device reports.

#include <array>
#include <cstdint>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "irboard/config.hpp"
#include "irboard/geometry.hpp"
#include "irboard/protocol.hpp"
#include "irboard/tracker.hpp"

namespace irboard::sim {

inline constexpr double kBottomWidthCamera = 900.0;
inline constexpr double kHeightCamera = 650.0;
inline constexpr double kRangeLimitCm = 500.0;
inline constexpr double kReportRateHz = 100.0;
inline constexpr int kStatusIntervalFrames = 100;
inline constexpr int kBatteryDrainFrames = 3000;  // frames per raw unit
inline constexpr std::uint8_t kPenBlobSize = 6;

struct SceneGeometry {
  double bottom_cm = 0;
  double top_cm = 0;
  double left_cm = 0;
  double right_cm = 0;
  double dist_bottom_cm = 0;
  double dist_top_cm = 0;
  friend bool operator==(const SceneGeometry&, const SceneGeometry&) = default;
};

enum class SimErrc { InvalidGeometry, UnknownScene, InvalidScript };

class SimError : public std::runtime_error {
 public:
  SimError(SimErrc code, const std::string& what);
  SimErrc code() const noexcept { return code_; }

 private:
  SimErrc code_;
};

/// The three measured classroom scenes, "A", "B" and "C".
SceneGeometry named_scene(std::string_view name);

SceneGeometry scene_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneGeometry& g);

struct VirtualDevice {
  SceneGeometry scene;
  // Keystone widths in camera units before the corners are snapped to the
  // integer camera grid.
  double nominal_top_width = 0;
  double nominal_bottom_width = 0;
  // Surface corners in the camera image, Z order, on integer positions.
  std::array<geometry::Vec2, 4> camera_corners{};
  geometry::Homography ground_truth;  // surface (s,t) -> camera
  int initial_battery_raw = protocol::kMaxBatteryRaw;
  double report_rate_hz = kReportRateHz;
  double range_limit_cm = kRangeLimitCm;
  bool handshake = true;  // A+B sync acknowledged
};

VirtualDevice build_scene(const SceneGeometry& g);

/// Pen-to-camera distance, linear in t from dist_bottom_cm (t = 0) to
/// dist_top_cm (t = 1).
double pen_distance_cm(const VirtualDevice& dev, double t);
bool in_range(const VirtualDevice& dev, double t);

/// Exact camera position of a surface point (no noise, no rounding).
geometry::Vec2 surface_to_camera(const VirtualDevice& dev, geometry::Vec2 st);
/// Surface point whose camera image is exactly the given pixel.
geometry::Vec2 surface_point_for_pixel(const VirtualDevice& dev, int x, int y);

struct PenState {
  double s = 0.0;
  double t = 0.0;
  bool pressed = false;
  friend bool operator==(const PenState&, const PenState&) = default;
};

struct PenStep {
  std::uint64_t frame = 0;
  PenState pen;
};

struct PenScript {
  std::optional<SceneGeometry> scene;
  double sigma = 0.0;  // camera units, per axis
  std::uint64_t seed = 0;
  std::optional<int> battery_raw;  // initial level, device default otherwise
  std::vector<PenStep> steps;
  bool calibration_prologue = false;  // expand before running
  // Leading frames that belong to the calibration prologue.
  std::uint64_t calibration_frames = 0;
};

PenScript script_from_json(const nlohmann::json& j);
nlohmann::json to_json(const PenScript& s);
PenScript load_script(const std::string& path);

/// Throws SimError(InvalidScript) when frames are not strictly increasing or
/// a position is not finite.
void validate(const PenScript& script);

/// Prepends the Z-order corner ritual (M pressed frames per corner, then G
/// empty frames) and shifts the scripted steps after it.
PenScript with_calibration_prologue(const PenScript& script, const config::CalibrationConfig& cal);

/// Frame-by-frame device model; one ButtonsIr report per tick with a Status
/// report interleaved every kStatusIntervalFrames.
class Simulator {
 public:
  Simulator(VirtualDevice dev, double sigma, std::uint64_t seed);

  std::vector<protocol::Bytes> tick(const PenState& pen);
  /// Answer to a StatusRequest.
  protocol::Bytes status_report() const;

  std::uint64_t frame() const noexcept { return frame_; }
  int battery_raw() const noexcept;
  const VirtualDevice& device() const noexcept { return dev_; }

 private:
  std::optional<protocol::IrBlob> observe(const PenState& pen);

  VirtualDevice dev_;
  double sigma_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> noise_{0.0, 1.0};
  std::uint64_t frame_ = 0;
};

/// Frames 0..last step frame inclusive, pen state held between steps.
std::vector<protocol::Bytes> run_script(const VirtualDevice& dev, const PenScript& script);

/// Events an ideally calibrated session would emit for the script, taken
/// straight from the scripted surface coordinates. Frames before
/// `script.calibration_frames` are skipped.
std::vector<tracker::PointerEvent> ground_truth_expected_events(const VirtualDevice& dev, const PenScript& script,
                                                                const config::SessionConfig& cfg);

}  // namespace irboard::sim
