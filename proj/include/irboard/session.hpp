#pragma once

// Session lifecycle:
//
//   Disconnected -> Connected -> IrEnabled -> Aligning -> Calibrating -> Running -> Stopped
//
// plus the back-edges Calibrating -> Calibrating (restart after a failed
// solve) and Running -> Calibrating (operator recalibration). Any phase may
// go to Stopped.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "irboard/config.hpp"
#include "irboard/geometry.hpp"
#include "irboard/protocol.hpp"
#include "irboard/tracker.hpp"

namespace irboard::session {

inline constexpr double kLowBatteryPercent = 50.0;

enum class PhaseKind { Disconnected, Connected, IrEnabled, Aligning, Calibrating, Running, Stopped };
std::string_view to_string(PhaseKind phase);

struct Disconnected {};
struct Connected {};
struct IrEnabled {};
struct Aligning {
  std::array<bool, 4> visible{};
  std::optional<int> armed;
};
struct Calibrating {
  int corner_index = 0;
  std::vector<geometry::CameraPoint> samples;  // current steady window
  std::vector<geometry::CameraPoint> corners;  // accepted, Z order
  bool awaiting_gap = false;
  int gap_frames = 0;
  std::optional<geometry::Homography> previous;  // restored on abort
};
struct Running {
  geometry::Homography h;
  // Blobs are ignored until the first blob-free frame, so the pen still
  // held on the last calibration corner does not produce a press.
  bool awaiting_release = true;
};
struct Stopped {};

using Phase = std::variant<Disconnected, Connected, IrEnabled, Aligning, Calibrating, Running, Stopped>;

PhaseKind kind_of(const Phase& phase);

struct AlignmentReport {
  std::array<bool, 4> visible{};
  bool pass = false;
};

// Effects returned to the caller.
struct LowBattery {
  double percent = 0.0;
};
struct BatteryLevel {
  double percent = 0.0;
};
struct CornerVisible {
  int corner = 0;
};
struct CornerCaptured {
  int corner = 0;
  geometry::CameraPoint point;
};
struct CalibrationComplete {
  geometry::Homography h;
};
struct CalibrationFailed {
  std::string reason;
};
struct Pointer {
  tracker::PointerEvent event;
};
struct BlobFrame {
  std::uint64_t frame = 0;
  std::vector<protocol::IrBlob> blobs;
};
struct SendCommand {
  protocol::DeviceCommand command;
};
struct PhaseChanged {
  PhaseKind from = PhaseKind::Disconnected;
  PhaseKind to = PhaseKind::Disconnected;
};

using Effect = std::variant<LowBattery, BatteryLevel, CornerVisible, CornerCaptured, CalibrationComplete,
                            CalibrationFailed, Pointer, BlobFrame, SendCommand, PhaseChanged>;
using Effects = std::vector<Effect>;

enum class SessionErrc { IllegalPhase, InvalidConfig, TouchpadMode, InvalidArgument, NoHandshake };

class SessionError : public std::runtime_error {
 public:
  SessionError(SessionErrc code, const std::string& what);
  SessionErrc code() const noexcept { return code_; }

 private:
  SessionErrc code_;
};

class Session {
 public:
  explicit Session(config::SessionConfig cfg = {});

  /// Disconnected -> Connected. Refuses touchpad mode and invalid configs.
  /// `handshake` is the device's sync-button acknowledgement.
  Effects connect(bool handshake = true);
  /// Connected -> IrEnabled; asks the device for IR reports.
  Effects enable_ir();
  /// IrEnabled -> Aligning.
  Effects begin_alignment();
  /// connect + enable_ir + begin_alignment.
  Effects start(bool handshake = true);

  /// Aligning only; the next frame carrying a blob marks `corner` visible.
  Effects arm_corner(int corner);
  AlignmentReport alignment() const;

  /// Aligning or Running -> Calibrating at corner 0.
  Effects start_calibration();
  /// Calibrating -> Running (previous calibration) or Aligning (none).
  Effects abort_calibration();

  /// Any phase -> Stopped. Closes an open press, flushes the trace sink and
  /// persists the config when save_on_exit is set and a path is known.
  Effects stop();

  Effects handle_report(const protocol::DeviceReport& report);
  /// Decodes then handles; decoder failures propagate as ProtocolError.
  Effects handle_frame(std::span<const std::uint8_t> frame);

  void set_zone_config(const zones::ZoneConfig& zones);
  void set_config_path(std::filesystem::path path) { config_path_ = std::move(path); }
  void set_trace_sink(std::ostream* sink) { trace_sink_ = sink; }

  const config::SessionConfig& config() const noexcept { return config_; }
  const Phase& phase() const noexcept { return phase_; }
  PhaseKind phase_kind() const noexcept { return kind_of(phase_); }
  std::optional<double> battery_percent() const noexcept { return battery_percent_; }
  bool low_battery() const noexcept { return low_battery_; }
  std::uint64_t frames_seen() const noexcept { return frame_; }
  const std::vector<tracker::PointerEvent>& trace() const noexcept { return trace_; }
  std::optional<geometry::Homography> calibration() const;

 private:
  void transition(Phase next, Effects& fx);
  void require(PhaseKind expected, const char* op) const;
  void handle_status(const protocol::StatusReport& r, Effects& fx);
  void handle_ir(const protocol::ButtonsIrReport& r, Effects& fx);
  void calibrate_step(Calibrating& cal, std::span<const protocol::IrBlob> blobs, Effects& fx);
  void emit(const std::vector<tracker::PointerEvent>& events, Effects& fx);

  config::SessionConfig config_;
  Phase phase_ = Disconnected{};
  tracker::Tracker tracker_;
  std::optional<double> battery_percent_;
  bool low_battery_ = false;
  std::uint64_t frame_ = 0;
  std::vector<tracker::PointerEvent> trace_;
  std::ostream* trace_sink_ = nullptr;
  std::optional<std::filesystem::path> config_path_;
};

}  // namespace irboard::session
