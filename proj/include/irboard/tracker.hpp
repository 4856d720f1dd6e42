#pragma once

// Turns the per-frame IR blob stream into pointer events.
//
//   Idle          + blob on screen   -> Down, PressedScreen
//   Idle          + blob in a band   -> SideAction (once), SideLatched
//   PressedScreen + blob             -> Move
//   pressed phase + no blob          -> missing_frames++; after more than
//                                       K empty frames: Up (PressedScreen
//                                       only) and back to Idle

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "irboard/geometry.hpp"
#include "irboard/protocol.hpp"
#include "irboard/zones.hpp"

namespace irboard::tracker {

struct TrackerConfig {
  int dropout_frames = 3;        // K
  double smoothing_alpha = 1.0;  // 1.0 disables smoothing

  std::optional<std::string> validate() const;
  friend bool operator==(const TrackerConfig&, const TrackerConfig&) = default;
};

enum class EventKind { Down, Move, Up, SideAction };

std::string_view to_string(EventKind kind);
std::optional<EventKind> parse_kind(std::string_view name);

struct PointerEvent {
  std::uint64_t t = 0;  // frame index
  EventKind kind = EventKind::Move;
  double u = 0.0;  // unused for SideAction
  double v = 0.0;
  zones::ZoneAction action = zones::ZoneAction::None;  // SideAction only

  friend bool operator==(const PointerEvent&, const PointerEvent&) = default;
};

struct Idle {
  friend bool operator==(const Idle&, const Idle&) = default;
};
struct PressedScreen {
  geometry::ScreenPoint last;  // smoothed
  int missing_frames = 0;
  friend bool operator==(const PressedScreen&, const PressedScreen&) = default;
};
struct SideLatched {
  int missing_frames = 0;
  friend bool operator==(const SideLatched&, const SideLatched&) = default;
};

using Phase = std::variant<Idle, PressedScreen, SideLatched>;

struct TrackerState {
  Phase phase = Idle{};
  TrackerConfig config;
  friend bool operator==(const TrackerState&, const TrackerState&) = default;
};

class NotCalibrated : public std::logic_error {
 public:
  NotCalibrated() : std::logic_error("tracker stepped without a calibration") {}
};

struct StepResult {
  TrackerState state;
  std::vector<PointerEvent> events;
};

/// Pure transition function. Throws NotCalibrated when `h` is empty.
StepResult step(const TrackerState& state, std::uint64_t frame, std::span<const protocol::IrBlob> blobs,
                const std::optional<geometry::Homography>& h, const zones::ZoneConfig& zones);

/// Owning wrapper around `step` for a single session.
class Tracker {
 public:
  explicit Tracker(TrackerConfig config = {});

  std::vector<PointerEvent> step(std::uint64_t frame, std::span<const protocol::IrBlob> blobs,
                                 const std::optional<geometry::Homography>& h, const zones::ZoneConfig& zones);

  /// Closes an open press (Up at the last position) and returns to Idle.
  std::vector<PointerEvent> release(std::uint64_t frame);

  const TrackerState& state() const noexcept { return state_; }
  bool pressed() const noexcept { return !std::holds_alternative<Idle>(state_.phase); }

 private:
  TrackerState state_;
};

}  // namespace irboard::tracker
