#include "irboard/tracker.hpp"

#include <array>
#include <cmath>
#include <limits>

namespace irboard::tracker {

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 4> kKindNames{{
    {EventKind::Down, "down"},
    {EventKind::Move, "move"},
    {EventKind::Up, "up"},
    {EventKind::SideAction, "side"},
}};

// Blobs whose projective image is at infinity are dropped.
std::vector<geometry::ScreenPoint> map_blobs(std::span<const protocol::IrBlob> blobs, const geometry::Homography& h) {
  std::vector<geometry::ScreenPoint> out;
  out.reserve(blobs.size());
  for (const auto& b : blobs) {
    try {
      out.push_back(geometry::apply(h, {static_cast<double>(b.x), static_cast<double>(b.y)}));
    } catch (const geometry::GeometryError&) {
    }
  }
  return out;
}

geometry::ScreenPoint nearest(const std::vector<geometry::ScreenPoint>& pts, geometry::ScreenPoint ref) {
  geometry::ScreenPoint best = pts.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    const double d = std::hypot(p.u - ref.u, p.v - ref.v);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

PointerEvent at(std::uint64_t t, EventKind kind, geometry::ScreenPoint p) { return {t, kind, p.u, p.v}; }

}  // namespace

std::string_view to_string(EventKind kind) {
  for (const auto& [k, n] : kKindNames)
    if (k == kind) return n;
  return "?";
}

std::optional<EventKind> parse_kind(std::string_view name) {
  for (const auto& [k, n] : kKindNames)
    if (n == name) return k;
  return std::nullopt;
}

std::optional<std::string> TrackerConfig::validate() const {
  if (dropout_frames < 0) return "dropout_frames must be non-negative";
  if (!(smoothing_alpha > 0.0 && smoothing_alpha <= 1.0)) return "smoothing_alpha must lie in (0, 1]";
  return std::nullopt;
}

StepResult step(const TrackerState& state, std::uint64_t frame, std::span<const protocol::IrBlob> blobs,
                const std::optional<geometry::Homography>& h, const zones::ZoneConfig& zones) {
  if (!h) throw NotCalibrated();
  StepResult r{state, {}};
  const auto points = map_blobs(blobs, *h);
  const int k = state.config.dropout_frames;

  if (std::holds_alternative<Idle>(state.phase)) {
    if (points.empty()) return r;
    const geometry::ScreenPoint p = points.front();
    const zones::ZoneHit hit = zones::classify(p, zones);
    if (std::holds_alternative<zones::ScreenHit>(hit)) {
      r.events.push_back(at(frame, EventKind::Down, p));
      r.state.phase = PressedScreen{p, 0};
    } else if (const auto* side = std::get_if<zones::SideHit>(&hit)) {
      r.events.push_back({frame, EventKind::SideAction, 0.0, 0.0, side->action});
      r.state.phase = SideLatched{0};
    }
    return r;
  }

  if (const auto* pressed = std::get_if<PressedScreen>(&state.phase)) {
    if (points.empty()) {
      if (pressed->missing_frames + 1 > k) {
        r.events.push_back(at(frame, EventKind::Up, pressed->last));
        r.state.phase = Idle{};
      } else {
        r.state.phase = PressedScreen{pressed->last, pressed->missing_frames + 1};
      }
      return r;
    }
    const geometry::ScreenPoint raw = nearest(points, pressed->last);
    const double a = state.config.smoothing_alpha;
    const geometry::ScreenPoint smoothed =
        a == 1.0 ? raw : geometry::ScreenPoint{a * raw.u + (1.0 - a) * pressed->last.u, a * raw.v + (1.0 - a) * pressed->last.v};
    r.events.push_back(at(frame, EventKind::Move, smoothed));
    r.state.phase = PressedScreen{smoothed, 0};
    return r;
  }

  const auto& latched = std::get<SideLatched>(state.phase);
  if (!points.empty()) {
    r.state.phase = SideLatched{0};
  } else if (latched.missing_frames + 1 > k) {
    r.state.phase = Idle{};
  } else {
    r.state.phase = SideLatched{latched.missing_frames + 1};
  }
  return r;
}

Tracker::Tracker(TrackerConfig config) { state_.config = config; }

std::vector<PointerEvent> Tracker::step(std::uint64_t frame, std::span<const protocol::IrBlob> blobs,
                                        const std::optional<geometry::Homography>& h, const zones::ZoneConfig& zones) {
  StepResult r = tracker::step(state_, frame, blobs, h, zones);
  state_ = std::move(r.state);
  return std::move(r.events);
}

std::vector<PointerEvent> Tracker::release(std::uint64_t frame) {
  std::vector<PointerEvent> events;
  if (const auto* pressed = std::get_if<PressedScreen>(&state_.phase)) {
    events.push_back(at(frame, EventKind::Up, pressed->last));
  }
  state_.phase = Idle{};
  return events;
}

}  // namespace irboard::tracker
