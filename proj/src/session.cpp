#include "irboard/session.hpp"

#include <cmath>
#include <ostream>

#include "irboard/trace.hpp"

namespace irboard::session {

namespace {

constexpr std::array<std::string_view, 7> kPhaseNames{"disconnected", "connected", "ir_enabled", "aligning",
                                                      "calibrating",  "running",   "stopped"};

geometry::CameraPoint to_camera(const protocol::IrBlob& b) {
  return {static_cast<double>(b.x), static_cast<double>(b.y)};
}

geometry::CameraPoint mean_of(const std::vector<geometry::CameraPoint>& pts) {
  geometry::CameraPoint m;
  for (const auto& p : pts) {
    m.x += p.x;
    m.y += p.y;
  }
  m.x /= static_cast<double>(pts.size());
  m.y /= static_cast<double>(pts.size());
  return m;
}

}  // namespace

std::string_view to_string(PhaseKind phase) { return kPhaseNames[static_cast<std::size_t>(phase)]; }

PhaseKind kind_of(const Phase& phase) { return static_cast<PhaseKind>(phase.index()); }

SessionError::SessionError(SessionErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}

Session::Session(config::SessionConfig cfg) : config_(std::move(cfg)), tracker_(config_.tracker) {}

void Session::transition(Phase next, Effects& fx) {
  const PhaseKind from = phase_kind();
  phase_ = std::move(next);
  fx.push_back(PhaseChanged{from, phase_kind()});
}

void Session::require(PhaseKind expected, const char* op) const {
  if (phase_kind() != expected) {
    throw SessionError(SessionErrc::IllegalPhase, std::string(op) + " requires phase " +
                                                      std::string(to_string(expected)) + ", session is " +
                                                      std::string(to_string(phase_kind())));
  }
}

Effects Session::connect(bool handshake) {
  require(PhaseKind::Disconnected, "connect");
  if (config_.touchpad_mode) {
    throw SessionError(SessionErrc::TouchpadMode,
                       "touchpad_mode is enabled; disable it for absolute pen-to-screen mapping");
  }
  if (auto e = config_.validate()) throw SessionError(SessionErrc::InvalidConfig, *e);
  if (!handshake) throw SessionError(SessionErrc::NoHandshake, "device did not acknowledge the sync handshake");
  Effects fx;
  transition(Connected{}, fx);
  fx.push_back(SendCommand{protocol::StatusRequest{}});
  return fx;
}

Effects Session::enable_ir() {
  require(PhaseKind::Connected, "enable_ir");
  Effects fx;
  fx.push_back(SendCommand{protocol::IrEnable{true}});
  fx.push_back(SendCommand{protocol::SetReportingMode{protocol::ReportingMode::ButtonsIr}});
  transition(IrEnabled{}, fx);
  return fx;
}

Effects Session::begin_alignment() {
  require(PhaseKind::IrEnabled, "begin_alignment");
  Effects fx;
  transition(Aligning{}, fx);
  return fx;
}

Effects Session::start(bool handshake) {
  Effects fx = connect(handshake);
  for (auto&& e : enable_ir()) fx.push_back(std::move(e));
  for (auto&& e : begin_alignment()) fx.push_back(std::move(e));
  return fx;
}

Effects Session::arm_corner(int corner) {
  require(PhaseKind::Aligning, "arm_corner");
  if (corner < 0 || corner > 3) throw SessionError(SessionErrc::InvalidArgument, "corner must be 0..3");
  std::get<Aligning>(phase_).armed = corner;
  return {};
}

AlignmentReport Session::alignment() const {
  AlignmentReport r;
  if (const auto* a = std::get_if<Aligning>(&phase_)) r.visible = a->visible;
  r.pass = r.visible[0] && r.visible[1] && r.visible[2] && r.visible[3];
  return r;
}

Effects Session::start_calibration() {
  const PhaseKind k = phase_kind();
  if (k != PhaseKind::Aligning && k != PhaseKind::Running) {
    throw SessionError(SessionErrc::IllegalPhase,
                       "calibration can start from aligning or running, session is " + std::string(to_string(k)));
  }
  Effects fx;
  Calibrating cal;
  if (const auto* run = std::get_if<Running>(&phase_)) {
    cal.previous = run->h;
    emit(tracker_.release(frame_), fx);
  }
  transition(std::move(cal), fx);
  return fx;
}

Effects Session::abort_calibration() {
  require(PhaseKind::Calibrating, "abort_calibration");
  Effects fx;
  const auto previous = std::get<Calibrating>(phase_).previous;
  if (previous) {
    transition(Running{*previous}, fx);
  } else {
    transition(Aligning{}, fx);
  }
  return fx;
}

Effects Session::stop() {
  Effects fx;
  if (phase_kind() == PhaseKind::Stopped) return fx;
  emit(tracker_.release(frame_), fx);
  transition(Stopped{}, fx);
  if (trace_sink_) trace_sink_->flush();
  if (config_.save_on_exit && config_path_) config::save_config(config_, *config_path_);
  return fx;
}

void Session::set_zone_config(const zones::ZoneConfig& zones) {
  if (auto e = zones.validate()) throw SessionError(SessionErrc::InvalidArgument, *e);
  config_.zone_config = zones;
}

std::optional<geometry::Homography> Session::calibration() const {
  if (const auto* run = std::get_if<Running>(&phase_)) return run->h;
  return std::nullopt;
}

Effects Session::handle_frame(std::span<const std::uint8_t> frame) {
  return handle_report(protocol::decode_report(frame));
}

Effects Session::handle_report(const protocol::DeviceReport& report) {
  if (phase_kind() == PhaseKind::Stopped) throw SessionError(SessionErrc::IllegalPhase, "session is stopped");
  Effects fx;
  if (const auto* s = std::get_if<protocol::StatusReport>(&report)) {
    handle_status(*s, fx);
  } else if (const auto* ir = std::get_if<protocol::ButtonsIrReport>(&report)) {
    handle_ir(*ir, fx);
  }
  // Plain button reports carry nothing the engine acts on.
  return fx;
}

void Session::handle_status(const protocol::StatusReport& r, Effects& fx) {
  const double percent = r.battery_percent();
  battery_percent_ = percent;
  fx.push_back(BatteryLevel{percent});
  if (percent < kLowBatteryPercent) {
    if (!low_battery_) fx.push_back(LowBattery{percent});
    low_battery_ = true;
  } else {
    low_battery_ = false;
  }
}

void Session::handle_ir(const protocol::ButtonsIrReport& r, Effects& fx) {
  const std::uint64_t frame = frame_++;
  fx.push_back(BlobFrame{frame, r.blobs});

  if (auto* a = std::get_if<Aligning>(&phase_)) {
    if (!a->armed) return;
    const double m = config_.alignment_margin;
    for (const auto& b : r.blobs) {
      if (b.x >= m && b.x <= protocol::kMaxBlobX - m && b.y >= m && b.y <= protocol::kMaxBlobY - m) {
        a->visible[*a->armed] = true;
        fx.push_back(CornerVisible{*a->armed});
        a->armed.reset();
        break;
      }
    }
  } else if (auto* cal = std::get_if<Calibrating>(&phase_)) {
    calibrate_step(*cal, r.blobs, fx);
  } else if (auto* run = std::get_if<Running>(&phase_)) {
    if (run->awaiting_release) {
      if (r.blobs.empty()) run->awaiting_release = false;
      return;
    }
    emit(tracker_.step(frame, r.blobs, run->h, config_.zone_config), fx);
  }
}

void Session::calibrate_step(Calibrating& cal, std::span<const protocol::IrBlob> blobs, Effects& fx) {
  const auto& cc = config_.calibration;
  if (cal.awaiting_gap) {
    cal.gap_frames = blobs.empty() ? cal.gap_frames + 1 : 0;
    if (cal.gap_frames >= cc.corner_gap_frames) cal.awaiting_gap = false;
    return;
  }
  if (blobs.empty()) {
    cal.samples.clear();
    return;
  }

  cal.samples.push_back(to_camera(blobs.front()));
  const geometry::CameraPoint mean = mean_of(cal.samples);
  for (const auto& p : cal.samples) {
    if (std::hypot(p.x - mean.x, p.y - mean.y) > cc.sample_radius) {
      // Restart the window from the newest sample.
      cal.samples = {cal.samples.back()};
      return;
    }
  }
  if (static_cast<int>(cal.samples.size()) < cc.samples_per_corner) return;

  cal.corners.push_back(mean);
  fx.push_back(CornerCaptured{cal.corner_index, mean});
  cal.samples.clear();
  cal.awaiting_gap = true;
  cal.gap_frames = 0;
  if (cal.corners.size() < 4) {
    ++cal.corner_index;
    return;
  }

  std::array<geometry::CameraPoint, 4> src{cal.corners[0], cal.corners[1], cal.corners[2], cal.corners[3]};
  try {
    const geometry::Homography h =
        geometry::solve_homography(std::span<const geometry::CameraPoint, 4>(src),
                                   std::span<const geometry::ScreenPoint, 4>(geometry::kUnitSquareZ));
    tracker_ = tracker::Tracker(config_.tracker);
    transition(Running{h}, fx);
    fx.push_back(CalibrationComplete{h});
  } catch (const geometry::GeometryError& e) {
    Calibrating restart;
    restart.previous = cal.previous;
    restart.awaiting_gap = true;
    fx.push_back(CalibrationFailed{e.what()});
    transition(std::move(restart), fx);
  }
}

void Session::emit(const std::vector<tracker::PointerEvent>& events, Effects& fx) {
  for (const auto& e : events) {
    trace_.push_back(e);
    if (trace_sink_) *trace_sink_ << trace::to_line(e) << '\n';
    fx.push_back(Pointer{e});
  }
}

}  // namespace irboard::session
