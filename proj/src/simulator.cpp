#include "irboard/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "irboard/zones.hpp"

namespace irboard::sim {

using nlohmann::json;

namespace {

[[noreturn]] void bad_script(const std::string& what) { throw SimError(SimErrc::InvalidScript, what); }

// Closed-form map from the unit square onto a quadrilateral (corners in
// Z order). Kept separate from the engine's solver so the simulator's
// ground truth does not depend on the code it is used to check.
geometry::Homography square_to_quad(const std::array<geometry::Vec2, 4>& z) {
  // Walk the quad cyclically: (0,0) (1,0) (1,1) (0,1).
  const geometry::Vec2 q0 = z[0], q1 = z[1], q2 = z[3], q3 = z[2];
  const double sx = q0.x - q1.x + q2.x - q3.x;
  const double sy = q0.y - q1.y + q2.y - q3.y;
  const double dx1 = q1.x - q2.x, dx2 = q3.x - q2.x;
  const double dy1 = q1.y - q2.y, dy2 = q3.y - q2.y;
  const double den = dx1 * dy2 - dx2 * dy1;
  if (std::abs(den) < 1e-12) throw SimError(SimErrc::InvalidGeometry, "camera quad is degenerate");
  const double g = (sx * dy2 - dx2 * sy) / den;
  const double h = (dx1 * sy - sx * dy1) / den;
  return geometry::Homography::from_matrix({{{q1.x - q0.x + g * q1.x, q3.x - q0.x + h * q3.x, q0.x},
                                             {q1.y - q0.y + g * q1.y, q3.y - q0.y + h * q3.y, q0.y},
                                             {g, h, 1.0}}});
}

double number_field(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) throw SimError(SimErrc::InvalidGeometry, std::string(key) + " must be a number");
  return j[key].get<double>();
}

}  // namespace

SimError::SimError(SimErrc code, const std::string& what) : std::runtime_error(what), code_(code) {}

SceneGeometry named_scene(std::string_view name) {
  // Side lengths and lamp distances in cm as measured in the three lecture rooms.
  if (name == "A") return {97, 110, 83, 86, 146, 182};
  if (name == "B") return {137, 139, 103, 103, 209, 239};
  if (name == "C") return {153, 150, 110, 107, 230, 257};
  throw SimError(SimErrc::UnknownScene, "unknown scene '" + std::string(name) + "' (expected A, B or C)");
}

SceneGeometry scene_from_json(const json& j) {
  if (j.is_string()) return named_scene(j.get<std::string>());
  if (!j.is_object()) throw SimError(SimErrc::InvalidGeometry, "scene must be a name or an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "bottom_cm" && key != "top_cm" && key != "left_cm" && key != "right_cm" && key != "dist_bottom_cm" &&
        key != "dist_top_cm") {
      throw SimError(SimErrc::InvalidGeometry, "unknown scene field " + key);
    }
  }
  return {number_field(j, "bottom_cm"), number_field(j, "top_cm"),         number_field(j, "left_cm"),
          number_field(j, "right_cm"),  number_field(j, "dist_bottom_cm"), number_field(j, "dist_top_cm")};
}

json to_json(const SceneGeometry& g) {
  return {{"bottom_cm", g.bottom_cm}, {"top_cm", g.top_cm},
          {"left_cm", g.left_cm},     {"right_cm", g.right_cm},
          {"dist_bottom_cm", g.dist_bottom_cm}, {"dist_top_cm", g.dist_top_cm}};
}

VirtualDevice build_scene(const SceneGeometry& g) {
  for (double v : {g.bottom_cm, g.top_cm, g.left_cm, g.right_cm, g.dist_bottom_cm, g.dist_top_cm}) {
    if (!(std::isfinite(v) && v > 0.0)) throw SimError(SimErrc::InvalidGeometry, "scene dimensions must be positive");
  }
  VirtualDevice dev;
  dev.scene = g;
  dev.nominal_bottom_width = kBottomWidthCamera;
  dev.nominal_top_width = kBottomWidthCamera * (g.top_cm / g.bottom_cm);

  const double cx = (protocol::kCameraWidth - 1) / 2.0;
  const double top = (protocol::kCameraHeight - 1 - kHeightCamera) / 2.0;
  const double bottom = top + kHeightCamera;
  auto snap = [](double v) { return std::floor(v + 0.5); };
  const double tl = snap(cx - dev.nominal_top_width / 2.0);
  const double bl = snap(cx - dev.nominal_bottom_width / 2.0);
  dev.camera_corners = {geometry::Vec2{tl, snap(top)}, geometry::Vec2{snap(cx + dev.nominal_top_width / 2.0), snap(top)},
                        geometry::Vec2{bl, snap(bottom)},
                        geometry::Vec2{snap(cx + dev.nominal_bottom_width / 2.0), snap(bottom)}};
  for (const auto& c : dev.camera_corners) {
    if (c.x < 0 || c.x > protocol::kMaxBlobX || c.y < 0 || c.y > protocol::kMaxBlobY) {
      throw SimError(SimErrc::InvalidGeometry, "keystone pushes the surface outside the camera frame");
    }
  }
  dev.ground_truth = square_to_quad(dev.camera_corners);
  return dev;
}

double pen_distance_cm(const VirtualDevice& dev, double t) {
  return dev.scene.dist_bottom_cm + t * (dev.scene.dist_top_cm - dev.scene.dist_bottom_cm);
}

bool in_range(const VirtualDevice& dev, double t) { return pen_distance_cm(dev, t) <= dev.range_limit_cm; }

geometry::Vec2 surface_to_camera(const VirtualDevice& dev, geometry::Vec2 st) {
  return geometry::transform(dev.ground_truth, st);
}

geometry::Vec2 surface_point_for_pixel(const VirtualDevice& dev, int x, int y) {
  return geometry::transform(geometry::invert(dev.ground_truth), {static_cast<double>(x), static_cast<double>(y)});
}

void validate(const PenScript& script) {
  if (!(std::isfinite(script.sigma) && script.sigma >= 0.0)) bad_script("sigma must be a non-negative number");
  if (script.battery_raw && (*script.battery_raw < 0 || *script.battery_raw > protocol::kMaxBatteryRaw)) {
    bad_script("battery_raw must lie in 0..200");
  }
  for (std::size_t i = 0; i < script.steps.size(); ++i) {
    const auto& s = script.steps[i];
    if (i > 0 && s.frame <= script.steps[i - 1].frame) {
      bad_script("step " + std::to_string(i) + ": frames must be strictly increasing");
    }
    if (!std::isfinite(s.pen.s) || !std::isfinite(s.pen.t)) bad_script("step " + std::to_string(i) + ": position not finite");
  }
}

PenScript script_from_json(const json& j) {
  if (!j.is_object()) bad_script("script must be an object");
  PenScript s;
  for (const auto& [key, value] : j.items()) {
    if (key == "scene") {
      try {
        s.scene = scene_from_json(value);
      } catch (const SimError& e) {
        bad_script(std::string("scene: ") + e.what());
      }
    } else if (key == "sigma") {
      if (!value.is_number()) bad_script("sigma must be a number");
      s.sigma = value.get<double>();
    } else if (key == "seed") {
      if (!value.is_number_unsigned()) bad_script("seed must be a non-negative integer");
      s.seed = value.get<std::uint64_t>();
    } else if (key == "battery_raw") {
      if (!value.is_number_integer()) bad_script("battery_raw must be an integer");
      s.battery_raw = value.get<int>();
    } else if (key == "calibration_prologue") {
      if (!value.is_boolean()) bad_script("calibration_prologue must be a boolean");
      s.calibration_prologue = value.get<bool>();
    } else if (key == "steps") {
      if (!value.is_array()) bad_script("steps must be an array");
      for (const auto& step : value) {
        if (!step.is_object() || !step.contains("frame") || !step["frame"].is_number_unsigned()) {
          bad_script("each step needs a non-negative integer frame");
        }
        PenStep ps;
        ps.frame = step["frame"].get<std::uint64_t>();
        ps.pen.pressed = step.value("pressed", false);
        const bool has_pos = step.contains("s") && !step["s"].is_null();
        if (has_pos) {
          if (!step["s"].is_number() || !step.contains("t") || !step["t"].is_number()) bad_script("s and t must be numbers");
          ps.pen.s = step["s"].get<double>();
          ps.pen.t = step["t"].get<double>();
        } else if (ps.pen.pressed) {
          bad_script("a pressed step needs s and t");
        }
        s.steps.push_back(ps);
      }
    } else {
      bad_script("unknown script field " + key);
    }
  }
  validate(s);
  return s;
}

json to_json(const PenScript& s) {
  json j;
  if (s.scene) j["scene"] = to_json(*s.scene);
  j["sigma"] = s.sigma;
  j["seed"] = s.seed;
  if (s.battery_raw) j["battery_raw"] = *s.battery_raw;
  if (s.calibration_prologue) j["calibration_prologue"] = true;
  json steps = json::array();
  for (const auto& st : s.steps) {
    steps.push_back({{"frame", st.frame}, {"s", st.pen.s}, {"t", st.pen.t}, {"pressed", st.pen.pressed}});
  }
  j["steps"] = steps;
  return j;
}

PenScript load_script(const std::string& path) {
  std::ifstream in(path);
  if (!in) bad_script("cannot read script " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    bad_script(path + ": " + e.what());
  }
  return script_from_json(j);
}

PenScript with_calibration_prologue(const PenScript& script, const config::CalibrationConfig& cal) {
  static constexpr std::array<std::array<double, 2>, 4> kCorners{{{0, 0}, {1, 0}, {0, 1}, {1, 1}}};
  const std::uint64_t m = static_cast<std::uint64_t>(cal.samples_per_corner);
  const std::uint64_t g = static_cast<std::uint64_t>(std::max(cal.corner_gap_frames, 1));
  PenScript out = script;
  out.calibration_prologue = false;
  out.steps.clear();
  std::uint64_t frame = 0;
  for (const auto& c : kCorners) {
    out.steps.push_back({frame, {c[0], c[1], true}});
    out.steps.push_back({frame + m, {c[0], c[1], false}});
    frame += m + g;
  }
  out.calibration_frames = frame;
  for (const auto& st : script.steps) {
    PenStep shifted = st;
    shifted.frame += frame;
    out.steps.push_back(shifted);
  }
  return out;
}

Simulator::Simulator(VirtualDevice dev, double sigma, std::uint64_t seed)
    : dev_(std::move(dev)), sigma_(sigma), rng_(seed) {}

int Simulator::battery_raw() const noexcept {
  const auto drained = static_cast<long long>(frame_ / kBatteryDrainFrames);
  return static_cast<int>(std::max(0LL, dev_.initial_battery_raw - drained));
}

std::optional<protocol::IrBlob> Simulator::observe(const PenState& pen) {
  if (!pen.pressed || !in_range(dev_, pen.t)) return std::nullopt;
  geometry::Vec2 c;
  try {
    c = surface_to_camera(dev_, {pen.s, pen.t});
  } catch (const geometry::GeometryError&) {
    return std::nullopt;
  }
  if (sigma_ > 0.0) {
    c.x += sigma_ * noise_(rng_);
    c.y += sigma_ * noise_(rng_);
  }
  // The sensor cannot report beyond its frame.
  c.x = std::clamp(c.x, 0.0, static_cast<double>(protocol::kMaxBlobX));
  c.y = std::clamp(c.y, 0.0, static_cast<double>(protocol::kMaxBlobY));
  return protocol::IrBlob{static_cast<std::uint16_t>(std::lround(c.x)), static_cast<std::uint16_t>(std::lround(c.y)),
                          kPenBlobSize};
}

protocol::Bytes Simulator::status_report() const {
  protocol::StatusReport st;
  st.led_mask = 0x1;
  st.battery_raw = static_cast<std::uint8_t>(battery_raw());
  return protocol::encode_report(st);
}

std::vector<protocol::Bytes> Simulator::tick(const PenState& pen) {
  std::vector<protocol::Bytes> out;
  if (frame_ % kStatusIntervalFrames == 0) out.push_back(status_report());
  protocol::ButtonsIrReport ir;
  if (auto blob = observe(pen)) ir.blobs.push_back(*blob);
  out.push_back(protocol::encode_report(ir));
  ++frame_;
  return out;
}

std::vector<protocol::Bytes> run_script(const VirtualDevice& dev, const PenScript& script) {
  validate(script);
  VirtualDevice d = dev;
  if (script.battery_raw) d.initial_battery_raw = *script.battery_raw;
  Simulator sim(d, script.sigma, script.seed);
  std::vector<protocol::Bytes> frames;
  if (script.steps.empty()) return frames;
  PenState pen;
  std::size_t next = 0;
  for (std::uint64_t f = 0; f <= script.steps.back().frame; ++f) {
    while (next < script.steps.size() && script.steps[next].frame <= f) pen = script.steps[next++].pen;
    for (auto& bytes : sim.tick(pen)) frames.push_back(std::move(bytes));
  }
  return frames;
}

std::vector<tracker::PointerEvent> ground_truth_expected_events(const VirtualDevice& dev, const PenScript& script,
                                                                const config::SessionConfig& cfg) {
  using tracker::EventKind;
  std::vector<tracker::PointerEvent> out;
  if (script.steps.empty()) return out;

  enum class Mode { Idle, Pressed, Latched } mode = Mode::Idle;
  const int k = cfg.tracker.dropout_frames;
  const double alpha = cfg.tracker.smoothing_alpha;
  double lu = 0, lv = 0;
  int missing = 0;

  PenState pen;
  std::size_t next = 0;
  const std::uint64_t last = script.steps.back().frame;
  for (std::uint64_t f = 0; f <= last; ++f) {
    while (next < script.steps.size() && script.steps[next].frame <= f) pen = script.steps[next++].pen;
    if (f < script.calibration_frames) continue;
    const bool seen = pen.pressed && in_range(dev, pen.t);
    switch (mode) {
      case Mode::Idle: {
        if (!seen) break;
        const auto hit = zones::classify({pen.s, pen.t}, cfg.zone_config);
        if (std::holds_alternative<zones::ScreenHit>(hit)) {
          lu = pen.s;
          lv = pen.t;
          out.push_back({f, EventKind::Down, lu, lv});
          mode = Mode::Pressed;
          missing = 0;
        } else if (const auto* side = std::get_if<zones::SideHit>(&hit)) {
          out.push_back({f, EventKind::SideAction, 0, 0, side->action});
          mode = Mode::Latched;
          missing = 0;
        }
        break;
      }
      case Mode::Pressed:
        if (seen) {
          lu = alpha * pen.s + (1 - alpha) * lu;
          lv = alpha * pen.t + (1 - alpha) * lv;
          out.push_back({f, EventKind::Move, lu, lv});
          missing = 0;
        } else if (++missing > k) {
          out.push_back({f, EventKind::Up, lu, lv});
          mode = Mode::Idle;
        }
        break;
      case Mode::Latched:
        if (seen) {
          missing = 0;
        } else if (++missing > k) {
          mode = Mode::Idle;
        }
        break;
    }
  }
  // A session stopped mid-press releases at the frame count.
  if (mode == Mode::Pressed) out.push_back({last + 1, EventKind::Up, lu, lv});
  return out;
}

}  // namespace irboard::sim
