// Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any
// failure.

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "irboard/geometry.hpp"
#include "irboard/pipeline.hpp"
#include "irboard/protocol.hpp"
#include "irboard/service.hpp"
#include "irboard/simulator.hpp"
#include "irboard/tracker.hpp"
#include "irboard/zones.hpp"
#include "oracles.hpp"

using namespace irboard;
using geometry::Vec2;
using tracker::EventKind;

namespace {

int g_failures = 0;

void report(bool ok, const char* name, const std::string& detail) {
  std::printf("%s  %-28s %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::array<Vec2, 4> to_vec(const std::array<oracle::P, 4>& q) {
  return {Vec2{q[0].x, q[0].y}, Vec2{q[1].x, q[1].y}, Vec2{q[2].x, q[2].y}, Vec2{q[3].x, q[3].y}};
}

Vec2 bilinear(const std::array<Vec2, 4>& q, double a, double b) {
  const Vec2 top{q[0].x + a * (q[1].x - q[0].x), q[0].y + a * (q[1].y - q[0].y)};
  const Vec2 bot{q[2].x + a * (q[3].x - q[2].x), q[2].y + a * (q[3].y - q[2].y)};
  return {top.x + b * (bot.x - top.x), top.y + b * (bot.y - top.y)};
}

// Random pair of camera-like and screen-like quads in general position.
std::pair<std::array<oracle::P, 4>, std::array<oracle::P, 4>> random_problem(std::mt19937_64& rng) {
  while (true) {
    const auto src = oracle::random_camera_quad(rng);
    auto dst = oracle::random_camera_quad(rng);
    for (auto& p : dst) p = {p.x / 1023.0, p.y / 767.0};
    if (oracle::general_position(src) && oracle::general_position(dst, 1e-6)) return {src, dst};
  }
}

void homography_exactness() {
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst_residual = 0, worst_roundtrip = 0;
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < 1000; ++i) {
    const auto [s, d] = random_problem(rng);
    const auto src = to_vec(s), dst = to_vec(d);
    const auto h = geometry::solve_homography(src, dst);
    for (int k = 0; k < 4; ++k) {
      const auto p = geometry::transform(h, src[k]);
      worst_residual = std::max({worst_residual, std::abs(p.x - dst[k].x), std::abs(p.y - dst[k].y)});
    }
    const auto inv = geometry::invert(h);
    for (int k = 0; k < 100; ++k) {
      const Vec2 p = bilinear(src, unit(rng), unit(rng));
      const Vec2 back = geometry::transform(inv, geometry::transform(h, p));
      worst_roundtrip = std::max({worst_roundtrip, std::abs(back.x - p.x), std::abs(back.y - p.y)});
    }
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  report(worst_residual <= 1e-9 && worst_roundtrip <= 1e-6 && secs < 5.0, "homography exactness",
         fmt("max residual %.2e, max invert(apply) error %.2e, %.3f s", worst_residual, worst_roundtrip, secs));
}

void oracle_equivalence() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  double worst = 0;
  int singular = 0;
  for (int i = 0; i < 100; ++i) {
    const auto [s, d] = random_problem(rng);
    oracle::M3 m;
    if (!oracle::solve_brute_force(s, d, m)) {
      ++singular;
      continue;
    }
    const auto src = to_vec(s);
    const auto h = geometry::solve_homography(src, to_vec(d));
    for (int k = 0; k < 104; ++k) {
      const Vec2 p = k < 4 ? src[k] : bilinear(src, unit(rng), unit(rng));
      const auto mine = geometry::transform(h, p);
      const auto ref = oracle::apply(m, {p.x, p.y});
      worst = std::max({worst, std::abs(mine.x - ref.x), std::abs(mine.y - ref.y)});
    }
  }
  report(worst <= 1e-8 && singular == 0, "oracle equivalence",
         fmt("max |solver - brute force| %.2e over 100 problems", worst));
}

void codec() {
  using namespace protocol;
  std::size_t boundary = 0, random_trips = 0, mismatches = 0, crashes = 0, rejected = 0;
  const std::uint16_t xs[] = {0, 1, 511, 512, 1023};
  const std::uint16_t ys[] = {0, 383, 384, 767};
  const std::uint8_t sizes[] = {0, 15};
  std::vector<IrBlob> pool;
  for (auto x : xs)
    for (auto y : ys)
      for (auto sz : sizes) pool.push_back({x, y, sz});

  auto trip = [&](const DeviceReport& r) {
    try {
      if (decode_report(encode_report(r)) != r) ++mismatches;
    } catch (...) {
      ++mismatches;
    }
  };
  // Every combination of boundary blobs for 0..4 occupied slots.
  for (std::size_t n = 0; n <= 4; ++n) {
    std::vector<std::size_t> idx(n, 0);
    while (true) {
      ButtonsIrReport r{0x1F9F, {}};
      for (auto i : idx) r.blobs.push_back(pool[i]);
      trip(r);
      ++boundary;
      std::size_t k = 0;
      while (k < n && ++idx[k] == pool.size()) idx[k++] = 0;
      if (k == n) break;
    }
  }

  std::mt19937_64 rng(1003);
  for (int i = 0; i < 100000; ++i) {
    DeviceReport r;
    switch (rng() % 3) {
      case 0:
        r = StatusReport{static_cast<std::uint16_t>(rng()), static_cast<std::uint8_t>(rng() % 16),
                         static_cast<std::uint8_t>(rng() % 16), static_cast<std::uint8_t>(rng() % 201)};
        break;
      case 1:
        r = ButtonsReport{static_cast<std::uint16_t>(rng())};
        break;
      default: {
        ButtonsIrReport ir{static_cast<std::uint16_t>(rng()), {}};
        const auto n = rng() % 5;
        for (std::uint64_t b = 0; b < n; ++b)
          ir.blobs.push_back({static_cast<std::uint16_t>(rng() % 1024), static_cast<std::uint16_t>(rng() % 768),
                              static_cast<std::uint8_t>(rng() % 16)});
        r = ir;
      }
    }
    trip(r);
    ++random_trips;
  }

  const std::uint8_t ids[] = {0x20, 0x30, 0x33, 0x21, 0x00};
  for (int i = 0; i < 100000; ++i) {
    Bytes frame(rng() % 24);
    for (auto& b : frame) b = static_cast<std::uint8_t>(rng());
    if (!frame.empty() && rng() % 4 != 0) frame[0] = kInputPrefix;
    if (frame.size() > 1 && rng() % 2) {
      frame[1] = ids[rng() % 5];
      // Often give it the length that id expects so decoding reaches the fields.
      const std::size_t want = frame[1] == 0x20 ? 8 : frame[1] == 0x30 ? 4 : 16;
      if (rng() % 2) frame.resize(want, static_cast<std::uint8_t>(rng()));
    }
    try {
      const auto r = decode_report(frame);
      if (!report_valid(r)) ++mismatches;
    } catch (const ProtocolError&) {
      ++rejected;
    } catch (...) {
      ++crashes;
    }
  }
  report(mismatches == 0 && crashes == 0 && random_trips == 100000, "codec",
         std::to_string(boundary) + " boundary and " + std::to_string(random_trips) +
             " random round-trips, 100000 fuzz frames (" + std::to_string(rejected) + " rejected, " +
             std::to_string(crashes) + " crashes, " + std::to_string(mismatches) + " mismatches)");
}

// Twenty press/release gestures at surface points whose camera image is an
// exact pixel, after the corner ritual.
sim::PenScript gesture_script(const sim::VirtualDevice& dev, double sigma, std::uint64_t seed,
                              const config::SessionConfig& cfg, std::vector<Vec2>& targets) {
  sim::PenScript p;
  p.sigma = sigma;
  p.seed = seed;
  targets.clear();
  std::uint64_t f = 0;
  for (int i = 0; i < 20; ++i) {
    const Vec2 nominal{0.1 + 0.8 * ((i % 5) / 4.0), 0.1 + 0.8 * ((i / 5) / 3.0)};
    const Vec2 cam = sim::surface_to_camera(dev, nominal);
    const Vec2 st = sim::surface_point_for_pixel(dev, static_cast<int>(std::lround(cam.x)),
                                                 static_cast<int>(std::lround(cam.y)));
    targets.push_back(st);
    p.steps.push_back({f, {st.x, st.y, true}});
    p.steps.push_back({f + 6, {st.x, st.y, false}});
    f += 6 + static_cast<std::uint64_t>(cfg.tracker.dropout_frames) + 4;
  }
  p.steps.push_back({f, {0, 0, false}});
  return sim::with_calibration_prologue(p, cfg.calibration);
}

struct GestureErrors {
  bool structure_ok = true;
  std::vector<double> errors;  // |du|, |dv| of every Down and Up
};

GestureErrors run_gestures(const sim::VirtualDevice& dev, double sigma, std::uint64_t seed) {
  config::SessionConfig cfg;
  std::vector<Vec2> targets;
  const auto script = gesture_script(dev, sigma, seed, cfg, targets);
  const auto r = pipeline::run_simulation(dev, script, cfg);
  GestureErrors g;
  std::vector<tracker::PointerEvent> edges;
  for (const auto& e : r.events)
    if (e.kind == EventKind::Down || e.kind == EventKind::Up) edges.push_back(e);
  g.structure_ok = r.calibrated && edges.size() == 40;
  for (std::size_t i = 0; i < edges.size() && i / 2 < targets.size(); ++i) {
    const auto& want = targets[i / 2];
    if (edges[i].kind != (i % 2 == 0 ? EventKind::Down : EventKind::Up)) g.structure_ok = false;
    g.errors.push_back(std::abs(edges[i].u - want.x));
    g.errors.push_back(std::abs(edges[i].v - want.y));
  }
  return g;
}

double median(std::vector<double> v) {
  if (v.empty()) return INFINITY;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

void end_to_end() {
  for (const char* name : {"A", "B", "C"}) {
    const auto dev = sim::build_scene(sim::named_scene(name));
    const auto exact = run_gestures(dev, 0.0, 0);
    const double worst = exact.errors.empty() ? INFINITY : *std::max_element(exact.errors.begin(), exact.errors.end());
    std::vector<double> noisy;
    bool noisy_ok = true;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto g = run_gestures(dev, 1.0, seed);
      noisy_ok = noisy_ok && g.structure_ok;
      noisy.insert(noisy.end(), g.errors.begin(), g.errors.end());
    }
    const double med = median(noisy);
    const std::string label = std::string("end-to-end scene ") + name;
    report(exact.structure_ok && worst <= 1e-6 && noisy_ok && med <= 0.004, label.c_str(),
           fmt("sigma=0 max error %.2e; sigma=1 median abs error %.5f (max %.5f)", worst, med,
               *std::max_element(noisy.begin(), noisy.end())));
  }
}

void zone_examples() {
  // Scene C keeps both lateral bands inside the camera frame at every height.
  const auto dev = sim::build_scene(sim::named_scene("C"));
  config::SessionConfig cfg;
  cfg.zone_config.enabled = true;
  auto side_action = [&](double s, double t) {
    sim::PenScript p;
    p.steps = {{0, {s, t, true}}, {5, {s, t, false}}, {12, {s, t, false}}};
    const auto r = pipeline::run_simulation(dev, sim::with_calibration_prologue(p, cfg.calibration), cfg);
    std::vector<zones::ZoneAction> out;
    for (const auto& e : r.events) {
      if (e.kind != EventKind::SideAction) return std::vector<zones::ZoneAction>{};
      out.push_back(e.action);
    }
    return out;
  };
  const auto right_top = side_action(1.015, 0.15);
  const auto left_bottom = side_action(-0.015, 0.85);
  const bool examples = right_top == std::vector{zones::ZoneAction::RightClick} &&
                        left_bottom == std::vector{zones::ZoneAction::DoubleClick};

  using namespace zones;
  std::mt19937_64 rng(1005);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const ZoneAction all[] = {ZoneAction::None, ZoneAction::LeftClick, ZoneAction::RightClick, ZoneAction::MiddleClick,
                            ZoneAction::DoubleClick};
  std::size_t violations = 0;
  for (int i = 0; i < 100000; ++i) {
    ZoneConfig c;
    for (auto& a : c.left) a = all[rng() % 5];
    for (auto& a : c.right) a = all[rng() % 5];
    c.enabled = rng() % 4 != 0;
    c.band_width = 0.01 + 0.19 * unit(rng);
    ZoneConfig swapped = c;
    std::swap(swapped.left, swapped.right);
    const auto step = 1 + rng() % 1000;
    const double off = step == 1000 ? c.band_width : c.band_width * static_cast<double>(step) / 1000.0;
    const double v = -0.1 + 1.2 * unit(rng);
    const ZoneHit right = classify({1.0 + off, v}, c);
    if (classify({-off, v}, swapped) != right) ++violations;

    const geometry::ScreenPoint p{-0.5 + 2.0 * unit(rng), -0.5 + 2.0 * unit(rng)};
    const ZoneHit h = classify(p, c);
    const bool inside = p.u >= 0 && p.u <= 1 && p.v >= 0 && p.v <= 1;
    if (std::holds_alternative<ScreenHit>(h) != inside) ++violations;
    if (const auto* s = std::get_if<SideHit>(&h)) {
      const bool in_band = (p.u > 1.0 && p.u <= 1.0 + c.band_width) || (p.u < 0.0 && p.u >= -c.band_width);
      const auto& slots = p.u < 0 ? c.left : c.right;
      if (!c.enabled || !in_band || p.v < 0 || p.v > 1 || s->action == ZoneAction::None ||
          slots[third_of(p.v)] != s->action) {
        ++violations;
      }
    }
  }
  report(examples && violations == 0, "zones",
         std::string("right-top -> ") + (right_top.empty() ? "nothing" : std::string(to_string(right_top[0]))) +
             ", left-bottom -> " + (left_bottom.empty() ? "nothing" : std::string(to_string(left_bottom[0]))) +
             "; mirror and partition: " + std::to_string(violations) + " violations in 100000 draws");
}

void battery_guard() {
  const auto dev = sim::build_scene(sim::named_scene("A"));
  sim::PenScript p;
  p.battery_raw = 101;
  p.steps = {{0, {}}, {9100, {}}};
  const auto r = pipeline::run_simulation(dev, p, {});
  std::vector<double> warnings;
  for (const auto& e : r.effects)
    if (const auto* w = std::get_if<session::LowBattery>(&e)) warnings.push_back(w->percent);
  report(warnings.size() == 1 && warnings[0] == 49.5, "battery guard",
         std::to_string(warnings.size()) + " warning(s)" +
             (warnings.empty() ? std::string() : fmt(", first at %.1f%%", warnings[0])) +
             " while draining raw 101 -> 98");
}

void range_limit() {
  // Lamp 480 cm from the bottom edge, 520 cm from the top: the pen leaves
  // the 5 m range at t = 0.5.
  const auto dev = sim::build_scene({100, 100, 80, 80, 480, 520});
  const auto h = geometry::invert(dev.ground_truth);
  const int k = config::SessionConfig{}.tracker.dropout_frames;
  sim::PenScript p;
  p.steps = {{0, {0.5, 0.3, true}}, {10, {0.5, 0.9, true}}, {40, {0.5, 0.9, false}}};
  tracker::Tracker trk;
  std::size_t far_blobs = 0;
  std::optional<std::uint64_t> up;
  std::uint64_t frame = 0;
  for (const auto& bytes : sim::run_script(dev, p)) {
    const auto rep = protocol::decode_report(bytes);
    const auto* ir = std::get_if<protocol::ButtonsIrReport>(&rep);
    if (!ir) continue;
    if (frame >= 10) far_blobs += ir->blobs.size();
    for (const auto& e : trk.step(frame, ir->blobs, h, {}))
      if (e.kind == EventKind::Up) up = e.t;
    ++frame;
  }
  // Entirely beyond range.
  const auto far = sim::build_scene({100, 100, 80, 80, 510, 560});
  sim::PenScript q;
  q.steps = {{0, {0.5, 0.0, true}}, {100, {0.5, 1.0, true}}};
  std::size_t far_scene_blobs = 0;
  for (const auto& bytes : sim::run_script(far, q)) {
    const auto rep = protocol::decode_report(bytes);
    if (const auto* ir = std::get_if<protocol::ButtonsIrReport>(&rep)) far_scene_blobs += ir->blobs.size();
  }
  const bool closed = up && *up >= 10 && *up - 10 <= static_cast<std::uint64_t>(k);
  report(far_blobs == 0 && far_scene_blobs == 0 && closed, "range limit",
         std::to_string(far_blobs + far_scene_blobs) + " blobs beyond 500 cm; open press closed " +
             (up ? std::to_string(*up - 10) + " frames after the pen left range (K = " + std::to_string(k) + ")"
                 : std::string("never")));
}

void tracker_properties() {
  using namespace tracker;
  std::mt19937_64 rng(1008);
  zones::ZoneConfig z;
  z.enabled = true;
  const auto h = geometry::Homography::from_matrix({{{1e-3, 0, 0}, {0, 1e-3, 0}, {0, 0, 1}}});
  std::size_t violations = 0, events_seen = 0, bridged = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    const int k = static_cast<int>(rng() % 5);
    const double alpha = (rng() % 2) ? 1.0 : 0.3;
    TrackerState s;
    s.config = {k, alpha};
    std::vector<PointerEvent> events;
    const int n = 5 + static_cast<int>(rng() % 60);
    int gap = 0;
    for (int f = 0; f < n; ++f) {
      std::vector<protocol::IrBlob> blobs;
      if (rng() % 10 < 6) {
        const int count = 1 + static_cast<int>(rng() % 3);
        for (int i = 0; i < count; ++i) {
          const auto x = static_cast<std::uint16_t>(rng() % 2 ? rng() % 1001 : 1000 + rng() % 23);
          blobs.push_back({x, static_cast<std::uint16_t>(rng() % 1001), 4});
        }
      }
      const bool was_pressed = std::holds_alternative<PressedScreen>(s.phase);
      const auto r = step(s, static_cast<std::uint64_t>(f), blobs, h, z);
      if (blobs.empty()) {
        ++gap;
      } else {
        if (was_pressed && gap > 0) ++bridged;
        gap = 0;
      }
      const bool up = std::any_of(r.events.begin(), r.events.end(), [](const auto& e) { return e.kind == EventKind::Up; });
      // Dropout bridging: Up exactly when a press sees its (K+1)th empty frame.
      if (up != (was_pressed && gap == k + 1)) ++violations;
      if (const auto* p = std::get_if<PressedScreen>(&r.state.phase); p && p->missing_frames > k) ++violations;
      if (const auto* p = std::get_if<SideLatched>(&r.state.phase); p && p->missing_frames > k) ++violations;
      events.insert(events.end(), r.events.begin(), r.events.end());
      s = r.state;
    }
    events_seen += events.size();
    bool pressed = false;
    for (const auto& e : events) {
      if (e.kind == EventKind::Down) {
        violations += pressed;
        pressed = true;
      } else if (e.kind == EventKind::Up) {
        violations += !pressed;
        pressed = false;
      } else if (e.kind == EventKind::Move) {
        violations += !pressed;
      } else {
        violations += pressed;
      }
    }
    for (std::size_t i = 0; i + 1 < events.size(); ++i) {
      if (events[i].kind != EventKind::SideAction) continue;
      // Nothing until the latch is released, and the latch needs K+1 empty frames.
      if (events[i + 1].t <= events[i].t + static_cast<std::uint64_t>(k)) ++violations;
      if (events[i + 1].kind != EventKind::Down && events[i + 1].kind != EventKind::SideAction) ++violations;
    }
  }
  report(violations == 0, "tracker FSM",
         std::to_string(violations) + " violations over 10000 sequences (" + std::to_string(events_seen) +
             " events, " + std::to_string(bridged) + " bridged dropouts)");
}

void headless() {
  const auto dir = std::filesystem::temp_directory_path() / "irboard_acceptance";
  std::filesystem::create_directories(dir);
  service::ServiceOptions o;
  o.config_path = dir / "config.json";
  o.tick_hz = 0;
  bool ok = false;
  std::string detail;
  {
    service::Service svc(o);
    const int port = svc.bind("127.0.0.1", 0);
    std::thread server([&] { svc.serve(); });
    httplib::Client c("127.0.0.1", port);
    httplib::Result state, root, start;
    for (int i = 0; i < 200 && !(state = c.Get("/api/state")); ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    start = c.Post("/api/session/start", "", "application/json");
    root = c.Get("/");
    ok = port > 0 && state && state->status == 200 && start && start->status == 200 && root && root->status == 404;
    detail = "API served on port " + std::to_string(port) + " with no console assets (GET / -> " +
             (root ? std::to_string(root->status) : std::string("no reply")) + ")";
    svc.stop_listening();
    server.join();
  }
  report(ok, "headless", detail);
}

}  // namespace

int main() {
  homography_exactness();
  oracle_equivalence();
  codec();
  end_to_end();
  zone_examples();
  battery_guard();
  range_limit();
  tracker_properties();
  headless();
  std::printf("%s: %d failure(s)\n", g_failures ? "FAILED" : "ALL PASSED", g_failures);
  return g_failures ? 1 : 0;
}
