#include <doctest.h>

#include <filesystem>
#include <sstream>

#include "irboard/session.hpp"

using namespace irboard;
using namespace irboard::session;
using protocol::ButtonsIrReport;
using protocol::IrBlob;
using protocol::StatusReport;

namespace {

ButtonsIrReport ir(std::vector<IrBlob> blobs = {}) { return {0, std::move(blobs)}; }
ButtonsIrReport at(int x, int y) {
  return ir({IrBlob{static_cast<std::uint16_t>(x), static_cast<std::uint16_t>(y), 6}});
}

template <typename T>
std::size_t count(const Effects& fx) {
  std::size_t n = 0;
  for (const auto& e : fx) n += std::holds_alternative<T>(e);
  return n;
}

Effects feed(Session& s, const protocol::DeviceReport& r, int times = 1) {
  Effects all;
  for (int i = 0; i < times; ++i)
    for (auto& e : s.handle_report(r)) all.push_back(e);
  return all;
}

const std::array<std::array<int, 2>, 4> kCorners{{{100, 80}, {900, 80}, {100, 680}, {900, 680}}};

// Drives a fresh session through the corner ritual.
Effects calibrate(Session& s, const std::array<std::array<int, 2>, 4>& corners = kCorners) {
  Effects all;
  for (const auto& c : corners) {
    for (auto& e : feed(s, at(c[0], c[1]), 10)) all.push_back(e);
    for (auto& e : feed(s, ir(), 5)) all.push_back(e);
  }
  return all;
}

Session aligning(config::SessionConfig cfg = {}) {
  Session s(cfg);
  s.start();
  return s;
}

}  // namespace

TEST_CASE("battery guard") {
  Session s = aligning();
  SUBCASE("below the floor warns") {
    StatusReport st;
    st.battery_raw = 98;
    const auto fx = s.handle_report(st);
    CHECK(count<LowBattery>(fx) == 1);
    CHECK(s.battery_percent() == 49.0);
  }
  SUBCASE("exactly 50 percent passes") {
    StatusReport st;
    st.battery_raw = 100;
    CHECK(count<LowBattery>(s.handle_report(st)) == 0);
    CHECK(s.battery_percent() == 50.0);
  }
  SUBCASE("once per downward crossing") {
    auto level = [&](int raw) {
      StatusReport st;
      st.battery_raw = static_cast<std::uint8_t>(raw);
      return count<LowBattery>(s.handle_report(st));
    };
    CHECK(level(120) == 0);
    CHECK(level(99) == 1);
    CHECK(level(98) == 0);
    CHECK(level(90) == 0);
    CHECK(level(100) == 0);  // recharged
    CHECK(level(99) == 1);
  }
}

TEST_CASE("lifecycle guards") {
  Session s;
  CHECK(s.phase_kind() == PhaseKind::Disconnected);
  CHECK_THROWS_AS(s.start_calibration(), SessionError);
  CHECK_THROWS_AS(s.enable_ir(), SessionError);
  auto fx = s.connect();
  CHECK(s.phase_kind() == PhaseKind::Connected);
  fx = s.enable_ir();
  REQUIRE(count<SendCommand>(fx) == 2);
  CHECK(std::get<SendCommand>(fx[0]).command == protocol::DeviceCommand{protocol::IrEnable{true}});
  CHECK(s.phase_kind() == PhaseKind::IrEnabled);
  CHECK_THROWS_AS(s.start_calibration(), SessionError);
  s.begin_alignment();
  CHECK(s.phase_kind() == PhaseKind::Aligning);
  s.stop();
  CHECK(s.phase_kind() == PhaseKind::Stopped);
  CHECK_THROWS_AS(s.handle_report(ir()), SessionError);
}

TEST_CASE("touchpad mode is refused at start") {
  config::SessionConfig cfg;
  cfg.touchpad_mode = true;
  Session s(cfg);
  try {
    s.start();
    FAIL("expected SessionError");
  } catch (const SessionError& e) {
    CHECK(e.code() == SessionErrc::TouchpadMode);
    CHECK(std::string(e.what()).find("touchpad_mode") != std::string::npos);
  }
  CHECK(s.phase_kind() == PhaseKind::Disconnected);
}

TEST_CASE("missing handshake is refused") {
  Session s;
  CHECK_THROWS_AS(s.connect(false), SessionError);
}

TEST_CASE("alignment marks armed corners") {
  config::SessionConfig cfg;
  cfg.alignment_margin = 10;
  Session s = aligning(cfg);
  feed(s, at(100, 100));
  CHECK_FALSE(s.alignment().visible[0]);  // not armed
  s.arm_corner(0);
  feed(s, ir());
  CHECK_FALSE(s.alignment().visible[0]);
  CHECK(count<CornerVisible>(feed(s, at(100, 100))) == 1);
  s.arm_corner(1);
  feed(s, at(1020, 100));  // inside the margin band
  CHECK_FALSE(s.alignment().visible[1]);
  for (int c = 1; c < 4; ++c) {
    s.arm_corner(c);
    feed(s, at(500, 400));
  }
  CHECK(s.alignment().pass);
  CHECK_THROWS_AS(s.arm_corner(4), SessionError);
}

TEST_CASE("four steady corners calibrate") {
  Session s = aligning();
  s.start_calibration();
  const Effects fx = calibrate(s);
  CHECK(count<CornerCaptured>(fx) == 4);
  CHECK(count<CalibrationComplete>(fx) == 1);
  REQUIRE(s.phase_kind() == PhaseKind::Running);
  const auto p = geometry::apply(*s.calibration(), {900, 680});
  CHECK(p.u == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(p.v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("the window restarts when a sample leaves the radius") {
  Session s = aligning();
  s.start_calibration();
  feed(s, at(100, 80), 9);
  feed(s, at(120, 80));  // 20 units away
  auto& cal = std::get<Calibrating>(s.phase());
  CHECK(cal.corner_index == 0);
  CHECK(cal.samples.size() == 1);
  feed(s, at(120, 80), 8);
  CHECK(std::get<Calibrating>(s.phase()).corners.empty());
  const auto fx = feed(s, at(120, 80));
  REQUIRE(count<CornerCaptured>(fx) == 1);
  CHECK(std::get<Calibrating>(s.phase()).corner_index == 1);
}

TEST_CASE("one-unit jitter stays inside the window") {
  Session s = aligning();
  s.start_calibration();
  const int dx[] = {0, 1, -1, 0, 1, 0, -1, 1, 0, 0};
  Effects fx;
  for (int i = 0; i < 10; ++i) fx = feed(s, at(100 + dx[i], 80 - dx[i]));
  REQUIRE(count<CornerCaptured>(fx) == 1);
  const auto& c = std::get<CornerCaptured>(fx[count<BlobFrame>(fx)]);
  CHECK(c.point.x == doctest::Approx(100.1));
  CHECK(c.point.y == doctest::Approx(79.9));
}

TEST_CASE("a gap of G empty frames separates corners") {
  Session s = aligning();
  s.start_calibration();
  feed(s, at(100, 80), 10);
  feed(s, at(900, 80), 20);  // pen never lifted: ignored
  CHECK(std::get<Calibrating>(s.phase()).corner_index == 1);
  CHECK(std::get<Calibrating>(s.phase()).awaiting_gap);
  feed(s, ir(), 4);
  CHECK(std::get<Calibrating>(s.phase()).awaiting_gap);
  feed(s, ir());
  CHECK_FALSE(std::get<Calibrating>(s.phase()).awaiting_gap);
}

TEST_CASE("collinear corners restart calibration") {
  Session s = aligning();
  s.start_calibration();
  const Effects fx = calibrate(s, {{{100, 100}, {300, 100}, {500, 100}, {700, 100}}});
  CHECK(count<CalibrationFailed>(fx) == 1);
  CHECK(count<CalibrationComplete>(fx) == 0);
  REQUIRE(s.phase_kind() == PhaseKind::Calibrating);
  CHECK(std::get<Calibrating>(s.phase()).corner_index == 0);
  CHECK(std::get<Calibrating>(s.phase()).corners.empty());
  // And a proper ritual afterwards still succeeds.
  calibrate(s);
  CHECK(s.phase_kind() == PhaseKind::Running);
}

TEST_CASE("running forwards IR frames to the tracker") {
  Session s = aligning();
  s.start_calibration();
  calibrate(s);
  REQUIRE(s.phase_kind() == PhaseKind::Running);
  const auto fx = feed(s, at(500, 380));
  REQUIRE(count<Pointer>(fx) == 1);
  const auto& e = std::get<Pointer>(fx[1]).event;
  CHECK(e.kind == tracker::EventKind::Down);
  CHECK(e.u == doctest::Approx(0.5));
  CHECK(e.v == doctest::Approx(0.5));
  CHECK(s.trace().size() == 1);
}

TEST_CASE("a pen still held on the last corner does not press") {
  Session s = aligning();
  s.start_calibration();
  for (int i = 0; i < 3; ++i) {
    feed(s, at(kCorners[i][0], kCorners[i][1]), 10);
    feed(s, ir(), 5);
  }
  feed(s, at(900, 680), 15);
  REQUIRE(s.phase_kind() == PhaseKind::Running);
  CHECK(s.trace().empty());
  feed(s, ir());
  feed(s, at(500, 380));
  CHECK(s.trace().size() == 1);
}

TEST_CASE("recalibration from running closes the press, abort restores the map") {
  Session s = aligning();
  s.start_calibration();
  calibrate(s);
  const auto h = *s.calibration();
  feed(s, at(500, 380));
  const auto fx = s.start_calibration();
  CHECK(count<Pointer>(fx) == 1);
  CHECK(s.trace().back().kind == tracker::EventKind::Up);
  CHECK(s.phase_kind() == PhaseKind::Calibrating);
  s.abort_calibration();
  REQUIRE(s.phase_kind() == PhaseKind::Running);
  CHECK(*s.calibration() == h);

  Session fresh = aligning();
  fresh.start_calibration();
  fresh.abort_calibration();
  CHECK(fresh.phase_kind() == PhaseKind::Aligning);
}

TEST_CASE("stop flushes the trace and saves on exit") {
  const auto path = std::filesystem::temp_directory_path() / "irboard_session_save.json";
  std::filesystem::remove(path);
  config::SessionConfig cfg;
  cfg.save_on_exit = true;
  Session s(cfg);
  s.set_config_path(path);
  std::ostringstream sink;
  s.set_trace_sink(&sink);
  s.start();
  s.start_calibration();
  calibrate(s);
  feed(s, at(500, 380));
  zones::ZoneConfig z;
  z.enabled = true;
  s.set_zone_config(z);
  s.stop();
  CHECK(sink.str().find("\"kind\":\"up\"") != std::string::npos);
  REQUIRE(std::filesystem::exists(path));
  CHECK(config::load_config(path).zone_config.enabled);

  config::SessionConfig no_save;
  Session t(no_save);
  t.set_config_path(path.string() + ".never");
  t.stop();
  CHECK_FALSE(std::filesystem::exists(path.string() + ".never"));
}

TEST_CASE("invalid zone configs are refused") {
  Session s;
  zones::ZoneConfig z;
  z.band_width = 0.5;
  CHECK_THROWS_AS(s.set_zone_config(z), SessionError);
}

TEST_CASE("decoder errors surface from handle_frame") {
  Session s = aligning();
  const protocol::Bytes junk{0xA1, 0x99, 0x00};
  CHECK_THROWS_AS(s.handle_frame(junk), protocol::ProtocolError);
}
