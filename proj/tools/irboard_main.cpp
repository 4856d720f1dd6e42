// irboard: simulate | serve | replay | calibrate-check

#include <CLI11.hpp>

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include "irboard/config.hpp"
#include "irboard/geometry.hpp"
#include "irboard/pipeline.hpp"
#include "irboard/service.hpp"
#include "irboard/simulator.hpp"
#include "irboard/trace.hpp"

namespace {

using namespace irboard;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitScript = 3;

struct Options {
  std::string scene;
  std::string script;
  std::string config = config::kDefaultConfigPath;
  std::string out;
  std::string trace;
  std::string static_dir;
  std::string host = "127.0.0.1";
  int port = service::kDefaultPort;
  std::optional<std::uint64_t> seed;
  std::optional<double> sigma;
  double rate = sim::kReportRateHz;
};

sim::SceneGeometry resolve_scene(const std::string& arg) {
  if (arg == "A" || arg == "B" || arg == "C") return sim::named_scene(arg);
  std::ifstream in(arg);
  if (!in) throw sim::SimError(sim::SimErrc::UnknownScene, "scene '" + arg + "' is neither A, B, C nor a readable file");
  return sim::scene_from_json(nlohmann::json::parse(in));
}

// Exit code 2 on config trouble, including a touchpad-mode config.
std::optional<config::SessionConfig> load_config_or_report(const std::string& path) {
  try {
    auto cfg = config::load_config(path);
    if (cfg.touchpad_mode) {
      std::cerr << "error: " << path << ": touchpad_mode must be false for absolute pen mapping\n";
      return std::nullopt;
    }
    return cfg;
  } catch (const config::ConfigParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return std::nullopt;
  }
}

int cmd_simulate(const Options& o) {
  const auto cfg = load_config_or_report(o.config);
  if (!cfg) return kExitConfig;

  sim::PenScript script;
  sim::VirtualDevice dev;
  try {
    script = sim::load_script(o.script);
    if (o.seed) script.seed = *o.seed;
    if (o.sigma) script.sigma = *o.sigma;
    if (script.calibration_prologue) script = sim::with_calibration_prologue(script, cfg->calibration);
    sim::SceneGeometry scene;
    if (!o.scene.empty()) {
      scene = resolve_scene(o.scene);
    } else if (script.scene) {
      scene = *script.scene;
    } else {
      std::cerr << "error: no scene given (use --scene or a \"scene\" field in the script)\n";
      return kExitScript;
    }
    dev = sim::build_scene(scene);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitScript;
  }

  std::ofstream out;
  std::ostream* sink = &std::cout;
  if (!o.out.empty()) {
    out.open(o.out, std::ios::trunc);
    if (!out) {
      std::cerr << "error: cannot write " << o.out << '\n';
      return kExitFailure;
    }
    sink = &out;
  }
  const auto result = pipeline::run_simulation(dev, script, *cfg, sink);
  if (!result.calibrated) {
    std::cerr << "error: the script never completed the four-corner calibration\n";
    return kExitScript;
  }
  std::cerr << "events: " << result.events.size() << ", low-battery warnings: " << result.low_battery_warnings << '\n';
  return kExitOk;
}

int cmd_replay(const Options& o) {
  std::ifstream in(o.trace);
  if (!in) {
    std::cerr << "error: cannot read " << o.trace << '\n';
    return kExitScript;
  }
  try {
    trace::print_summary(std::cout, trace::summarize(trace::read_trace(in)));
  } catch (const trace::TraceParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitScript;
  }
  return kExitOk;
}

// Runs only the corner ritual on a scene and reports how well the solved
// map agrees with the simulator's ground truth.
int cmd_calibrate_check(const Options& o) {
  const auto cfg = load_config_or_report(o.config);
  if (!cfg) return kExitConfig;
  sim::VirtualDevice dev;
  try {
    dev = sim::build_scene(resolve_scene(o.scene.empty() ? "A" : o.scene));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitScript;
  }
  sim::PenScript script;
  script.sigma = o.sigma.value_or(0.0);
  script.seed = o.seed.value_or(0);
  script = sim::with_calibration_prologue(script, cfg->calibration);
  script.steps.push_back({script.calibration_frames + 1, {}});

  session::Session s(*cfg);
  s.start(dev.handshake);
  s.start_calibration();
  for (const auto& f : sim::run_script(dev, script)) s.handle_frame(f);
  const auto h = s.calibration();
  if (!h) {
    std::cout << "calibration: incomplete\n";
    return kExitFailure;
  }
  std::cout << "calibration: complete\n";
  for (const auto& row : h->matrix()) std::printf("  [% .9e % .9e % .9e]\n", row[0], row[1], row[2]);
  double worst = 0.0;
  for (int i = 0; i <= 10; ++i) {
    for (int j = 0; j <= 10; ++j) {
      const geometry::Vec2 st{i / 10.0, j / 10.0};
      const geometry::Vec2 cam = sim::surface_to_camera(dev, st);
      const auto p = geometry::apply(*h, {cam.x, cam.y});
      worst = std::max({worst, std::abs(p.u - st.x), std::abs(p.v - st.y)});
    }
  }
  std::printf("max error over 11x11 surface grid: %.3e normalized units (%.2f px at %dx%d)\n", worst,
              worst * cfg->screen_resolution.width, cfg->screen_resolution.width, cfg->screen_resolution.height);
  return kExitOk;
}

std::atomic<service::Service*> g_service{nullptr};

extern "C" void on_signal(int) {
  if (auto* s = g_service.load()) s->stop_listening();
}

int cmd_serve(const Options& o) {
  service::ServiceOptions so;
  so.config_path = o.config;
  so.seed = o.seed.value_or(0);
  so.sigma = o.sigma.value_or(0.0);
  so.tick_hz = o.rate;
  try {
    so.scene = resolve_scene(o.scene.empty() ? "A" : o.scene);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitScript;
  }
  std::unique_ptr<service::Service> svc;
  try {
    svc = std::make_unique<service::Service>(so);
  } catch (const config::ConfigParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  const int port = svc->bind(o.host, o.port, o.static_dir);
  if (port < 0) {
    std::cerr << "error: cannot bind " << o.host << ':' << o.port << '\n';
    return kExitFailure;
  }
  std::cerr << "serving on http://" << o.host << ':' << port << '\n';
  g_service = svc.get();
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  svc->serve();
  g_service = nullptr;
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"IR pen whiteboard engine"};
  app.require_subcommand(1);
  Options o;

  auto* simulate = app.add_subcommand("simulate", "Run a pen script through the engine headless");
  simulate->add_option("--scene", o.scene, "A, B, C or a scene JSON file (overrides the script's scene)");
  simulate->add_option("--script", o.script, "Pen script JSON")->required();
  simulate->add_option("--config", o.config, "Session config JSON");
  simulate->add_option("--out", o.out, "Event trace output (stdout when omitted)");
  simulate->add_option("--seed", o.seed, "Noise seed (overrides the script)");
  simulate->add_option("--sigma", o.sigma, "Noise sigma in camera units (overrides the script)");

  auto* serve = app.add_subcommand("serve", "Serve the HTTP control API with a virtual device");
  serve->add_option("--port", o.port, "Listen port")->capture_default_str();
  serve->add_option("--host", o.host, "Listen address")->capture_default_str();
  serve->add_option("--config", o.config, "Session config JSON")->capture_default_str();
  serve->add_option("--scene", o.scene, "A, B, C or a scene JSON file");
  serve->add_option("--seed", o.seed, "Noise seed");
  serve->add_option("--sigma", o.sigma, "Noise sigma in camera units");
  serve->add_option("--rate", o.rate, "Device frames per second; 0 advances only on pen commands")->capture_default_str();
  serve->add_option("--static-dir", o.static_dir, "Directory served at /");

  auto* replay = app.add_subcommand("replay", "Summarize an event trace");
  replay->add_option("trace", o.trace, "Event trace (JSON lines)")->required();

  auto* check = app.add_subcommand("calibrate-check", "Calibrate against a scene and report the residual error");
  check->add_option("--scene", o.scene, "A, B, C or a scene JSON file");
  check->add_option("--config", o.config, "Session config JSON");
  check->add_option("--seed", o.seed, "Noise seed");
  check->add_option("--sigma", o.sigma, "Noise sigma in camera units");

  CLI11_PARSE(app, argc, argv);

  if (*simulate) return cmd_simulate(o);
  if (*serve) return cmd_serve(o);
  if (*replay) return cmd_replay(o);
  return cmd_calibrate_check(o);
}
