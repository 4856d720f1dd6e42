#pragma once

// Control service: owns one session plus the virtual device and exposes
// them over HTTP.
//
//   GET  /api/state                 snapshot
//   POST /api/session/start         connect, enable IR, begin alignment
//   POST /api/session/stop
//   POST /api/alignment/arm         {"corner": 0..3}
//   POST /api/calibration/start
//   POST /api/calibration/abort
//   PUT  /api/zones                 zone config document
//   POST /api/sim/pen               {"s","t","pressed","frames"?}
//   GET  /api/events                line-delimited record stream
//
// Illegal phase -> 409, invalid body -> 422. Handlers never touch the
// session: commands run on the service's loop thread, readers see the last
// published snapshot.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "irboard/config.hpp"
#include "irboard/queue.hpp"
#include "irboard/session.hpp"
#include "irboard/simulator.hpp"

namespace httplib {
class Server;
}

namespace irboard::service {

inline constexpr int kDefaultPort = 8037;

struct ServiceOptions {
  std::filesystem::path config_path = config::kDefaultConfigPath;
  sim::SceneGeometry scene = sim::named_scene("A");
  double sigma = 0.0;
  std::uint64_t seed = 0;
  std::optional<int> battery_raw;
  // Device frames per second while running freely; 0 means frames are only
  // produced by /api/sim/pen.
  double tick_hz = sim::kReportRateHz;
  std::size_t history = 32;
};

class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const noexcept { return status_; }

 private:
  int status_;
};

/// Records pushed on the event channel. Pointer events use the trace schema.
nlohmann::json effect_to_record(const session::Effect& effect);

class Subscription {
 public:
  std::optional<std::string> next(std::chrono::milliseconds timeout) { return lines_.pop_for(timeout); }
  bool closed() const { return lines_.closed(); }

 private:
  friend class Service;
  BlockingQueue<std::string> lines_{1 << 16};
};

class Service {
 public:
  /// Loads the config from options.config_path (defaults when missing).
  explicit Service(ServiceOptions options);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Commands; each returns the snapshot published after it ran. Throw ApiError.
  nlohmann::json start_session();
  nlohmann::json stop_session();
  nlohmann::json arm_corner(int corner);
  nlohmann::json start_calibration();
  nlohmann::json abort_calibration();
  nlohmann::json put_zones(const nlohmann::json& body);
  nlohmann::json set_pen(const sim::PenState& pen, std::optional<int> frames);

  nlohmann::json snapshot() const;
  std::shared_ptr<Subscription> subscribe();

  /// Installs the HTTP routes on `server`.
  void mount(httplib::Server& server);

  /// Binds the HTTP listener (port 0 picks a free port) and returns the
  /// bound port, or -1. `static_dir`, when given, is served at /.
  int bind(const std::string& host, int port, const std::string& static_dir = {});
  /// Blocks serving until stop_listening().
  bool serve();
  void stop_listening();

 private:
  using Command = std::function<void()>;

  nlohmann::json run(Command cmd);
  void loop();
  void tick_once();
  void publish(const session::Effects& fx);
  void refresh_snapshot();
  void ensure_session();

  ServiceOptions options_;

  // Loop-thread state.
  config::SessionConfig config_;
  std::unique_ptr<session::Session> session_;
  std::unique_ptr<sim::Simulator> sim_;
  sim::PenState pen_;
  std::vector<nlohmann::json> recent_blobs_;
  std::vector<nlohmann::json> recent_events_;

  mutable std::mutex snapshot_mu_;
  nlohmann::json snapshot_;

  std::mutex subs_mu_;
  std::vector<std::weak_ptr<Subscription>> subs_;

  struct Job {
    Command cmd;
    std::promise<void> done;
  };
  BlockingQueue<std::shared_ptr<Job>> jobs_{256};
  std::atomic<bool> stopping_{false};
  std::unique_ptr<httplib::Server> server_;
  std::jthread loop_thread_;
};

}  // namespace irboard::service
