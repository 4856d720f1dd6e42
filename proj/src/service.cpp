#include "irboard/service.hpp"

#include <httplib.h>

#include <chrono>

#include "irboard/trace.hpp"

namespace irboard::service {

using nlohmann::json;

namespace {

json blob_json(const protocol::IrBlob& b) { return {{"x", b.x}, {"y", b.y}, {"size", b.size}}; }

json matrix_json(const geometry::Homography& h) {
  json rows = json::array();
  for (const auto& r : h.matrix()) rows.push_back(json::array({r[0], r[1], r[2]}));
  return rows;
}

[[noreturn]] void rethrow_as_api_error() {
  try {
    throw;
  } catch (const ApiError&) {
    throw;
  } catch (const session::SessionError& e) {
    throw ApiError(e.code() == session::SessionErrc::InvalidArgument ? 422 : 409, e.what());
  } catch (const config::ConfigParseError& e) {
    throw ApiError(422, e.what());
  } catch (const json::exception& e) {
    throw ApiError(422, e.what());
  }
}

void push_bounded(std::vector<json>& v, json item, std::size_t cap) {
  v.push_back(std::move(item));
  if (v.size() > cap) v.erase(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() - cap));
}

}  // namespace

json effect_to_record(const session::Effect& effect) {
  return std::visit(
      [](const auto& e) -> json {
        using T = std::decay_t<decltype(e)>;
        if constexpr (std::is_same_v<T, session::Pointer>) {
          return trace::to_json(e.event);
        } else if constexpr (std::is_same_v<T, session::LowBattery>) {
          return {{"kind", "warning"}, {"warning", "low_battery"}, {"battery_percent", e.percent}};
        } else if constexpr (std::is_same_v<T, session::BatteryLevel>) {
          return {{"kind", "battery"}, {"battery_percent", e.percent}};
        } else if constexpr (std::is_same_v<T, session::CornerVisible>) {
          return {{"kind", "corner_visible"}, {"corner", e.corner}};
        } else if constexpr (std::is_same_v<T, session::CornerCaptured>) {
          return {{"kind", "corner_captured"}, {"corner", e.corner}, {"x", e.point.x}, {"y", e.point.y}};
        } else if constexpr (std::is_same_v<T, session::CalibrationComplete>) {
          return {{"kind", "calibration_complete"}, {"message", "Calibration complete!"}, {"matrix", matrix_json(e.h)}};
        } else if constexpr (std::is_same_v<T, session::CalibrationFailed>) {
          return {{"kind", "calibration_failed"}, {"reason", e.reason}};
        } else if constexpr (std::is_same_v<T, session::BlobFrame>) {
          json blobs = json::array();
          for (const auto& b : e.blobs) blobs.push_back(blob_json(b));
          return {{"kind", "blobs"}, {"t", e.frame}, {"blobs", blobs}};
        } else if constexpr (std::is_same_v<T, session::SendCommand>) {
          return {{"kind", "command"}, {"bytes", protocol::to_hex(protocol::encode_command(e.command))}};
        } else {
          return {{"kind", "state"},
                  {"from", std::string(session::to_string(e.from))},
                  {"phase", std::string(session::to_string(e.to))}};
        }
      },
      effect);
}

Service::Service(ServiceOptions options) : options_(std::move(options)) {
  config_ = config::load_config(options_.config_path);
  sim::VirtualDevice dev = sim::build_scene(options_.scene);
  if (options_.battery_raw) dev.initial_battery_raw = *options_.battery_raw;
  sim_ = std::make_unique<sim::Simulator>(dev, options_.sigma, options_.seed);
  ensure_session();
  refresh_snapshot();
  loop_thread_ = std::jthread([this] { loop(); });
}

Service::~Service() {
  stop_listening();
  // Closing the console ends the session like pressing Stop.
  try {
    run([this] {
      if (session_->phase_kind() != session::PhaseKind::Stopped) publish(session_->stop());
    });
  } catch (...) {
  }
  stopping_ = true;
  jobs_.close();
  if (loop_thread_.joinable()) loop_thread_.join();
  std::lock_guard lock(subs_mu_);
  for (auto& w : subs_)
    if (auto s = w.lock()) s->lines_.close();
}

void Service::ensure_session() {
  session_ = std::make_unique<session::Session>(config_);
  session_->set_config_path(options_.config_path);
}

json Service::run(Command cmd) {
  auto job = std::make_shared<Job>();
  job->cmd = std::move(cmd);
  auto done = job->done.get_future();
  if (!jobs_.push(job)) throw ApiError(503, "service is shutting down");
  done.get();
  return snapshot();
}

void Service::loop() {
  using clock = std::chrono::steady_clock;
  const bool free_running = options_.tick_hz > 0.0;
  const auto period = free_running ? std::chrono::duration_cast<clock::duration>(
                                         std::chrono::duration<double>(1.0 / options_.tick_hz))
                                   : clock::duration::zero();
  auto next_tick = clock::now() + period;
  while (true) {
    std::optional<std::shared_ptr<Job>> job;
    if (free_running) {
      const auto now = clock::now();
      job = jobs_.pop_for(next_tick > now ? next_tick - now : clock::duration::zero());
    } else {
      job = jobs_.pop();
    }
    if (job) {
      try {
        (*job)->cmd();
        refresh_snapshot();
        (*job)->done.set_value();
      } catch (...) {
        refresh_snapshot();
        (*job)->done.set_exception(std::current_exception());
      }
      continue;
    }
    if (jobs_.closed()) return;
    if (free_running && clock::now() >= next_tick) {
      try {
        tick_once();
      } catch (const std::exception&) {
        // A malformed frame is dropped; the loop keeps running.
      }
      refresh_snapshot();
      next_tick += period;
      if (next_tick < clock::now()) next_tick = clock::now() + period;
    }
  }
}

void Service::tick_once() {
  const auto frames = sim_->tick(pen_);
  const auto phase = session_->phase_kind();
  if (phase == session::PhaseKind::Disconnected || phase == session::PhaseKind::Stopped) return;
  for (const auto& f : frames) publish(session_->handle_frame(f));
}

void Service::publish(const session::Effects& fx) {
  std::vector<std::string> lines;
  lines.reserve(fx.size());
  for (const auto& e : fx) {
    json rec = effect_to_record(e);
    if (std::holds_alternative<session::BlobFrame>(e)) {
      push_bounded(recent_blobs_, rec, options_.history);
    } else if (std::holds_alternative<session::Pointer>(e)) {
      push_bounded(recent_events_, rec, options_.history);
    }
    lines.push_back(rec.dump());
  }
  std::lock_guard lock(subs_mu_);
  std::erase_if(subs_, [](const std::weak_ptr<Subscription>& w) { return w.expired(); });
  for (auto& w : subs_) {
    if (auto s = w.lock()) {
      // A reader that falls this far behind loses records rather than
      // stalling the session loop.
      for (const auto& l : lines) s->lines_.try_push(l);
    }
  }
}

void Service::refresh_snapshot() {
  const session::Session& s = *session_;
  json snap;
  snap["phase"] = std::string(session::to_string(s.phase_kind()));
  snap["battery_percent"] = s.battery_percent() ? json(*s.battery_percent()) : json(nullptr);
  snap["low_battery"] = s.low_battery();
  snap["frame"] = s.frames_seen();

  json alignment;
  const auto report = s.alignment();
  alignment["visible"] = report.visible;
  alignment["pass"] = report.pass;
  const auto* aligning = std::get_if<session::Aligning>(&s.phase());
  alignment["armed"] = aligning && aligning->armed ? json(*aligning->armed) : json(nullptr);
  snap["alignment"] = alignment;

  json cal;
  cal["samples_per_corner"] = s.config().calibration.samples_per_corner;
  if (const auto* c = std::get_if<session::Calibrating>(&s.phase())) {
    cal["corner_index"] = c->corner_index;
    cal["samples"] = c->samples.size();
    json corners = json::array();
    for (const auto& p : c->corners) corners.push_back(json::array({p.x, p.y}));
    cal["corners"] = corners;
  } else {
    cal["corner_index"] = nullptr;
    cal["samples"] = 0;
    cal["corners"] = json::array();
  }
  const auto h = s.calibration();
  cal["matrix"] = h ? matrix_json(*h) : json(nullptr);
  snap["calibration"] = cal;

  snap["zone_config"] = config::to_json(s.config().zone_config);
  snap["save_on_exit"] = s.config().save_on_exit;
  snap["pen"] = {{"s", pen_.s}, {"t", pen_.t}, {"pressed", pen_.pressed}};
  snap["blobs"] = recent_blobs_;
  snap["events"] = recent_events_;

  std::lock_guard lock(snapshot_mu_);
  snapshot_ = std::move(snap);
}

json Service::snapshot() const {
  std::lock_guard lock(snapshot_mu_);
  return snapshot_;
}

std::shared_ptr<Subscription> Service::subscribe() {
  auto sub = std::make_shared<Subscription>();
  std::lock_guard lock(subs_mu_);
  subs_.push_back(sub);
  return sub;
}

json Service::start_session() {
  return run([this] {
    try {
      if (session_->phase_kind() == session::PhaseKind::Stopped) ensure_session();
      const auto fx = session_->start(sim_->device().handshake);
      publish(fx);
      for (const auto& e : fx) {
        const auto* cmd = std::get_if<session::SendCommand>(&e);
        if (cmd && std::holds_alternative<protocol::StatusRequest>(cmd->command)) {
          publish(session_->handle_frame(sim_->status_report()));
        }
      }
    } catch (...) {
      rethrow_as_api_error();
    }
  });
}

json Service::stop_session() {
  return run([this] {
    publish(session_->stop());
    config_ = session_->config();
  });
}

json Service::arm_corner(int corner) {
  return run([this, corner] {
    try {
      publish(session_->arm_corner(corner));
    } catch (...) {
      rethrow_as_api_error();
    }
  });
}

json Service::start_calibration() {
  return run([this] {
    try {
      publish(session_->start_calibration());
    } catch (...) {
      rethrow_as_api_error();
    }
  });
}

json Service::abort_calibration() {
  return run([this] {
    try {
      publish(session_->abort_calibration());
    } catch (...) {
      rethrow_as_api_error();
    }
  });
}

json Service::put_zones(const json& body) {
  zones::ZoneConfig zones;
  try {
    zones = config::zones_from_json(body);
  } catch (...) {
    rethrow_as_api_error();
  }
  return run([this, zones] {
    try {
      session_->set_zone_config(zones);
      config_.zone_config = zones;
    } catch (...) {
      rethrow_as_api_error();
    }
  });
}

json Service::set_pen(const sim::PenState& pen, std::optional<int> frames) {
  if (!std::isfinite(pen.s) || !std::isfinite(pen.t)) throw ApiError(422, "s and t must be finite");
  const int n = frames.value_or(options_.tick_hz > 0.0 ? 0 : 1);
  if (n < 0 || n > 100000) throw ApiError(422, "frames must lie in 0..100000");
  return run([this, pen, n] {
    pen_ = pen;
    for (int i = 0; i < n; ++i) tick_once();
  });
}

void Service::mount(httplib::Server& server) {
  auto reply = [](httplib::Response& res, const std::function<json()>& fn) {
    try {
      res.set_content(fn().dump(), "application/json");
    } catch (const ApiError& e) {
      res.status = e.status();
      res.set_content(json{{"error", e.what()}}.dump(), "application/json");
    }
  };
  auto body_of = [](const httplib::Request& req) {
    try {
      return req.body.empty() ? json::object() : json::parse(req.body);
    } catch (const json::parse_error& e) {
      throw ApiError(422, std::string("malformed JSON body: ") + e.what());
    }
  };

  server.Get("/api/state", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, [this] { return snapshot(); });
  });
  server.Post("/api/session/start", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, [this] { return start_session(); });
  });
  server.Post("/api/session/stop", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, [this] { return stop_session(); });
  });
  server.Post("/api/alignment/arm", [this, reply, body_of](const httplib::Request& req, httplib::Response& res) {
    reply(res, [&] {
      const json body = body_of(req);
      if (!body.contains("corner") || !body["corner"].is_number_integer()) throw ApiError(422, "corner must be an integer");
      return arm_corner(body["corner"].get<int>());
    });
  });
  server.Post("/api/calibration/start", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, [this] { return start_calibration(); });
  });
  server.Post("/api/calibration/abort", [this, reply](const httplib::Request&, httplib::Response& res) {
    reply(res, [this] { return abort_calibration(); });
  });
  server.Put("/api/zones", [this, reply, body_of](const httplib::Request& req, httplib::Response& res) {
    reply(res, [&] { return put_zones(body_of(req)); });
  });
  server.Post("/api/sim/pen", [this, reply, body_of](const httplib::Request& req, httplib::Response& res) {
    reply(res, [&] {
      const json body = body_of(req);
      sim::PenState pen;
      try {
        pen.s = body.at("s").get<double>();
        pen.t = body.at("t").get<double>();
        pen.pressed = body.at("pressed").get<bool>();
      } catch (const json::exception&) {
        throw ApiError(422, "pen body needs numeric s, t and boolean pressed");
      }
      std::optional<int> frames;
      if (body.contains("frames")) {
        if (!body["frames"].is_number_integer()) throw ApiError(422, "frames must be an integer");
        frames = body["frames"].get<int>();
      }
      return set_pen(pen, frames);
    });
  });
  server.Get("/api/events", [this](const httplib::Request&, httplib::Response& res) {
    auto sub = subscribe();
    auto greeting = std::make_shared<std::string>(json{{"kind", "snapshot"}, {"state", snapshot()}}.dump() + "\n");
    res.set_chunked_content_provider("application/x-ndjson", [sub, greeting](std::size_t, httplib::DataSink& sink) {
      if (!greeting->empty()) {
        const bool ok = sink.write(greeting->data(), greeting->size());
        greeting->clear();
        return ok;
      }
      auto line = sub->next(std::chrono::milliseconds(100));
      if (line) {
        *line += '\n';
        return sink.write(line->data(), line->size());
      }
      if (sub->closed()) {
        sink.done();
        return true;
      }
      return sink.is_writable();
    });
  });
}

int Service::bind(const std::string& host, int port, const std::string& static_dir) {
  server_ = std::make_unique<httplib::Server>();
  mount(*server_);
  if (!static_dir.empty()) server_->set_mount_point("/", static_dir);
  if (port == 0) return server_->bind_to_any_port(host);
  return server_->bind_to_port(host, port) ? port : -1;
}

bool Service::serve() { return server_ && server_->listen_after_bind(); }

void Service::stop_listening() {
  if (server_) server_->stop();
}

}  // namespace irboard::service
