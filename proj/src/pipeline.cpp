#include "irboard/pipeline.hpp"

#include <thread>

#include "irboard/queue.hpp"

namespace irboard::pipeline {

RunResult run_simulation(const sim::VirtualDevice& dev, const sim::PenScript& script,
                         const config::SessionConfig& cfg, std::ostream* trace_sink) {
  const auto frames = sim::run_script(dev, script);

  session::Session s(cfg);
  s.set_trace_sink(trace_sink);
  RunResult result;
  auto collect = [&result](session::Effects fx) {
    for (auto& e : fx) {
      if (std::holds_alternative<session::BlobFrame>(e)) continue;
      if (std::holds_alternative<session::LowBattery>(e)) ++result.low_battery_warnings;
      if (std::holds_alternative<session::CalibrationComplete>(e)) result.calibrated = true;
      result.effects.push_back(std::move(e));
    }
  };
  collect(s.start(dev.handshake));
  collect(s.start_calibration());

  BlockingQueue<protocol::Bytes> queue(256);
  std::jthread producer([&queue, &frames] {
    for (const auto& f : frames) {
      if (!queue.push(f)) return;
    }
    queue.close();
  });
  try {
    while (auto frame = queue.pop()) {
      collect(s.handle_frame(*frame));
      ++result.reports;
    }
  } catch (...) {
    queue.close();
    throw;
  }
  collect(s.stop());

  result.events = s.trace();
  result.final_phase = s.phase_kind();
  return result;
}

}  // namespace irboard::pipeline
