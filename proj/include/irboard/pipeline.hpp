#pragma once

// Headless simulator -> codec -> session run.

#include <iosfwd>
#include <vector>

#include "irboard/config.hpp"
#include "irboard/session.hpp"
#include "irboard/simulator.hpp"

namespace irboard::pipeline {

struct RunResult {
  std::vector<tracker::PointerEvent> events;
  std::vector<session::Effect> effects;  // everything except BlobFrame
  session::PhaseKind final_phase = session::PhaseKind::Disconnected;
  bool calibrated = false;
  std::size_t low_battery_warnings = 0;
  std::size_t reports = 0;  // decoded device reports, status included
};

/// Starts a session, begins calibration and feeds it the script's frames
/// from a producer thread through a bounded queue; stops the session at the
/// end. `script` is used as given (expand a prologue beforehand).
RunResult run_simulation(const sim::VirtualDevice& dev, const sim::PenScript& script,
                         const config::SessionConfig& cfg, std::ostream* trace_sink = nullptr);

}  // namespace irboard::pipeline
