#pragma once

// Event trace: one JSON record per line,
//   {"t":12,"kind":"down","u":0.25,"v":0.75,"action":null}
//   {"t":40,"kind":"side","u":null,"v":null,"action":"right_click"}

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "irboard/tracker.hpp"

namespace irboard::trace {

class TraceParseError : public std::runtime_error {
 public:
  TraceParseError(int line, const std::string& message);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

nlohmann::json to_json(const tracker::PointerEvent& e);
tracker::PointerEvent event_from_json(const nlohmann::json& j);

std::string to_line(const tracker::PointerEvent& e);

void write_trace(std::ostream& out, const std::vector<tracker::PointerEvent>& events);
std::vector<tracker::PointerEvent> read_trace(std::istream& in);

struct StrokeSummary {
  std::uint64_t first_frame = 0;
  std::uint64_t last_frame = 0;
  double min_u = 0, max_u = 0, min_v = 0, max_v = 0;
};

struct TraceSummary {
  std::size_t events = 0;
  std::size_t downs = 0;
  std::size_t moves = 0;
  std::size_t ups = 0;
  std::size_t side_actions = 0;
  std::vector<StrokeSummary> strokes;  // one per Down..Up run
};

TraceSummary summarize(const std::vector<tracker::PointerEvent>& events);
void print_summary(std::ostream& out, const TraceSummary& s);

}  // namespace irboard::trace
