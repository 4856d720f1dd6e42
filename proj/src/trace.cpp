#include "irboard/trace.hpp"

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>

namespace irboard::trace {

using nlohmann::json;
using tracker::EventKind;
using tracker::PointerEvent;

TraceParseError::TraceParseError(int line, const std::string& message)
    : std::runtime_error("trace line " + std::to_string(line) + ": " + message), line_(line) {}

json to_json(const PointerEvent& e) {
  json j;
  j["t"] = e.t;
  j["kind"] = std::string(tracker::to_string(e.kind));
  if (e.kind == EventKind::SideAction) {
    j["u"] = nullptr;
    j["v"] = nullptr;
    j["action"] = std::string(zones::to_string(e.action));
  } else {
    j["u"] = e.u;
    j["v"] = e.v;
    j["action"] = nullptr;
  }
  return j;
}

PointerEvent event_from_json(const json& j) {
  if (!j.is_object()) throw std::invalid_argument("record is not an object");
  for (const auto& [key, _] : j.items()) {
    if (key != "t" && key != "kind" && key != "u" && key != "v" && key != "action") {
      throw std::invalid_argument("unknown field " + key);
    }
  }
  PointerEvent e;
  if (!j.contains("t") || !j["t"].is_number_unsigned()) throw std::invalid_argument("t must be a non-negative integer");
  e.t = j["t"].get<std::uint64_t>();
  const auto kind = j.contains("kind") && j["kind"].is_string() ? tracker::parse_kind(j["kind"].get<std::string>())
                                                                 : std::nullopt;
  if (!kind) throw std::invalid_argument("kind must be one of down, move, up, side");
  e.kind = *kind;
  if (e.kind == EventKind::SideAction) {
    const auto action = j.contains("action") && j["action"].is_string()
                            ? zones::parse_action(j["action"].get<std::string>())
                            : std::nullopt;
    if (!action) throw std::invalid_argument("side record needs a zone action");
    e.action = *action;
  } else {
    if (!j.contains("u") || !j["u"].is_number() || !j.contains("v") || !j["v"].is_number()) {
      throw std::invalid_argument("pointer record needs numeric u and v");
    }
    e.u = j["u"].get<double>();
    e.v = j["v"].get<double>();
  }
  return e;
}

std::string to_line(const PointerEvent& e) { return to_json(e).dump(); }

void write_trace(std::ostream& out, const std::vector<PointerEvent>& events) {
  for (const auto& e : events) out << to_line(e) << '\n';
}

std::vector<PointerEvent> read_trace(std::istream& in) {
  std::vector<PointerEvent> events;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(event_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw TraceParseError(lineno, e.what());
    } catch (const std::invalid_argument& e) {
      throw TraceParseError(lineno, e.what());
    }
  }
  return events;
}

TraceSummary summarize(const std::vector<PointerEvent>& events) {
  TraceSummary s;
  s.events = events.size();
  bool open = false;
  StrokeSummary cur;
  auto extend = [&cur](const PointerEvent& e) {
    cur.last_frame = e.t;
    cur.min_u = std::min(cur.min_u, e.u);
    cur.max_u = std::max(cur.max_u, e.u);
    cur.min_v = std::min(cur.min_v, e.v);
    cur.max_v = std::max(cur.max_v, e.v);
  };
  for (const auto& e : events) {
    switch (e.kind) {
      case EventKind::Down:
        ++s.downs;
        cur = {e.t, e.t, e.u, e.u, e.v, e.v};
        open = true;
        break;
      case EventKind::Move:
        ++s.moves;
        if (open) extend(e);
        break;
      case EventKind::Up:
        ++s.ups;
        if (open) {
          extend(e);
          s.strokes.push_back(cur);
          open = false;
        }
        break;
      case EventKind::SideAction:
        ++s.side_actions;
        break;
    }
  }
  return s;
}

void print_summary(std::ostream& out, const TraceSummary& s) {
  out << "events: " << s.events << '\n'
      << "down: " << s.downs << '\n'
      << "move: " << s.moves << '\n'
      << "up: " << s.ups << '\n'
      << "side: " << s.side_actions << '\n'
      << "strokes: " << s.strokes.size() << '\n';
  char buf[160];
  for (std::size_t i = 0; i < s.strokes.size(); ++i) {
    const auto& k = s.strokes[i];
    std::snprintf(buf, sizeof buf, "stroke %zu: frames %llu-%llu u=[%.4f, %.4f] v=[%.4f, %.4f]\n", i + 1,
                  static_cast<unsigned long long>(k.first_frame), static_cast<unsigned long long>(k.last_frame),
                  k.min_u, k.max_u, k.min_v, k.max_v);
    out << buf;
  }
}

}  // namespace irboard::trace
