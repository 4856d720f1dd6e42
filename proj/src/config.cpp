#include "irboard/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace irboard::config {

using nlohmann::json;

namespace {

class FieldReader {
 public:
  FieldReader(const json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    if (!obj_.is_object()) fail(path_.empty() ? "<root>" : path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& field, const std::string& message) {
    throw ConfigParseError("config", 0, field, message);
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const json* find(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  void read(const std::string& key, bool& out) {
    if (const json* v = find(key)) {
      if (!v->is_boolean()) fail(field(key), "expected a boolean");
      out = v->get<bool>();
    }
  }
  void read(const std::string& key, int& out) {
    if (const json* v = find(key)) {
      if (!v->is_number_integer()) fail(field(key), "expected an integer");
      out = v->get<int>();
    }
  }
  void read(const std::string& key, double& out) {
    if (const json* v = find(key)) {
      if (!v->is_number()) fail(field(key), "expected a number");
      out = v->get<double>();
    }
  }
  void read(const std::string& key, std::array<zones::ZoneAction, 3>& out) {
    if (const json* v = find(key)) {
      if (!v->is_array() || v->size() != 3) fail(field(key), "expected an array of exactly 3 actions");
      for (std::size_t i = 0; i < 3; ++i) {
        const json& e = (*v)[i];
        const auto action = e.is_string() ? zones::parse_action(e.get<std::string>()) : std::nullopt;
        if (!action) fail(field(key) + "[" + std::to_string(i) + "]", "unknown zone action " + e.dump());
        out[i] = *action;
      }
    }
  }

  void reject_unknown() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.contains(key)) fail(field(key), "unknown field");
    }
  }

 private:
  const json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

int line_of_byte(const std::string& text, std::size_t byte) {
  int line = 1;
  for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace

ConfigParseError::ConfigParseError(const std::string& source, int line, const std::string& field,
                                   const std::string& message)
    : std::runtime_error(source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                         (field.empty() ? std::string() : ": " + field) + ": " + message),
      line_(line),
      field_(field),
      message_(message) {}

std::optional<std::string> SessionConfig::validate() const {
  if (auto e = zone_config.validate()) return "zone_config: " + *e;
  if (auto e = tracker.validate()) return "tracker: " + *e;
  if (calibration.samples_per_corner < 1) return "calibration.samples_per_corner must be at least 1";
  if (calibration.corner_gap_frames < 0) return "calibration.corner_gap_frames must be non-negative";
  if (!(calibration.sample_radius > 0.0)) return "calibration.sample_radius must be positive";
  if (screen_resolution.width < 1 || screen_resolution.height < 1) return "screen_resolution must be positive";
  if (!(alignment_margin >= 0.0 && alignment_margin < 384.0)) return "alignment_margin must lie in [0, 384)";
  return std::nullopt;
}

json to_json(const zones::ZoneConfig& z) {
  auto actions = [](const std::array<zones::ZoneAction, 3>& a) {
    json arr = json::array();
    for (auto x : a) arr.push_back(std::string(zones::to_string(x)));
    return arr;
  };
  return {{"enabled", z.enabled}, {"band_width", z.band_width}, {"left", actions(z.left)}, {"right", actions(z.right)}};
}

json to_json(const SessionConfig& c) {
  return {
      {"zone_config", to_json(c.zone_config)},
      {"touchpad_mode", c.touchpad_mode},
      {"save_on_exit", c.save_on_exit},
      {"tracker", {{"dropout_frames", c.tracker.dropout_frames}, {"smoothing_alpha", c.tracker.smoothing_alpha}}},
      {"calibration",
       {{"samples_per_corner", c.calibration.samples_per_corner},
        {"corner_gap_frames", c.calibration.corner_gap_frames},
        {"sample_radius", c.calibration.sample_radius}}},
      {"screen_resolution", {{"width", c.screen_resolution.width}, {"height", c.screen_resolution.height}}},
      {"alignment_margin", c.alignment_margin},
  };
}

zones::ZoneConfig zones_from_json(const json& j, const std::string& field_prefix) {
  zones::ZoneConfig z;
  FieldReader r(j, field_prefix);
  r.read("enabled", z.enabled);
  r.read("band_width", z.band_width);
  r.read("left", z.left);
  r.read("right", z.right);
  r.reject_unknown();
  if (auto e = z.validate()) FieldReader::fail(r.field("band_width"), *e);
  return z;
}

SessionConfig config_from_json(const json& j) {
  SessionConfig c;
  FieldReader root(j, "");
  if (const json* z = root.find("zone_config")) c.zone_config = zones_from_json(*z, "zone_config");
  root.read("touchpad_mode", c.touchpad_mode);
  root.read("save_on_exit", c.save_on_exit);
  if (const json* t = root.find("tracker")) {
    FieldReader r(*t, "tracker");
    r.read("dropout_frames", c.tracker.dropout_frames);
    r.read("smoothing_alpha", c.tracker.smoothing_alpha);
    r.reject_unknown();
  }
  if (const json* t = root.find("calibration")) {
    FieldReader r(*t, "calibration");
    r.read("samples_per_corner", c.calibration.samples_per_corner);
    r.read("corner_gap_frames", c.calibration.corner_gap_frames);
    r.read("sample_radius", c.calibration.sample_radius);
    r.reject_unknown();
  }
  if (const json* t = root.find("screen_resolution")) {
    FieldReader r(*t, "screen_resolution");
    r.read("width", c.screen_resolution.width);
    r.read("height", c.screen_resolution.height);
    r.reject_unknown();
  }
  root.read("alignment_margin", c.alignment_margin);
  root.reject_unknown();
  if (auto e = c.validate()) FieldReader::fail("", *e);
  return c;
}

SessionConfig parse_config(const std::string& text, const std::string& source) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigParseError(source, line_of_byte(text, e.byte), "", e.what());
  }
  try {
    return config_from_json(j);
  } catch (const ConfigParseError& e) {
    throw ConfigParseError(source, 0, e.field(), e.message());
  }
}

SessionConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) return SessionConfig{};
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.string());
}

void save_config(const SessionConfig& cfg, const std::filesystem::path& path) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << to_json(cfg).dump(2) << '\n';
    if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace irboard::config
