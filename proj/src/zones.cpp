#include "irboard/zones.hpp"

#include <cmath>

namespace irboard::zones {

namespace {

constexpr std::array<std::pair<ZoneAction, std::string_view>, 5> kNames{{
    {ZoneAction::None, "none"},
    {ZoneAction::LeftClick, "left_click"},
    {ZoneAction::RightClick, "right_click"},
    {ZoneAction::MiddleClick, "middle_click"},
    {ZoneAction::DoubleClick, "double_click"},
}};

}  // namespace

std::string_view to_string(ZoneAction action) {
  for (const auto& [a, name] : kNames)
    if (a == action) return name;
  return "none";
}

std::optional<ZoneAction> parse_action(std::string_view name) {
  for (const auto& [a, n] : kNames)
    if (n == name) return a;
  return std::nullopt;
}

std::optional<std::string> ZoneConfig::validate() const {
  if (!(band_width > 0.0 && band_width <= kMaxBandWidth)) {
    return "band_width must lie in (0, 0.2], got " + std::to_string(band_width);
  }
  return std::nullopt;
}

int third_of(double v) {
  if (v < 1.0 / 3.0) return 0;
  if (v < 2.0 / 3.0) return 1;
  return 2;
}

ZoneHit classify(geometry::ScreenPoint p, const ZoneConfig& cfg) {
  const double u = p.u, v = p.v;
  if (!std::isfinite(u) || !std::isfinite(v) || v < 0.0 || v > 1.0) return OutsideHit{};
  if (u >= 0.0 && u <= 1.0) return ScreenHit{u, v};
  if (!cfg.enabled) return OutsideHit{};

  const std::array<ZoneAction, 3>* side = nullptr;
  if (u > 1.0 && u <= 1.0 + cfg.band_width) {
    side = &cfg.right;
  } else if (u < 0.0 && u >= -cfg.band_width) {
    side = &cfg.left;
  }
  if (side == nullptr) return OutsideHit{};
  const ZoneAction action = (*side)[third_of(v)];
  if (action == ZoneAction::None) return OutsideHit{};
  return SideHit{action};
}

}  // namespace irboard::zones
