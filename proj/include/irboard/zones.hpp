#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "irboard/geometry.hpp"

namespace irboard::zones {

enum class ZoneAction { None, LeftClick, RightClick, MiddleClick, DoubleClick };

std::string_view to_string(ZoneAction action);
std::optional<ZoneAction> parse_action(std::string_view name);

inline constexpr double kDefaultBandWidth = 0.03;
inline constexpr double kMaxBandWidth = 0.2;

/// Lateral bands just outside the left and right screen edges, each split
/// into thirds (index 0 = top) of the screen height.
struct ZoneConfig {
  std::array<ZoneAction, 3> left{ZoneAction::None, ZoneAction::None, ZoneAction::DoubleClick};
  std::array<ZoneAction, 3> right{ZoneAction::RightClick, ZoneAction::MiddleClick, ZoneAction::None};
  double band_width = kDefaultBandWidth;
  bool enabled = false;

  /// Empty when valid, otherwise a description of the violated invariant.
  std::optional<std::string> validate() const;

  friend bool operator==(const ZoneConfig&, const ZoneConfig&) = default;
};

struct ScreenHit {
  double u = 0.0;
  double v = 0.0;
  friend bool operator==(const ScreenHit&, const ScreenHit&) = default;
};
struct SideHit {
  ZoneAction action = ZoneAction::None;
  friend bool operator==(const SideHit&, const SideHit&) = default;
};
struct OutsideHit {
  friend bool operator==(const OutsideHit&, const OutsideHit&) = default;
};

using ZoneHit = std::variant<ScreenHit, SideHit, OutsideHit>;

/// Thirds are [0,1/3), [1/3,2/3), [2/3,1].
int third_of(double v);

/// Total over finite points. u = 0 and u = 1 are on the screen; the bands
/// are u in [-band_width, 0) and (1, 1 + band_width].
ZoneHit classify(geometry::ScreenPoint p, const ZoneConfig& cfg);

}  // namespace irboard::zones
