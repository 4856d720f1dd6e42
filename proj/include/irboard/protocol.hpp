#pragma once

// Wire codec for the Wiimote-class IR camera device.
//
// Input frames (device -> host) start with 0xA1, output frames (host ->
// device) with 0xA2. The second octet is the report/command id.
//
//   0x20 Status     buttons(2, BE) leds|flags(1) reserved(2) battery_raw(1)
//   0x30 Buttons    buttons(2, BE)
//   0x33 ButtonsIr  buttons(2, BE) then 4 blob slots of 3 octets:
//                   [x & 0xFF] [y & 0xFF] [(y>>8)<<6 | (x>>8)<<4 | size]
//                   an empty slot is FF FF FF
//
//   0x11 SetLeds          mask(1, high nibble)
//   0x12 SetReportingMode 0x00 mode(1)
//   0x13 IrEnable         0x04 on / 0x00 off
//   0x15 StatusRequest    0x00

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace irboard::protocol {

inline constexpr std::uint8_t kInputPrefix = 0xA1;
inline constexpr std::uint8_t kOutputPrefix = 0xA2;

inline constexpr std::uint8_t kReportStatus = 0x20;
inline constexpr std::uint8_t kReportButtons = 0x30;
inline constexpr std::uint8_t kReportButtonsIr = 0x33;

inline constexpr std::uint8_t kCommandSetLeds = 0x11;
inline constexpr std::uint8_t kCommandSetReportingMode = 0x12;
inline constexpr std::uint8_t kCommandIrEnable = 0x13;
inline constexpr std::uint8_t kCommandStatusRequest = 0x15;

inline constexpr int kCameraWidth = 1024;
inline constexpr int kCameraHeight = 768;
inline constexpr std::uint16_t kMaxBlobX = kCameraWidth - 1;
inline constexpr std::uint16_t kMaxBlobY = kCameraHeight - 1;
inline constexpr std::uint8_t kMaxBlobSize = 15;
inline constexpr std::size_t kMaxBlobs = 4;
inline constexpr std::uint8_t kMaxBatteryRaw = 200;

enum class ProtocolErrc {
  BadPrefix,
  UnknownReportId,
  UnknownCommandId,
  TruncatedFrame,
  // Well-formed length and id but a field value outside its domain
  // (battery above 200, y above 767, trailing octets, ...).
  InvalidField,
};

const char* to_string(ProtocolErrc code);

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ProtocolErrc code, const std::string& what);
  ProtocolErrc code() const noexcept { return code_; }

 private:
  ProtocolErrc code_;
};

struct IrBlob {
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::uint8_t size = 0;

  bool valid() const noexcept {
    return x <= kMaxBlobX && y <= kMaxBlobY && size <= kMaxBlobSize;
  }
  friend bool operator==(const IrBlob&, const IrBlob&) = default;
};

struct StatusReport {
  std::uint16_t buttons = 0;
  std::uint8_t led_mask = 0;  // 4 bits
  std::uint8_t flags = 0;     // 4 bits, carried but not interpreted
  std::uint8_t battery_raw = 0;

  double battery_percent() const noexcept { return battery_raw / 2.0; }
  friend bool operator==(const StatusReport&, const StatusReport&) = default;
};

struct ButtonsReport {
  std::uint16_t buttons = 0;
  friend bool operator==(const ButtonsReport&, const ButtonsReport&) = default;
};

struct ButtonsIrReport {
  std::uint16_t buttons = 0;
  std::vector<IrBlob> blobs;
  friend bool operator==(const ButtonsIrReport&, const ButtonsIrReport&) = default;
};

using DeviceReport = std::variant<StatusReport, ButtonsReport, ButtonsIrReport>;

enum class ReportingMode : std::uint8_t { Buttons = 0x30, ButtonsIr = 0x33 };

struct SetLeds {
  std::uint8_t mask = 0;  // 4 bits
  friend bool operator==(const SetLeds&, const SetLeds&) = default;
};
struct SetReportingMode {
  ReportingMode mode = ReportingMode::ButtonsIr;
  friend bool operator==(const SetReportingMode&, const SetReportingMode&) = default;
};
struct IrEnable {
  bool on = true;
  friend bool operator==(const IrEnable&, const IrEnable&) = default;
};
struct StatusRequest {
  friend bool operator==(const StatusRequest&, const StatusRequest&) = default;
};

using DeviceCommand = std::variant<SetLeds, SetReportingMode, IrEnable, StatusRequest>;

using Bytes = std::vector<std::uint8_t>;

// Throws ProtocolError. Empty (FF FF FF) blob slots are skipped, so the
// returned blob list holds only present detections in slot order.
DeviceReport decode_report(std::span<const std::uint8_t> frame);

// Precondition: the report's invariants hold (checked, std::invalid_argument).
Bytes encode_report(const DeviceReport& report);

Bytes encode_command(const DeviceCommand& command);
DeviceCommand decode_command(std::span<const std::uint8_t> frame);

bool report_valid(const DeviceReport& report) noexcept;

std::string to_hex(std::span<const std::uint8_t> bytes);

}  // namespace irboard::protocol
