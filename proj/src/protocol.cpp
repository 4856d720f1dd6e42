#include "irboard/protocol.hpp"

#include <cstdio>

namespace irboard::protocol {

namespace {

constexpr std::size_t kStatusLength = 8;
constexpr std::size_t kButtonsLength = 4;
constexpr std::size_t kButtonsIrLength = 4 + 3 * kMaxBlobs;

[[noreturn]] void fail(ProtocolErrc code, const std::string& what) {
  throw ProtocolError(code, what);
}

void require_length(std::span<const std::uint8_t> frame, std::size_t expected,
                    const char* name) {
  if (frame.size() < expected) {
    fail(ProtocolErrc::TruncatedFrame, std::string(name) + " frame needs " +
                                           std::to_string(expected) + " octets, got " +
                                           std::to_string(frame.size()));
  }
  if (frame.size() > expected) {
    fail(ProtocolErrc::InvalidField, std::string(name) + " frame has " +
                                         std::to_string(frame.size() - expected) +
                                         " trailing octets");
  }
}

std::uint16_t read_buttons(std::span<const std::uint8_t> frame) {
  return static_cast<std::uint16_t>((frame[2] << 8) | frame[3]);
}

void write_buttons(Bytes& out, std::uint16_t buttons) {
  out.push_back(static_cast<std::uint8_t>(buttons >> 8));
  out.push_back(static_cast<std::uint8_t>(buttons & 0xFF));
}

struct ReportEncoder {
  Bytes& out;

  void operator()(const StatusReport& r) const {
    out.push_back(kReportStatus);
    write_buttons(out, r.buttons);
    out.push_back(static_cast<std::uint8_t>((r.led_mask << 4) | (r.flags & 0x0F)));
    out.push_back(0x00);
    out.push_back(0x00);
    out.push_back(r.battery_raw);
  }
  void operator()(const ButtonsReport& r) const {
    out.push_back(kReportButtons);
    write_buttons(out, r.buttons);
  }
  void operator()(const ButtonsIrReport& r) const {
    out.push_back(kReportButtonsIr);
    write_buttons(out, r.buttons);
    for (std::size_t slot = 0; slot < kMaxBlobs; ++slot) {
      if (slot < r.blobs.size()) {
        const IrBlob& b = r.blobs[slot];
        out.push_back(static_cast<std::uint8_t>(b.x & 0xFF));
        out.push_back(static_cast<std::uint8_t>(b.y & 0xFF));
        out.push_back(static_cast<std::uint8_t>(((b.y >> 8) << 6) | ((b.x >> 8) << 4) | b.size));
      } else {
        out.insert(out.end(), {0xFF, 0xFF, 0xFF});
      }
    }
  }
};

}  // namespace

const char* to_string(ProtocolErrc code) {
  switch (code) {
    case ProtocolErrc::BadPrefix: return "BadPrefix";
    case ProtocolErrc::UnknownReportId: return "UnknownReportId";
    case ProtocolErrc::UnknownCommandId: return "UnknownCommandId";
    case ProtocolErrc::TruncatedFrame: return "TruncatedFrame";
    case ProtocolErrc::InvalidField: return "InvalidField";
  }
  return "?";
}

ProtocolError::ProtocolError(ProtocolErrc code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

DeviceReport decode_report(std::span<const std::uint8_t> frame) {
  if (frame.size() < 2) fail(ProtocolErrc::TruncatedFrame, "frame shorter than 2 octets");
  if (frame[0] != kInputPrefix) fail(ProtocolErrc::BadPrefix, "expected 0xA1, got " + to_hex(frame.first(1)));

  switch (frame[1]) {
    case kReportStatus: {
      require_length(frame, kStatusLength, "Status");
      if (frame[5] != 0 || frame[6] != 0) fail(ProtocolErrc::InvalidField, "Status reserved octets not zero");
      if (frame[7] > kMaxBatteryRaw) {
        fail(ProtocolErrc::InvalidField, "battery_raw " + std::to_string(frame[7]) + " above 200");
      }
      StatusReport r;
      r.buttons = read_buttons(frame);
      r.led_mask = frame[4] >> 4;
      r.flags = frame[4] & 0x0F;
      r.battery_raw = frame[7];
      return r;
    }
    case kReportButtons: {
      require_length(frame, kButtonsLength, "Buttons");
      return ButtonsReport{read_buttons(frame)};
    }
    case kReportButtonsIr: {
      require_length(frame, kButtonsIrLength, "ButtonsIr");
      ButtonsIrReport r;
      r.buttons = read_buttons(frame);
      for (std::size_t slot = 0; slot < kMaxBlobs; ++slot) {
        const auto s = frame.subspan(4 + 3 * slot, 3);
        if (s[0] == 0xFF && s[1] == 0xFF && s[2] == 0xFF) continue;
        IrBlob b;
        b.x = static_cast<std::uint16_t>(s[0] | (((s[2] >> 4) & 0x03) << 8));
        b.y = static_cast<std::uint16_t>(s[1] | ((s[2] >> 6) << 8));
        b.size = s[2] & 0x0F;
        if (b.y > kMaxBlobY) {
          fail(ProtocolErrc::InvalidField, "blob slot " + std::to_string(slot) + " has y=" + std::to_string(b.y));
        }
        r.blobs.push_back(b);
      }
      return r;
    }
    default:
      fail(ProtocolErrc::UnknownReportId, "report id " + to_hex(frame.subspan(1, 1)));
  }
}

bool report_valid(const DeviceReport& report) noexcept {
  if (const auto* s = std::get_if<StatusReport>(&report)) {
    return s->battery_raw <= kMaxBatteryRaw && s->led_mask <= 0x0F && s->flags <= 0x0F;
  }
  if (const auto* ir = std::get_if<ButtonsIrReport>(&report)) {
    if (ir->blobs.size() > kMaxBlobs) return false;
    for (const auto& b : ir->blobs) {
      if (!b.valid()) return false;
    }
  }
  return true;
}

Bytes encode_report(const DeviceReport& report) {
  if (!report_valid(report)) throw std::invalid_argument("encode_report: report violates field invariants");
  Bytes out;
  out.reserve(kButtonsIrLength);
  out.push_back(kInputPrefix);
  std::visit(ReportEncoder{out}, report);
  return out;
}

Bytes encode_command(const DeviceCommand& command) {
  Bytes out{kOutputPrefix};
  std::visit(
      [&out](const auto& c) {
        using T = std::decay_t<decltype(c)>;
        if constexpr (std::is_same_v<T, SetLeds>) {
          if (c.mask > 0x0F) throw std::invalid_argument("SetLeds mask wider than 4 bits");
          out.insert(out.end(), {kCommandSetLeds, static_cast<std::uint8_t>(c.mask << 4)});
        } else if constexpr (std::is_same_v<T, SetReportingMode>) {
          out.insert(out.end(), {kCommandSetReportingMode, 0x00, static_cast<std::uint8_t>(c.mode)});
        } else if constexpr (std::is_same_v<T, IrEnable>) {
          out.insert(out.end(), {kCommandIrEnable, static_cast<std::uint8_t>(c.on ? 0x04 : 0x00)});
        } else {
          out.insert(out.end(), {kCommandStatusRequest, 0x00});
        }
      },
      command);
  return out;
}

DeviceCommand decode_command(std::span<const std::uint8_t> frame) {
  if (frame.size() < 2) fail(ProtocolErrc::TruncatedFrame, "frame shorter than 2 octets");
  if (frame[0] != kOutputPrefix) fail(ProtocolErrc::BadPrefix, "expected 0xA2, got " + to_hex(frame.first(1)));

  switch (frame[1]) {
    case kCommandSetLeds:
      require_length(frame, 3, "SetLeds");
      if (frame[2] & 0x0F) fail(ProtocolErrc::InvalidField, "SetLeds low nibble not zero");
      return SetLeds{static_cast<std::uint8_t>(frame[2] >> 4)};
    case kCommandSetReportingMode:
      require_length(frame, 4, "SetReportingMode");
      if (frame[2] != 0x00) fail(ProtocolErrc::InvalidField, "SetReportingMode flags octet not zero");
      if (frame[3] != 0x30 && frame[3] != 0x33) {
        fail(ProtocolErrc::InvalidField, "reporting mode " + to_hex(frame.subspan(3, 1)));
      }
      return SetReportingMode{static_cast<ReportingMode>(frame[3])};
    case kCommandIrEnable:
      require_length(frame, 3, "IrEnable");
      if (frame[2] != 0x04 && frame[2] != 0x00) fail(ProtocolErrc::InvalidField, "IrEnable payload " + to_hex(frame.subspan(2, 1)));
      return IrEnable{frame[2] == 0x04};
    case kCommandStatusRequest:
      require_length(frame, 3, "StatusRequest");
      if (frame[2] != 0x00) fail(ProtocolErrc::InvalidField, "StatusRequest payload not zero");
      return StatusRequest{};
    default:
      fail(ProtocolErrc::UnknownCommandId, "command id " + to_hex(frame.subspan(1, 1)));
  }
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  std::string out;
  char buf[4];
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    std::snprintf(buf, sizeof buf, i ? " %02X" : "%02X", bytes[i]);
    out += buf;
  }
  return out;
}

}  // namespace irboard::protocol
