#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/tagbus/message.hpp"

namespace twinbed::tagbus {

// Wire framing: 4-byte big-endian payload length, then a UTF-8 JSON record.
//
//   {"op":"READ","id":7,"kind":"req","tags":["CW_TEMP"]}
//   {"op":"READ","id":7,"kind":"rep","ok":true,"error":"",
//    "reply":[{"name":"CW_TEMP","type":"f64","value":14.77,"ts":1200,"q":"GOOD"}]}
//
// The full grammar is in docs/protocol.md.
inline constexpr std::size_t kFrameHeaderBytes = 4;
inline constexpr std::size_t kMaxPayloadBytes = std::size_t{1} << 20;

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class FrameTooLarge : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class FrameIncomplete : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};
class FrameParseError : public ProtocolError {
 public:
  using ProtocolError::ProtocolError;
};

using Bytes = std::vector<std::uint8_t>;

std::string encode_payload(const Message& msg);
Message decode_payload(std::string_view payload);

Bytes encode_frame(const Message& msg);

struct DecodedFrame {
  Message message;
  std::size_t consumed = 0;
};

// Decodes the first frame in `bytes`. Trailing bytes are left unconsumed.
DecodedFrame decode_frame(std::span<const std::uint8_t> bytes);

// Total frame size (header + payload) if the header is present.
std::optional<std::size_t> peek_frame_size(std::span<const std::uint8_t> bytes);

// Throws ProtocolError if the message violates a request/reply invariant.
void validate(const Message& msg);

}  // namespace twinbed::tagbus
