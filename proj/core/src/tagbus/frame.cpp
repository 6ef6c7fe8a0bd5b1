#include "twinbed/tagbus/frame.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

namespace twinbed::tagbus {

namespace {

using json = nlohmann::json;

// Records are at most three levels deep; anything deeper is rejected before
// the JSON parser sees it.
constexpr int kMaxNesting = 8;

bool nesting_within_limit(std::string_view text) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (char c : text) {
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '[' || c == '{') {
      if (++depth > kMaxNesting) return false;
    } else if (c == ']' || c == '}') {
      --depth;
    }
  }
  return true;
}

std::string_view type_name(const Value& v) {
  switch (v.index()) {
    case 0: return "f64";
    case 1: return "i64";
    case 2: return "bool";
    default: return "text";
  }
}

json tag_to_json(const TagValue& tv) {
  json j;
  j["name"] = tv.name;
  j["type"] = type_name(tv.value);
  std::visit([&](const auto& x) { j["value"] = x; }, tv.value);
  j["ts"] = tv.timestamp_ms;
  j["q"] = to_string(tv.quality);
  return j;
}

[[noreturn]] void parse_fail(const std::string& what) { throw FrameParseError(what); }

std::int64_t json_int64(const json& j, const char* field) {
  if (j.is_number_unsigned()) {
    auto u = j.get<std::uint64_t>();
    if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
      parse_fail(std::string(field) + " out of int64 range");
    }
    return static_cast<std::int64_t>(u);
  }
  if (!j.is_number_integer()) parse_fail(std::string(field) + " must be an integer");
  return j.get<std::int64_t>();
}

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) parse_fail(std::string("missing field '") + key + "'");
  return *it;
}

TagValue tag_from_json(const json& j) {
  if (!j.is_object()) parse_fail("tag entry must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "name" && k != "type" && k != "value" && k != "ts" && k != "q") {
      parse_fail("unknown tag field '" + k + "'");
    }
  }
  TagValue tv;
  const auto& name = require(j, "name");
  if (!name.is_string()) parse_fail("tag name must be a string");
  tv.name = name.get<std::string>();

  const auto& type = require(j, "type");
  if (!type.is_string()) parse_fail("tag type must be a string");
  const auto t = type.get<std::string>();
  const auto& value = require(j, "value");
  if (t == "f64") {
    if (!value.is_number()) parse_fail("f64 value must be a number");
    tv.value = value.get<double>();
  } else if (t == "i64") {
    tv.value = json_int64(value, "i64 value");
  } else if (t == "bool") {
    if (!value.is_boolean()) parse_fail("bool value must be true/false");
    tv.value = value.get<bool>();
  } else if (t == "text") {
    if (!value.is_string()) parse_fail("text value must be a string");
    tv.value = value.get<std::string>();
  } else {
    parse_fail("unknown tag type '" + t + "'");
  }

  tv.timestamp_ms = json_int64(require(j, "ts"), "ts");
  const auto& q = require(j, "q");
  if (!q.is_string()) parse_fail("quality must be a string");
  auto quality = quality_from_string(q.get<std::string>());
  if (!quality) parse_fail("unknown quality");
  tv.quality = *quality;
  return tv;
}

std::map<std::string, TagValue> tag_map_from_json(const json& arr, const char* field) {
  if (!arr.is_array()) parse_fail(std::string(field) + " must be an array");
  std::map<std::string, TagValue> out;
  for (const auto& e : arr) {
    auto tv = tag_from_json(e);
    auto name = tv.name;
    if (!out.emplace(std::move(name), std::move(tv)).second) {
      parse_fail(std::string("duplicate tag in ") + field);
    }
  }
  return out;
}

void check_tag_map(const std::map<std::string, TagValue>& m, const char* field) {
  for (const auto& [key, tv] : m) {
    if (key.empty()) throw ProtocolError(std::string("empty tag name in ") + field);
    if (key != tv.name) throw ProtocolError(std::string("key/name mismatch in ") + field);
    if (auto d = std::get_if<double>(&tv.value); d && !std::isfinite(*d)) {
      throw ProtocolError("non-finite value for tag " + key);
    }
  }
}

}  // namespace

void validate(const Message& msg) {
  for (const auto& t : msg.tags) {
    if (t.empty()) throw ProtocolError("empty tag name in tags");
  }
  check_tag_map(msg.writes, "writes");
  check_tag_map(msg.reply, "reply");
  if (msg.is_reply) {
    if (!msg.tags.empty() || !msg.writes.empty()) {
      throw ProtocolError("reply may only carry reply values");
    }
    return;
  }
  if (!msg.reply.empty() || !msg.ok || !msg.error.empty()) {
    throw ProtocolError("request may not carry reply fields");
  }
  switch (msg.op) {
    case Op::Read:
      if (!msg.writes.empty()) throw ProtocolError("READ carries only tags");
      break;
    case Op::Write:
      if (!msg.tags.empty()) throw ProtocolError("WRITE carries only writes");
      break;
    case Op::Status:
    case Op::SubscribePoll:
      if (!msg.writes.empty()) throw ProtocolError("STATUS carries no writes");
      break;
  }
}

std::string encode_payload(const Message& msg) {
  validate(msg);
  json j;
  j["op"] = to_string(msg.op);
  j["id"] = msg.id;
  j["kind"] = msg.is_reply ? "rep" : "req";
  if (!msg.tags.empty()) j["tags"] = msg.tags;
  if (!msg.writes.empty()) {
    auto arr = json::array();
    for (const auto& [k, tv] : msg.writes) arr.push_back(tag_to_json(tv));
    j["writes"] = std::move(arr);
  }
  if (msg.is_reply) {
    auto arr = json::array();
    for (const auto& [k, tv] : msg.reply) arr.push_back(tag_to_json(tv));
    j["reply"] = std::move(arr);
    j["ok"] = msg.ok;
    j["error"] = msg.error;
  }
  std::string out;
  try {
    out = j.dump();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("cannot encode message: ") + e.what());
  }
  if (out.size() > kMaxPayloadBytes) {
    throw FrameTooLarge("payload of " + std::to_string(out.size()) + " bytes exceeds 1 MiB");
  }
  return out;
}

Message decode_payload(std::string_view payload) {
  if (!nesting_within_limit(payload)) parse_fail("payload nested too deeply");
  json j;
  try {
    j = json::parse(payload.begin(), payload.end());
  } catch (const json::exception& e) {
    parse_fail(std::string("malformed payload: ") + e.what());
  }
  if (!j.is_object()) parse_fail("payload must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "op" && k != "id" && k != "kind" && k != "tags" && k != "writes" && k != "reply" && k != "ok" &&
        k != "error") {
      parse_fail("unknown field '" + k + "'");
    }
  }

  Message m;
  const auto& op = require(j, "op");
  if (!op.is_string()) parse_fail("op must be a string");
  auto parsed_op = op_from_string(op.get<std::string>());
  if (!parsed_op) parse_fail("unknown op");
  m.op = *parsed_op;

  const auto& id = require(j, "id");
  if (!id.is_number_unsigned() && !(id.is_number_integer() && id.get<std::int64_t>() >= 0)) {
    parse_fail("id must be a non-negative integer");
  }
  m.id = id.get<std::uint64_t>();

  const auto& kind = require(j, "kind");
  if (kind == "req") {
    m.is_reply = false;
  } else if (kind == "rep") {
    m.is_reply = true;
  } else {
    parse_fail("kind must be req or rep");
  }

  if (auto it = j.find("tags"); it != j.end()) {
    if (!it->is_array()) parse_fail("tags must be an array");
    for (const auto& t : *it) {
      if (!t.is_string()) parse_fail("tag identifiers must be strings");
      m.tags.push_back(t.get<std::string>());
    }
  }
  if (auto it = j.find("writes"); it != j.end()) m.writes = tag_map_from_json(*it, "writes");

  if (m.is_reply) {
    m.reply = tag_map_from_json(require(j, "reply"), "reply");
    const auto& ok = require(j, "ok");
    if (!ok.is_boolean()) parse_fail("ok must be a boolean");
    m.ok = ok.get<bool>();
    const auto& err = require(j, "error");
    if (!err.is_string()) parse_fail("error must be a string");
    m.error = err.get<std::string>();
  } else if (j.contains("reply") || j.contains("ok") || j.contains("error")) {
    parse_fail("request carries reply fields");
  }

  try {
    validate(m);
  } catch (const ProtocolError& e) {
    parse_fail(e.what());
  }
  return m;
}

Bytes encode_frame(const Message& msg) {
  const std::string payload = encode_payload(msg);
  const auto n = static_cast<std::uint32_t>(payload.size());
  Bytes out;
  out.reserve(kFrameHeaderBytes + payload.size());
  out.push_back(static_cast<std::uint8_t>(n >> 24));
  out.push_back(static_cast<std::uint8_t>(n >> 16));
  out.push_back(static_cast<std::uint8_t>(n >> 8));
  out.push_back(static_cast<std::uint8_t>(n));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

std::optional<std::size_t> peek_frame_size(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kFrameHeaderBytes) return std::nullopt;
  const std::uint32_t n = (std::uint32_t{bytes[0]} << 24) | (std::uint32_t{bytes[1]} << 16) |
                          (std::uint32_t{bytes[2]} << 8) | std::uint32_t{bytes[3]};
  return kFrameHeaderBytes + static_cast<std::size_t>(n);
}

DecodedFrame decode_frame(std::span<const std::uint8_t> bytes) {
  auto total = peek_frame_size(bytes);
  if (!total) throw FrameIncomplete("truncated frame header");
  const std::size_t payload_len = *total - kFrameHeaderBytes;
  if (payload_len > kMaxPayloadBytes) {
    throw FrameTooLarge("declared payload of " + std::to_string(payload_len) + " bytes exceeds 1 MiB");
  }
  if (bytes.size() < *total) throw FrameIncomplete("truncated frame payload");
  auto payload = bytes.subspan(kFrameHeaderBytes, payload_len);
  std::string_view text(reinterpret_cast<const char*>(payload.data()), payload.size());
  return DecodedFrame{decode_payload(text), *total};
}

}  // namespace twinbed::tagbus
