#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/tagbus/tag_value.hpp"

namespace twinbed::tagbus {

enum class Op { Read, Write, Status, SubscribePoll };

std::string_view to_string(Op op);
std::optional<Op> op_from_string(std::string_view s);

// One request or reply record. Requests use `tags` (READ) or `writes`
// (WRITE); replies carry `reply`, `ok` and `error` and echo the request id.
struct Message {
  Op op = Op::Status;
  std::uint64_t id = 0;
  bool is_reply = false;
  std::vector<std::string> tags;
  std::map<std::string, TagValue> writes;
  std::map<std::string, TagValue> reply;
  bool ok = true;
  std::string error;

  bool operator==(const Message&) const = default;
};

Message make_read(std::uint64_t id, std::vector<std::string> tags);
Message make_write(std::uint64_t id, const std::vector<TagValue>& values);
Message make_status(std::uint64_t id);
Message make_reply(const Message& request);
Message make_error_reply(const Message& request, std::string error);

}  // namespace twinbed::tagbus
