#include "twinbed/tagbus/message.hpp"

#include <cmath>

namespace twinbed::tagbus {

std::string_view to_string(Quality q) {
  switch (q) {
    case Quality::Good: return "GOOD";
    case Quality::Stale: return "STALE";
    case Quality::Forced: return "FORCED";
  }
  return "GOOD";
}

std::optional<Quality> quality_from_string(std::string_view s) {
  if (s == "GOOD") return Quality::Good;
  if (s == "STALE") return Quality::Stale;
  if (s == "FORCED") return Quality::Forced;
  return std::nullopt;
}

std::optional<double> TagValue::as_double() const {
  if (auto d = std::get_if<double>(&value)) return *d;
  if (auto i = std::get_if<std::int64_t>(&value)) return static_cast<double>(*i);
  if (auto b = std::get_if<bool>(&value)) return *b ? 1.0 : 0.0;
  return std::nullopt;
}

std::string_view to_string(Op op) {
  switch (op) {
    case Op::Read: return "READ";
    case Op::Write: return "WRITE";
    case Op::Status: return "STATUS";
    case Op::SubscribePoll: return "SUBSCRIBE_POLL";
  }
  return "STATUS";
}

std::optional<Op> op_from_string(std::string_view s) {
  if (s == "READ") return Op::Read;
  if (s == "WRITE") return Op::Write;
  if (s == "STATUS") return Op::Status;
  if (s == "SUBSCRIBE_POLL") return Op::SubscribePoll;
  return std::nullopt;
}

Message make_read(std::uint64_t id, std::vector<std::string> tags) {
  Message m;
  m.op = Op::Read;
  m.id = id;
  m.tags = std::move(tags);
  return m;
}

Message make_write(std::uint64_t id, const std::vector<TagValue>& values) {
  Message m;
  m.op = Op::Write;
  m.id = id;
  for (const auto& v : values) m.writes[v.name] = v;
  return m;
}

Message make_status(std::uint64_t id) {
  Message m;
  m.op = Op::Status;
  m.id = id;
  return m;
}

Message make_reply(const Message& request) {
  Message m;
  m.op = request.op;
  m.id = request.id;
  m.is_reply = true;
  return m;
}

Message make_error_reply(const Message& request, std::string error) {
  Message m = make_reply(request);
  m.ok = false;
  m.error = std::move(error);
  return m;
}

}  // namespace twinbed::tagbus
