#include "twinbed/tagbus/link.hpp"


namespace twinbed::tagbus {

TcpLink::TcpLink(std::string host, std::uint16_t port, int timeout_ms)
    : host_(std::move(host)), port_(port), timeout_ms_(timeout_ms) {}

Message TcpLink::exchange(const Message& request) {
  auto frame = encode_frame(request);
  try {
    if (!sock_.valid()) sock_ = connect_tcp(host_, port_, timeout_ms_);
    sock_.send_all(frame);
    auto reply = sock_.read_frame();
    if (!reply) throw TransportError("connection closed by " + host_ + ":" + std::to_string(port_));
    return decode_frame(*reply).message;
  } catch (const TransportError&) {
    sock_.close();
    throw;
  } catch (const ProtocolError& e) {
    sock_.close();
    throw TransportError(std::string("bad reply frame: ") + e.what());
  }
}

Message LoopbackLink::exchange(const Message& request) {
  if (down_) throw TransportError("endpoint unreachable");
  Bytes frame = encode_frame(request);
  if (tap_) {
    auto v = tap_->on_request(frame);
    if (v.drop || v.delay_ms >= timeout_ms_) throw TransportError("request lost in transit");
  }
  Message delivered;
  try {
    delivered = decode_frame(frame).message;
  } catch (const ProtocolError& e) {
    throw TransportError(std::string("server rejected frame: ") + e.what());
  }
  Bytes reply_frame;
  try {
    reply_frame = encode_frame(dispatch(handler_, delivered));
  } catch (const ProtocolError& e) {
    reply_frame = encode_frame(make_error_reply(delivered, e.what()));
  }
  if (tap_) {
    auto v = tap_->on_reply(reply_frame);
    if (v.drop || v.delay_ms >= timeout_ms_) throw TransportError("reply lost in transit");
  }
  try {
    return decode_frame(reply_frame).message;
  } catch (const ProtocolError& e) {
    throw TransportError(std::string("bad reply frame: ") + e.what());
  }
}

Message TagClient::request(Message msg) {
  msg.id = next_id_++;
  msg.is_reply = false;
  Message reply = link().exchange(msg);
  if (!reply.is_reply || reply.id != msg.id) {
    throw TransportError("reply does not echo correlation id " + std::to_string(msg.id));
  }
  return reply;
}

Message TagClient::checked(Message msg) {
  Message reply = request(std::move(msg));
  if (!reply.ok) throw RemoteError(reply.error);
  return reply;
}

std::map<std::string, TagValue> TagClient::read_tags(const std::vector<std::string>& tags) {
  return checked(make_read(0, tags)).reply;
}

TagValue TagClient::read_tag(const std::string& tag) {
  auto r = read_tags({tag});
  auto it = r.find(tag);
  if (it == r.end()) throw RemoteError("reply missing tag " + tag);
  return it->second;
}

void TagClient::write_tags(const std::vector<TagValue>& values) { checked(make_write(0, values)); }

void TagClient::write_tag(const TagValue& value) { write_tags({value}); }

std::map<std::string, TagValue> TagClient::status() { return checked(make_status(0)).reply; }

}  // namespace twinbed::tagbus
