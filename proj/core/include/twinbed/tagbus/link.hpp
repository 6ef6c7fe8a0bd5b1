#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "twinbed/tagbus/frame.hpp"
#include "twinbed/tagbus/server.hpp"
#include "twinbed/tagbus/socket.hpp"

namespace twinbed::tagbus {

// A request/reply channel to one tagbus endpoint.
class Link {
 public:
  virtual ~Link() = default;
  // Sends one request and returns its reply. Throws TransportError when no
  // reply arrives.
  virtual Message exchange(const Message& request) = 0;
};

// Link over a TCP connection; reconnects lazily after a transport failure.
class TcpLink final : public Link {
 public:
  TcpLink(std::string host, std::uint16_t port, int timeout_ms = 1000);
  Message exchange(const Message& request) override;

 private:
  std::string host_;
  std::uint16_t port_;
  int timeout_ms_;
  Socket sock_;
};

// What an interposer decided to do with one frame.
struct TapVerdict {
  bool drop = false;
  std::int64_t delay_ms = 0;
};

// Observes and may rewrite the raw frames crossing a link.
class FrameTap {
 public:
  virtual ~FrameTap() = default;
  virtual TapVerdict on_request(Bytes& frame) = 0;
  virtual TapVerdict on_reply(Bytes& frame) = 0;
};

// In-process link: every exchange is serialized to frames and parsed back,
// so the wire format and any interposed tap see exactly what TCP would carry.
// A frame delayed by at least `timeout_ms` counts as lost.
class LoopbackLink final : public Link {
 public:
  explicit LoopbackLink(Handler handler, std::int64_t timeout_ms = 1000)
      : handler_(std::move(handler)), timeout_ms_(timeout_ms) {}

  Message exchange(const Message& request) override;

  void set_tap(FrameTap* tap) { tap_ = tap; }
  FrameTap* tap() const { return tap_; }
  void set_timeout_ms(std::int64_t ms) { timeout_ms_ = ms; }
  // Simulates the far end being unreachable.
  void set_down(bool down) { down_ = down; }

 private:
  Handler handler_;
  std::int64_t timeout_ms_;
  FrameTap* tap_ = nullptr;
  bool down_ = false;
};

// Typed tag operations over a Link. Assigns correlation ids and checks that
// replies echo them. Not for simultaneous use from several threads.
class TagClient {
 public:
  explicit TagClient(std::unique_ptr<Link> link) : link_(std::move(link)) {}
  explicit TagClient(Link& link) : borrowed_(&link) {}

  std::map<std::string, TagValue> read_tags(const std::vector<std::string>& tags);
  TagValue read_tag(const std::string& tag);
  void write_tags(const std::vector<TagValue>& values);
  void write_tag(const TagValue& value);
  std::map<std::string, TagValue> status();

  // Raw exchange with id assignment and echo check; does not inspect `ok`.
  Message request(Message msg);

 private:
  Message checked(Message msg);
  Link& link() { return borrowed_ ? *borrowed_ : *link_; }

  std::unique_ptr<Link> link_;
  Link* borrowed_ = nullptr;
  std::uint64_t next_id_ = 1;
};

// Raised when the remote end answered with ok = false.
class RemoteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace twinbed::tagbus
