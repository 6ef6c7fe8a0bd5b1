#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "twinbed/tagbus/message.hpp"
#include "twinbed/tagbus/socket.hpp"

namespace twinbed::tagbus {

// Produces one reply per request. May be called from several connection
// threads at once; implementations guard their own state.
using Handler = std::function<Message(const Message&)>;

// Calls `handler` and converts any exception into an error reply.
Message dispatch(const Handler& handler, const Message& request);

// Multi-connection TCP tag server. Requests on one connection are handled in
// order; connections are served concurrently. A malformed frame closes only
// the offending connection.
class TagServer {
 public:
  TagServer(Handler handler, std::uint16_t port, std::string host = "127.0.0.1");
  ~TagServer();
  TagServer(const TagServer&) = delete;
  TagServer& operator=(const TagServer&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  void stop();

 private:
  void accept_loop();
  void serve_connection(std::shared_ptr<Socket> conn);

  Handler handler_;
  Listener listener_;
  std::atomic<bool> stopping_{false};
  std::mutex mutex_;
  std::list<std::shared_ptr<Socket>> connections_;
  std::list<std::thread> workers_;
  std::thread acceptor_;
};

}  // namespace twinbed::tagbus
