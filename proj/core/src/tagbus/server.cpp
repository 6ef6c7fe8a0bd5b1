#include "twinbed/tagbus/server.hpp"

#include "twinbed/common/log.hpp"

namespace twinbed::tagbus {

Message dispatch(const Handler& handler, const Message& request) {
  try {
    Message reply = handler(request);
    reply.op = request.op;
    reply.id = request.id;
    reply.is_reply = true;
    reply.tags.clear();
    reply.writes.clear();
    return reply;
  } catch (const std::exception& e) {
    return make_error_reply(request, e.what());
  }
}

TagServer::TagServer(Handler handler, std::uint16_t port, std::string host)
    : handler_(std::move(handler)), listener_(host, port) {
  acceptor_ = std::thread([this] { accept_loop(); });
}

TagServer::~TagServer() { stop(); }

void TagServer::stop() {
  if (stopping_.exchange(true)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::list<std::thread> workers;
  {
    std::lock_guard lock(mutex_);
    for (auto& c : connections_) c->shutdown();
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

void TagServer::accept_loop() {
  while (!stopping_) {
    Socket s = listener_.accept();
    if (!s.valid()) break;
    auto conn = std::make_shared<Socket>(std::move(s));
    std::lock_guard lock(mutex_);
    if (stopping_) break;
    connections_.push_back(conn);
    workers_.emplace_back([this, conn] { serve_connection(conn); });
  }
}

void TagServer::serve_connection(std::shared_ptr<Socket> conn) {
  try {
    while (!stopping_) {
      auto frame = conn->read_frame();
      if (!frame) break;
      Message request;
      try {
        request = decode_frame(*frame).message;
      } catch (const ProtocolError& e) {
        log::warn("tagbus", std::string("dropping connection after bad frame: ") + e.what());
        break;
      }
      Bytes bytes;
      try {
        bytes = encode_frame(dispatch(handler_, request));
      } catch (const ProtocolError& e) {
        bytes = encode_frame(make_error_reply(request, e.what()));
      }
      conn->send_all(bytes);
    }
  } catch (const std::exception& e) {
    if (!stopping_) log::debug("tagbus", std::string("connection ended: ") + e.what());
  }
  conn->shutdown();
  std::lock_guard lock(mutex_);
  connections_.remove(conn);
}

}  // namespace twinbed::tagbus
