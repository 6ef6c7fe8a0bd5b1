#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>

#include "twinbed/tagbus/frame.hpp"

namespace twinbed::tagbus {

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Owning TCP socket descriptor.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket();
  Socket(Socket&& other) noexcept : fd_(other.release()) {}
  Socket& operator=(Socket&& other) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  int release() {
    int f = fd_;
    fd_ = -1;
    return f;
  }
  void close();
  // Unblocks any thread sitting in recv on this socket.
  void shutdown();

  void send_all(std::span<const std::uint8_t> bytes);
  // Reads one complete frame. Returns nullopt on orderly EOF at a frame
  // boundary; throws TransportError on errors, timeouts and mid-frame EOF.
  std::optional<Bytes> read_frame();
  void set_timeout_ms(int ms);

 private:
  bool read_exact(std::uint8_t* dst, std::size_t n, bool eof_ok);
  int fd_ = -1;
};

Socket connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms);

class Listener {
 public:
  Listener(const std::string& host, std::uint16_t port);
  std::uint16_t port() const { return port_; }
  // Blocks; returns an invalid socket once the listener has been closed.
  Socket accept();
  // Wakes a blocked accept(); the descriptor is released on destruction.
  void close() { sock_.shutdown(); }

 private:
  Socket sock_;
  std::uint16_t port_ = 0;
};

}  // namespace twinbed::tagbus
