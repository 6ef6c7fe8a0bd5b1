#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "twinbed/tagbus/link.hpp"
#include "twinbed/tagbus/socket.hpp"

namespace twinbed::attacks {

class AttackFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct MitmTransform {
  enum class Kind { SetValue, Scale, DelayMs, DropProb };
  Kind kind = Kind::SetValue;
  double value = 0.0;
};

struct MitmRule {
  std::string tag_pattern = "*";      // glob over tag names
  std::optional<tagbus::Op> op;       // unset matches every op
  MitmTransform transform;

  // Throws std::invalid_argument.
  void validate() const;
};

struct InterposerStats {
  std::uint64_t frames = 0;
  std::uint64_t rewritten = 0;
  std::uint64_t dropped = 0;
  std::uint64_t delayed = 0;
  std::uint64_t replayed = 0;
};

// Frame-level attacker sitting on one link. Inactive features leave frames
// untouched byte for byte. Thread-safe: each frame is handled under a lock.
class Interposer final : public tagbus::FrameTap {
 public:
  using Clock = std::function<std::int64_t()>;

  Interposer(std::uint64_t seed, Clock clock);

  // MITM: rules are applied in order to every matching frame.
  void start_mitm(std::vector<MitmRule> rules);
  void stop_mitm();
  bool mitm_active() const;
  void add_rule(MitmRule rule);
  // Removes rules equal in pattern, op and transform kind.
  void remove_rule(const MitmRule& rule);

  // DoS: drops each request with drop_prob and delays the rest.
  void start_dos(double drop_prob, std::int64_t delay_ms);
  void stop_dos();

  // Replay: records reply values for `duration_ms`, later substitutes them
  // into live replies, cycling through the window. Timestamps are shifted
  // forward by the record-to-play offset so the stream stays monotone.
  void start_record(std::int64_t duration_ms);
  void start_play();
  void stop_play();
  bool recording() const;
  bool playing() const;

  tagbus::TapVerdict on_request(tagbus::Bytes& frame) override;
  tagbus::TapVerdict on_reply(tagbus::Bytes& frame) override;

  InterposerStats stats() const;

 private:
  struct Recorded {
    std::int64_t at_ms;
    tagbus::TagValue value;
  };
  tagbus::TapVerdict apply_rules(tagbus::Bytes& frame, bool is_reply);
  void record(const tagbus::Message& reply, std::int64_t now);
  bool replay_into(tagbus::Message& reply, std::int64_t now);

  mutable std::mutex mutex_;
  std::mt19937_64 rng_;
  Clock clock_;
  bool mitm_ = false;
  std::vector<MitmRule> rules_;
  bool dos_ = false;
  double dos_drop_ = 0.0;
  std::int64_t dos_delay_ms_ = 0;
  std::optional<std::int64_t> record_start_, record_end_;
  std::map<std::string, std::vector<Recorded>> recorded_;
  std::optional<std::int64_t> play_start_;
  InterposerStats stats_;
};

// Transparent TCP interposer between tagbus clients and one upstream server.
// Frames are parsed off the stream, passed through the interposer and
// written on. Losing either side closes both.
class MitmProxy {
 public:
  MitmProxy(std::string listen_host, std::uint16_t listen_port, std::string upstream_host,
            std::uint16_t upstream_port, Interposer& interposer);
  ~MitmProxy();
  MitmProxy(const MitmProxy&) = delete;
  MitmProxy& operator=(const MitmProxy&) = delete;

  std::uint16_t port() const { return listener_.port(); }
  void stop();

 private:
  void accept_loop();
  void serve(tagbus::Socket downstream);

  std::string upstream_host_;
  std::uint16_t upstream_port_;
  Interposer& interposer_;
  tagbus::Listener listener_;
  std::atomic<bool> stopping_{false};
  std::thread acceptor_;
  std::mutex workers_mutex_;
  std::vector<std::thread> workers_;
  std::vector<std::shared_ptr<tagbus::Socket>> open_;
};

}  // namespace twinbed::attacks
