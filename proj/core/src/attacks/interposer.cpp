#include "twinbed/attacks/interposer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "twinbed/common/log.hpp"
#include "twinbed/common/text.hpp"

namespace twinbed::attacks {

using tagbus::Bytes;
using tagbus::Message;
using tagbus::TapVerdict;

void MitmRule::validate() const {
  if (tag_pattern.empty()) throw std::invalid_argument("rule tag pattern must not be empty");
  const double v = transform.value;
  if (!std::isfinite(v)) throw std::invalid_argument("rule value must be finite");
  switch (transform.kind) {
    case MitmTransform::Kind::DropProb:
      if (v < 0.0 || v > 1.0) throw std::invalid_argument("drop_prob must lie in [0, 1]");
      break;
    case MitmTransform::Kind::DelayMs:
      if (v < 0.0) throw std::invalid_argument("delay_ms must be >= 0");
      break;
    default:
      break;
  }
}

Interposer::Interposer(std::uint64_t seed, Clock clock) : rng_(seed), clock_(std::move(clock)) {}

void Interposer::start_mitm(std::vector<MitmRule> rules) {
  for (const auto& r : rules) r.validate();
  std::lock_guard lock(mutex_);
  mitm_ = true;
  rules_ = std::move(rules);
}

void Interposer::stop_mitm() {
  std::lock_guard lock(mutex_);
  mitm_ = false;
  rules_.clear();
}

bool Interposer::mitm_active() const {
  std::lock_guard lock(mutex_);
  return mitm_;
}

void Interposer::add_rule(MitmRule rule) {
  rule.validate();
  std::lock_guard lock(mutex_);
  rules_.push_back(std::move(rule));
}

void Interposer::remove_rule(const MitmRule& rule) {
  std::lock_guard lock(mutex_);
  std::erase_if(rules_, [&](const MitmRule& r) {
    return r.tag_pattern == rule.tag_pattern && r.op == rule.op && r.transform.kind == rule.transform.kind;
  });
}

void Interposer::start_dos(double drop_prob, std::int64_t delay_ms) {
  if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) throw std::invalid_argument("drop_prob must lie in [0, 1]");
  if (delay_ms < 0) throw std::invalid_argument("delay_ms must be >= 0");
  std::lock_guard lock(mutex_);
  dos_ = true;
  dos_drop_ = drop_prob;
  dos_delay_ms_ = delay_ms;
}

void Interposer::stop_dos() {
  std::lock_guard lock(mutex_);
  dos_ = false;
}

void Interposer::start_record(std::int64_t duration_ms) {
  if (duration_ms <= 0) throw std::invalid_argument("record duration must be positive");
  std::lock_guard lock(mutex_);
  const auto now = clock_();
  record_start_ = now;
  record_end_ = now + duration_ms;
  recorded_.clear();
}

void Interposer::start_play() {
  std::lock_guard lock(mutex_);
  if (recorded_.empty() || !record_end_) throw AttackFailed("nothing recorded to replay");
  const auto now = clock_();
  if (now < *record_end_) throw AttackFailed("replay requested before the recording window closed");
  play_start_ = now;
}

void Interposer::stop_play() {
  std::lock_guard lock(mutex_);
  play_start_.reset();
}

bool Interposer::recording() const {
  std::lock_guard lock(mutex_);
  if (!record_start_) return false;
  const auto now = clock_();
  return now >= *record_start_ && now < *record_end_;
}

bool Interposer::playing() const {
  std::lock_guard lock(mutex_);
  return play_start_.has_value();
}

InterposerStats Interposer::stats() const {
  std::lock_guard lock(mutex_);
  return stats_;
}

namespace {
bool matches(const MitmRule& r, const Message& m) {
  if (r.op && *r.op != m.op) return false;
  auto hit = [&](const std::string& name) { return glob_match(r.tag_pattern, name); };
  for (const auto& t : m.tags) {
    if (hit(t)) return true;
  }
  for (const auto& [k, v] : m.writes) {
    if (hit(k)) return true;
  }
  for (const auto& [k, v] : m.reply) {
    if (hit(k)) return true;
  }
  return false;
}

bool transform_values(const MitmRule& r, std::map<std::string, tagbus::TagValue>& values) {
  bool changed = false;
  for (auto& [name, tv] : values) {
    if (!glob_match(r.tag_pattern, name)) continue;
    auto v = tv.as_double();
    if (!v) continue;
    const double next = r.transform.kind == MitmTransform::Kind::SetValue ? r.transform.value : *v * r.transform.value;
    if (std::holds_alternative<std::int64_t>(tv.value)) {
      tv.value = static_cast<std::int64_t>(std::llround(next));
    } else if (std::holds_alternative<bool>(tv.value)) {
      tv.value = next != 0.0;
    } else {
      tv.value = next;
    }
    changed = true;
  }
  return changed;
}
}  // namespace

TapVerdict Interposer::apply_rules(Bytes& frame, bool is_reply) {
  TapVerdict verdict;
  if (!mitm_ || rules_.empty()) return verdict;
  Message msg;
  try {
    msg = tagbus::decode_frame(frame).message;
  } catch (const tagbus::ProtocolError&) {
    return verdict;
  }
  bool changed = false;
  for (const auto& r : rules_) {
    if (!matches(r, msg)) continue;
    switch (r.transform.kind) {
      case MitmTransform::Kind::SetValue:
      case MitmTransform::Kind::Scale:
        changed |= transform_values(r, is_reply ? msg.reply : msg.writes);
        break;
      case MitmTransform::Kind::DelayMs:
        verdict.delay_ms += static_cast<std::int64_t>(r.transform.value);
        break;
      case MitmTransform::Kind::DropProb:
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < r.transform.value) verdict.drop = true;
        break;
    }
  }
  if (changed) {
    frame = tagbus::encode_frame(msg);
    ++stats_.rewritten;
  }
  return verdict;
}

TapVerdict Interposer::on_request(Bytes& frame) {
  std::lock_guard lock(mutex_);
  ++stats_.frames;
  TapVerdict verdict = apply_rules(frame, false);
  if (dos_) {
    if (dos_drop_ > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < dos_drop_) verdict.drop = true;
    verdict.delay_ms += dos_delay_ms_;
  }
  if (verdict.drop) ++stats_.dropped;
  if (verdict.delay_ms > 0) ++stats_.delayed;
  return verdict;
}

TapVerdict Interposer::on_reply(Bytes& frame) {
  std::lock_guard lock(mutex_);
  ++stats_.frames;
  const auto now = clock_();
  const bool rec = record_start_ && now >= *record_start_ && now < *record_end_;
  if (rec || play_start_) {
    try {
      Message msg = tagbus::decode_frame(frame).message;
      if (rec) record(msg, now);
      if (play_start_ && replay_into(msg, now)) {
        frame = tagbus::encode_frame(msg);
        ++stats_.replayed;
      }
    } catch (const tagbus::ProtocolError& e) {
      log::debug("attacks", std::string("replay skipped an unparsable frame: ") + e.what());
    }
  }
  TapVerdict verdict = apply_rules(frame, true);
  if (verdict.drop) ++stats_.dropped;
  if (verdict.delay_ms > 0) ++stats_.delayed;
  return verdict;
}

void Interposer::record(const Message& reply, std::int64_t now) {
  if (!reply.ok) return;
  for (const auto& [name, tv] : reply.reply) {
    auto& series = recorded_[name];
    if (!series.empty() && series.back().value.timestamp_ms == tv.timestamp_ms) continue;
    series.push_back({now, tv});
  }
}

bool Interposer::replay_into(Message& reply, std::int64_t now) {
  if (!reply.ok) return false;
  const std::int64_t window = *record_end_ - *record_start_;
  const std::int64_t elapsed = std::max<std::int64_t>(0, now - *play_start_);
  const std::int64_t cycle = elapsed / window;
  const std::int64_t at = *record_start_ + elapsed % window;
  const std::int64_t shift = *play_start_ - *record_start_ + cycle * window;
  bool changed = false;
  for (auto& [name, tv] : reply.reply) {
    auto it = recorded_.find(name);
    if (it == recorded_.end() || it->second.empty()) continue;
    const auto& series = it->second;
    auto pos = std::upper_bound(series.begin(), series.end(), at,
                                [](std::int64_t t, const Recorded& r) { return t < r.at_ms; });
    const Recorded& src = pos == series.begin() ? series.front() : *std::prev(pos);
    tv.value = src.value.value;
    tv.quality = src.value.quality;
    tv.timestamp_ms = src.value.timestamp_ms + shift;
    changed = true;
  }
  return changed;
}

MitmProxy::MitmProxy(std::string listen_host, std::uint16_t listen_port, std::string upstream_host,
                     std::uint16_t upstream_port, Interposer& interposer)
    : upstream_host_(std::move(upstream_host)),
      upstream_port_(upstream_port),
      interposer_(interposer),
      listener_(listen_host, listen_port) {
  acceptor_ = std::thread([this] { accept_loop(); });
}

MitmProxy::~MitmProxy() { stop(); }

void MitmProxy::stop() {
  if (stopping_.exchange(true)) return;
  listener_.close();
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(workers_mutex_);
    for (auto& s : open_) s->shutdown();
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

void MitmProxy::accept_loop() {
  while (!stopping_) {
    tagbus::Socket s = listener_.accept();
    if (!s.valid()) break;
    std::lock_guard lock(workers_mutex_);
    if (stopping_) break;
    workers_.emplace_back([this, sock = std::move(s)]() mutable { serve(std::move(sock)); });
  }
}

void MitmProxy::serve(tagbus::Socket downstream_sock) {
  auto down = std::make_shared<tagbus::Socket>(std::move(downstream_sock));
  std::shared_ptr<tagbus::Socket> up;
  try {
    up = std::make_shared<tagbus::Socket>(tagbus::connect_tcp(upstream_host_, upstream_port_, 2000));
  } catch (const std::exception& e) {
    log::warn("mitm", std::string("upstream unreachable: ") + e.what());
    down->shutdown();
    return;
  }
  {
    std::lock_guard lock(workers_mutex_);
    open_.push_back(down);
    open_.push_back(up);
  }
  auto pump = [this](tagbus::Socket& from, tagbus::Socket& to, bool requests) {
    try {
      while (!stopping_) {
        auto frame = from.read_frame();
        if (!frame) break;
        auto verdict = requests ? interposer_.on_request(*frame) : interposer_.on_reply(*frame);
        if (verdict.drop) continue;
        if (verdict.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(verdict.delay_ms));
        to.send_all(*frame);
      }
    } catch (const std::exception& e) {
      if (!stopping_) log::debug("mitm", std::string("stream ended: ") + e.what());
    }
    from.shutdown();
    to.shutdown();
  };
  std::thread replies([&] { pump(*up, *down, false); });
  pump(*down, *up, true);
  replies.join();
  std::lock_guard lock(workers_mutex_);
  std::erase(open_, down);
  std::erase(open_, up);
}

}  // namespace twinbed::attacks
