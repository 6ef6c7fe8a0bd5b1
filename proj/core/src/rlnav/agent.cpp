#include "twinbed/rlnav/agent.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "twinbed/common/log.hpp"
#include "twinbed/common/text.hpp"

namespace twinbed::rlnav {

using nlohmann::json;

Mlp::Mlp(int inputs, int hidden, int outputs, std::mt19937_64& rng) : in_(inputs), hid_(hidden), out_(outputs) {
  const auto n = static_cast<std::size_t>(hid_) * (in_ + 1) + static_cast<std::size_t>(out_) * (hid_ + 1);
  w_.assign(n, 0.0);
  g_.assign(n, 0.0);
  m_.assign(n, 0.0);
  v_.assign(n, 0.0);
  std::uniform_real_distribution<double> u1(-std::sqrt(6.0 / in_), std::sqrt(6.0 / in_));
  std::uniform_real_distribution<double> u2(-std::sqrt(6.0 / (hid_ + out_)), std::sqrt(6.0 / (hid_ + out_)));
  for (int h = 0; h < hid_; ++h) {
    for (int i = 0; i < in_; ++i) w_[w1(h, i)] = u1(rng);
  }
  for (int o = 0; o < out_; ++o) {
    for (int h = 0; h < hid_; ++h) w_[w2(o, h)] = u2(rng);
  }
  act_.assign(static_cast<std::size_t>(hid_), 0.0);
}

void Mlp::forward(std::span<const float> x, std::span<double> out) const {
  for (int h = 0; h < hid_; ++h) {
    double a = w_[b1(h)];
    const double* row = &w_[w1(h, 0)];
    for (int i = 0; i < in_; ++i) a += row[i] * x[static_cast<std::size_t>(i)];
    act_[static_cast<std::size_t>(h)] = a > 0.0 ? a : 0.0;
  }
  for (int o = 0; o < out_; ++o) {
    double a = w_[b2(o)];
    const double* row = &w_[w2(o, 0)];
    for (int h = 0; h < hid_; ++h) a += row[h] * act_[static_cast<std::size_t>(h)];
    out[static_cast<std::size_t>(o)] = a;
  }
}

void Mlp::backward(std::span<const float> x, std::span<const double> grad_out) {
  std::vector<double> out(static_cast<std::size_t>(out_));
  forward(x, out);
  for (int h = 0; h < hid_; ++h) {
    const double act = act_[static_cast<std::size_t>(h)];
    double dh = 0.0;
    for (int o = 0; o < out_; ++o) {
      const double go = grad_out[static_cast<std::size_t>(o)];
      if (go == 0.0) continue;
      g_[w2(o, h)] += go * act;
      dh += go * w_[w2(o, h)];
    }
    if (act <= 0.0 || dh == 0.0) continue;
    g_[b1(h)] += dh;
    double* grow = &g_[w1(h, 0)];
    for (int i = 0; i < in_; ++i) grow[i] += dh * x[static_cast<std::size_t>(i)];
  }
  for (int o = 0; o < out_; ++o) g_[b2(o)] += grad_out[static_cast<std::size_t>(o)];
}

void Mlp::zero_grad() { std::fill(g_.begin(), g_.end(), 0.0); }

void Mlp::adam_step(double lr, int batch) {
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  const double scale = 1.0 / batch;
  for (std::size_t p = 0; p < w_.size(); ++p) {
    const double g = g_[p] * scale;
    m_[p] = beta1 * m_[p] + (1.0 - beta1) * g;
    v_[p] = beta2 * v_[p] + (1.0 - beta2) * g * g;
    w_[p] -= lr * (m_[p] / c1) / (std::sqrt(v_[p] / c2) + eps);
  }
}

bool Mlp::finite() const {
  return std::all_of(w_.begin(), w_.end(), [](double v) { return std::isfinite(v); });
}

void TrainConfig::validate() const {
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch < 1) throw ConfigError("batch must be >= 1");
  if (replay_capacity < batch) throw ConfigError("replay_capacity must be >= batch");
  if (learning_starts < 0 || train_every < 1) throw ConfigError("learning_starts >= 0 and train_every >= 1");
  if (target_sync_period < 1) throw ConfigError("target_sync_period must be >= 1");
  if (checkpoint_every < 0 || checkpoint_episodes < 1) {
    throw ConfigError("checkpoint_every >= 0 and checkpoint_episodes >= 1");
  }
  if (hidden < 1) throw ConfigError("hidden must be >= 1");
  if (!(epsilon_start >= epsilon_end && epsilon_end >= 0.0 && epsilon_start <= 1.0)) {
    throw ConfigError("epsilon must satisfy 1 >= start >= end >= 0");
  }
  if (!(epsilon_decay_fraction > 0.0 && epsilon_decay_fraction <= 1.0)) {
    throw ConfigError("epsilon_decay_fraction must lie in (0, 1]");
  }
  if (!(huber_delta > 0.0)) throw ConfigError("huber_delta must be > 0");
  if (!(tabular_alpha > 0.0 && tabular_alpha <= 1.0)) throw ConfigError("tabular_alpha must lie in (0, 1]");
}

double TrainConfig::epsilon(std::int64_t step) const {
  const double horizon = epsilon_decay_fraction * static_cast<double>(steps);
  const double frac = std::clamp(static_cast<double>(step) / horizon, 0.0, 1.0);
  return epsilon_start + (epsilon_end - epsilon_start) * frac;
}

TrainConfig train_config_from(const KeyValueConfig& cfg) {
  TrainConfig c;
  c.steps = cfg.get_int("steps", c.steps);
  c.learning_rate = cfg.get_double("learning_rate", c.learning_rate);
  c.batch = static_cast<int>(cfg.get_int("batch", c.batch));
  c.replay_capacity = static_cast<int>(cfg.get_int("replay_capacity", c.replay_capacity));
  c.learning_starts = static_cast<int>(cfg.get_int("learning_starts", c.learning_starts));
  c.train_every = static_cast<int>(cfg.get_int("train_every", c.train_every));
  c.target_sync_period = static_cast<int>(cfg.get_int("target_sync_period", c.target_sync_period));
  c.hidden = static_cast<int>(cfg.get_int("hidden", c.hidden));
  c.epsilon_start = cfg.get_double("epsilon_start", c.epsilon_start);
  c.epsilon_end = cfg.get_double("epsilon_end", c.epsilon_end);
  c.epsilon_decay_fraction = cfg.get_double("epsilon_decay_fraction", c.epsilon_decay_fraction);
  c.huber_delta = cfg.get_double("huber_delta", c.huber_delta);
  c.tabular = cfg.get_bool("tabular", c.tabular);
  c.tabular_alpha = cfg.get_double("tabular_alpha", c.tabular_alpha);
  c.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<std::int64_t>(c.seed)));
  c.checkpoint_every = static_cast<int>(cfg.get_int("checkpoint_every", c.checkpoint_every));
  c.checkpoint_episodes = static_cast<int>(cfg.get_int("checkpoint_episodes", c.checkpoint_episodes));
  c.checkpoint_seed =
      static_cast<std::uint64_t>(cfg.get_int("checkpoint_seed", static_cast<std::int64_t>(c.checkpoint_seed)));
  c.validate();
  return c;
}

EnvConfig env_config_from(const KeyValueConfig& cfg) {
  EnvConfig e;
  e.zones = static_cast<int>(cfg.get_int("zones", e.zones));
  e.zone_radius = static_cast<int>(cfg.get_int("zone_radius", e.zone_radius));
  e.window = static_cast<int>(cfg.get_int("window", e.window));
  e.rewards.max_steps = static_cast<int>(cfg.get_int("max_steps", e.rewards.max_steps));
  e.rewards.gamma = cfg.get_double("gamma", e.rewards.gamma);
  e.rewards.r_goal = cfg.get_double("r_goal", e.rewards.r_goal);
  e.rewards.r_collide = cfg.get_double("r_collide", e.rewards.r_collide);
  e.rewards.r_timeout = cfg.get_double("r_timeout", e.rewards.r_timeout);
  const auto norm = cfg.get_string("normalization", "total");
  if (norm == "total") {
    e.normalization = Normalization::TotalCells;
  } else if (norm == "free") {
    e.normalization = Normalization::FreeCells;
  } else {
    throw ConfigError(cfg.origin() + ": normalization must be total or free");
  }
  if (cfg.has("fixed_zones")) e.fixed_zones = parse_zones(cfg.require_string("fixed_zones"));
  e.validate();
  return e;
}

namespace {
int argmax(const QValues& q) {
  return static_cast<int>(std::max_element(q.begin(), q.end()) - q.begin());
}
}  // namespace

Action Policy::act(const Observation& obs) const { return static_cast<Action>(argmax(q_values(obs))); }

DoubleQLearner::DoubleQLearner(const TrainConfig& cfg, int feature_size, int map_width, int map_height)
    : cfg_(cfg), tabular_(cfg.tabular), features_(feature_size), map_w_(map_width), map_h_(map_height) {
  if (!tabular_) {
    std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
    online_ = Mlp(features_, cfg.hidden, kActionCount, rng);
    target_ = online_;
  }
}

std::string DoubleQLearner::key(std::span<const float> x) {
  std::string k;
  for (float v : x) {
    k += format_double(v);
    k += ',';
  }
  return k;
}

QValues DoubleQLearner::eval(const Mlp& net, std::span<const float> x) const {
  QValues q{};
  net.forward(x, q);
  return q;
}

QValues DoubleQLearner::q_values(const Observation& obs) const {
  auto f = obs.features(map_w_, map_h_);
  if (tabular_) {
    auto it = q_online_.find(key(f));
    return it == q_online_.end() ? QValues{} : it->second;
  }
  return eval(online_, f);
}

QValues DoubleQLearner::target_q_values(const Observation& obs) const {
  auto f = obs.features(map_w_, map_h_);
  if (tabular_) {
    auto it = q_target_.find(key(f));
    return it == q_target_.end() ? QValues{} : it->second;
  }
  return eval(target_, f);
}

void DoubleQLearner::sync_target() {
  if (tabular_) {
    q_target_ = q_online_;
  } else {
    target_ = online_;
  }
}

double DoubleQLearner::learn(const std::vector<const Transition*>& batch, double gamma) {
  double loss = 0.0;
  if (tabular_) {
    for (const auto* t : batch) {
      auto& q = q_online_[key(t->s)];
      double y = t->r;
      if (!t->terminal) {
        auto it2 = q_online_.find(key(t->s2));
        const QValues q2 = it2 == q_online_.end() ? QValues{} : it2->second;
        auto itt = q_target_.find(key(t->s2));
        const QValues qt = itt == q_target_.end() ? QValues{} : itt->second;
        y += gamma * qt[static_cast<std::size_t>(argmax(q2))];
      }
      const double delta = y - q[static_cast<std::size_t>(t->a)];
      q[static_cast<std::size_t>(t->a)] += cfg_.tabular_alpha * delta;
      loss += 0.5 * delta * delta;
    }
    return loss / static_cast<double>(batch.size());
  }

  online_.zero_grad();
  QValues q{}, q2{}, qt{};
  for (const auto* t : batch) {
    online_.forward(t->s, q);
    double y = t->r;
    if (!t->terminal) {
      online_.forward(t->s2, q2);
      target_.forward(t->s2, qt);
      y += gamma * qt[static_cast<std::size_t>(argmax(q2))];
    }
    const double delta = q[static_cast<std::size_t>(t->a)] - y;
    const double d = cfg_.huber_delta;
    loss += std::abs(delta) <= d ? 0.5 * delta * delta : d * (std::abs(delta) - 0.5 * d);
    QValues grad{};
    grad[static_cast<std::size_t>(t->a)] = std::clamp(delta, -d, d);
    online_.backward(t->s, grad);
  }
  online_.adam_step(cfg_.learning_rate, static_cast<int>(batch.size()));
  loss /= static_cast<double>(batch.size());
  if (!std::isfinite(loss) || !online_.finite()) throw TrainDiverged("training loss became non-finite");
  return loss;
}

void DoubleQLearner::save(const std::filesystem::path& path) const {
  json j;
  j["kind"] = tabular_ ? "tabular" : "mlp";
  j["features"] = features_;
  j["map_width"] = map_w_;
  j["map_height"] = map_h_;
  if (tabular_) {
    json table = json::object();
    for (const auto& [k, q] : q_online_) table[k] = q;
    j["table"] = std::move(table);
  } else {
    j["hidden"] = online_.hidden();
    j["params"] = online_.params();
  }
  std::ofstream out(path);
  if (!out) throw PolicyError("cannot write policy " + path.string());
  out << j.dump() << '\n';
}

std::unique_ptr<DoubleQLearner> DoubleQLearner::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PolicyError("cannot open policy " + path.string());
  try {
    const json j = json::parse(in);
    TrainConfig cfg;
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "mlp" && kind != "tabular") throw PolicyError("unknown policy kind " + kind);
    cfg.tabular = kind == "tabular";
    if (!cfg.tabular) cfg.hidden = j.at("hidden").get<int>();
    auto p = std::make_unique<DoubleQLearner>(cfg, j.at("features").get<int>(), j.at("map_width").get<int>(),
                                              j.at("map_height").get<int>());
    if (cfg.tabular) {
      for (const auto& [k, q] : j.at("table").items()) p->q_online_[k] = q.get<QValues>();
    } else {
      auto params = j.at("params").get<std::vector<double>>();
      if (params.size() != p->online_.params().size()) throw PolicyError("policy parameter count mismatch");
      p->online_.params() = std::move(params);
    }
    p->sync_target();
    return p;
  } catch (const json::exception& e) {
    throw PolicyError("malformed policy " + path.string() + ": " + e.what());
  }
}

std::unique_ptr<DoubleQLearner> train(NavEnv& env, const TrainConfig& cfg, TrainStats* stats_out,
                                      const ProgressFn& progress) {
  cfg.validate();
  const auto& map = env.map();
  auto learner = std::make_unique<DoubleQLearner>(cfg, env.feature_size(), map.width(), map.height());
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, kActionCount - 1);

  std::vector<DoubleQLearner::Transition> replay;
  replay.reserve(static_cast<std::size_t>(cfg.replay_capacity));
  std::size_t replay_next = 0;
  const double gamma = env.config().rewards.gamma;

  TrainStats stats;
  NavEnv probe(env.map(), env.config());
  std::unique_ptr<DoubleQLearner> best;
  auto checkpoint = [&](std::int64_t at) {
    const double rate = evaluate(probe, *learner, cfg.checkpoint_episodes, true, cfg.checkpoint_seed).success_rate();
    if (rate >= stats.best_checkpoint_success) {
      stats.best_checkpoint_success = rate;
      stats.best_checkpoint_step = at;
      best = std::make_unique<DoubleQLearner>(*learner);
    }
  };

  auto obs = env.reset(rng());
  auto s = obs.features(map.width(), map.height());
  std::vector<const DoubleQLearner::Transition*> batch;
  for (std::int64_t step = 0; step < cfg.steps; ++step) {
    int a;
    if (unit(rng) < cfg.epsilon(step)) {
      a = random_action(rng);
    } else {
      a = static_cast<int>(learner->act(obs));
    }
    auto res = env.step(static_cast<Action>(a));
    auto s2 = res.obs.features(map.width(), map.height());
    DoubleQLearner::Transition tr{s, a, res.reward, s2, res.terminated};
    if (replay.size() < static_cast<std::size_t>(cfg.replay_capacity)) {
      replay.push_back(std::move(tr));
    } else {
      replay[replay_next] = std::move(tr);
    }
    replay_next = (replay_next + 1) % static_cast<std::size_t>(cfg.replay_capacity);

    if (res.terminated || res.truncated) {
      ++stats.episodes;
      if (res.outcome == Outcome::Goal) ++stats.successes;
      obs = env.reset(rng());
      s = obs.features(map.width(), map.height());
    } else {
      obs = std::move(res.obs);
      s = std::move(s2);
    }

    if (step >= cfg.learning_starts && step % cfg.train_every == 0 &&
        replay.size() >= static_cast<std::size_t>(cfg.batch)) {
      std::uniform_int_distribution<std::size_t> pick(0, replay.size() - 1);
      batch.clear();
      for (int b = 0; b < cfg.batch; ++b) batch.push_back(&replay[pick(rng)]);
      stats.last_loss = learner->learn(batch, gamma);
    }
    if ((step + 1) % cfg.target_sync_period == 0) learner->sync_target();
    stats.steps = step + 1;
    if (cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0) checkpoint(step + 1);
    if (progress && (step + 1) % 10000 == 0) progress(stats);
  }
  if (cfg.checkpoint_every > 0 && cfg.steps % cfg.checkpoint_every != 0) checkpoint(cfg.steps);
  if (stats_out) *stats_out = stats;
  return best ? std::move(best) : std::move(learner);
}

double EvalReport::success_rate() const {
  if (episodes.empty()) return 0.0;
  const auto wins = std::count_if(episodes.begin(), episodes.end(),
                                  [](const EpisodeReport& e) { return e.outcome == Outcome::Goal; });
  return static_cast<double>(wins) / static_cast<double>(episodes.size());
}

namespace {
template <typename Choose>
EvalReport rollout(NavEnv& env, int episodes, std::uint64_t base_seed, Choose&& choose) {
  EvalReport report;
  for (int e = 0; e < episodes; ++e) {
    auto obs = env.reset(base_seed + static_cast<std::uint64_t>(e));
    EpisodeReport ep;
    ep.episode = e;
    while (true) {
      auto res = env.step(choose(obs));
      ep.shaped_return += res.reward;
      if (res.terminated || res.truncated) {
        ep.outcome = res.outcome;
        break;
      }
      obs = std::move(res.obs);
    }
    ep.steps = env.steps();
    report.episodes.push_back(ep);
  }
  return report;
}
}  // namespace

EvalReport evaluate(NavEnv& env, const Policy& policy, int episodes, bool deterministic, std::uint64_t base_seed,
                    double epsilon) {
  std::mt19937_64 rng(base_seed ^ 0xe7a1ULL);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> random_action(0, kActionCount - 1);
  return rollout(env, episodes, base_seed, [&](const Observation& obs) {
    if (!deterministic && unit(rng) < epsilon) return static_cast<Action>(random_action(rng));
    return policy.act(obs);
  });
}

EvalReport evaluate_random(NavEnv& env, int episodes, std::uint64_t seed, std::uint64_t base_seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> random_action(0, kActionCount - 1);
  return rollout(env, episodes, base_seed, [&](const Observation&) { return static_cast<Action>(random_action(rng)); });
}

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "episode,steps,outcome,shaped_return\n";
  for (const auto& e : report.episodes) {
    out << e.episode << ',' << e.steps << ',' << to_string(e.outcome) << ',' << format_double(e.shaped_return) << '\n';
  }
}

}  // namespace twinbed::rlnav
