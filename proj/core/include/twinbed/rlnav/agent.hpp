#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "twinbed/common/config.hpp"
#include "twinbed/rlnav/env.hpp"

namespace twinbed::rlnav {

class TrainDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class PolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using QValues = std::array<double, kActionCount>;

// One-hidden-layer ReLU network trained with Adam.
class Mlp {
 public:
  Mlp() = default;
  Mlp(int inputs, int hidden, int outputs, std::mt19937_64& rng);

  int inputs() const { return in_; }
  int hidden() const { return hid_; }
  int outputs() const { return out_; }

  void forward(std::span<const float> x, std::span<double> out) const;

  // Accumulates d(loss)/d(params) for one sample given d(loss)/d(output).
  void backward(std::span<const float> x, std::span<const double> grad_out);
  void zero_grad();
  // Adam step with gradients averaged over `batch` samples.
  void adam_step(double lr, int batch);

  std::vector<double>& params() { return w_; }
  const std::vector<double>& params() const { return w_; }
  bool finite() const;

 private:
  std::size_t w1(int h, int i) const { return static_cast<std::size_t>(h) * in_ + i; }
  std::size_t b1(int h) const { return static_cast<std::size_t>(hid_) * in_ + h; }
  std::size_t w2(int o, int h) const { return static_cast<std::size_t>(hid_) * (in_ + 1) + static_cast<std::size_t>(o) * hid_ + h; }
  std::size_t b2(int o) const { return static_cast<std::size_t>(hid_) * (in_ + 1) + static_cast<std::size_t>(out_) * hid_ + o; }

  int in_ = 0, hid_ = 0, out_ = 0;
  std::vector<double> w_, g_, m_, v_;
  std::int64_t t_ = 0;
  mutable std::vector<double> act_;
};

struct TrainConfig {
  std::int64_t steps = 200000;
  double learning_rate = 1e-3;
  int batch = 32;
  int replay_capacity = 50000;
  int learning_starts = 1000;
  int train_every = 1;
  int target_sync_period = 250;
  int hidden = 64;
  double epsilon_start = 0.50;
  double epsilon_end = 0.01;
  double epsilon_decay_fraction = 0.80;
  double huber_delta = 10.0;
  bool tabular = false;
  double tabular_alpha = 0.1;
  std::uint64_t seed = 1;
  // Greedy check of the online estimator every this many steps on its own
  // episode seeds; the best one is returned. 0 returns the final estimator.
  int checkpoint_every = 5000;
  int checkpoint_episodes = 200;
  std::uint64_t checkpoint_seed = 500000;

  void validate() const;
  // Linear decay over the first decay fraction of training, then flat.
  double epsilon(std::int64_t step) const;
};

// Both the env and trainer settings: steps, learning_rate, batch, ...,
// zones, zone_radius, window, max_steps, normalization = total | free.
TrainConfig train_config_from(const KeyValueConfig& cfg);
EnvConfig env_config_from(const KeyValueConfig& cfg);

// Greedy action selection over an observation.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual QValues q_values(const Observation& obs) const = 0;
  Action act(const Observation& obs) const;
  virtual void save(const std::filesystem::path& path) const = 0;
};

// Online and target estimators; target parameters change only by copy.
class DoubleQLearner final : public Policy {
 public:
  DoubleQLearner(const TrainConfig& cfg, int feature_size, int map_width, int map_height);

  QValues q_values(const Observation& obs) const override;
  QValues target_q_values(const Observation& obs) const;
  void sync_target();
  bool tabular() const { return tabular_; }

  struct Transition {
    std::vector<float> s;
    int a = 0;
    double r = 0.0;
    std::vector<float> s2;
    bool terminal = false;
  };
  // Returns the mean loss over the batch.
  double learn(const std::vector<const Transition*>& batch, double gamma);

  void save(const std::filesystem::path& path) const override;
  static std::unique_ptr<DoubleQLearner> load(const std::filesystem::path& path);

  int map_width() const { return map_w_; }
  int map_height() const { return map_h_; }

 private:
  QValues eval(const Mlp& net, std::span<const float> x) const;
  static std::string key(std::span<const float> x);

  TrainConfig cfg_;
  bool tabular_;
  int features_;
  int map_w_, map_h_;
  Mlp online_, target_;
  std::unordered_map<std::string, QValues> q_online_, q_target_;
};

struct TrainStats {
  std::int64_t steps = 0;
  int episodes = 0;
  int successes = 0;
  double last_loss = 0.0;
  std::int64_t best_checkpoint_step = 0;
  double best_checkpoint_success = -1.0;
};

using ProgressFn = std::function<void(const TrainStats&)>;

// Double Q-learning with experience replay and epsilon-greedy exploration.
// Episode seeds are drawn from the training seed. Throws TrainDiverged.
std::unique_ptr<DoubleQLearner> train(NavEnv& env, const TrainConfig& cfg, TrainStats* stats = nullptr,
                                      const ProgressFn& progress = {});

struct EpisodeReport {
  int episode = 0;
  int steps = 0;
  Outcome outcome = Outcome::Running;
  double shaped_return = 0.0;
};

struct EvalReport {
  std::vector<EpisodeReport> episodes;
  double success_rate() const;
};

// Greedy (deterministic) or epsilon-greedy rollouts; episode i resets with
// seed base_seed + i.
EvalReport evaluate(NavEnv& env, const Policy& policy, int episodes, bool deterministic,
                    std::uint64_t base_seed = 1000000, double epsilon = 0.05);

// Uniformly random actions; the untrained baseline.
EvalReport evaluate_random(NavEnv& env, int episodes, std::uint64_t seed, std::uint64_t base_seed = 1000000);

void write_eval_csv(const EvalReport& report, const std::filesystem::path& path);

}  // namespace twinbed::rlnav
