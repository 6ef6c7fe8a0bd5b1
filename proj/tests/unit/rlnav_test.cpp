#include <gtest/gtest.h>

#include <deque>
#include <filesystem>

#include "twinbed/rlnav/agent.hpp"
#include "twinbed/rlnav/env.hpp"

using namespace twinbed;
using namespace twinbed::rlnav;

namespace {

const std::filesystem::path kData = TWINBED_DATA_DIR;

GridMap reference_map() { return GridMap::load(kData / "maps/reference_20x20.map"); }

// Independent breadth-first search over free cells outside every zone.
bool bfs_reachable(const GridMap& m, const std::vector<RadiationZone>& zones, Cell from, Cell to) {
  auto blocked = [&](Cell c) {
    if (m.is_wall(c)) return true;
    for (const auto& z : zones) {
      const int dx = c.x - z.center.x, dy = c.y - z.center.y;
      if (dx * dx + dy * dy <= z.radius_cells * z.radius_cells) return true;
    }
    return false;
  };
  std::vector<bool> seen(static_cast<std::size_t>(m.cell_count()), false);
  std::deque<Cell> q{from};
  seen[static_cast<std::size_t>(from.y * m.width() + from.x)] = true;
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop_front();
    if (c == to) return true;
    for (Cell n : {Cell{c.x + 1, c.y}, Cell{c.x - 1, c.y}, Cell{c.x, c.y + 1}, Cell{c.x, c.y - 1}}) {
      if (blocked(n)) continue;
      auto s = seen[static_cast<std::size_t>(n.y * m.width() + n.x)];
      if (!s) {
        s = true;
        q.push_back(n);
      }
    }
  }
  return false;
}

}  // namespace

TEST(GridMap, ParsesReferenceMap) {
  const auto m = reference_map();
  EXPECT_EQ(m.width(), 20);
  EXPECT_EQ(m.height(), 20);
  EXPECT_FALSE(m.is_wall(m.start()));
  EXPECT_FALSE(m.is_wall(m.goal()));
}

TEST(GridMap, RejectsBadMaps) {
  EXPECT_THROW(GridMap::parse("###\n#S#\n###\n"), MapError);
  EXPECT_THROW(GridMap::parse("####\n#SG.\n####\n"), MapError);
  EXPECT_THROW(GridMap::parse("#####\n#SGx#\n#####\n"), MapError);
}

TEST(NavEnv, SameSeedSameEpisode) {
  NavEnv a(reference_map()), b(reference_map());
  const auto oa = a.reset(11);
  const auto ob = b.reset(11);
  EXPECT_EQ(oa, ob);
  EXPECT_EQ(a.zones(), b.zones());
  EXPECT_EQ(a.zones().size(), 3u);
}

TEST(NavEnv, NoZonesMaskShowsWallsOnly) {
  EnvConfig cfg;
  cfg.zones = 0;
  NavEnv env(reference_map(), cfg);
  const auto obs = env.reset(1);
  const int half = obs.window / 2;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) {
      const Cell c{obs.curr.x + dx, obs.curr.y + dy};
      EXPECT_EQ(obs.collidable[static_cast<std::size_t>((dy + half) * obs.window + dx + half)],
                env.map().is_wall(c) ? 1 : 0);
    }
}

TEST(NavEnv, GoalReachableAfterPlacement) {
  NavEnv env(reference_map());
  for (std::uint64_t seed : {7ull, 8ull, 9ull, 1000ull}) {
    env.reset(seed);
    EXPECT_TRUE(bfs_reachable(env.map(), env.zones(), env.map().start(), env.map().goal())) << "seed " << seed;
  }
}

TEST(Shaping, PotentialValues) {
  EnvConfig cfg;
  cfg.zones = 0;
  NavEnv env(GridMap::open(10, 10, {1, 1}, {8, 8}), cfg);
  EXPECT_EQ(env.phi({8, 8}), 0.0);
  EXPECT_DOUBLE_EQ(env.phi({8, 3}), -0.05);
  EXPECT_GT(env.phi({8, 7}), env.phi({8, 6}));
}

TEST(Shaping, StepTowardGoalReward) {
  EnvConfig cfg;
  cfg.zones = 0;
  // Robot starts 5 cells from the goal on a 10 x 10 map.
  NavEnv env(GridMap::open(10, 10, {3, 8}, {8, 8}), cfg);
  env.reset(1);
  const auto r = env.step(Action::Right);
  EXPECT_NEAR(r.reward, 0.99 * -0.04 - -0.05, 1e-15);
  EXPECT_NEAR(r.reward, 0.0104, 1e-15);
  EXPECT_FALSE(r.terminated);
}

TEST(NavEnv, GoalAndCollisionTerminate) {
  EnvConfig cfg;
  cfg.zones = 0;
  NavEnv env(GridMap::open(6, 6, {1, 1}, {2, 1}), cfg);
  env.reset(1);
  const auto goal = env.step(Action::Right);
  EXPECT_EQ(goal.reward, 10.0);
  EXPECT_TRUE(goal.terminated);
  EXPECT_EQ(goal.outcome, Outcome::Goal);
  EXPECT_THROW(env.step(Action::Right), EpisodeDone);

  env.reset(1);
  const auto wall = env.step(Action::Up);
  EXPECT_EQ(wall.reward, -0.1);
  EXPECT_TRUE(wall.terminated);
  EXPECT_EQ(wall.outcome, Outcome::Collision);
}

TEST(NavEnv, TimeoutTruncates) {
  EnvConfig cfg;
  cfg.zones = 0;
  cfg.rewards.max_steps = 4;
  NavEnv env(GridMap::open(8, 8, {1, 1}, {6, 6}), cfg);
  env.reset(1);
  StepResult r;
  for (int i = 0; i < 4; ++i) r = env.step(i % 2 ? Action::Left : Action::Right);
  EXPECT_TRUE(r.truncated);
  EXPECT_FALSE(r.terminated);
  EXPECT_EQ(r.outcome, Outcome::Timeout);
}

TEST(Agent, RandomBaselineNearZero) {
  NavEnv env(reference_map());
  const auto rep = evaluate_random(env, 50, 3);
  EXPECT_LE(rep.success_rate(), 0.04);
}

TEST(Agent, AdjacentGoalLearnedQuickly) {
  EnvConfig ec;
  ec.zones = 0;
  NavEnv env(GridMap::open(5, 5, {1, 2}, {2, 2}), ec);
  TrainConfig tc;
  tc.steps = 2000;
  tc.learning_starts = 100;
  tc.checkpoint_every = 0;
  auto policy = train(env, tc);
  EXPECT_EQ(evaluate(env, *policy, 50, true).success_rate(), 1.0);
}

TEST(Agent, PolicySaveLoadRoundTrip) {
  EnvConfig ec;
  ec.zones = 0;
  NavEnv env(GridMap::open(6, 6, {1, 1}, {4, 4}), ec);
  TrainConfig tc;
  tc.steps = 1500;
  tc.learning_starts = 100;
  tc.checkpoint_every = 0;
  auto policy = train(env, tc);
  const auto path = std::filesystem::temp_directory_path() / "twinbed_policy_test.json";
  policy->save(path);
  const auto back = DoubleQLearner::load(path);
  const auto obs = env.reset(5);
  EXPECT_EQ(back->q_values(obs), policy->q_values(obs));
}

TEST(Agent, EpsilonSchedule) {
  TrainConfig tc;
  tc.steps = 1000;
  EXPECT_DOUBLE_EQ(tc.epsilon(0), 0.5);
  EXPECT_NEAR(tc.epsilon(400), 0.5 + (0.01 - 0.5) * 0.5, 1e-12);
  EXPECT_NEAR(tc.epsilon(800), 0.01, 1e-15);
  EXPECT_NEAR(tc.epsilon(999), 0.01, 1e-15);
}

TEST(Agent, TargetOnlyChangesOnSync) {
  TrainConfig tc;
  DoubleQLearner q(tc, 54, 20, 20);
  Observation obs;
  obs.curr = {3, 3};
  obs.window = 5;
  obs.collidable.assign(25, 0);
  obs.visited.assign(25, 0);
  const auto f = obs.features(20, 20);
  DoubleQLearner::Transition t{f, 1, 1.0, f, true};
  const auto before = q.target_q_values(obs);
  for (int i = 0; i < 20; ++i) q.learn({&t}, 0.99);
  EXPECT_EQ(q.target_q_values(obs), before);
  EXPECT_NE(q.q_values(obs), before);
  q.sync_target();
  EXPECT_EQ(q.target_q_values(obs), q.q_values(obs));
}

TEST(Agent, InvalidConfigRejected) {
  TrainConfig tc;
  tc.learning_rate = 0.0;
  EXPECT_THROW(tc.validate(), ConfigError);
}
