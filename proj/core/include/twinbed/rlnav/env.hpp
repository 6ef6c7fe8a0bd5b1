#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "twinbed/common/config.hpp"

namespace twinbed::rlnav {

class MapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class EpisodeDone : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Cell {
  int x = 0;  // column
  int y = 0;  // row, 0 at the top of the map file

  bool operator==(const Cell&) const = default;
  auto operator<=>(const Cell&) const = default;
};

int manhattan(Cell a, Cell b);

// Occupancy grid; each cell is 10 cm of floor.
class GridMap {
 public:
  static constexpr double kCellSizeM = 0.10;

  // `#` wall, `.` free, `S` start, `G` goal. Border cells must be walls.
  static GridMap parse(std::string_view text);
  static GridMap load(const std::filesystem::path& path);
  // Open rectangle with walls on the border only.
  static GridMap open(int width, int height, Cell start, Cell goal);

  int width() const { return width_; }
  int height() const { return height_; }
  Cell start() const { return start_; }
  Cell goal() const { return goal_; }
  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  bool is_wall(Cell c) const { return !in_bounds(c) || walls_[index(c)]; }
  int cell_count() const { return width_ * height_; }
  int free_count() const;
  std::string to_text() const;

 private:
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }
  void validate() const;

  int width_ = 0;
  int height_ = 0;
  std::vector<bool> walls_;
  Cell start_, goal_;
};

struct RadiationZone {
  Cell center;
  int radius_cells = 2;

  bool covers(Cell c) const;
  bool operator==(const RadiationZone&) const = default;
};

// "x,y,r;x,y,r" as served by the twin.
std::vector<RadiationZone> parse_zones(std::string_view text);
std::string format_zones(const std::vector<RadiationZone>& zones);

// True when `to` is reachable from `from` through free cells outside every zone.
bool reachable(const GridMap& map, const std::vector<RadiationZone>& zones, Cell from, Cell to);

enum class Action { Up = 0, Down = 1, Left = 2, Right = 3 };
inline constexpr int kActionCount = 4;

Cell apply(Cell c, Action a);

struct RewardParams {
  double r_goal = 10.0;
  double r_collide = -0.1;
  double r_timeout = 0.0;
  double gamma = 0.99;
  int max_steps = 500;
};

enum class Normalization { TotalCells, FreeCells };

struct EnvConfig {
  int zones = 3;
  int zone_radius = 2;
  int window = 5;
  int max_placement_attempts = 100;
  RewardParams rewards;
  Normalization normalization = Normalization::TotalCells;
  // When set, these zones are used every episode instead of random placement.
  std::optional<std::vector<RadiationZone>> fixed_zones;

  void validate() const;
};

struct Observation {
  Cell curr;
  int goal_dx = 0;
  int goal_dy = 0;
  int window = 5;
  std::vector<std::uint8_t> collidable;  // window x window, row-major
  std::vector<std::uint8_t> visited;

  // Positions and offsets scaled by map size, then both masks.
  std::vector<float> features(int map_width, int map_height) const;
  bool operator==(const Observation&) const = default;
};

enum class Outcome { Running, Goal, Collision, Timeout };

std::string_view to_string(Outcome o);

struct StepResult {
  Observation obs;
  double reward = 0.0;
  bool terminated = false;
  bool truncated = false;
  Outcome outcome = Outcome::Running;
};

class NavEnv {
 public:
  NavEnv(GridMap map, EnvConfig cfg = {});

  // Places zones from `seed`, moves the robot to the start.
  Observation reset(std::uint64_t seed);
  StepResult step(Action a);

  // Negative normalized Manhattan distance to the goal.
  double phi(Cell c) const;
  double normalizer() const { return normalizer_; }

  const GridMap& map() const { return map_; }
  const EnvConfig& config() const { return cfg_; }
  const std::vector<RadiationZone>& zones() const { return zones_; }
  Cell position() const { return pos_; }
  int steps() const { return steps_; }
  bool done() const { return done_; }
  bool collidable(Cell c) const;
  Observation observe() const;
  int feature_size() const { return 4 + 2 * cfg_.window * cfg_.window; }

 private:
  std::vector<RadiationZone> place_zones(std::mt19937_64& rng) const;

  GridMap map_;
  EnvConfig cfg_;
  double normalizer_;
  std::vector<Cell> candidates_;
  std::vector<RadiationZone> zones_;
  std::vector<bool> zone_cells_;
  std::set<Cell> visited_;
  Cell pos_;
  int steps_ = 0;
  bool done_ = true;
};

}  // namespace twinbed::rlnav
