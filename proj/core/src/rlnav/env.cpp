#include "twinbed/rlnav/env.hpp"

#include <algorithm>
#include <deque>
#include <fstream>

#include "twinbed/common/text.hpp"

namespace twinbed::rlnav {

int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

GridMap GridMap::parse(std::string_view text) {
  GridMap m;
  std::optional<Cell> start, goal;
  int y = 0;
  for (const auto& raw : split_lines(text)) {
    auto line = trim(raw);
    if (line.empty()) continue;
    if (m.width_ == 0) m.width_ = static_cast<int>(line.size());
    if (static_cast<int>(line.size()) != m.width_) {
      throw MapError("map row " + std::to_string(y + 1) + " has width " + std::to_string(line.size()) +
                     ", expected " + std::to_string(m.width_));
    }
    for (int x = 0; x < m.width_; ++x) {
      const char ch = line[static_cast<std::size_t>(x)];
      switch (ch) {
        case '#':
          m.walls_.push_back(true);
          break;
        case '.':
          m.walls_.push_back(false);
          break;
        case 'S':
          if (start) throw MapError("map has more than one start");
          start = Cell{x, y};
          m.walls_.push_back(false);
          break;
        case 'G':
          if (goal) throw MapError("map has more than one goal");
          goal = Cell{x, y};
          m.walls_.push_back(false);
          break;
        default:
          throw MapError(std::string("unexpected map character '") + ch + "' in row " + std::to_string(y + 1));
      }
    }
    ++y;
  }
  m.height_ = y;
  if (!start || !goal) throw MapError("map needs exactly one S and one G");
  m.start_ = *start;
  m.goal_ = *goal;
  m.validate();
  return m;
}

GridMap GridMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MapError("cannot open map " + path.string());
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse(text);
}

GridMap GridMap::open(int width, int height, Cell start, Cell goal) {
  GridMap m;
  m.width_ = width;
  m.height_ = height;
  m.walls_.assign(static_cast<std::size_t>(width) * height, false);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      if (x == 0 || y == 0 || x == width - 1 || y == height - 1) m.walls_[m.index({x, y})] = true;
    }
  }
  m.start_ = start;
  m.goal_ = goal;
  m.validate();
  return m;
}

void GridMap::validate() const {
  if (width_ < 3 || height_ < 3) throw MapError("map must be at least 3x3");
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const bool border = x == 0 || y == 0 || x == width_ - 1 || y == height_ - 1;
      if (border && !walls_[index({x, y})]) throw MapError("border cells must be walls");
    }
  }
  if (!in_bounds(start_) || is_wall(start_)) throw MapError("start must be a free cell");
  if (!in_bounds(goal_) || is_wall(goal_)) throw MapError("goal must be a free cell");
  if (start_ == goal_) throw MapError("start and goal must differ");
}

int GridMap::free_count() const {
  return static_cast<int>(std::count(walls_.begin(), walls_.end(), false));
}

std::string GridMap::to_text() const {
  std::string out;
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      const Cell c{x, y};
      out += c == start_ ? 'S' : c == goal_ ? 'G' : is_wall(c) ? '#' : '.';
    }
    out += '\n';
  }
  return out;
}

bool RadiationZone::covers(Cell c) const {
  const int dx = c.x - center.x;
  const int dy = c.y - center.y;
  return dx * dx + dy * dy <= radius_cells * radius_cells;
}

std::vector<RadiationZone> parse_zones(std::string_view text) {
  std::vector<RadiationZone> out;
  for (const auto& item : split(text, ';')) {
    if (trim(item).empty()) continue;
    auto parts = split(trim(item), ',');
    if (parts.size() != 3) throw MapError("zone must be x,y,r: " + std::string(item));
    auto x = parse_int(trim(parts[0]));
    auto y = parse_int(trim(parts[1]));
    auto r = parse_int(trim(parts[2]));
    if (!x || !y || !r || *r < 1) throw MapError("bad zone: " + std::string(item));
    out.push_back({{static_cast<int>(*x), static_cast<int>(*y)}, static_cast<int>(*r)});
  }
  return out;
}

std::string format_zones(const std::vector<RadiationZone>& zones) {
  std::string out;
  for (const auto& z : zones) {
    if (!out.empty()) out += ';';
    out += std::to_string(z.center.x) + ',' + std::to_string(z.center.y) + ',' + std::to_string(z.radius_cells);
  }
  return out;
}

bool reachable(const GridMap& map, const std::vector<RadiationZone>& zones, Cell from, Cell to) {
  auto blocked = [&](Cell c) {
    return map.is_wall(c) || std::any_of(zones.begin(), zones.end(), [&](const auto& z) { return z.covers(c); });
  };
  if (blocked(from) || blocked(to)) return false;
  std::vector<bool> seen(static_cast<std::size_t>(map.cell_count()), false);
  std::deque<Cell> queue{from};
  seen[static_cast<std::size_t>(from.y) * map.width() + from.x] = true;
  while (!queue.empty()) {
    const Cell c = queue.front();
    queue.pop_front();
    if (c == to) return true;
    for (int a = 0; a < kActionCount; ++a) {
      const Cell n = apply(c, static_cast<Action>(a));
      if (blocked(n)) continue;
      auto s = seen[static_cast<std::size_t>(n.y) * map.width() + n.x];
      if (s) continue;
      s = true;
      queue.push_back(n);
    }
  }
  return false;
}

Cell apply(Cell c, Action a) {
  switch (a) {
    case Action::Up:
      return {c.x, c.y - 1};
    case Action::Down:
      return {c.x, c.y + 1};
    case Action::Left:
      return {c.x - 1, c.y};
    case Action::Right:
      return {c.x + 1, c.y};
  }
  return c;
}

void EnvConfig::validate() const {
  if (zones < 0) throw ConfigError("zone count must be >= 0");
  if (zone_radius < 1) throw ConfigError("zone radius must be >= 1");
  if (window < 1 || window % 2 == 0) throw ConfigError("observation window must be odd and >= 1");
  if (max_placement_attempts < 1) throw ConfigError("max_placement_attempts must be >= 1");
  if (rewards.max_steps < 1) throw ConfigError("max_steps must be >= 1");
  if (!(rewards.gamma > 0.0 && rewards.gamma <= 1.0)) throw ConfigError("gamma must lie in (0, 1]");
}

std::vector<float> Observation::features(int map_width, int map_height) const {
  std::vector<float> f;
  f.reserve(4 + collidable.size() + visited.size());
  const auto sx = static_cast<float>(std::max(1, map_width - 1));
  const auto sy = static_cast<float>(std::max(1, map_height - 1));
  f.push_back(static_cast<float>(curr.x) / sx);
  f.push_back(static_cast<float>(curr.y) / sy);
  f.push_back(static_cast<float>(goal_dx) / sx);
  f.push_back(static_cast<float>(goal_dy) / sy);
  for (auto v : collidable) f.push_back(static_cast<float>(v));
  for (auto v : visited) f.push_back(static_cast<float>(v));
  return f;
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Running:
      return "RUNNING";
    case Outcome::Goal:
      return "GOAL";
    case Outcome::Collision:
      return "COLLISION";
    case Outcome::Timeout:
      return "TIMEOUT";
  }
  return "RUNNING";
}

NavEnv::NavEnv(GridMap map, EnvConfig cfg) : map_(std::move(map)), cfg_(std::move(cfg)) {
  cfg_.validate();
  normalizer_ = cfg_.normalization == Normalization::TotalCells ? map_.cell_count() : map_.free_count();
  for (int y = 0; y < map_.height(); ++y) {
    for (int x = 0; x < map_.width(); ++x) {
      const Cell c{x, y};
      if (map_.is_wall(c) || c == map_.start() || c == map_.goal()) continue;
      RadiationZone z{c, cfg_.zone_radius};
      if (z.covers(map_.start()) || z.covers(map_.goal())) continue;
      candidates_.push_back(c);
    }
  }
  zone_cells_.assign(static_cast<std::size_t>(map_.cell_count()), false);
  pos_ = map_.start();
}

std::vector<RadiationZone> NavEnv::place_zones(std::mt19937_64& rng) const {
  if (cfg_.fixed_zones) return *cfg_.fixed_zones;
  if (cfg_.zones == 0) return {};
  if (candidates_.empty()) throw PlacementError("no free cell can host a radiation zone");
  std::uniform_int_distribution<std::size_t> pick(0, candidates_.size() - 1);
  for (int attempt = 0; attempt < cfg_.max_placement_attempts; ++attempt) {
    std::vector<RadiationZone> zones;
    for (int k = 0; k < cfg_.zones; ++k) zones.push_back({candidates_[pick(rng)], cfg_.zone_radius});
    if (reachable(map_, zones, map_.start(), map_.goal())) return zones;
  }
  throw PlacementError("no zone placement keeps the goal reachable after " +
                       std::to_string(cfg_.max_placement_attempts) + " attempts");
}

Observation NavEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  zones_ = place_zones(rng);
  std::fill(zone_cells_.begin(), zone_cells_.end(), false);
  for (int y = 0; y < map_.height(); ++y) {
    for (int x = 0; x < map_.width(); ++x) {
      const Cell c{x, y};
      for (const auto& z : zones_) {
        if (z.covers(c)) zone_cells_[static_cast<std::size_t>(y) * map_.width() + x] = true;
      }
    }
  }
  pos_ = map_.start();
  visited_ = {pos_};
  steps_ = 0;
  done_ = false;
  return observe();
}

bool NavEnv::collidable(Cell c) const {
  if (map_.is_wall(c)) return true;
  return zone_cells_[static_cast<std::size_t>(c.y) * map_.width() + c.x];
}

double NavEnv::phi(Cell c) const { return -static_cast<double>(manhattan(c, map_.goal())) / normalizer_; }

Observation NavEnv::observe() const {
  Observation o;
  o.curr = pos_;
  o.goal_dx = map_.goal().x - pos_.x;
  o.goal_dy = map_.goal().y - pos_.y;
  o.window = cfg_.window;
  const int half = cfg_.window / 2;
  o.collidable.reserve(static_cast<std::size_t>(cfg_.window * cfg_.window));
  o.visited.reserve(static_cast<std::size_t>(cfg_.window * cfg_.window));
  for (int dy = -half; dy <= half; ++dy) {
    for (int dx = -half; dx <= half; ++dx) {
      const Cell c{pos_.x + dx, pos_.y + dy};
      o.collidable.push_back(collidable(c) ? 1 : 0);
      o.visited.push_back(visited_.count(c) ? 1 : 0);
    }
  }
  return o;
}

StepResult NavEnv::step(Action a) {
  if (done_) throw EpisodeDone("episode has ended; call reset()");
  const auto& rp = cfg_.rewards;
  StepResult r;
  const Cell prev = pos_;
  const Cell next = apply(pos_, a);
  ++steps_;
  if (collidable(next)) {
    r.reward = rp.r_collide;
    r.terminated = true;
    r.outcome = Outcome::Collision;
  } else {
    pos_ = next;
    visited_.insert(pos_);
    if (pos_ == map_.goal()) {
      r.reward = rp.r_goal;
      r.terminated = true;
      r.outcome = Outcome::Goal;
    } else if (steps_ >= rp.max_steps) {
      r.reward = rp.r_timeout;
      r.truncated = true;
      r.outcome = Outcome::Timeout;
    } else {
      r.reward = rp.gamma * phi(pos_) - phi(prev);
    }
  }
  done_ = r.terminated || r.truncated;
  r.obs = observe();
  return r;
}

}  // namespace twinbed::rlnav
