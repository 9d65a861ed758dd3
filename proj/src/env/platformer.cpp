#include "sap/env/platformer.hpp"

#include <algorithm>

#include "sap/error.hpp"
#include "sap/rng.hpp"

namespace sap::env {

bool Level::solid(int x, int y) const {
  if (!inside(x, y)) return true;
  const Tile t = at(x, y);
  return t == Tile::ground || t == Tile::block;
}

Level generate_level(const std::string& config, std::uint64_t seed) {
  if (config != "Level-A" && config != "Level-B" && config != "Level-C") {
    throw ConfigError("unknown platformer level '" + config + "'");
  }
  const bool hazards = config == "Level-C";
  Level lv;
  lv.tiles.assign(static_cast<std::size_t>(lv.cols * lv.rows), Tile::air);
  auto set = [&](int x, int y, Tile t) { lv.tiles[static_cast<std::size_t>(x * lv.rows + y)] = t; };
  for (int x = 0; x < lv.cols; ++x) set(x, 0, Tile::ground);

  Rng rng(derive_seed(seed, "platformer/" + config));
  const int end = lv.cols - 10;
  int x = 7;
  while (x < end) {
    const double u = uniform01(rng);
    if (u < 0.22) {
      const int w = std::min(uniform_int(rng, 1, 3), end - x);
      for (int i = 0; i < w; ++i) set(x + i, 0, Tile::pit);
      x += w;
    } else if (u < 0.47) {
      const int h = uniform01(rng) < 0.2 ? 4 : uniform_int(rng, 1, 3);
      const int w = uniform_int(rng, 1, 2);
      for (int i = 0; i < w; ++i)
        for (int y = 1; y <= h; ++y) set(x + i, y, Tile::block);
      x += w;
    } else if (u < 0.80) {
      // Flat patrol strip, monster in the middle facing the agent.
      const int w = uniform_int(rng, 5, 8);
      if (x + w >= end) break;
      lv.spawns.push_back({x + w / 2, 1, -1});
      x += w;
    } else if (hazards && u < 0.92) {
      set(x, 1, Tile::hazard);
      x += 1;
    } else {
      const int w = uniform_int(rng, 3, 4);
      if (x + w >= end) break;
      for (int i = 0; i < w; ++i) set(x + i, 5, Tile::block);
      if (uniform01(rng) < 0.5) lv.spawns.push_back({x + 1, 6, -1});
      x += w;
    }
    x += uniform_int(rng, 3, 5);
  }
  return lv;
}

Platformer::Platformer(const EnvSpec& spec) : Platformer(spec, generate_level(spec.config, spec.seed)) {}

Platformer::Platformer(const EnvSpec& spec, Level level)
    : Environment(spec), level_(std::make_shared<const Level>(std::move(level))) {
  place_agent({0, 1, 0});
}

std::unique_ptr<Environment> Platformer::clone() const { return std::make_unique<Platformer>(*this); }

void Platformer::reset(std::uint64_t) { place_agent({0, 1, 0}); }

bool Platformer::in_bounds(const Pos& p) const {
  return level_->inside(p[0], p[1]) && p[2] == 0;
}

bool Platformer::can_place(const Pos& p) const {
  if (!in_bounds(p) || p[1] < 1) return false;
  if (level_->at(p[0], p[1]) != Tile::air) return false;
  for (const auto& m : level_->spawns)
    if (m.x == p[0] && m.y == p[1]) return false;
  return true;
}

void Platformer::place_agent(const Pos& p) {
  if (!can_place(p)) {
    throw ContractError("platformer: cannot place agent at (" + std::to_string(p[0]) + "," +
                        std::to_string(p[1]) + ")");
  }
  monsters_ = level_->spawns;
  x_ = p[0];
  y_ = p[1];
  last_dy_ = 0;
  max_x_ = start_x_ = x_;
  alive_ = true;
  at_goal_ = goal_at(p);
  step_ = 0;
}

int Platformer::monster_at(int x, int y) const {
  for (const auto& m : monsters_)
    if (m.x == x && m.y == y) return m.dir;
  return 0;
}

bool Platformer::grounded() const { return level_->solid(x_, y_ - 1); }

int Platformer::horizontal_speed(std::uint32_t action) {
  switch (action) {
    case noop: return 0;
    case right: case jump_right: return 1;
    case run_right: case hyper_jump_right: return 2;
    default: throw ContractError("platformer: invalid action " + std::to_string(action));
  }
}

int Platformer::jump_impulse(std::uint32_t action) {
  if (action == jump_right) return 3;
  if (action == hyper_jump_right) return 4;
  return 0;
}

void Platformer::step(std::uint32_t action) {
  if (!alive_) throw ContractError("platformer: step on a dead agent");
  if (at_goal_) throw ContractError("platformer: step after reaching the goal");
  const int dx = horizontal_speed(action);
  const int impulse = jump_impulse(action);
  ++step_;

  // Vertical: impulse only from the ground; otherwise carry the last motion.
  const int v = (impulse > 0 && grounded()) ? impulse : last_dy_;
  const int dy = std::max(v - 1, -kMaxFall);
  const int sy = dy > 0 ? 1 : -1;
  int moved = 0;
  for (int i = 0; i < std::abs(dy); ++i) {
    const int ny = y_ + sy;
    if (level_->solid(x_, ny)) break;
    y_ = ny;
    moved += sy;
    const Tile t = level_->at(x_, y_);
    if (t == Tile::pit || t == Tile::hazard) {
      alive_ = false;
      break;
    }
    auto it = std::find_if(monsters_.begin(), monsters_.end(),
                           [&](const Monster& m) { return m.x == x_ && m.y == y_; });
    if (it != monsters_.end()) {
      if (sy < 0) {
        monsters_.erase(it);
      } else {
        alive_ = false;
        break;
      }
    }
  }
  last_dy_ = moved;

  for (int i = 0; alive_ && i < dx; ++i) {
    const int nx = x_ + 1;
    if (level_->solid(nx, y_)) break;
    if (monster_at(nx, y_) != 0) {
      alive_ = false;
      break;
    }
    x_ = nx;
    const Tile t = level_->at(x_, y_);
    if (t == Tile::pit || t == Tile::hazard) alive_ = false;
  }
  max_x_ = std::max(max_x_, x_);
  if (alive_ && goal_at(position())) at_goal_ = true;
  if (alive_ && !at_goal_) move_monsters(true);
}

void Platformer::move_monsters(bool with_agent) {
  const Level& lv = *level_;
  for (std::size_t k = 0; k < monsters_.size(); ++k) {
    Monster& m = monsters_[k];
    const int nx = m.x + m.dir;
    bool blocked = lv.solid(nx, m.y) || !lv.solid(nx, m.y - 1) ||
                   lv.at(nx, m.y) != Tile::air;
    for (std::size_t j = 0; !blocked && j < monsters_.size(); ++j)
      if (j != k && monsters_[j].x == nx && monsters_[j].y == m.y) blocked = true;
    if (blocked) {
      m.dir = -m.dir;
      continue;
    }
    m.x = nx;
    if (with_agent && m.x == x_ && m.y == y_) alive_ = false;
  }
}

void Platformer::advance_exogenous() { move_monsters(false); }

Snapshot Platformer::snapshot() const {
  Snapshot s = {double(x_), double(y_), double(last_dy_), alive_ ? 1.0 : 0.0, double(max_x_),
                double(start_x_), double(step_), at_goal_ ? 1.0 : 0.0, double(monsters_.size())};
  for (const auto& m : monsters_) {
    s.push_back(m.x);
    s.push_back(m.y);
    s.push_back(m.dir);
  }
  return s;
}

void Platformer::restore(const Snapshot& s) {
  if (s.size() < 9) throw DimensionError("platformer snapshot needs at least 9 fields");
  const auto n = static_cast<std::size_t>(s[8]);
  if (s.size() != 9 + 3 * n) throw DimensionError("platformer snapshot monster count mismatch");
  x_ = int(s[0]);
  y_ = int(s[1]);
  last_dy_ = int(s[2]);
  alive_ = s[3] != 0.0;
  max_x_ = int(s[4]);
  start_x_ = int(s[5]);
  step_ = static_cast<std::size_t>(s[6]);
  at_goal_ = s[7] != 0.0;
  monsters_.clear();
  for (std::size_t i = 0; i < n; ++i)
    monsters_.push_back({int(s[9 + 3 * i]), int(s[10 + 3 * i]), int(s[11 + 3 * i])});
}

}  // namespace sap::env
