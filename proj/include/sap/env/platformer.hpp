#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "sap/env/environment.hpp"

namespace sap::env {

enum class Tile : std::uint8_t { air = 0, ground = 1, block = 2, pit = 3, hazard = 4 };

struct Monster {
  int x = 0;
  int y = 0;
  int dir = -1;  // -1 walking left, +1 right
};

struct Level {
  int cols = 120;
  int rows = 12;
  std::vector<Tile> tiles;  // x * rows + y, y = 0 is the floor row
  std::vector<Monster> spawns;

  Tile at(int x, int y) const { return tiles[static_cast<std::size_t>(x * rows + y)]; }
  bool inside(int x, int y) const { return x >= 0 && x < cols && y >= 0 && y < rows; }
  // Outside the level counts as solid.
  bool solid(int x, int y) const;
};

// Procedural layout for a named level; same (config, seed) -> same level.
Level generate_level(const std::string& config, std::uint64_t seed);

// Side-scrolling tile world. Per step: vertical motion first (gravity,
// jump impulse), then horizontal, then monsters patrol one column.
//
// Snapshot: [x, y, last_dy, alive, max_x, start_x, step, at_goal, n,
//            (monster x, y, dir) * n]
class Platformer final : public Environment {
 public:
  enum Action : std::uint32_t { noop = 0, right = 1, jump_right = 2, run_right = 3, hyper_jump_right = 4 };
  static constexpr int kMaxFall = 3;

  explicit Platformer(const EnvSpec& spec);
  Platformer(const EnvSpec& spec, Level level);

  std::unique_ptr<Environment> clone() const override;
  void reset(std::uint64_t episode_seed) override;
  void place_agent(const Pos& p) override;
  bool can_place(const Pos& p) const override;
  void step(std::uint32_t action) override;
  bool done() const override { return !alive_; }
  bool at_goal() const override { return at_goal_; }
  std::size_t step_count() const override { return step_; }
  double terminal_reward() const override { return double(max_x_ - start_x_); }
  Pos position() const override { return {x_, y_, 0}; }
  bool in_bounds(const Pos& p) const override;
  bool goal_at(const Pos& p) const override { return p[0] >= level_->cols - 1; }
  std::size_t delta_dims() const override { return 2; }
  void advance_exogenous() override;
  bool static_world() const override { return false; }
  Snapshot snapshot() const override;
  void restore(const Snapshot& s) override;

  const Level& level() const { return *level_; }
  const std::vector<Monster>& monsters() const { return monsters_; }
  // 0 if no monster at (x, y), else its direction.
  int monster_at(int x, int y) const;
  bool alive() const { return alive_; }
  int max_x() const { return max_x_; }
  int last_dy() const { return last_dy_; }
  bool grounded() const;

  static int horizontal_speed(std::uint32_t action);
  static int jump_impulse(std::uint32_t action);

 private:
  // Moves every monster one patrol step; kills the agent on contact when
  // with_agent is set.
  void move_monsters(bool with_agent);

  std::shared_ptr<const Level> level_;
  std::vector<Monster> monsters_;
  int x_ = 0, y_ = 1, last_dy_ = 0;
  int max_x_ = 0, start_x_ = 0;
  bool alive_ = true;
  bool at_goal_ = false;
  std::size_t step_ = 0;
};

}  // namespace sap::env
