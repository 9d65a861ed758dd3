#pragma once

#include <memory>
#include <span>
#include <vector>

#include "sap/env/environment.hpp"

namespace sap::env {

// 8x8 playable cells inside a one-cell padding border. The agent may stand on
// the border; stepping off the 10x10 grid is ignored.
//
// Snapshot: [row, col, step, accumulated value]
class GridWorld final : public Environment {
 public:
  static constexpr int kSize = 10;
  static constexpr int kTypes = 11;  // type 0 is padding
  static constexpr int kFeatureDim = 16;
  static constexpr double kNoiseSigma = 0.05;
  enum Action : std::uint32_t { up = 0, down = 1, left = 2, right = 3 };

  struct World {
    std::vector<int> type;          // kSize*kSize
    std::vector<double> features;   // kSize*kSize*kFeatureDim
    std::vector<double> base;       // kTypes*kFeatureDim
    std::vector<double> value;      // kTypes, value[0] == 0
  };

  explicit GridWorld(const EnvSpec& spec);

  std::unique_ptr<Environment> clone() const override;
  void reset(std::uint64_t episode_seed) override;
  void place_agent(const Pos& p) override;
  bool can_place(const Pos& p) const override { return in_bounds(p); }
  void step(std::uint32_t action) override;
  bool done() const override { return false; }
  bool at_goal() const override { return false; }
  std::size_t step_count() const override { return step_; }
  double terminal_reward() const override { return accumulated_; }
  Pos position() const override { return {row_, col_, 0}; }
  bool in_bounds(const Pos& p) const override;
  bool goal_at(const Pos&) const override { return false; }
  std::size_t delta_dims() const override { return 2; }
  Snapshot snapshot() const override;
  void restore(const Snapshot& s) override;

  int cell_type(int r, int c) const { return world_->type[r * kSize + c]; }
  std::span<const double> features(int r, int c) const;
  double hidden_value(int type) const { return world_->value.at(type); }
  double cell_value(int r, int c) const { return hidden_value(cell_type(r, c)); }
  std::span<const double> base_vector(int type) const;
  const World& world() const { return *world_; }

  static Pos next_position(const Pos& p, std::uint32_t action);

 private:
  std::shared_ptr<const World> world_;
  int row_ = 1, col_ = 1;
  std::size_t step_ = 0;
  double accumulated_ = 0.0;
};

}  // namespace sap::env
