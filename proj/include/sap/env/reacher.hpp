#pragma once

#include <array>
#include <memory>
#include <vector>

#include "sap/env/environment.hpp"

namespace sap::env {

struct Box {
  Pos lo;  // inclusive voxel index
  Pos hi;  // exclusive
  bool contains(const Pos& p) const {
    return p[0] >= lo[0] && p[0] < hi[0] && p[1] >= lo[1] && p[1] < hi[1] && p[2] >= lo[2] &&
           p[2] < hi[2];
  }
};

// Obstacles of one named config on the 200^3 voxel lattice.
std::vector<Box> reacher_boxes(const std::string& config);

// Kinematic hand moving on a 0.5-unit voxel lattice. Action bits: bit0 = x,
// bit1 = y, bit2 = z; a set bit is +0.5, a clear bit -0.5. Moves into an
// occupied or out-of-range voxel are rejected.
//
// Snapshot: [ix, iy, iz, start iy, step]
class Reacher final : public Environment {
 public:
  static constexpr int kGrid = 200;
  static constexpr double kVoxel = 0.5;
  static constexpr std::array<double, 3> kLo = {-50.0, -59.0, 0.0};
  static constexpr double kGoalY = 1.0;
  static constexpr int kStartIy = 20;

  explicit Reacher(const EnvSpec& spec);

  std::unique_ptr<Environment> clone() const override;
  void reset(std::uint64_t episode_seed) override;
  void place_agent(const Pos& p) override;
  bool can_place(const Pos& p) const override { return !occupied(p); }
  void step(std::uint32_t action) override;
  bool done() const override { return at_goal(); }
  bool at_goal() const override { return goal_at(pos_); }
  std::size_t step_count() const override { return step_; }
  double terminal_reward() const override { return (pos_[1] - start_iy_) * kVoxel; }
  Pos position() const override { return pos_; }
  bool in_bounds(const Pos& p) const override;
  bool goal_at(const Pos& p) const override { return world_y(p[1]) >= kGoalY; }
  std::size_t delta_dims() const override { return 3; }
  double unit() const override { return kVoxel; }
  Snapshot snapshot() const override;
  void restore(const Snapshot& s) override;

  // Out of range counts as occupied.
  bool occupied(const Pos& p) const;
  const std::vector<Box>& boxes() const { return *boxes_; }
  std::array<double, 3> world_position() const;

  static double world_y(int iy) { return kLo[1] + iy * kVoxel; }
  static Pos action_delta(std::uint32_t action);

 private:
  std::shared_ptr<const std::vector<Box>> boxes_;
  Pos pos_{100, kStartIy, 4};
  int start_iy_ = kStartIy;
  std::size_t step_ = 0;
};

}  // namespace sap::env
