#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sap/env/environment.hpp"

namespace sap {

// Egocentric window around the agent. Cells are ordered row-major over the
// extent (reacher: x-major, then y, then z); each cell carries `channels` values.
struct WindowSpec {
  env::EnvId env = env::EnvId::gridworld;
  std::array<int, 3> extent{1, 1, 1};
  std::size_t channels = 1;
  std::vector<double> padding_fill;  // one value per channel for out-of-world cells

  std::size_t cells() const { return std::size_t(extent[0]) * extent[1] * extent[2]; }
  std::size_t width() const { return cells() * channels; }
};

// gridworld 3x3 cells x 16 features (outside the grid: zeros);
// platformer 5x5 tiles x 8 one-hot channels
//   {air, ground, block, pit, hazard, monster-left, monster-right, padding};
// reacher 15^3 voxels x 1 occupancy bit (outside the lattice: occupied).
WindowSpec window_spec(env::EnvId env);

// Window centred on `at`, read from env's current world state.
void extract_window(const env::Environment& env, const env::Pos& at, std::span<double> out);
std::vector<double> extract_window(const env::Environment& env, const env::Pos& at);
std::vector<double> extract_window(const env::Environment& env);

// Input crop of the dynamics model. Same as the scoring window except for the
// platformer, where it is 7x7 so a run or jump can see what it lands next to.
WindowSpec dynamics_window_spec(env::EnvId env);
void extract_dynamics_window(const env::Environment& env, const env::Pos& at, std::span<double> out);
std::vector<double> extract_dynamics_window(const env::Environment& env, const env::Pos& at);

// Disjoint regions of a window. Each region is a list of window cells; -1
// marks a zero-filled slot used to bring narrow blocks to a common width.
struct SubRegionLayout {
  std::string name;
  env::EnvId env = env::EnvId::gridworld;
  std::size_t channels = 1;
  std::size_t window_width = 0;
  std::vector<std::vector<int>> regions;

  std::size_t count() const { return regions.size(); }
  std::size_t slots() const { return regions.empty() ? 0 : regions.front().size(); }
  std::size_t region_width() const { return slots() * channels; }
};

// Named layouts: gridworld cells9 | center1 | whole; platformer ring8 |
// whole; reacher grid27 | whole.
SubRegionLayout make_layout(const std::string& name, env::EnvId env);
std::vector<std::string> layout_names(env::EnvId env);
std::string default_layout(env::EnvId env);

// out holds count() rows of region_width() values, region l at row l.
void split_subregions(std::span<const double> window, const SubRegionLayout& layout,
                      std::span<double> out);
std::vector<double> split_subregions(std::span<const double> window, const SubRegionLayout& layout);

// Inverse of split on the covered cells; uncovered cells are 0 and flagged
// false in `covered` (if given).
std::vector<double> unsplit_subregions(std::span<const double> regions,
                                       const SubRegionLayout& layout,
                                       std::vector<bool>* covered = nullptr);

}  // namespace sap
