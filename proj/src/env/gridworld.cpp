#include "sap/env/gridworld.hpp"

#include <random>

#include "sap/error.hpp"
#include "sap/rng.hpp"

namespace sap::env {

namespace {

std::shared_ptr<const GridWorld::World> build_world(const EnvSpec& spec) {
  constexpr int n = GridWorld::kSize, d = GridWorld::kFeatureDim, k = GridWorld::kTypes;
  auto w = std::make_shared<GridWorld::World>();
  // Type palette and secret values are shared by every config of one seed.
  Rng task(derive_seed(spec.seed, "gridworld/types"));
  w->base.resize(k * d);
  for (auto& v : w->base) v = uniform01(task);
  w->value.assign(k, 0.0);
  std::uniform_real_distribution<double> val(-2.0, 6.0);
  for (int t = 1; t < k; ++t) w->value[t] = val(task);

  Rng layout(derive_seed(spec.seed, "gridworld/layout/" + spec.config));
  w->type.assign(n * n, 0);
  for (int r = 1; r < n - 1; ++r)
    for (int c = 1; c < n - 1; ++c) w->type[r * n + c] = uniform_int(layout, 1, k - 1);
  std::normal_distribution<double> noise(0.0, GridWorld::kNoiseSigma);
  w->features.resize(n * n * d);
  for (int i = 0; i < n * n; ++i)
    for (int j = 0; j < d; ++j) w->features[i * d + j] = w->base[w->type[i] * d + j] + noise(layout);
  return w;
}

}  // namespace

GridWorld::GridWorld(const EnvSpec& spec) : Environment(spec), world_(build_world(spec)) {}

std::unique_ptr<Environment> GridWorld::clone() const { return std::make_unique<GridWorld>(*this); }

void GridWorld::reset(std::uint64_t episode_seed) {
  Rng rng(episode_seed);
  const int r = uniform_int(rng, 1, kSize - 2);
  const int c = uniform_int(rng, 1, kSize - 2);
  place_agent({r, c, 0});
}

void GridWorld::place_agent(const Pos& p) {
  if (!in_bounds(p)) throw ContractError("gridworld: cannot place agent outside the grid");
  row_ = p[0];
  col_ = p[1];
  step_ = 0;
  accumulated_ = 0.0;
}

bool GridWorld::in_bounds(const Pos& p) const {
  return p[0] >= 0 && p[0] < kSize && p[1] >= 0 && p[1] < kSize && p[2] == 0;
}

Pos GridWorld::next_position(const Pos& p, std::uint32_t action) {
  Pos q = p;
  switch (action) {
    case up: q[0] -= 1; break;
    case down: q[0] += 1; break;
    case left: q[1] -= 1; break;
    case right: q[1] += 1; break;
    default: throw ContractError("gridworld: invalid action " + std::to_string(action));
  }
  if (q[0] < 0 || q[0] >= kSize || q[1] < 0 || q[1] >= kSize) return p;
  return q;
}

void GridWorld::step(std::uint32_t action) {
  const Pos q = next_position(position(), action);
  // The reward of a step is the value of the cell the agent acts from.
  accumulated_ += cell_value(row_, col_);
  row_ = q[0];
  col_ = q[1];
  ++step_;
}

std::span<const double> GridWorld::features(int r, int c) const {
  return {world_->features.data() + (r * kSize + c) * kFeatureDim, kFeatureDim};
}

std::span<const double> GridWorld::base_vector(int type) const {
  return {world_->base.data() + type * kFeatureDim, kFeatureDim};
}

Snapshot GridWorld::snapshot() const {
  return {double(row_), double(col_), double(step_), accumulated_};
}

void GridWorld::restore(const Snapshot& s) {
  if (s.size() != 4) throw DimensionError("gridworld snapshot needs 4 fields");
  row_ = static_cast<int>(s[0]);
  col_ = static_cast<int>(s[1]);
  step_ = static_cast<std::size_t>(s[2]);
  accumulated_ = s[3];
}

}  // namespace sap::env
