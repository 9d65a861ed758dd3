#include "sap/env/reacher.hpp"

#include <cmath>

#include "sap/error.hpp"
#include "sap/rng.hpp"

namespace sap::env {

std::vector<Box> reacher_boxes(const std::string& config) {
  // Heights in metres, one voxel per centimetre.
  std::array<double, 3> h;
  if (config == "Config-A") h = {0.05, 0.10, 0.08};
  else if (config == "Config-B") h = {0.10, 0.05, 0.08};
  else if (config == "Config-C") h = {0.12, 1.12, 0.12};
  else if (config == "Config-D") h = {0.07, 0.11, 0.12};
  else throw ConfigError("unknown reacher config '" + config + "'");
  const std::array<int, 3> y0 = {44, 69, 94};
  const std::array<int, 3> xc = {97, 100, 103};
  std::vector<Box> boxes;
  for (int i = 0; i < 3; ++i) {
    const int hz = static_cast<int>(std::lround(h[i] * 100.0));
    boxes.push_back({{xc[i] - 6, y0[i], 0}, {xc[i] + 6, y0[i] + 6, hz}});
  }
  return boxes;
}

Reacher::Reacher(const EnvSpec& spec)
    : Environment(spec),
      boxes_(std::make_shared<const std::vector<Box>>(reacher_boxes(spec.config))) {}

std::unique_ptr<Environment> Reacher::clone() const { return std::make_unique<Reacher>(*this); }

bool Reacher::in_bounds(const Pos& p) const {
  for (int d = 0; d < 3; ++d)
    if (p[d] < 0 || p[d] >= kGrid) return false;
  return true;
}

bool Reacher::occupied(const Pos& p) const {
  if (!in_bounds(p)) return true;
  for (const auto& b : *boxes_)
    if (b.contains(p)) return true;
  return false;
}

void Reacher::reset(std::uint64_t episode_seed) {
  Rng rng(episode_seed);
  const int jitter = uniform_int(rng, -2, 2);
  const int iz = uniform_int(rng, 2, 6);
  place_agent({100 + jitter, kStartIy, iz});
}

void Reacher::place_agent(const Pos& p) {
  if (occupied(p)) throw ContractError("reacher: start voxel is occupied or out of range");
  pos_ = p;
  start_iy_ = p[1];
  step_ = 0;
}

Pos Reacher::action_delta(std::uint32_t action) {
  if (action > 7) throw ContractError("reacher: invalid action " + std::to_string(action));
  return {(action & 1u) ? 1 : -1, (action & 2u) ? 1 : -1, (action & 4u) ? 1 : -1};
}

void Reacher::step(std::uint32_t action) {
  const Pos d = action_delta(action);
  const Pos q = {pos_[0] + d[0], pos_[1] + d[1], pos_[2] + d[2]};
  ++step_;
  if (!occupied(q)) pos_ = q;
}

std::array<double, 3> Reacher::world_position() const {
  return {kLo[0] + pos_[0] * kVoxel, kLo[1] + pos_[1] * kVoxel, kLo[2] + pos_[2] * kVoxel};
}

Snapshot Reacher::snapshot() const {
  return {double(pos_[0]), double(pos_[1]), double(pos_[2]), double(start_iy_), double(step_)};
}

void Reacher::restore(const Snapshot& s) {
  if (s.size() != 5) throw DimensionError("reacher snapshot needs 5 fields");
  pos_ = {int(s[0]), int(s[1]), int(s[2])};
  start_iy_ = int(s[3]);
  step_ = static_cast<std::size_t>(s[4]);
}

}  // namespace sap::env
