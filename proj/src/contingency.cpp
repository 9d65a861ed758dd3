#include "sap/contingency.hpp"

#include <algorithm>

#include "sap/env/gridworld.hpp"
#include "sap/env/platformer.hpp"
#include "sap/env/reacher.hpp"
#include "sap/error.hpp"

namespace sap {

using env::EnvId;
using env::Pos;

WindowSpec window_spec(EnvId id) {
  WindowSpec w;
  w.env = id;
  switch (id) {
    case EnvId::gridworld:
      w.extent = {3, 3, 1};
      w.channels = env::GridWorld::kFeatureDim;
      w.padding_fill.assign(w.channels, 0.0);
      break;
    case EnvId::platformer:
      w.extent = {5, 5, 1};
      w.channels = 8;
      w.padding_fill.assign(w.channels, 0.0);
      w.padding_fill[7] = 1.0;
      break;
    case EnvId::reacher:
      w.extent = {15, 15, 15};
      w.channels = 1;
      w.padding_fill = {1.0};
      break;
  }
  return w;
}

namespace {

void grid_window(const env::GridWorld& g, const Pos& at, std::span<double> out) {
  constexpr int d = env::GridWorld::kFeatureDim;
  std::size_t k = 0;
  for (int dr = -1; dr <= 1; ++dr) {
    for (int dc = -1; dc <= 1; ++dc, k += d) {
      const int r = at[0] + dr, c = at[1] + dc;
      if (r < 0 || r >= env::GridWorld::kSize || c < 0 || c >= env::GridWorld::kSize) {
        std::fill_n(out.begin() + k, d, 0.0);
      } else {
        const auto f = g.features(r, c);
        std::copy(f.begin(), f.end(), out.begin() + k);
      }
    }
  }
}

void platformer_window(const env::Platformer& p, const Pos& at, int r, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto& lv = p.level();
  std::size_t cell = 0;
  for (int dy = r; dy >= -r; --dy) {
    for (int dx = -r; dx <= r; ++dx, ++cell) {
      const int x = at[0] + dx, y = at[1] + dy;
      double* c = out.data() + cell * 8;
      if (!lv.inside(x, y)) {
        c[7] = 1.0;
        continue;
      }
      const int m = p.monster_at(x, y);
      if (m < 0) c[5] = 1.0;
      else if (m > 0) c[6] = 1.0;
      else c[static_cast<int>(lv.at(x, y))] = 1.0;
    }
  }
}

void reacher_window(const env::Reacher& r, const Pos& at, std::span<double> out) {
  constexpr int h = 7, n = 15;
  std::fill(out.begin(), out.end(), 0.0);
  // Out-of-lattice slabs, then the boxes clipped to the window.
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Pos q = {at[0] + i - h, at[1] + j - h, at[2] + k - h};
        if (!r.in_bounds(q)) out[(i * n + j) * n + k] = 1.0;
      }
  for (const auto& b : r.boxes()) {
    int lo[3], hi[3];
    bool empty = false;
    for (int d = 0; d < 3; ++d) {
      lo[d] = std::max(b.lo[d] - (at[d] - h), 0);
      hi[d] = std::min(b.hi[d] - (at[d] - h), n);
      if (lo[d] >= hi[d]) empty = true;
    }
    if (empty) continue;
    for (int i = lo[0]; i < hi[0]; ++i)
      for (int j = lo[1]; j < hi[1]; ++j)
        for (int k = lo[2]; k < hi[2]; ++k) out[(i * n + j) * n + k] = 1.0;
  }
}

}  // namespace

void extract_window(const env::Environment& e, const Pos& at, std::span<double> out) {
  const auto spec = window_spec(e.id());
  if (out.size() != spec.width()) {
    throw DimensionError("extract_window: buffer holds " + std::to_string(out.size()) +
                         " values, window needs " + std::to_string(spec.width()));
  }
  switch (e.id()) {
    case EnvId::gridworld: grid_window(static_cast<const env::GridWorld&>(e), at, out); break;
    case EnvId::platformer: platformer_window(static_cast<const env::Platformer&>(e), at, 2, out); break;
    case EnvId::reacher: reacher_window(static_cast<const env::Reacher&>(e), at, out); break;
  }
}

WindowSpec dynamics_window_spec(EnvId id) {
  WindowSpec w = window_spec(id);
  if (id == EnvId::platformer) w.extent = {7, 7, 1};
  return w;
}

void extract_dynamics_window(const env::Environment& e, const Pos& at, std::span<double> out) {
  if (e.id() != EnvId::platformer) {
    extract_window(e, at, out);
    return;
  }
  if (out.size() != dynamics_window_spec(e.id()).width()) {
    throw DimensionError("extract_dynamics_window: buffer holds " + std::to_string(out.size()) + " values");
  }
  platformer_window(static_cast<const env::Platformer&>(e), at, 3, out);
}

std::vector<double> extract_dynamics_window(const env::Environment& e, const Pos& at) {
  std::vector<double> out(dynamics_window_spec(e.id()).width());
  extract_dynamics_window(e, at, out);
  return out;
}

std::vector<double> extract_window(const env::Environment& e, const Pos& at) {
  std::vector<double> out(window_spec(e.id()).width());
  extract_window(e, at, out);
  return out;
}

std::vector<double> extract_window(const env::Environment& e) { return extract_window(e, e.position()); }

std::vector<std::string> layout_names(EnvId id) {
  switch (id) {
    case EnvId::gridworld: return {"center1", "cells9", "whole"};
    case EnvId::platformer: return {"ring8", "whole"};
    case EnvId::reacher: return {"grid27", "whole"};
  }
  return {};
}

std::string default_layout(EnvId id) { return layout_names(id).front(); }

SubRegionLayout make_layout(const std::string& name, EnvId id) {
  const auto names = layout_names(id);
  if (std::find(names.begin(), names.end(), name) == names.end()) {
    throw DimensionError("layout '" + name + "' does not fit the " + std::string(env::env_name(id)) +
                         " window");
  }
  const auto w = window_spec(id);
  SubRegionLayout L;
  L.name = name;
  L.env = id;
  L.channels = w.channels;
  L.window_width = w.width();
  const int cells = static_cast<int>(w.cells());
  if (name == "whole") {
    std::vector<int> all(cells);
    for (int i = 0; i < cells; ++i) all[i] = i;
    L.regions.push_back(std::move(all));
  } else if (name == "cells9") {
    for (int i = 0; i < 9; ++i) L.regions.push_back({i});
  } else if (name == "center1") {
    L.regions.push_back({4});
  } else if (name == "ring8") {
    const std::vector<std::vector<int>> groups = {{0, 1}, {2}, {3, 4}};
    for (int gr = 0; gr < 3; ++gr) {
      for (int gc = 0; gc < 3; ++gc) {
        if (gr == 1 && gc == 1) continue;
        std::vector<int> slots;
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            const bool real = a < int(groups[gr].size()) && b < int(groups[gc].size());
            slots.push_back(real ? groups[gr][a] * 5 + groups[gc][b] : -1);
          }
        L.regions.push_back(std::move(slots));
      }
    }
  } else if (name == "grid27") {
    for (int bi = 0; bi < 3; ++bi)
      for (int bj = 0; bj < 3; ++bj)
        for (int bk = 0; bk < 3; ++bk) {
          std::vector<int> slots;
          for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 5; ++j)
              for (int k = 0; k < 5; ++k)
                slots.push_back(((bi * 5 + i) * 15 + (bj * 5 + j)) * 15 + (bk * 5 + k));
          L.regions.push_back(std::move(slots));
        }
  }
  return L;
}

void split_subregions(std::span<const double> window, const SubRegionLayout& layout,
                      std::span<double> out) {
  if (window.size() != layout.window_width) {
    throw DimensionError("split_subregions: window width " + std::to_string(window.size()) +
                         " does not match layout '" + layout.name + "' (" +
                         std::to_string(layout.window_width) + ")");
  }
  const std::size_t rw = layout.region_width(), ch = layout.channels;
  if (out.size() != layout.count() * rw) throw DimensionError("split_subregions: output size mismatch");
  for (std::size_t l = 0; l < layout.count(); ++l) {
    double* dst = out.data() + l * rw;
    const auto& slots = layout.regions[l];
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s] < 0) {
        std::fill_n(dst + s * ch, ch, 0.0);
      } else {
        std::copy_n(window.data() + std::size_t(slots[s]) * ch, ch, dst + s * ch);
      }
    }
  }
}

std::vector<double> split_subregions(std::span<const double> window, const SubRegionLayout& layout) {
  std::vector<double> out(layout.count() * layout.region_width());
  split_subregions(window, layout, out);
  return out;
}

std::vector<double> unsplit_subregions(std::span<const double> regions, const SubRegionLayout& layout,
                                       std::vector<bool>* covered) {
  const std::size_t rw = layout.region_width(), ch = layout.channels;
  if (regions.size() != layout.count() * rw) throw DimensionError("unsplit_subregions: size mismatch");
  std::vector<double> w(layout.window_width, 0.0);
  if (covered) covered->assign(layout.window_width / ch, false);
  for (std::size_t l = 0; l < layout.count(); ++l) {
    const auto& slots = layout.regions[l];
    for (std::size_t s = 0; s < slots.size(); ++s) {
      if (slots[s] < 0) continue;
      std::copy_n(regions.data() + l * rw + s * ch, ch, w.data() + std::size_t(slots[s]) * ch);
      if (covered) (*covered)[std::size_t(slots[s])] = true;
    }
  }
  return w;
}

}  // namespace sap
