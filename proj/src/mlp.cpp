#include "sap/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "sap/error.hpp"
#include "sap/rng.hpp"

namespace sap::ad {

namespace {

void check_widths(const std::vector<std::size_t>& widths) {
  if (widths.size() < 2) throw DimensionError("Mlp needs at least input and output widths");
  for (auto w : widths)
    if (w == 0) throw DimensionError("Mlp widths must be positive");
}

}  // namespace

Mlp::Mlp(std::vector<std::size_t> widths, std::uint64_t seed)
    : widths_(std::move(widths)), seed_(seed) {
  check_widths(widths_);
  Rng rng(seed);
  for (std::size_t i = 0; i + 1 < widths_.size(); ++i) {
    const std::size_t in = widths_[i], out = widths_[i + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<double> w(out * in), b(out);
    for (auto& v : w) v = dist(rng);
    for (auto& v : b) v = dist(rng);
    layers_.push_back({Tensor::from({out, in}, std::move(w), true),
                       Tensor::from({out}, std::move(b), true)});
  }
}

Mlp Mlp::zeros(std::vector<std::size_t> widths) {
  check_widths(widths);
  Mlp m;
  m.widths_ = std::move(widths);
  for (std::size_t i = 0; i + 1 < m.widths_.size(); ++i) {
    m.layers_.push_back({Tensor::zeros({m.widths_[i + 1], m.widths_[i]}, true),
                         Tensor::zeros({m.widths_[i + 1]}, true)});
  }
  return m;
}

Tensor Mlp::trunk(const Tensor& x) const {
  if (x.rank() != 2 || x.cols() != in_width()) {
    throw DimensionError("layer 0: expected input [n," + std::to_string(in_width()) +
                         "], got " + shape_string(x.shape()));
  }
  Tensor h = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    h = relu(linear(h, layers_[i].w, layers_[i].b));
  }
  return h;
}

Tensor Mlp::forward(const Tensor& x) const {
  const Tensor h = trunk(x);
  return linear(h, layers_.back().w, layers_.back().b);
}

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.w);
    out.push_back(l.b);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.w.size() + l.b.size();
  return n;
}

std::vector<double> Mlp::flat_parameters() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for (const auto& p : parameters()) out.insert(out.end(), p.data().begin(), p.data().end());
  return out;
}

void Mlp::set_flat_parameters(std::span<const double> values) {
  if (values.size() != parameter_count()) {
    throw DimensionError("set_flat_parameters: expected " + std::to_string(parameter_count()) +
                         " values, got " + std::to_string(values.size()));
  }
  std::size_t k = 0;
  for (auto p : parameters()) {
    auto d = p.data();
    std::copy(values.begin() + k, values.begin() + k + d.size(), d.begin());
    k += d.size();
  }
}

std::uint64_t Mlp::checksum() const {
  const auto flat = flat_parameters();
  return fnv1a64(std::string_view(reinterpret_cast<const char*>(flat.data()),
                                  flat.size() * sizeof(double)));
}

FrozenMlp::FrozenMlp(const Mlp& net) : widths_(net.widths()), in_(net.in_width()) {
  const auto& layers = net.layers();
  const std::size_t h1 = widths_[1];
  w0t_.assign(in_ * h1, 0.0);
  const auto w0 = layers[0].w.data();
  for (std::size_t o = 0; o < h1; ++o)
    for (std::size_t i = 0; i < in_; ++i) w0t_[i * h1 + o] = w0[o * in_ + i];
  for (std::size_t l = 0; l < layers.size(); ++l) {
    if (l > 0) weights_.emplace_back(layers[l].w.data().begin(), layers[l].w.data().end());
    biases_.emplace_back(layers[l].b.data().begin(), layers[l].b.data().end());
  }
}

void FrozenMlp::project_first(std::span<const double> x, std::size_t offset,
                              std::span<double> acc) const {
  const std::size_t h1 = first_width();
  if (offset + x.size() > in_ || acc.size() != h1) {
    throw DimensionError("project_first: slice [" + std::to_string(offset) + "," +
                         std::to_string(offset + x.size()) + ") outside input width " +
                         std::to_string(in_));
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = x[i];
    if (v == 0.0) continue;
    const double* col = w0t_.data() + (offset + i) * h1;
    for (std::size_t o = 0; o < h1; ++o) acc[o] += v * col[o];
  }
}

void FrozenMlp::forward_from_projection(std::span<const double> proj,
                                        std::span<double> out) const {
  if (out.size() != out_width()) throw DimensionError("FrozenMlp: output buffer width mismatch");
  const std::size_t nl = biases_.size();
  thread_local std::vector<double> cur, nxt;
  cur.assign(proj.begin(), proj.end());
  for (std::size_t o = 0; o < cur.size(); ++o) cur[o] += biases_[0][o];
  for (std::size_t l = 1; l < nl; ++l) {
    for (auto& v : cur) v = v > 0.0 ? v : 0.0;
    const std::size_t in = widths_[l], outw = widths_[l + 1];
    const double* w = weights_[l - 1].data();
    nxt.assign(biases_[l].begin(), biases_[l].end());
    for (std::size_t o = 0; o < outw; ++o) {
      const double* row = w + o * in;
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += row[i] * cur[i];
      nxt[o] += acc;
    }
    std::swap(cur, nxt);
  }
  std::copy(cur.begin(), cur.end(), out.begin());
}

void FrozenMlp::forward(std::span<const double> x, std::span<double> out) const {
  if (x.size() != in_) {
    throw DimensionError("layer 0: expected input width " + std::to_string(in_) + ", got " +
                         std::to_string(x.size()));
  }
  thread_local std::vector<double> proj;
  proj.assign(first_width(), 0.0);
  project_first(x, 0, proj);
  forward_from_projection(proj, out);
}

std::vector<double> FrozenMlp::forward(std::span<const double> x) const {
  std::vector<double> out(out_width());
  forward(x, out);
  return out;
}

}  // namespace sap::ad
