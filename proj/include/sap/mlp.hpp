#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sap/tensor.hpp"

namespace sap::ad {

struct Layer {
  Tensor w;  // [out, in]
  Tensor b;  // [out]
};

// Rectifier between layers, linear last layer.
class Mlp {
 public:
  Mlp() = default;
  // widths = {in, hidden..., out}; uniform +-1/sqrt(fan_in) init.
  Mlp(std::vector<std::size_t> widths, std::uint64_t seed);
  static Mlp zeros(std::vector<std::size_t> widths);

  Tensor forward(const Tensor& x) const;
  // Output of the last hidden layer (after the rectifier); the input itself
  // for a single-layer net.
  Tensor trunk(const Tensor& x) const;
  const Layer& head() const { return layers_.back(); }

  const std::vector<std::size_t>& widths() const { return widths_; }
  std::size_t in_width() const { return widths_.front(); }
  std::size_t out_width() const { return widths_.back(); }
  std::size_t depth() const { return layers_.size(); }
  std::uint64_t seed() const { return seed_; }

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }
  // W0, b0, W1, b1, ...
  std::vector<Tensor> parameters() const;
  std::size_t parameter_count() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(std::span<const double> values);
  // FNV-1a over the raw parameter bytes.
  std::uint64_t checksum() const;

 private:
  std::vector<std::size_t> widths_;
  std::vector<Layer> layers_;
  std::uint64_t seed_ = 0;
};

// Graph-free evaluation of a snapshot of an Mlp. The first layer is kept
// transposed so sparse inputs only touch the columns they use.
class FrozenMlp {
 public:
  FrozenMlp() = default;
  explicit FrozenMlp(const Mlp& net);

  std::size_t in_width() const { return in_; }
  std::size_t out_width() const { return widths_.back(); }
  std::size_t first_width() const { return widths_.size() > 1 ? widths_[1] : 0; }

  void forward(std::span<const double> x, std::span<double> out) const;
  std::vector<double> forward(std::span<const double> x) const;

  // acc += W0[:, offset:offset+len] * x  (no bias). Zero inputs are skipped.
  void project_first(std::span<const double> x, std::size_t offset, std::span<double> acc) const;
  // Finishes a forward pass from a first-layer pre-activation without bias.
  void forward_from_projection(std::span<const double> proj, std::span<double> out) const;

 private:
  std::vector<std::size_t> widths_;
  std::size_t in_ = 0;
  std::vector<double> w0t_;                   // [in, h1]
  std::vector<std::vector<double>> weights_;  // layers >= 1, row-major [out, in]
  std::vector<std::vector<double>> biases_;   // all layers
};

}  // namespace sap::ad
