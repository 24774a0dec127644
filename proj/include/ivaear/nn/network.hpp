#pragma once

#include "ivaear/nn/tape.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ivaear::nn {

enum class Activation { Linear, LeakyRelu, Elu, Softplus };

inline constexpr double kLeakySlope = 0.01;
/// Added to every softplus head so variance heads never collapse to zero.
inline constexpr double kSoftplusFloor = 1e-6;

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view s);

/// One contiguous slice of the output layer with its own activation, e.g.
/// the mean (linear) and scale (softplus) halves of an encoder.
struct OutputHead {
  Index width = 0;
  Activation activation = Activation::Linear;

  bool operator==(const OutputHead&) const = default;
};

/// Dense feedforward network. weights[l] is layer_sizes[l+1] × layer_sizes[l],
/// applied to row-major batches as y = x·Wᵀ + b.
struct NetworkParams {
  std::vector<Index> layer_sizes;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  Activation hidden_activation = Activation::LeakyRelu;
  std::vector<OutputHead> heads;

  Index input_dim() const { return layer_sizes.front(); }
  Index output_dim() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return weights.size(); }
  std::size_t parameter_count() const;

  /// Throws if shapes disagree with layer_sizes or any entry is non-finite.
  void validate() const;

  bool operator==(const NetworkParams&) const;
};

/// Weights uniform in ±√(6/(fan_in+fan_out)), biases zero. An empty `heads`
/// means one linear head spanning the whole output.
NetworkParams mlp_init(std::span<const Index> layer_sizes, Activation hidden,
                       std::vector<OutputHead> heads, std::uint64_t seed);

/// Plain evaluation. Each output row depends only on the matching input row,
/// bit for bit, regardless of how many rows are in the batch.
Matrix forward(const NetworkParams& net, const Matrix& input);

/// Per-head outputs of a plain evaluation.
std::vector<Matrix> forward_heads(const NetworkParams& net, const Matrix& input);

/// Parameters of one network registered on a tape.
struct BoundNetwork {
  const NetworkParams* net = nullptr;
  std::vector<Var> weights;
  std::vector<Var> biases;  // each 1×out
};

BoundNetwork bind(Tape& tape, const NetworkParams& net);

/// Recorded evaluation; returns one Var per output head.
std::vector<Var> forward(const BoundNetwork& bound, Var input);

/// Gradient of a network's parameters, shaped like NetworkParams.
struct NetworkGrad {
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

NetworkGrad gradients(const BoundNetwork& bound);

/// Views of every parameter array (weights then biases, layer by layer), in
/// the order adam_step and finite_diff_gradient expect.
std::vector<std::span<double>> parameter_spans(NetworkParams& net);
std::vector<std::span<const double>> gradient_spans(const NetworkGrad& grad);

double apply_activation(Activation a, double v);

}  // namespace ivaear::nn
