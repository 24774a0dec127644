#include "ivaear/nn/network.hpp"

#include "ivaear/error.hpp"
#include "ivaear/rng.hpp"

#include <cmath>
#include <numeric>

namespace ivaear::nn {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Linear: return "linear";
    case Activation::LeakyRelu: return "leaky-relu";
    case Activation::Elu: return "elu";
    case Activation::Softplus: return "softplus";
  }
  return "linear";
}

Activation activation_from_string(std::string_view s) {
  if (s == "linear") return Activation::Linear;
  if (s == "leaky-relu") return Activation::LeakyRelu;
  if (s == "elu") return Activation::Elu;
  if (s == "softplus") return Activation::Softplus;
  throw InvalidArgument("unknown activation tag '" + std::string(s) + "'");
}

double apply_activation(Activation a, double v) {
  switch (a) {
    case Activation::Linear: return v;
    case Activation::LeakyRelu: return v < 0.0 ? kLeakySlope * v : v;
    case Activation::Elu: return v < 0.0 ? std::expm1(v) : v;
    case Activation::Softplus:
      return std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v))) + kSoftplusFloor;
  }
  return v;
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
  }
  return n;
}

void NetworkParams::validate() const {
  if (layer_sizes.size() < 2) throw InvalidArgument("network needs at least two layer sizes");
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
    throw ShapeError("network layer count does not match layer_sizes");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      throw ShapeError("layer " + std::to_string(l) + " parameters do not match layer_sizes");
    }
    if (!weights[l].allFinite() || !biases[l].allFinite()) {
      throw InvalidArgument("layer " + std::to_string(l) + " has non-finite parameters");
    }
  }
  Index total = 0;
  for (const auto& h : heads) total += h.width;
  if (total != output_dim()) throw ShapeError("output heads do not cover the output layer");
}

bool NetworkParams::operator==(const NetworkParams& o) const {
  if (layer_sizes != o.layer_sizes || hidden_activation != o.hidden_activation ||
      heads != o.heads || weights.size() != o.weights.size()) {
    return false;
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != o.weights[l].rows() || weights[l].cols() != o.weights[l].cols() ||
        weights[l] != o.weights[l] || biases[l] != o.biases[l]) {
      return false;
    }
  }
  return true;
}

NetworkParams mlp_init(std::span<const Index> layer_sizes, Activation hidden,
                       std::vector<OutputHead> heads, std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw InvalidArgument("mlp_init: need at least two layer sizes");
  for (Index s : layer_sizes) {
    if (s <= 0) throw InvalidArgument("mlp_init: layer sizes must be positive");
  }
  NetworkParams net;
  net.layer_sizes.assign(layer_sizes.begin(), layer_sizes.end());
  net.hidden_activation = hidden;
  if (heads.empty()) heads.push_back({layer_sizes.back(), Activation::Linear});
  net.heads = std::move(heads);

  Rng rng(derive_seed(seed, "mlp_init"));
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const Index fan_in = layer_sizes[l], fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Matrix w(fan_out, fan_in);
    // Fill row-major so the draw order does not depend on Eigen's storage order.
    for (Index r = 0; r < fan_out; ++r)
      for (Index c = 0; c < fan_in; ++c) w(r, c) = dist(rng);
    net.weights.push_back(std::move(w));
    net.biases.push_back(Vector::Zero(fan_out));
  }
  net.validate();
  return net;
}

namespace {

void apply_heads_inplace(const NetworkParams& net, Matrix& out) {
  Index col = 0;
  for (const auto& h : net.heads) {
    if (h.activation != Activation::Linear) {
      auto blk = out.middleCols(col, h.width);
      blk = blk.unaryExpr([a = h.activation](double v) { return apply_activation(a, v); });
    }
    col += h.width;
  }
}

}  // namespace

Matrix forward(const NetworkParams& net, const Matrix& input) {
  if (input.cols() != net.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(input.cols()) +
                     " columns, network expects " + std::to_string(net.input_dim()));
  }
  if (!input.allFinite()) throw InvalidArgument("forward: non-finite input");

  const std::size_t layers = net.weights.size();
  Matrix out(input.rows(), net.output_dim());
  // Row-at-a-time products keep every row's arithmetic independent of the
  // batch it arrives in.
  Eigen::RowVectorXd cur, next;
  for (Index i = 0; i < input.rows(); ++i) {
    cur = input.row(i);
    for (std::size_t l = 0; l < layers; ++l) {
      next.noalias() = cur * net.weights[l].transpose();
      next += net.biases[l].transpose();
      if (l + 1 < layers && net.hidden_activation != Activation::Linear) {
        next = next.unaryExpr(
            [a = net.hidden_activation](double v) { return apply_activation(a, v); });
      }
      cur.swap(next);
    }
    out.row(i) = cur;
  }
  apply_heads_inplace(net, out);
  return out;
}

std::vector<Matrix> forward_heads(const NetworkParams& net, const Matrix& input) {
  Matrix out = forward(net, input);
  std::vector<Matrix> heads;
  Index col = 0;
  for (const auto& h : net.heads) {
    heads.emplace_back(out.middleCols(col, h.width));
    col += h.width;
  }
  return heads;
}

BoundNetwork bind(Tape& tape, const NetworkParams& net) {
  BoundNetwork b;
  b.net = &net;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    b.weights.push_back(tape.parameter(net.weights[l]));
    b.biases.push_back(tape.parameter(net.biases[l].transpose()));
  }
  return b;
}

namespace {

Var activate(Var v, Activation a) {
  switch (a) {
    case Activation::Linear: return v;
    case Activation::LeakyRelu: return leaky_relu(v, kLeakySlope);
    case Activation::Elu: return elu(v, 1.0);
    case Activation::Softplus: return softplus(v, kSoftplusFloor);
  }
  return v;
}

}  // namespace

std::vector<Var> forward(const BoundNetwork& bound, Var input) {
  const NetworkParams& net = *bound.net;
  if (input.cols() != net.input_dim()) {
    throw ShapeError("forward: input has " + std::to_string(input.cols()) +
                     " columns, network expects " + std::to_string(net.input_dim()));
  }
  if (!input.value().allFinite()) throw InvalidArgument("forward: non-finite input");
  Var cur = input;
  const std::size_t layers = net.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    cur = affine(cur, bound.weights[l], bound.biases[l]);
    if (l + 1 < layers) cur = activate(cur, net.hidden_activation);
  }
  std::vector<Var> heads;
  Index col = 0;
  for (const auto& h : net.heads) {
    Var slice = net.heads.size() == 1 ? cur : block(cur, 0, col, cur.rows(), h.width);
    heads.push_back(activate(slice, h.activation));
    col += h.width;
  }
  return heads;
}

NetworkGrad gradients(const BoundNetwork& bound) {
  NetworkGrad g;
  for (std::size_t l = 0; l < bound.weights.size(); ++l) {
    g.weights.push_back(bound.weights[l].grad());
    g.biases.push_back(bound.biases[l].grad().row(0).transpose());
  }
  return g;
}

std::vector<std::span<double>> parameter_spans(NetworkParams& net) {
  std::vector<std::span<double>> spans;
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    spans.emplace_back(net.weights[l].data(), static_cast<std::size_t>(net.weights[l].size()));
    spans.emplace_back(net.biases[l].data(), static_cast<std::size_t>(net.biases[l].size()));
  }
  return spans;
}

std::vector<std::span<const double>> gradient_spans(const NetworkGrad& grad) {
  std::vector<std::span<const double>> spans;
  for (std::size_t l = 0; l < grad.weights.size(); ++l) {
    spans.emplace_back(grad.weights[l].data(), static_cast<std::size_t>(grad.weights[l].size()));
    spans.emplace_back(grad.biases[l].data(), static_cast<std::size_t>(grad.biases[l].size()));
  }
  return spans;
}

}  // namespace ivaear::nn
