#include "ivaear/error.hpp"
#include "ivaear/nn/adam.hpp"
#include "ivaear/nn/network.hpp"
#include "ivaear/nn/tape.hpp"
#include "ivaear/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ivaear;
using namespace ivaear::nn;

namespace {

double max_rel_error(const std::vector<std::span<const double>>& a, const std::vector<Vector>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t k = 0; k < a[i].size(); ++k) {
      const double x = a[i][k], y = b[i](static_cast<Index>(k));
      worst = std::max(worst, std::abs(x - y) / std::max({std::abs(x), std::abs(y), 1e-6}));
    }
  }
  return worst;
}

Matrix random_matrix(Index r, Index c, std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < r; ++i)
    for (Index j = 0; j < c; ++j) m(i, j) = n(rng);
  return m;
}

}  // namespace

TEST_CASE("mlp_init shapes, zero biases and determinism") {
  const std::vector<Index> sizes{2, 3};
  const auto net = mlp_init(sizes, Activation::LeakyRelu, {}, 7);
  REQUIRE(net.weights.size() == 1);
  CHECK(net.weights[0].rows() == 3);
  CHECK(net.weights[0].cols() == 2);
  CHECK(net.biases[0] == Vector::Zero(3));
  const double bound = std::sqrt(6.0 / 5.0);
  CHECK(net.weights[0].cwiseAbs().maxCoeff() <= bound);
  CHECK(mlp_init(sizes, Activation::LeakyRelu, {}, 7) == net);
  CHECK_FALSE(mlp_init(sizes, Activation::LeakyRelu, {}, 8) == net);
}

TEST_CASE("mlp_init parameter count of the default architecture") {
  const std::vector<Index> sizes{10, 128, 128, 128, 6};
  const auto net = mlp_init(sizes, Activation::LeakyRelu, {}, 1);
  CHECK(net.weights.size() == 4);
  std::size_t expected = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    expected += static_cast<std::size_t>(sizes[l] * sizes[l + 1] + sizes[l + 1]);
  }
  CHECK(expected == 1408 + 2 * 16512 + 774);
  CHECK(net.parameter_count() == expected);
}

TEST_CASE("mlp_init rejects bad layer sizes") {
  CHECK_THROWS_AS(mlp_init(std::vector<Index>{}, Activation::LeakyRelu, {}, 1), InvalidArgument);
  CHECK_THROWS_AS(mlp_init(std::vector<Index>{3}, Activation::LeakyRelu, {}, 1), InvalidArgument);
  CHECK_THROWS_AS(mlp_init(std::vector<Index>{3, 0}, Activation::LeakyRelu, {}, 1), InvalidArgument);
  CHECK_THROWS_AS(mlp_init(std::vector<Index>{3, -2, 1}, Activation::LeakyRelu, {}, 1), InvalidArgument);
}

TEST_CASE("forward examples") {
  SUBCASE("identity linear layer") {
    auto net = mlp_init(std::vector<Index>{2, 2}, Activation::LeakyRelu, {}, 1);
    net.weights[0] = Matrix::Identity(2, 2);
    Matrix x(1, 2);
    x << 1, 2;
    CHECK(forward(net, x) == x);
  }
  SUBCASE("leaky unit") {
    auto net = mlp_init(std::vector<Index>{1, 1, 1}, Activation::LeakyRelu, {}, 1);
    net.weights[0](0, 0) = 1.0;
    net.weights[1](0, 0) = 1.0;
    CHECK(forward(net, Matrix::Constant(1, 1, -1.0))(0, 0) == doctest::Approx(-0.01).epsilon(1e-15));
  }
  SUBCASE("softplus head at zero") {
    auto net = mlp_init(std::vector<Index>{1, 1}, Activation::LeakyRelu, {{1, Activation::Softplus}}, 1);
    net.weights[0](0, 0) = 0.0;
    const double y = forward(net, Matrix::Constant(1, 1, 5.0))(0, 0);
    CHECK(y == doctest::Approx(std::log(2.0) + kSoftplusFloor).epsilon(1e-14));
    CHECK(y == doctest::Approx(0.6931).epsilon(1e-4));
  }
}

TEST_CASE("forward errors and shape contract") {
  const auto net = mlp_init(std::vector<Index>{3, 4, 2}, Activation::LeakyRelu, {}, 2);
  CHECK_THROWS_AS(forward(net, Matrix::Zero(5, 2)), ShapeError);
  Matrix bad = Matrix::Zero(2, 3);
  bad(1, 1) = std::nan("");
  CHECK_THROWS_AS(forward(net, bad), InvalidArgument);
  bad(1, 1) = INFINITY;
  CHECK_THROWS_AS(forward(net, bad), InvalidArgument);
  const Matrix x = random_matrix(7, 3, 3);
  const Matrix y = forward(net, x);
  CHECK(y.rows() == 7);
  CHECK(y.cols() == 2);
  CHECK(forward(net, x) == y);
}

TEST_CASE("softplus heads stay positive for extreme inputs") {
  auto net = mlp_init(std::vector<Index>{1, 8, 2}, Activation::LeakyRelu,
                      {{1, Activation::Linear}, {1, Activation::Softplus}}, 4);
  net.weights[1] *= 1e3;
  for (double v : {-1e6, -1e3, -10.0, 0.0, 10.0, 1e3}) {
    const auto heads = forward_heads(net, Matrix::Constant(1, 1, v));
    CHECK(heads[1](0, 0) >= kSoftplusFloor);
    CHECK(std::isfinite(heads[1](0, 0)));
  }
}

TEST_CASE("plain and taped forward agree row by row") {
  const auto net = mlp_init(std::vector<Index>{4, 6, 5, 3}, Activation::Elu,
                            {{2, Activation::Linear}, {1, Activation::Softplus}}, 11);
  const Matrix x = random_matrix(9, 4, 5);
  Tape tape;
  const auto bound = bind(tape, net);
  const auto heads = forward(bound, tape.constant(x));
  const auto plain = forward_heads(net, x);
  CHECK((heads[0].value() - plain[0]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((heads[1].value() - plain[1]).cwiseAbs().maxCoeff() < 1e-12);
  const Matrix one = forward(net, x.row(4));
  CHECK(one.row(0) == forward(net, x).row(4));
}

TEST_CASE("backward examples") {
  SUBCASE("linear") {
    Tape t;
    Var w = t.parameter(Matrix::Constant(1, 1, 0.5));
    Var loss = w * t.constant(Matrix::Constant(1, 1, 3.0));
    t.backward(loss);
    CHECK(w.grad()(0, 0) == 3.0);
  }
  SUBCASE("squared residual") {
    Tape t;
    Var w = t.parameter(Matrix::Constant(1, 1, 1.0));
    Var x = t.constant(Matrix::Constant(1, 1, 2.0));
    Var y = t.constant(Matrix::Constant(1, 1, 1.0));
    Var loss = square(w * x - y);
    t.backward(loss);
    CHECK(w.grad()(0, 0) == 4.0);
  }
  SUBCASE("unused parameter gets exact zero") {
    Tape t;
    Var w = t.parameter(Matrix::Constant(2, 2, 1.0));
    Var unused = t.parameter(Matrix::Constant(3, 1, 7.0));
    t.backward(sum(square(w)));
    CHECK(unused.grad() == Matrix::Zero(3, 1));
  }
  SUBCASE("non-scalar loss") {
    Tape t;
    Var w = t.parameter(Matrix::Constant(2, 1, 1.0));
    CHECK_THROWS_AS(t.backward(w * 2.0), InvalidArgument);
  }
  SUBCASE("shape mismatch in ops") {
    Tape t;
    Var a = t.parameter(Matrix::Zero(2, 2));
    Var b = t.parameter(Matrix::Zero(3, 2));
    CHECK_THROWS_AS(a + b, ShapeError);
    CHECK_THROWS_AS(block(a, 1, 1, 2, 2), ShapeError);
  }
}

TEST_CASE("backward matches finite differences for every primitive") {
  Tape t;
  Matrix a0 = random_matrix(3, 2, 21);
  Matrix b0 = random_matrix(3, 2, 22).cwiseAbs().array() + 0.5;
  Matrix w0 = random_matrix(4, 2, 23);
  Matrix c0 = random_matrix(1, 4, 24);
  std::vector<std::span<double>> spans{{a0.data(), 6}, {b0.data(), 6}, {w0.data(), 8}, {c0.data(), 4}};
  auto loss_of = [&](Tape& tp, Var& A, Var& B, Var& Wv, Var& C) {
    A = tp.parameter(a0);
    B = tp.parameter(b0);
    Wv = tp.parameter(w0);
    C = tp.parameter(c0);
    Var h = affine(A, Wv, C);
    Var s = leaky_relu(h) + elu(h * 0.7) + softplus(h, 1e-6) + exp(h * 0.1);
    Var q = (A * B) / (B + 1.0) - A + log(B) + (-A);
    Var blk = block(s, 1, 1, 2, 3);
    return sum(square(blk)) * 0.25 + sum(q * q) + 2.0 * sum(log(softplus(s, 1e-6)));
  };
  Var A, B, Wv, C;
  Var loss = loss_of(t, A, B, Wv, C);
  t.backward(loss);
  Matrix ga = A.grad(), gb = B.grad(), gw = Wv.grad(), gc = C.grad();
  auto fd = finite_diff_gradient(
      [&] {
        Tape tp;
        Var a, b, w, c;
        return loss_of(tp, a, b, w, c).value()(0, 0);
      },
      spans, 1e-5);
  std::vector<std::span<const double>> an{{ga.data(), 6}, {gb.data(), 6}, {gw.data(), 8}, {gc.data(), 4}};
  CHECK(max_rel_error(an, fd) < 1e-6);
}

TEST_CASE("network gradients match finite differences on random tiny nets") {
  for (std::uint64_t trial = 0; trial < 15; ++trial) {
    Rng rng(derive_seed(99, "nn_trial", trial));
    std::uniform_int_distribution<int> units(1, 8), layers(1, 3);
    std::vector<Index> sizes{units(rng)};
    const int L = layers(rng);
    for (int l = 0; l < L; ++l) sizes.push_back(units(rng));
    const Activation hidden = trial % 2 ? Activation::Elu : Activation::LeakyRelu;
    auto net = mlp_init(sizes, hidden, {}, trial);
    for (auto& b : net.biases) b = random_matrix(b.size(), 1, trial + 50) * 0.3;
    const Matrix x = random_matrix(4, sizes.front(), trial + 100);
    const Matrix target = random_matrix(4, sizes.back(), trial + 200);
    auto loss = [&](const NetworkParams& n) {
      Tape t;
      const auto out = forward(bind(t, n), t.constant(x));
      Var l = sum(square(out[0] - t.constant(target)));
      return std::make_pair(l.value()(0, 0), 0);
    };
    Tape t;
    const auto bound = bind(t, net);
    Var l = sum(square(forward(bound, t.constant(x))[0] - t.constant(target)));
    t.backward(l);
    const auto g = gradients(bound);
    const auto fd = finite_diff_gradient([&] { return loss(net).first; }, parameter_spans(net), 1e-5);
    CHECK(max_rel_error(gradient_spans(g), fd) < 1e-4);
  }
}

TEST_CASE("lr_schedule") {
  AdamConfig c;
  CHECK(lr_schedule(0, c) == doctest::Approx(0.001).epsilon(1e-15));
  CHECK(lr_schedule(10000, c) == doctest::Approx(0.0001).epsilon(1e-15));
  CHECK(lr_schedule(25000, c) == doctest::Approx(0.0001).epsilon(1e-15));
  const double oracle = 0.0001 + 0.0009 * 0.5 * 0.5;
  CHECK(lr_schedule(5000, c) == doctest::Approx(oracle).epsilon(1e-14));
  CHECK(oracle == doctest::Approx(0.000325).epsilon(1e-12));
  for (std::int64_t s = 1; s < 12000; s += 37) CHECK(lr_schedule(s, c) <= lr_schedule(s - 1, c));
}

TEST_CASE("adam_step") {
  SUBCASE("zero gradient leaves parameters unchanged") {
    Vector p = Vector::LinSpaced(4, -1, 1);
    const Vector before = p;
    Vector g = Vector::Zero(4);
    AdamState st;
    std::vector<std::span<double>> ps{{p.data(), 4}};
    std::vector<std::span<const double>> gs{{g.data(), 4}};
    adam_step(ps, gs, st);
    CHECK(p == before);
    CHECK(st.step == 1);
  }
  SUBCASE("first step closed form") {
    Vector p = Vector::Zero(3);
    Vector g(3);
    g << 2.0, -0.5, 1e-3;
    AdamState st;
    std::vector<std::span<double>> ps{{p.data(), 3}};
    std::vector<std::span<const double>> gs{{g.data(), 3}};
    adam_step(ps, gs, st);
    for (Index i = 0; i < 3; ++i) {
      // m̂ = g, v̂ = g², update = rate·g/(|g| + ε)
      const double expected = -0.001 * g(i) / (std::abs(g(i)) + 1e-8);
      CHECK(p(i) == doctest::Approx(expected).epsilon(1e-12));
      CHECK(std::abs(p(i)) < 0.001);
    }
  }
  SUBCASE("shape mismatch") {
    Vector p = Vector::Zero(3), g = Vector::Zero(2);
    AdamState st;
    std::vector<std::span<double>> ps{{p.data(), 3}};
    std::vector<std::span<const double>> gs{{g.data(), 2}};
    CHECK_THROWS_AS(adam_step(ps, gs, st), ShapeError);
  }
  SUBCASE("deterministic trajectories") {
    auto run = [] {
      Vector p = Vector::Constant(2, 3.0);
      AdamState st;
      for (int k = 0; k < 50; ++k) {
        Vector g = 2.0 * p;
        std::vector<std::span<double>> ps{{p.data(), 2}};
        std::vector<std::span<const double>> gs{{g.data(), 2}};
        adam_step(ps, gs, st);
      }
      return p;
    };
    CHECK(run() == run());
  }
}

TEST_CASE("finite_diff_gradient examples") {
  Vector theta = Vector::Constant(1, 1.0);
  std::vector<std::span<double>> ps{{theta.data(), 1}};
  auto g = finite_diff_gradient([&] { return theta(0) * theta(0); }, ps, 1e-5);
  CHECK(std::abs(g[0](0) - 2.0) < 1e-8);
  CHECK(theta(0) == 1.0);
  auto z = finite_diff_gradient([] { return 4.0; }, ps, 1e-5);
  CHECK(z[0](0) == 0.0);
  CHECK_THROWS_AS(finite_diff_gradient([] { return 1.0; }, ps, 0.0), InvalidArgument);
}
