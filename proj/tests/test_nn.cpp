#include "doctest.h"

#include <cmath>
#include <random>

#include "ivfg/errors.hpp"
#include "ivfg/nn.hpp"

using namespace ivfg;
using nn::Network;
using nn::Shape;
using nn::Tensor;

namespace {

Tensor random_tensor(Shape s, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t(s);
  for (double& v : t.data) v = g(rng);
  return t;
}

// Scalar objective sum(out * probe) so every output element contributes.
double probe_loss(const Network& net, const Tensor& x, const Tensor& probe) {
  const Tensor y = net.forward(x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += y.data[i] * probe.data[i];
  return s;
}

void check_gradients(Network net, Shape in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  net.initialize(rng);
  // Nonzero biases so their gradient paths are exercised too.
  std::normal_distribution<double> g(0.0, 0.1);
  for (double& p : net.parameters()) p += g(rng);
  Tensor x = random_tensor(in, rng);
  const Tensor probe = random_tensor(net.output_shape(), rng);

  nn::Trace trace;
  net.forward(x, trace);
  std::vector<double> pg(net.parameter_count(), 0.0);
  const Tensor gx = net.backward(trace, probe, pg);

  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp.data[i] += h;
    xm.data[i] -= h;
    const double num = (probe_loss(net, xp, probe) - probe_loss(net, xm, probe)) / (2 * h);
    CHECK(gx.data[i] == doctest::Approx(num).epsilon(1e-6).scale(1.0));
  }
  auto params = net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = probe_loss(net, x, probe);
    params[i] = keep - h;
    const double down = probe_loss(net, x, probe);
    params[i] = keep;
    CHECK(pg[i] == doctest::Approx((up - down) / (2 * h)).epsilon(1e-6).scale(1.0));
  }
}

}  // namespace

TEST_CASE("linear and activations backpropagate exactly") {
  Network net(Shape{5, 1, 1});
  net.linear(4).leaky_relu(0.2).linear(3).tanh();
  check_gradients(net, Shape{5, 1, 1}, 1);
}

TEST_CASE("strided convolution backpropagates exactly") {
  Network net(Shape{2, 6, 6});
  net.conv(3, 4, 2, 1).leaky_relu(0.2).conv(2, 3, 1, 1);
  check_gradients(net, Shape{2, 6, 6}, 2);
}

TEST_CASE("transposed convolution backpropagates exactly") {
  Network net(Shape{3, 1, 1});
  net.linear(2 * 2 * 2).reshape(Shape{2, 2, 2}).deconv(3, 4, 2, 1).leaky_relu(0.1).deconv(1, 4, 2, 1).tanh();
  check_gradients(net, Shape{3, 1, 1}, 3);
}

TEST_CASE("conv output geometry") {
  Network net(Shape{3, 32, 32});
  net.conv(8, 4, 2, 1);
  CHECK(net.output_shape() == Shape{8, 16, 16});
  net.deconv(4, 4, 2, 1);
  CHECK(net.output_shape() == Shape{4, 32, 32});
}

TEST_CASE("a single-pixel convolution matches a hand computation") {
  Network net(Shape{1, 2, 2});
  net.conv(1, 2, 1, 0);
  auto p = net.parameters();
  p[0] = 1.0, p[1] = 2.0, p[2] = 3.0, p[3] = 4.0, p[4] = 0.5;
  const Tensor y = net.forward(Tensor(Shape{1, 2, 2}, {1.0, -1.0, 2.0, 0.0}));
  CHECK(y.data.size() == 1);
  CHECK(y.data[0] == doctest::Approx(1.0 - 2.0 + 6.0 + 0.0 + 0.5));
}

TEST_CASE("transposed convolution is the adjoint of convolution") {
  // <conv(x), y> == <x, deconv(y)> when both share weights and have no bias.
  std::mt19937_64 rng(4);
  Network conv(Shape{2, 8, 8});
  conv.conv(3, 4, 2, 1);
  Network deconv(Shape{3, 4, 4});
  deconv.deconv(2, 4, 2, 1);
  conv.initialize(rng);
  auto cw = conv.parameters();
  auto dw = deconv.parameters();
  // conv weight is (out=3, in=2, k, k); deconv weight is (in=3, out=2, k, k): same memory order.
  std::copy(cw.begin(), cw.begin() + 3 * 2 * 16, dw.begin());
  const Tensor x = random_tensor(Shape{2, 8, 8}, rng);
  const Tensor y = random_tensor(Shape{3, 4, 4}, rng);
  const Tensor cx = conv.forward(x);
  const Tensor dy = deconv.forward(y);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += cx.data[i] * y.data[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x.data[i] * dy.data[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
}

TEST_CASE("parameter names and offsets tile the flat vector") {
  Network net(Shape{3, 8, 8}, "trunk.");
  net.conv(4, 4, 2, 1).leaky_relu().linear(5);
  const auto& specs = net.param_specs();
  REQUIRE(specs.size() == 4);
  CHECK(specs[0].name == "trunk.layer0.weight");
  CHECK(specs[1].name == "trunk.layer0.bias");
  CHECK(specs[2].name == "trunk.layer2.weight");
  std::size_t next = 0;
  for (const auto& s : specs) {
    CHECK(s.offset == next);
    next += s.size;
  }
  CHECK(next == net.parameter_count());
}

TEST_CASE("shape mismatches are rejected") {
  Network net(Shape{4, 1, 1});
  net.linear(2);
  CHECK_THROWS_AS(net.forward(Tensor(Shape{3, 1, 1})), DimensionError);
  CHECK_THROWS_AS(net.reshape(Shape{3, 1, 1}), DimensionError);
  CHECK_THROWS_AS(Tensor(Shape{2, 2, 2}, std::vector<double>(7)), DimensionError);
}

TEST_CASE("forward passes are deterministic") {
  std::mt19937_64 rng(5);
  Network net(Shape{3, 8, 8});
  net.conv(4, 4, 2, 1).leaky_relu().linear(6);
  net.initialize(rng);
  const Tensor x = random_tensor(Shape{3, 8, 8}, rng);
  CHECK(net.forward(x) == net.forward(x));
}

TEST_CASE("Adam minimizes a quadratic") {
  std::vector<double> p{3.0, -2.0};
  nn::Adam adam(2, {0.05, 0.9, 0.999, 1e-8});
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> g{2.0 * (p[0] - 1.0), 2.0 * (p[1] + 0.5)};
    adam.step(p, g);
  }
  CHECK(p[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(p[1] == doctest::Approx(-0.5).epsilon(1e-3));
  CHECK(adam.steps() == 2000);
}
