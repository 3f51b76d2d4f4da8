#include <doctest.h>

#include <cmath>

#include "procrl/errors.hpp"
#include "procrl/net.hpp"
#include "procrl/rng.hpp"

using namespace procrl;

namespace {

// Straightforward re-implementation of the forward pass used as an oracle.
std::vector<double> naive_forward(const DenseNet& net, std::vector<double> x) {
  for (int l = 0; l < net.num_layers(); ++l) {
    const int in = net.dims()[l];
    const int out = net.dims()[l + 1];
    std::vector<double> y(out);
    for (int o = 0; o < out; ++o) {
      double acc = net.bias(l)[o];
      for (int i = 0; i < in; ++i) acc += x[i] * net.weights(l)[i * out + o];
      y[o] = l + 1 < net.num_layers() ? std::tanh(acc) : acc;
    }
    x = std::move(y);
  }
  return x;
}

std::vector<double> random_input(Rng& rng, int n) {
  std::vector<double> x(n);
  for (double& v : x) v = uniform01(rng) * 2 - 1;
  return x;
}

}  // namespace

TEST_CASE("glorot init: bounded weights, zero biases, deterministic") {
  Rng a(1), b(1);
  const DenseNet n1 = DenseNet::glorot({10, 6, 3}, a);
  const DenseNet n2 = DenseNet::glorot({10, 6, 3}, b);
  CHECK(n1 == n2);
  const double lim0 = std::sqrt(6.0 / 16.0);
  for (double w : n1.weights(0)) CHECK(std::abs(w) <= lim0);
  for (double v : n1.bias(0)) CHECK(v == 0.0);
  for (double v : n1.bias(1)) CHECK(v == 0.0);
  CHECK(n1.params().size() == 10 * 6 + 6 + 6 * 3 + 3);
  CHECK(n1.weight_offset(1) == 66);
  CHECK(n1.bias_offset(1) == 84);
}

TEST_CASE("forward matches the naive oracle and rejects wrong shapes") {
  Rng rng(3);
  const DenseNet net = DenseNet::glorot({7, 5, 4, 2}, rng);
  for (int i = 0; i < 20; ++i) {
    const auto x = random_input(rng, 7);
    const auto y = forward(net, x);
    const auto ref = naive_forward(net, x);
    REQUIRE(y.size() == ref.size());
    for (std::size_t k = 0; k < y.size(); ++k) CHECK(y[k] == doctest::Approx(ref[k]).epsilon(1e-12));
    CHECK(forward(net, x) == y);
  }
  CHECK_THROWS_AS(forward(net, std::vector<double>(6)), ShapeMismatch);
}

TEST_CASE("input gradient matches central differences") {
  Rng rng(5);
  const DenseNet net = DenseNet::glorot({6, 8, 3}, rng);
  const auto x = random_input(rng, 6);
  const std::vector<double> g{0.3, -1.2, 0.7};
  ForwardCache cache;
  forward(net, x, cache);
  const BackwardResult r = backward(net, cache, g);
  const double h = 1e-6;
  for (int i = 0; i < 6; ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const auto yp = naive_forward(net, xp), ym = naive_forward(net, xm);
    double num = 0.0;
    for (int k = 0; k < 3; ++k) num += g[k] * (yp[k] - ym[k]) / (2 * h);
    CHECK(r.input_grad[i] == doctest::Approx(num).epsilon(1e-6));
  }
}

TEST_CASE("grad_check is small for random nets and repeatable") {
  Rng rng(9);
  const DenseNet net = DenseNet::glorot({5, 4, 3}, rng);
  const auto x = random_input(rng, 5);
  const double e = grad_check(net, x, 1e-5);
  CHECK(e < 1e-4);
  CHECK(grad_check(net, x, 1e-5) == e);
}

TEST_CASE("adam: first step moves by lr against the gradient") {
  DenseNet net({1, 1});
  AdamState st(net, AdamConfig{.lr = 0.1});
  const std::vector<double> g{1.0, 0.0};
  adam_step(net, g, st);
  CHECK(net.params()[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(net.params()[1] == 0.0);
  CHECK(st.step == 1);
}

TEST_CASE("adam converges on a quadratic") {
  DenseNet net({1, 1});
  AdamState st(net, AdamConfig{.lr = 0.05});
  for (int i = 0; i < 2000; ++i) {
    const std::vector<double> g{2 * (net.params()[0] - 3.0), 2 * (net.params()[1] + 1.0)};
    adam_step(net, g, st);
  }
  CHECK(net.params()[0] == doctest::Approx(3.0).epsilon(1e-3));
  CHECK(net.params()[1] == doctest::Approx(-1.0).epsilon(1e-3));
}

TEST_CASE("clip_grad_norm") {
  std::vector<double> g{3.0, 4.0};
  CHECK(clip_grad_norm(g, 1.0) == doctest::Approx(5.0));
  CHECK(g[0] == doctest::Approx(0.6));
  CHECK(g[1] == doctest::Approx(0.8));
  std::vector<double> small{0.1, 0.1};
  clip_grad_norm(small, 1.0);
  CHECK(small[0] == 0.1);
}

TEST_CASE("checkpoint round-trip and header checks") {
  Rng rng(2);
  const DenseNet net = DenseNet::glorot({4, 3, 2}, rng);
  const std::string bytes = serialize_checkpoint(net, "value");
  CHECK(bytes.substr(0, 4) == "PRCL");
  std::string role;
  CHECK(deserialize_checkpoint(bytes, &role) == net);
  CHECK(role == "value");
  // Same parameters under another role differ only in the tag bytes.
  const std::string prm = serialize_checkpoint(net, "prm");
  REQUIRE(prm.size() == bytes.size());
  std::size_t diff = 0;
  for (std::size_t i = 0; i < bytes.size(); ++i) diff += bytes[i] != prm[i];
  CHECK(diff > 0);
  CHECK(diff <= 8);
  CHECK(prm.substr(16) == bytes.substr(16));

  std::string corrupt = bytes;
  corrupt[0] = 'X';
  CHECK_THROWS_AS(deserialize_checkpoint(corrupt), FormatError);
  CHECK_THROWS_AS(deserialize_checkpoint(bytes.substr(0, bytes.size() - 3)), FormatError);
}
