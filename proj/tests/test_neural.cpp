#include <doctest.h>

#include <sstream>

#include "metaslice/neural.hpp"
#include "oracles.hpp"

using namespace metaslice;

namespace {

std::vector<double> random_input(Rng& rng, int width) {
  std::vector<double> x(static_cast<std::size_t>(width));
  for (double& v : x) v = rng.uniform();
  return x;
}

NetworkShape small_shape() { return {5, {6, 4}, 3, 2}; }

}  // namespace

TEST_CASE("zero network outputs zero") {
  QNetwork net(NetworkShape{});
  const auto q = net.forward(std::vector<double>(9, 0.5));
  CHECK(q.size() == 2);
  CHECK(q(0) == 0.0);
  CHECK(q(1) == 0.0);
}

TEST_CASE("single hidden unit matches hand evaluation") {
  QNetwork net(NetworkShape{1, {1}, 0, 2});
  auto& L = net.mutable_layers();
  L.trunk[0].weight(0, 0) = 2.0;
  L.trunk[0].bias(0) = -0.5;
  L.value[0].weight(0, 0) = 1.5;
  L.value[0].bias(0) = 0.25;
  L.advantage[0].weight(0, 0) = 1.0;
  L.advantage[0].weight(1, 0) = -3.0;
  L.advantage[0].bias(1) = 0.5;
  // h = relu(2 * 0.75 - 0.5) = 1, V = 1.75, W = (1, -2.5), mean -0.75.
  const auto q = net.forward(std::vector<double>{0.75});
  CHECK(q(0) == doctest::Approx(1.75 + 1.75));
  CHECK(q(1) == doctest::Approx(1.75 - 1.75));
  // Inactive hidden unit: only biases reach the output.
  const auto q0 = net.forward(std::vector<double>{0.1});
  CHECK(q0(0) == doctest::Approx(0.25 - 0.25));
  CHECK(q0(1) == doctest::Approx(0.25 + 0.25));
}

TEST_CASE("forward agrees with the scalar reference") {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    QNetwork net = QNetwork::initialized(NetworkShape{}, rng);
    oracle::randomize_biases(net, rng);
    const auto x = random_input(rng, 9);
    const auto q = net.forward(x);
    const auto ref = oracle::forward(net, x);
    CHECK(q(0) == doctest::Approx(ref[0]).epsilon(1e-12));
    CHECK(q(1) == doctest::Approx(ref[1]).epsilon(1e-12));
  }
}

TEST_CASE("batch forward matches per-sample forward") {
  Rng rng(2);
  QNetwork net = QNetwork::initialized(NetworkShape{}, rng);
  Eigen::MatrixXd x(9, 17);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < 9; ++r) x(r, c) = rng.uniform();
  }
  const Eigen::MatrixXd q = net.forward_batch(x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const Eigen::VectorXd col = x.col(c);
    const Eigen::VectorXd single = net.forward(std::span<const double>(col.data(), 9));
    CHECK((q.col(c) - single).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("dueling identity") {
  Rng rng(3);
  QNetwork net = QNetwork::initialized(NetworkShape{}, rng);
  oracle::randomize_biases(net, rng, 1.0);
  Eigen::MatrixXd x(9, 500);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    for (Eigen::Index r = 0; r < 9; ++r) x(r, c) = rng.uniform();
  }
  const Eigen::MatrixXd q = net.forward_batch(x);
  const Eigen::VectorXd v = net.value_batch(x);
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    REQUIRE(std::abs(q(0, c) - v(c) + q(1, c) - v(c)) < 1e-9);
  }
}

TEST_CASE("input width is checked") {
  QNetwork net(NetworkShape{});
  CHECK_THROWS_AS(net.forward(std::vector<double>(8, 0.0)), std::invalid_argument);
}

TEST_CASE("perfect prediction has zero loss and zero gradient") {
  Rng rng(4);
  QNetwork net = QNetwork::initialized(small_shape(), rng);
  const auto x = random_input(rng, 5);
  const double target = net.forward(x)(1);
  GradientSet g = net.zero_gradients();
  CHECK(net.backward(x, 1, target, g) == doctest::Approx(0.0));
  CHECK(g.squared_norm() == doctest::Approx(0.0));
}

TEST_CASE("zero network loss") {
  QNetwork net(NetworkShape{});
  GradientSet g = net.zero_gradients();
  CHECK(net.backward(std::vector<double>(9, 0.3), 0, 1.0, g) == doctest::Approx(1.0));
}

TEST_CASE("analytic gradient matches finite differences") {
  Rng rng(5);
  for (int t = 0; t < 30; ++t) {
    QNetwork net = QNetwork::initialized(small_shape(), rng);
    oracle::randomize_biases(net, rng);
    const auto x = random_input(rng, 5);
    const int action = static_cast<int>(rng.below(2));
    const double target = rng.uniform(-3, 3);
    CHECK(oracle::gradient_error(net, x, action, target) < 1e-4);
  }
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  Rng rng(6);
  QNetwork net = QNetwork::initialized(small_shape(), rng);
  const int batch = 4;
  Eigen::MatrixXd x(5, batch);
  std::vector<int> actions;
  std::vector<double> targets;
  for (int b = 0; b < batch; ++b) {
    for (int r = 0; r < 5; ++r) x(r, b) = rng.uniform();
    actions.push_back(static_cast<int>(rng.below(2)));
    targets.push_back(rng.uniform(-1, 1));
  }
  GradientSet mean = net.zero_gradients();
  const double loss = net.backward_batch(x, actions, targets, mean);

  GradientSet sum = net.zero_gradients(), one = net.zero_gradients();
  double loss_sum = 0;
  for (int b = 0; b < batch; ++b) {
    const Eigen::VectorXd col = x.col(b);
    loss_sum += net.backward(std::span<const double>(col.data(), 5), actions[b], targets[b], one);
    std::vector<DenseLayer*> s, o;
    sum.layers.for_each([&](DenseLayer& l) { s.push_back(&l); });
    one.layers.for_each([&](DenseLayer& l) { o.push_back(&l); });
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i]->weight += o[i]->weight / batch;
      s[i]->bias += o[i]->bias / batch;
    }
  }
  CHECK(loss == doctest::Approx(loss_sum / batch));
  std::vector<const DenseLayer*> a, b;
  mean.layers.for_each([&](const DenseLayer& l) { a.push_back(&l); });
  sum.layers.for_each([&](const DenseLayer& l) { b.push_back(&l); });
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK((a[i]->weight - b[i]->weight).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a[i]->bias - b[i]->bias).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sgd step arithmetic") {
  QNetwork net(NetworkShape{1, {1}, 0, 2});
  net.mutable_layers().trunk[0].weight(0, 0) = 1.0;
  GradientSet g = net.zero_gradients();
  const QNetwork before = net;
  net.sgd_step(g, 0.1);
  CHECK(net == before);
  g.layers.trunk[0].weight(0, 0) = 2.0;
  net.sgd_step(g, 0.1);
  CHECK(net.layers().trunk[0].weight(0, 0) == doctest::Approx(0.8));
}

TEST_CASE("gradient clipping bounds the step") {
  QNetwork net(NetworkShape{1, {1}, 0, 2});
  GradientSet g = net.zero_gradients();
  g.layers.trunk[0].weight(0, 0) = 3.0;
  g.layers.trunk[0].bias(0) = 4.0;
  net.sgd_step(g, 1.0, 1.0);
  CHECK(net.layers().trunk[0].weight(0, 0) == doctest::Approx(-0.6));
  CHECK(net.layers().trunk[0].bias(0) == doctest::Approx(-0.8));
}

TEST_CASE("sgd converges on a one-parameter quadratic") {
  // Only the value bias is trainable in effect: Q(s, a) = b_v, minimum at b_v = target.
  QNetwork net(NetworkShape{1, {1}, 0, 2});
  GradientSet g = net.zero_gradients();
  for (int i = 0; i < 500; ++i) {
    net.backward(std::vector<double>{0.0}, 0, 2.5, g);
    net.sgd_step(g, 0.05);
  }
  CHECK(net.forward(std::vector<double>{0.0})(0) == doctest::Approx(2.5).epsilon(1e-6));
}

TEST_CASE("clone semantics") {
  Rng rng(7);
  QNetwork src = QNetwork::initialized(NetworkShape{}, rng);
  QNetwork dst(NetworkShape{});
  src.clone_into(dst);
  CHECK(dst == src);
  const auto x = random_input(rng, 9);
  CHECK(dst.forward(x) == src.forward(x));
  const Eigen::VectorXd before = dst.forward(x);
  src.mutable_layers().value.back().bias(0) += 1.0;
  CHECK(dst.forward(x) == before);
  CHECK_FALSE(dst == src);

  QNetwork other(NetworkShape{9, {32}, 16, 2});
  CHECK_THROWS_AS(src.clone_into(other), std::invalid_argument);
}

TEST_CASE("initialization follows the documented law") {
  Rng a(8), b(8);
  const QNetwork net = QNetwork::initialized(NetworkShape{}, a);
  QNetwork copy(NetworkShape{});
  net.clone_into(copy);
  // Replay the draws: canonical layer order, row-major.
  bool match = true;
  copy.layers().for_each([&](const DenseLayer& l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.inputs()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        const double w = b.uniform(-bound, bound);
        match &= l.weight(r, c) == w;
        match &= std::abs(w) <= bound;
      }
    }
    match &= l.bias.isZero(0.0);
  });
  CHECK(match);
  CHECK(net.layers().parameter_count() ==
        static_cast<std::size_t>(9 * 64 + 64 + 64 * 64 + 64 + 2 * (64 * 32 + 32) + 32 + 1 + 32 * 2 + 2));
}

TEST_CASE("policy file round trip") {
  Rng rng(9);
  QNetwork net = QNetwork::initialized(NetworkShape{}, rng);
  oracle::randomize_biases(net, rng);
  std::stringstream ss;
  net.save(ss);
  const QNetwork back = QNetwork::load(ss);
  CHECK(back.shape() == net.shape());
  double worst = 0;
  std::vector<const DenseLayer*> a, b;
  net.layers().for_each([&](const DenseLayer& l) { a.push_back(&l); });
  back.layers().for_each([&](const DenseLayer& l) { b.push_back(&l); });
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, (a[i]->weight - b[i]->weight).cwiseAbs().maxCoeff());
    worst = std::max(worst, (a[i]->bias - b[i]->bias).cwiseAbs().maxCoeff());
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("policy loader rejects malformed files") {
  QNetwork net(small_shape());
  std::stringstream good;
  net.save(good);
  const std::string text = good.str();

  std::stringstream empty;
  CHECK_THROWS_AS(QNetwork::load(empty), PolicyFormatError);
  std::stringstream wrong_magic("not-a-policy 1 5 2 3 6 4\n");
  CHECK_THROWS_AS(QNetwork::load(wrong_magic), PolicyFormatError);
  std::stringstream wrong_version(std::string("metaslice-qnet 2") + text.substr(text.find(' ', 15)));
  CHECK_THROWS_AS(QNetwork::load(wrong_version), PolicyFormatError);
  std::stringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(QNetwork::load(truncated), PolicyFormatError);
  std::string bad = text;
  bad.replace(bad.find("trunk.0 6 5"), 11, "trunk.0 7 5");
  std::stringstream wrong_dims(bad);
  CHECK_THROWS_AS(QNetwork::load(wrong_dims), PolicyFormatError);
}
