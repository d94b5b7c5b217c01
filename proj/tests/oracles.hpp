// Independent reference computations shared by the unit and acceptance tests.
#ifndef METASLICE_TESTS_ORACLES_HPP_
#define METASLICE_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "metaslice/neural.hpp"
#include "metaslice/rng.hpp"

namespace oracle {

// Plain scalar-loop forward pass over a network's parameters.
inline std::vector<double> forward(const metaslice::QNetwork& net, const std::vector<double>& x) {
  auto dense = [](const metaslice::DenseLayer& l, const std::vector<double>& in, bool relu) {
    std::vector<double> out(static_cast<std::size_t>(l.outputs()));
    for (Eigen::Index r = 0; r < l.outputs(); ++r) {
      double s = l.bias(r);
      for (Eigen::Index c = 0; c < l.inputs(); ++c) s += l.weight(r, c) * in[c];
      out[r] = relu ? std::max(0.0, s) : s;
    }
    return out;
  };
  auto stack = [&](const std::vector<metaslice::DenseLayer>& layers, std::vector<double> h,
                   bool relu_last) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      h = dense(layers[i], h, i + 1 < layers.size() || relu_last);
    }
    return h;
  };
  const auto& L = net.layers();
  const std::vector<double> feat = stack(L.trunk, x, true);
  const double v = stack(L.value, feat, false)[0];
  const std::vector<double> w = stack(L.advantage, feat, false);
  double mean = 0;
  for (double a : w) mean += a;
  mean /= static_cast<double>(w.size());
  std::vector<double> q;
  for (double a : w) q.push_back(v + a - mean);
  return q;
}

inline double loss(const metaslice::QNetwork& net, const std::vector<double>& x, int action,
                   double target) {
  const double e = target - forward(net, x)[static_cast<std::size_t>(action)];
  return e * e;
}

// Largest relative error between the analytic gradient and central finite
// differences, over every parameter. Relative error is
// |g - fd| / max(|g|, |fd|, floor).
inline double gradient_error(metaslice::QNetwork net, const std::vector<double>& x, int action,
                             double target, double h = 1e-5, double floor = 1e-7) {
  metaslice::GradientSet g = net.zero_gradients();
  net.backward(x, action, target, g);
  double worst = 0;
  auto& params = net.mutable_layers();
  std::vector<metaslice::DenseLayer*> p_layers, g_layers;
  params.for_each([&](metaslice::DenseLayer& l) { p_layers.push_back(&l); });
  g.layers.for_each([&](metaslice::DenseLayer& l) { g_layers.push_back(&l); });
  auto check = [&](double& p, double analytic) {
    const double saved = p;
    p = saved + h;
    const double up = loss(net, x, action, target);
    p = saved - h;
    const double down = loss(net, x, action, target);
    p = saved;
    const double fd = (up - down) / (2 * h);
    const double denom = std::max({std::abs(analytic), std::abs(fd), floor});
    worst = std::max(worst, std::abs(analytic - fd) / denom);
  };
  for (std::size_t i = 0; i < p_layers.size(); ++i) {
    for (Eigen::Index r = 0; r < p_layers[i]->weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < p_layers[i]->weight.cols(); ++c) {
        check(p_layers[i]->weight(r, c), g_layers[i]->weight(r, c));
      }
      check(p_layers[i]->bias(r), g_layers[i]->bias(r));
    }
  }
  return worst;
}

// Random biases so hidden units are not all at the same kink.
inline void randomize_biases(metaslice::QNetwork& net, metaslice::Rng& rng, double scale = 0.2) {
  net.mutable_layers().for_each([&](metaslice::DenseLayer& l) {
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) l.bias(r) = rng.uniform(-scale, scale);
  });
}

// Stationary distribution of an Erlang loss system with offered load `a`
// and `servers` servers.
inline std::vector<double> erlang_occupancy(double a, int servers) {
  std::vector<double> p(static_cast<std::size_t>(servers) + 1);
  double term = 1, norm = 0;
  for (int n = 0; n <= servers; ++n) {
    if (n > 0) term *= a / n;
    p[n] = term;
    norm += term;
  }
  for (double& v : p) v /= norm;
  return p;
}

}  // namespace oracle

#endif  // METASLICE_TESTS_ORACLES_HPP_
