#ifndef METASLICE_NEURAL_HPP_
#define METASLICE_NEURAL_HPP_

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "metaslice/rng.hpp"

namespace metaslice {

class PolicyFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out

  Eigen::Index inputs() const { return weight.cols(); }
  Eigen::Index outputs() const { return weight.rows(); }
};

// Dueling topology: a rectified trunk feeding a value stream (-> 1) and an
// advantage stream (-> actions). Each stream has one rectified hidden layer
// of `stream_hidden` units, or none when it is 0.
struct NetworkShape {
  int inputs = 9;
  std::vector<int> trunk{64, 64};
  int stream_hidden = 32;
  int actions = 2;

  bool operator==(const NetworkShape&) const = default;
};

// Parameters laid out as trunk, value stream, advantage stream. Also used
// for gradients, which share the exact same shape.
struct LayerStack {
  std::vector<DenseLayer> trunk;
  std::vector<DenseLayer> value;
  std::vector<DenseLayer> advantage;

  static LayerStack zeros(const NetworkShape& shape);

  // Visits every layer in the canonical order above.
  void for_each(const std::function<void(DenseLayer&)>& fn);
  void for_each(const std::function<void(const DenseLayer&)>& fn) const;
  std::size_t parameter_count() const;
  bool congruent(const LayerStack& other) const;
};

struct GradientSet {
  LayerStack layers;

  double squared_norm() const;
};

struct ForwardCache;

class QNetwork {
 public:
  // All weights and biases zero.
  explicit QNetwork(NetworkShape shape);

  // Weights uniform in +-1/sqrt(fan_in), biases zero. Layers are filled in
  // canonical order, each weight matrix row-major.
  static QNetwork initialized(NetworkShape shape, Rng& rng);

  const NetworkShape& shape() const { return shape_; }
  const LayerStack& layers() const { return layers_; }
  LayerStack& mutable_layers() { return layers_; }

  // Q-values for one encoded state.
  Eigen::VectorXd forward(std::span<const double> input) const;
  // Column-per-sample batch: inputs is (inputs x B), result (actions x B).
  Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
  // State value V(s) alone, for inspecting the dueling split.
  Eigen::VectorXd value_batch(const Eigen::MatrixXd& inputs) const;

  // Squared error (target - Q(s, a))^2 and its exact gradient.
  double backward(std::span<const double> input, int action, double target,
                  GradientSet& grads) const;
  // Mean loss and mean gradient over the batch columns.
  double backward_batch(const Eigen::MatrixXd& inputs, std::span<const int> actions,
                        std::span<const double> targets, GradientSet& grads) const;

  GradientSet zero_gradients() const { return {LayerStack::zeros(shape_)}; }

  // theta <- theta - learning_rate * grads. A positive clip_norm rescales
  // the gradient to at most that global L2 norm first.
  void sgd_step(const GradientSet& grads, double learning_rate, double clip_norm = 0.0);

  // Copies parameters into `dst`; throws std::invalid_argument unless the
  // architectures match.
  void clone_into(QNetwork& dst) const;

  void save(std::ostream& os) const;
  static QNetwork load(std::istream& is);

  bool operator==(const QNetwork& other) const;

 private:
  void check_input_rows(Eigen::Index rows) const;
  void run(const Eigen::MatrixXd& inputs, ForwardCache& cache) const;

  NetworkShape shape_;
  LayerStack layers_;
};

}  // namespace metaslice

#endif  // METASLICE_NEURAL_HPP_
