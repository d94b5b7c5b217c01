#include "metaslice/neural.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace metaslice {

namespace {

constexpr const char* kMagic = "metaslice-qnet";
constexpr int kFormatVersion = 1;

DenseLayer zero_layer(int inputs, int outputs) {
  return {Eigen::MatrixXd::Zero(outputs, inputs), Eigen::VectorXd::Zero(outputs)};
}

std::vector<DenseLayer> zero_stream(int inputs, int hidden, int outputs) {
  std::vector<DenseLayer> s;
  if (hidden > 0) {
    s.push_back(zero_layer(inputs, hidden));
    s.push_back(zero_layer(hidden, outputs));
  } else {
    s.push_back(zero_layer(inputs, outputs));
  }
  return s;
}

// Activations of one stack. post[0] is the stack input, post[i + 1] the
// output of layer i; pre[i] is layer i before the rectifier.
struct StackTrace {
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post;
};

void run_stack(const std::vector<DenseLayer>& stack, const Eigen::MatrixXd& input,
               bool rectify_last, StackTrace& trace) {
  trace.pre.resize(stack.size());
  trace.post.resize(stack.size() + 1);
  trace.post[0] = input;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const DenseLayer& layer = stack[i];
    trace.pre[i].noalias() = layer.weight * trace.post[i];
    trace.pre[i].colwise() += layer.bias;
    if (i + 1 < stack.size() || rectify_last) {
      trace.post[i + 1] = trace.pre[i].cwiseMax(0.0);
    } else {
      trace.post[i + 1] = trace.pre[i];
    }
  }
}

// Accumulates parameter gradients given dL/d(stack output); returns dL/d(input).
Eigen::MatrixXd backprop_stack(const std::vector<DenseLayer>& stack, const StackTrace& trace,
                               bool rectify_last, Eigen::MatrixXd grad_out,
                               std::vector<DenseLayer>& grads) {
  for (std::size_t i = stack.size(); i-- > 0;) {
    if (i + 1 < stack.size() || rectify_last) {
      grad_out = grad_out.cwiseProduct((trace.pre[i].array() > 0.0).cast<double>().matrix());
    }
    grads[i].weight.noalias() += grad_out * trace.post[i].transpose();
    grads[i].bias += grad_out.rowwise().sum();
    Eigen::MatrixXd grad_in = stack[i].weight.transpose() * grad_out;
    grad_out = std::move(grad_in);
  }
  return grad_out;
}

void write_double(std::ostream& os, double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  os.write(buf, res.ptr - buf);
}

double parse_double(const std::string& token) {
  double v = 0.0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw PolicyFormatError("bad number '" + token + "'");
  }
  return v;
}

int parse_int(const std::string& token) {
  int v = 0;
  auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    throw PolicyFormatError("bad integer '" + token + "'");
  }
  return v;
}

std::string layer_name(const char* stack, std::size_t index) {
  return std::string(stack) + "." + std::to_string(index);
}

}  // namespace

struct ForwardCache {
  StackTrace trunk;
  StackTrace value;
  StackTrace advantage;
  Eigen::MatrixXd q;
};

LayerStack LayerStack::zeros(const NetworkShape& shape) {
  if (shape.inputs <= 0 || shape.actions <= 0 || shape.stream_hidden < 0) {
    throw std::invalid_argument("invalid network shape");
  }
  LayerStack s;
  int width = shape.inputs;
  for (int h : shape.trunk) {
    if (h <= 0) throw std::invalid_argument("trunk widths must be > 0");
    s.trunk.push_back(zero_layer(width, h));
    width = h;
  }
  s.value = zero_stream(width, shape.stream_hidden, 1);
  s.advantage = zero_stream(width, shape.stream_hidden, shape.actions);
  return s;
}

void LayerStack::for_each(const std::function<void(DenseLayer&)>& fn) {
  for (auto& l : trunk) fn(l);
  for (auto& l : value) fn(l);
  for (auto& l : advantage) fn(l);
}

void LayerStack::for_each(const std::function<void(const DenseLayer&)>& fn) const {
  for (const auto& l : trunk) fn(l);
  for (const auto& l : value) fn(l);
  for (const auto& l : advantage) fn(l);
}

std::size_t LayerStack::parameter_count() const {
  std::size_t n = 0;
  for_each([&n](const DenseLayer& l) { n += l.weight.size() + l.bias.size(); });
  return n;
}

bool LayerStack::congruent(const LayerStack& other) const {
  auto same = [](const std::vector<DenseLayer>& a, const std::vector<DenseLayer>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].weight.rows() != b[i].weight.rows() || a[i].weight.cols() != b[i].weight.cols())
        return false;
    }
    return true;
  };
  return same(trunk, other.trunk) && same(value, other.value) &&
         same(advantage, other.advantage);
}

double GradientSet::squared_norm() const {
  double n = 0.0;
  layers.for_each([&n](const DenseLayer& l) {
    n += l.weight.squaredNorm() + l.bias.squaredNorm();
  });
  return n;
}

QNetwork::QNetwork(NetworkShape shape)
    : shape_(std::move(shape)), layers_(LayerStack::zeros(shape_)) {}

QNetwork QNetwork::initialized(NetworkShape shape, Rng& rng) {
  QNetwork net(std::move(shape));
  net.layers_.for_each([&rng](DenseLayer& l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.inputs()));
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        l.weight(r, c) = rng.uniform(-bound, bound);
      }
    }
  });
  return net;
}

void QNetwork::check_input_rows(Eigen::Index rows) const {
  if (rows != shape_.inputs) {
    throw std::invalid_argument("input width " + std::to_string(rows) + " != " +
                                std::to_string(shape_.inputs));
  }
}

void QNetwork::run(const Eigen::MatrixXd& inputs, ForwardCache& cache) const {
  check_input_rows(inputs.rows());
  run_stack(layers_.trunk, inputs, true, cache.trunk);
  const Eigen::MatrixXd& features = cache.trunk.post.back();
  run_stack(layers_.value, features, false, cache.value);
  run_stack(layers_.advantage, features, false, cache.advantage);
  const Eigen::MatrixXd& adv = cache.advantage.post.back();
  const Eigen::RowVectorXd centre = adv.colwise().mean();
  cache.q = adv;
  cache.q.rowwise() -= centre;
  cache.q.rowwise() += cache.value.post.back().row(0);
}

Eigen::VectorXd QNetwork::forward(std::span<const double> input) const {
  const Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
  return forward_batch(x);
}

Eigen::MatrixXd QNetwork::forward_batch(const Eigen::MatrixXd& inputs) const {
  ForwardCache cache;
  run(inputs, cache);
  return std::move(cache.q);
}

Eigen::VectorXd QNetwork::value_batch(const Eigen::MatrixXd& inputs) const {
  ForwardCache cache;
  run(inputs, cache);
  return cache.value.post.back().row(0).transpose();
}

double QNetwork::backward(std::span<const double> input, int action, double target,
                          GradientSet& grads) const {
  const Eigen::Map<const Eigen::VectorXd> x(input.data(), static_cast<Eigen::Index>(input.size()));
  const double t[1] = {target};
  const int a[1] = {action};
  return backward_batch(x, a, t, grads);
}

double QNetwork::backward_batch(const Eigen::MatrixXd& inputs, std::span<const int> actions,
                                std::span<const double> targets, GradientSet& grads) const {
  const Eigen::Index batch = inputs.cols();
  if (static_cast<Eigen::Index>(actions.size()) != batch ||
      static_cast<Eigen::Index>(targets.size()) != batch || batch == 0) {
    throw std::invalid_argument("batch size mismatch");
  }
  if (!grads.layers.congruent(layers_)) grads = zero_gradients();
  grads.layers.for_each([](DenseLayer& l) {
    l.weight.setZero();
    l.bias.setZero();
  });

  ForwardCache cache;
  run(inputs, cache);

  // dL/dQ is nonzero only at the taken action.
  const double scale = 1.0 / static_cast<double>(batch);
  double loss = 0.0;
  Eigen::MatrixXd grad_q = Eigen::MatrixXd::Zero(shape_.actions, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const int a = actions[b];
    if (a < 0 || a >= shape_.actions) throw std::invalid_argument("action out of range");
    const double err = targets[b] - cache.q(a, b);
    loss += err * err;
    grad_q(a, b) = -2.0 * err * scale;
  }

  // Q = V + W - mean(W): dV = sum_a dQ, dW = dQ - mean_a dQ.
  const Eigen::RowVectorXd col_sum = grad_q.colwise().sum();
  Eigen::MatrixXd grad_v = col_sum;
  Eigen::MatrixXd grad_adv = grad_q;
  grad_adv.rowwise() -= col_sum / static_cast<double>(shape_.actions);

  Eigen::MatrixXd grad_features =
      backprop_stack(layers_.value, cache.value, false, std::move(grad_v), grads.layers.value);
  grad_features += backprop_stack(layers_.advantage, cache.advantage, false,
                                  std::move(grad_adv), grads.layers.advantage);
  backprop_stack(layers_.trunk, cache.trunk, true, std::move(grad_features),
                 grads.layers.trunk);
  return loss * scale;
}

void QNetwork::sgd_step(const GradientSet& grads, double learning_rate, double clip_norm) {
  if (!grads.layers.congruent(layers_)) {
    throw std::invalid_argument("gradient shape does not match network");
  }
  double step = learning_rate;
  if (clip_norm > 0.0) {
    const double norm = std::sqrt(grads.squared_norm());
    if (norm > clip_norm) step *= clip_norm / norm;
  }
  auto update = [step](std::vector<DenseLayer>& dst, const std::vector<DenseLayer>& g) {
    for (std::size_t i = 0; i < dst.size(); ++i) {
      dst[i].weight -= step * g[i].weight;
      dst[i].bias -= step * g[i].bias;
    }
  };
  update(layers_.trunk, grads.layers.trunk);
  update(layers_.value, grads.layers.value);
  update(layers_.advantage, grads.layers.advantage);
}

void QNetwork::clone_into(QNetwork& dst) const {
  if (!(dst.shape_ == shape_)) throw std::invalid_argument("architecture mismatch in clone");
  dst.layers_ = layers_;
}

bool QNetwork::operator==(const QNetwork& other) const {
  if (!(shape_ == other.shape_)) return false;
  auto same = [](const std::vector<DenseLayer>& a, const std::vector<DenseLayer>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (a[i].weight != b[i].weight || a[i].bias != b[i].bias) return false;
    }
    return true;
  };
  return same(layers_.trunk, other.layers_.trunk) &&
         same(layers_.value, other.layers_.value) &&
         same(layers_.advantage, other.layers_.advantage);
}

// Format, one record per line:
//   metaslice-qnet 1 <inputs> <actions> <stream_hidden> <trunk widths...>
//   <name> <rows> <cols> <rows*cols weights, row-major> <rows biases>
// with names trunk.i, value.i, advantage.i in canonical layer order.
void QNetwork::save(std::ostream& os) const {
  os << kMagic << ' ' << kFormatVersion << ' ' << shape_.inputs << ' ' << shape_.actions << ' '
     << shape_.stream_hidden;
  for (int h : shape_.trunk) os << ' ' << h;
  os << '\n';
  auto emit = [&os](const char* stack, const std::vector<DenseLayer>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const DenseLayer& l = layers[i];
      os << layer_name(stack, i) << ' ' << l.weight.rows() << ' ' << l.weight.cols();
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
          os << ' ';
          write_double(os, l.weight(r, c));
        }
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
        os << ' ';
        write_double(os, l.bias(r));
      }
      os << '\n';
    }
  };
  emit("trunk", layers_.trunk);
  emit("value", layers_.value);
  emit("advantage", layers_.advantage);
}

QNetwork QNetwork::load(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw PolicyFormatError("empty policy file");
  std::istringstream header(line);
  std::string magic, token;
  header >> magic;
  if (magic != kMagic) throw PolicyFormatError("not a policy file");
  std::vector<int> dims;
  while (header >> token) dims.push_back(parse_int(token));
  if (dims.size() < 4) throw PolicyFormatError("truncated header");
  if (dims[0] != kFormatVersion) {
    throw PolicyFormatError("unsupported policy format version " + std::to_string(dims[0]));
  }
  NetworkShape shape;
  shape.inputs = dims[1];
  shape.actions = dims[2];
  shape.stream_hidden = dims[3];
  shape.trunk.assign(dims.begin() + 4, dims.end());
  QNetwork net = [&] {
    try {
      return QNetwork(shape);
    } catch (const std::invalid_argument& e) {
      throw PolicyFormatError(std::string("invalid architecture: ") + e.what());
    }
  }();

  auto read = [&is](const char* stack, std::vector<DenseLayer>& layers) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      std::string record;
      if (!std::getline(is, record)) throw PolicyFormatError("missing layer " + layer_name(stack, i));
      std::istringstream in(record);
      std::string name, tok;
      in >> name;
      if (name != layer_name(stack, i)) {
        throw PolicyFormatError("expected layer " + layer_name(stack, i) + ", got " + name);
      }
      DenseLayer& l = layers[i];
      std::string rows_tok, cols_tok;
      in >> rows_tok >> cols_tok;
      if (parse_int(rows_tok) != l.weight.rows() || parse_int(cols_tok) != l.weight.cols()) {
        throw PolicyFormatError("layer " + name + " dimensions disagree with header");
      }
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
          if (!(in >> tok)) throw PolicyFormatError("layer " + name + " is truncated");
          l.weight(r, c) = parse_double(tok);
        }
      }
      for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
        if (!(in >> tok)) throw PolicyFormatError("layer " + name + " is truncated");
        l.bias(r) = parse_double(tok);
      }
      if (in >> tok) throw PolicyFormatError("layer " + name + " has trailing values");
    }
  };
  read("trunk", net.layers_.trunk);
  read("value", net.layers_.value);
  read("advantage", net.layers_.advantage);
  return net;
}

}  // namespace metaslice
