#include "gwgen/neural.hpp"

#include <cmath>
#include <random>
#include <string>

#include "gwgen/error.hpp"

namespace gwgen {

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw InvalidInput("unknown activation '" + s + "'");
}

DenseNet::DenseNet(const std::vector<Index>& dims) {
  if (dims.size() < 2) throw InvalidInput("a network needs at least input and output widths");
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    if (dims[k] < 1 || dims[k + 1] < 1) throw InvalidInput("layer widths must be positive");
    const bool last = k + 2 == dims.size();
    layers_.push_back({Matrix::Zero(dims[k + 1], dims[k]), Vector::Zero(dims[k + 1]),
                       last ? Activation::identity : Activation::relu});
  }
}

DenseNet::DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { check_chain(); }

void DenseNet::check_chain() const {
  if (layers_.empty()) throw InvalidInput("a network needs at least one layer");
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& l = layers_[k];
    if (l.bias.size() != l.out_dim()) throw ShapeMismatch("bias length differs from layer width");
    if (k > 0 && l.in_dim() != layers_[k - 1].out_dim())
      throw ShapeMismatch("layer " + std::to_string(k) + " does not chain with its predecessor");
    if (!l.weight.allFinite() || !l.bias.allFinite())
      throw InvalidInput("layer " + std::to_string(k) + " has non-finite parameters");
  }
  if (layers_.back().activation != Activation::identity)
    throw InvalidInput("final layer must be linear");
}

Index DenseNet::input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
Index DenseNet::output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }

std::size_t DenseNet::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

DenseLayer& DenseNet::mutable_layer(std::size_t k) {
  touch();
  return layers_.at(k);
}

bool DenseNet::operator==(const DenseNet& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& a = layers_[k];
    const auto& b = other.layers_[k];
    if (a.activation != b.activation || a.weight.rows() != b.weight.rows() ||
        a.weight.cols() != b.weight.cols() || a.weight != b.weight || a.bias != b.bias)
      return false;
  }
  return true;
}

GradientSet GradientSet::zeros_like(const DenseNet& net) {
  GradientSet g;
  for (const auto& l : net.layers())
    g.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
  return g;
}

GradientSet& GradientSet::operator+=(const GradientSet& other) {
  if (other.layers.size() != layers.size()) throw ShapeMismatch("gradient sets differ in depth");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    layers[k].weight += other.layers[k].weight;
    layers[k].bias += other.layers[k].bias;
  }
  return *this;
}

GradientSet& GradientSet::operator*=(double s) {
  for (auto& l : layers) {
    l.weight *= s;
    l.bias *= s;
  }
  return *this;
}

double GradientSet::squared_norm() const {
  double s = 0.0;
  for (const auto& l : layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

bool GradientSet::all_finite() const {
  for (const auto& l : layers)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

void orthogonal_init(DenseNet& net, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    DenseLayer& layer = net.mutable_layer(k);
    Matrix draw(layer.weight.rows(), layer.weight.cols());
    for (Index j = 0; j < draw.cols(); ++j)
      for (Index i = 0; i < draw.rows(); ++i) draw(i, j) = normal(rng);
    // Polar factor U V^T: orthonormal columns when tall, orthonormal rows when wide.
    Eigen::JacobiSVD<Matrix> svd(draw, Eigen::ComputeThinU | Eigen::ComputeThinV);
    layer.weight = svd.matrixU() * svd.matrixV().transpose();
    layer.bias.setZero();
  }
}

namespace {

void check_input(const DenseNet& net, const Matrix& x) {
  if (net.layer_count() == 0) throw InvalidInput("empty network");
  if (x.cols() != net.input_dim())
    throw ShapeMismatch("input has " + std::to_string(x.cols()) + " columns, network expects " +
                        std::to_string(net.input_dim()));
}

Matrix affine(const DenseLayer& l, const Matrix& x) {
  Matrix z = x * l.weight.transpose();
  z.rowwise() += l.bias.transpose();
  return z;
}

void activate(Activation a, Matrix& z) {
  if (a == Activation::relu) z = z.cwiseMax(0.0);
}

}  // namespace

ForwardResult forward(const DenseNet& net, const Matrix& x) {
  check_input(net, x);
  ForwardResult out;
  out.tape.net_version = net.version();
  out.tape.net_identity = &net;
  Matrix h = x;
  for (const auto& l : net.layers()) {
    Matrix z = affine(l, h);
    out.tape.inputs.push_back(std::move(h));
    out.tape.preactivations.push_back(z);
    activate(l.activation, z);
    h = std::move(z);
  }
  out.output = std::move(h);
  return out;
}

Matrix predict(const DenseNet& net, const Matrix& x) {
  check_input(net, x);
  Matrix h = x;
  for (const auto& l : net.layers()) {
    Matrix z = affine(l, h);
    activate(l.activation, z);
    h = std::move(z);
  }
  return h;
}

BackwardResult backward(const DenseNet& net, const Tape& tape, const Matrix& upstream) {
  if (tape.net_identity != &net || tape.net_version != net.version() ||
      tape.inputs.size() != net.layer_count())
    throw InvalidInput("stale tape: network changed since the forward pass");
  const Index batch = tape.inputs.front().rows();
  if (upstream.rows() != batch || upstream.cols() != net.output_dim())
    throw ShapeMismatch("upstream gradient shape does not match the network output");

  BackwardResult out;
  out.grads.layers.resize(net.layer_count());
  Matrix delta = upstream;
  for (std::size_t k = net.layer_count(); k-- > 0;) {
    const DenseLayer& l = net.layer(k);
    if (l.activation == Activation::relu) {
      // Subgradient 0 at the kink.
      delta = delta.cwiseProduct((tape.preactivations[k].array() > 0.0).cast<double>().matrix());
    }
    out.grads.layers[k].weight = delta.transpose() * tape.inputs[k];
    out.grads.layers[k].bias = delta.colwise().sum().transpose();
    delta = delta * l.weight;
  }
  out.input_grad = std::move(delta);
  return out;
}

AdamState AdamState::for_net(const DenseNet& net, double lr, double beta1, double beta2,
                             double eps_hat) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps_hat = eps_hat;
  s.first_moment = GradientSet::zeros_like(net);
  s.second_moment = GradientSet::zeros_like(net);
  return s;
}

bool AdamState::operator==(const AdamState& o) const {
  auto same = [](const GradientSet& a, const GradientSet& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
      const auto& x = a.layers[k];
      const auto& y = b.layers[k];
      if (x.weight.rows() != y.weight.rows() || x.weight.cols() != y.weight.cols() ||
          x.weight != y.weight || x.bias != y.bias)
        return false;
    }
    return true;
  };
  return lr == o.lr && beta1 == o.beta1 && beta2 == o.beta2 && eps_hat == o.eps_hat &&
         step == o.step && same(first_moment, o.first_moment) && same(second_moment, o.second_moment);
}

void adam_step(DenseNet& net, const GradientSet& grads, AdamState& state, StepDirection direction) {
  if (grads.layers.size() != net.layer_count())
    throw ShapeMismatch("gradient depth does not match the network");
  if (state.first_moment.layers.size() != net.layer_count()) {
    state.first_moment = GradientSet::zeros_like(net);
    state.second_moment = GradientSet::zeros_like(net);
  }
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    const auto& g = grads.layers[k];
    const auto& l = net.layer(k);
    if (g.weight.rows() != l.weight.rows() || g.weight.cols() != l.weight.cols() ||
        g.bias.size() != l.bias.size())
      throw ShapeMismatch("gradient shape mismatch at layer " + std::to_string(k));
    if (!g.weight.allFinite() || !g.bias.allFinite())
      throw InvalidInput("non-finite gradient at layer " + std::to_string(k));
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double sign = direction == StepDirection::ascend ? 1.0 : -1.0;

  auto update = [&](auto& param, const auto& grad, auto& m, auto& v) {
    m = state.beta1 * m + (1.0 - state.beta1) * grad;
    v = state.beta2 * v + (1.0 - state.beta2) * grad.cwiseAbs2();
    const auto m_hat = m.array() / c1;
    const auto v_hat = v.array() / c2;
    param.array() += sign * state.lr * m_hat / (v_hat.sqrt() + state.eps_hat);
  };

  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    DenseLayer& l = net.mutable_layer(k);
    update(l.weight, grads.layers[k].weight, state.first_moment.layers[k].weight,
           state.second_moment.layers[k].weight);
    update(l.bias, grads.layers[k].bias, state.first_moment.layers[k].bias,
           state.second_moment.layers[k].bias);
  }
}

}  // namespace gwgen
