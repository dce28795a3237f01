#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "gwgen/error.hpp"
#include "gwgen/neural.hpp"
#include "helpers.hpp"
#include "json.hpp"

using namespace gwgen;
using gwgen::testing::finite_difference;
using gwgen::testing::random_matrix;
using gwgen::testing::relative_error;

namespace {

// Per-neuron evaluation with explicit loops.
Matrix scalar_forward(const DenseNet& net, const Matrix& x) {
  Matrix h = x;
  for (const auto& l : net.layers()) {
    Matrix out(h.rows(), l.out_dim());
    for (Index b = 0; b < h.rows(); ++b)
      for (Index o = 0; o < l.out_dim(); ++o) {
        double acc = l.bias[o];
        for (Index i = 0; i < l.in_dim(); ++i) acc += l.weight(o, i) * h(b, i);
        out(b, o) = (l.activation == Activation::relu && acc < 0.0) ? 0.0 : acc;
      }
    h = out;
  }
  return h;
}

DenseNet random_net(const std::vector<Index>& dims, std::uint64_t seed) {
  DenseNet net(dims);
  std::mt19937_64 rng(seed);
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    DenseLayer& l = net.mutable_layer(k);
    l.weight = random_matrix(l.out_dim(), l.in_dim(), rng, 0.7);
    l.bias = random_matrix(l.out_dim(), 1, rng, 0.3);
  }
  return net;
}

double weighted_output(const DenseNet& net, const Matrix& x, const Matrix& u) {
  return (predict(net, x).array() * u.array()).sum();
}

// Finite-difference gradient of sum(u .* net(x)) with respect to layer k's weights.
Matrix weight_fd(const DenseNet& net, std::size_t k, const Matrix& x, const Matrix& u) {
  auto f = [&](const Matrix& w) {
    DenseNet copy = net;
    copy.mutable_layer(k).weight = w;
    return weighted_output(copy, x, u);
  };
  return finite_difference(f, net.layer(k).weight);
}

Matrix bias_fd(const DenseNet& net, std::size_t k, const Matrix& x, const Matrix& u) {
  auto f = [&](const Matrix& b) {
    DenseNet copy = net;
    copy.mutable_layer(k).bias = b;
    return weighted_output(copy, x, u);
  };
  return finite_difference(f, Matrix(net.layer(k).bias));
}

void check_gradients(const DenseNet& net, const Matrix& x, std::mt19937_64& rng, double tol) {
  const Matrix u = random_matrix(x.rows(), net.output_dim(), rng);
  const ForwardResult fr = forward(net, x);
  const BackwardResult br = backward(net, fr.tape, u);
  for (std::size_t k = 0; k < net.layer_count(); ++k) {
    CHECK(relative_error(br.grads.layers[k].weight, weight_fd(net, k, x, u)) < tol);
    CHECK(relative_error(Matrix(br.grads.layers[k].bias), bias_fd(net, k, x, u)) < tol);
  }
  auto fx = [&](const Matrix& in) { return weighted_output(net, in, u); };
  CHECK(relative_error(br.input_grad, finite_difference(fx, x)) < tol);
}

double max_singular_deviation(const Matrix& w) {
  Eigen::JacobiSVD<Matrix> svd(w);
  return (svd.singularValues().array() - 1.0).abs().maxCoeff();
}

}  // namespace

TEST_CASE("construction validates the layer chain") {
  CHECK_THROWS_AS(DenseNet(std::vector<Index>{3}), InvalidInput);
  CHECK_THROWS_AS(DenseNet(std::vector<Index>{3, 0, 2}), InvalidInput);
  DenseLayer a{Matrix::Zero(4, 3), Vector::Zero(4), Activation::relu};
  DenseLayer b{Matrix::Zero(2, 5), Vector::Zero(2), Activation::identity};
  CHECK_THROWS_AS(DenseNet(std::vector<DenseLayer>{a, b}), ShapeMismatch);
  DenseLayer c{Matrix::Zero(2, 4), Vector::Zero(2), Activation::relu};
  CHECK_THROWS_AS(DenseNet(std::vector<DenseLayer>{a, c}), InvalidInput);
  DenseLayer bad_bias{Matrix::Zero(2, 4), Vector::Zero(3), Activation::identity};
  CHECK_THROWS_AS(DenseNet(std::vector<DenseLayer>{a, bad_bias}), ShapeMismatch);

  const DenseNet net({16, 128, 128, 2});
  CHECK(net.input_dim() == 16);
  CHECK(net.output_dim() == 2);
  CHECK(net.layer_count() == 3);
  CHECK(net.parameter_count() == 16 * 128 + 128 + 128 * 128 + 128 + 128 * 2 + 2);
  CHECK(net.layer(0).activation == Activation::relu);
  CHECK(net.layer(2).activation == Activation::identity);
}

TEST_CASE("orthogonal initialization") {
  DenseNet net({4, 4, 8, 2});
  orthogonal_init(net, 7);
  const Matrix& square = net.layer(0).weight;
  CHECK((square.transpose() * square - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-6);
  const Matrix& tall = net.layer(1).weight;  // 8 x 4
  CHECK((tall.transpose() * tall - Matrix::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-6);
  const Matrix& wide = net.layer(2).weight;  // 2 x 8
  CHECK((wide * wide.transpose() - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-6);
  for (const auto& l : net.layers()) {
    CHECK(max_singular_deviation(l.weight) < 1e-6);
    CHECK(l.bias.isZero());
  }

  DenseNet again({4, 4, 8, 2});
  orthogonal_init(again, 7);
  CHECK(again == net);
  for (std::size_t k = 0; k < net.layer_count(); ++k)
    CHECK(std::memcmp(again.layer(k).weight.data(), net.layer(k).weight.data(),
                      sizeof(double) * static_cast<std::size_t>(net.layer(k).weight.size())) == 0);
  DenseNet other({4, 4, 8, 2});
  orthogonal_init(other, 8);
  CHECK_FALSE(other == net);
}

TEST_CASE("forward special cases") {
  DenseNet id(std::vector<DenseLayer>{{Matrix::Identity(3, 3), Vector::Zero(3), Activation::relu},
                                      {Matrix::Identity(3, 3), Vector::Zero(3), Activation::identity}});
  std::mt19937_64 rng(41);
  const Matrix x = random_matrix(5, 3, rng).cwiseAbs();
  CHECK(predict(id, x) == x);

  Vector bias(2);
  bias << 0.5, -1.5;
  DenseNet zero(std::vector<DenseLayer>{{Matrix::Zero(2, 3), bias, Activation::identity}});
  const Matrix y = predict(zero, x);
  for (Index b = 0; b < 5; ++b) CHECK(y.row(b) == bias.transpose());

  CHECK_THROWS_AS(predict(zero, Matrix::Zero(5, 4)), ShapeMismatch);
}

TEST_CASE("forward matches the scalar-loop oracle") {
  std::mt19937_64 rng(42);
  const DenseNet net = random_net({5, 7, 6, 3}, 43);
  const Matrix x = random_matrix(9, 5, rng);
  const ForwardResult fr = forward(net, x);
  CHECK((fr.output - scalar_forward(net, x)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fr.output == predict(net, x));
  CHECK(fr.tape.inputs.size() == 3);
}

TEST_CASE("single linear layer gradient has the closed form") {
  std::mt19937_64 rng(44);
  DenseNet net(std::vector<DenseLayer>{{random_matrix(3, 4, rng), Vector::Zero(3), Activation::identity}});
  const Matrix x = random_matrix(6, 4, rng);
  const Matrix u = random_matrix(6, 3, rng);
  const BackwardResult br = backward(net, forward(net, x).tape, u);
  CHECK((br.grads.layers[0].weight - u.transpose() * x).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((br.grads.layers[0].bias - u.colwise().sum().transpose()).cwiseAbs().maxCoeff() < 1e-13);
  CHECK((br.input_grad - u * net.layer(0).weight).cwiseAbs().maxCoeff() < 1e-13);
}

TEST_CASE("backward matches finite differences") {
  std::mt19937_64 rng(45);
  SUBCASE("two layers") {
    const DenseNet net = random_net({3, 8, 2}, 46);
    check_gradients(net, random_matrix(7, 3, rng), rng, 1e-5);
  }
  SUBCASE("three hidden layers") {
    const DenseNet net = random_net({4, 16, 12, 10, 3}, 47);
    check_gradients(net, random_matrix(5, 4, rng), rng, 1e-5);
  }
  SUBCASE("experiment generator shape") {
    DenseNet net({16, 128, 128, 2});
    orthogonal_init(net, 48);
    for (std::size_t k = 0; k < net.layer_count(); ++k)
      net.mutable_layer(k).bias = random_matrix(net.layer(k).out_dim(), 1, rng, 0.1);
    check_gradients(net, random_matrix(4, 16, rng), rng, 1e-5);
  }
  SUBCASE("widest supported layer") {
    DenseNet net({3, 256, 3});
    orthogonal_init(net, 49);
    net.mutable_layer(0).bias = random_matrix(256, 1, rng, 0.1);
    check_gradients(net, random_matrix(3, 3, rng), rng, 1e-5);
  }
}

TEST_CASE("relu subgradient at the kink is zero") {
  DenseNet net(std::vector<DenseLayer>{{Matrix::Identity(1, 1), Vector::Zero(1), Activation::relu},
                                       {Matrix::Identity(1, 1), Vector::Zero(1), Activation::identity}});
  const Matrix x = Matrix::Zero(1, 1);
  const BackwardResult br = backward(net, forward(net, x).tape, Matrix::Ones(1, 1));
  CHECK(br.input_grad(0, 0) == 0.0);
  CHECK(br.grads.layers[0].weight(0, 0) == 0.0);
}

TEST_CASE("stale tapes are rejected") {
  DenseNet net({2, 3, 1});
  orthogonal_init(net, 1);
  std::mt19937_64 rng(50);
  const Matrix x = random_matrix(4, 2, rng);
  const ForwardResult fr = forward(net, x);
  net.mutable_layer(0).bias[0] = 0.1;
  CHECK_THROWS_AS(backward(net, fr.tape, Matrix::Ones(4, 1)), InvalidInput);
  const DenseNet copy = net;
  const ForwardResult fresh = forward(net, x);
  CHECK_THROWS_AS(backward(copy, fresh.tape, Matrix::Ones(4, 1)), InvalidInput);
  CHECK_THROWS_AS(backward(net, fresh.tape, Matrix::Ones(4, 2)), ShapeMismatch);
}

TEST_CASE("forward and backward are deterministic") {
  std::mt19937_64 rng(51);
  const DenseNet net = random_net({4, 9, 3}, 52);
  const Matrix x = random_matrix(6, 4, rng);
  const Matrix u = random_matrix(6, 3, rng);
  const auto a = backward(net, forward(net, x).tape, u);
  const auto b = backward(net, forward(net, x).tape, u);
  CHECK(a.input_grad == b.input_grad);
  for (std::size_t k = 0; k < net.layer_count(); ++k) CHECK(a.grads.layers[k].weight == b.grads.layers[k].weight);
}

TEST_CASE("adam steps") {
  DenseNet net(std::vector<DenseLayer>{{Matrix::Constant(1, 1, 0.5), Vector::Constant(1, -0.25),
                                        Activation::identity}});
  SUBCASE("zero gradients leave parameters unchanged") {
    DenseNet copy = net;
    AdamState s = AdamState::for_net(copy);
    adam_step(copy, GradientSet::zeros_like(copy), s, StepDirection::descend);
    CHECK(copy.layer(0).weight == net.layer(0).weight);
    CHECK(copy.layer(0).bias == net.layer(0).bias);
    CHECK(s.step == 1);
  }
  SUBCASE("constant gradient matches a scalar simulation") {
    DenseNet copy = net;
    AdamState s = AdamState::for_net(copy);
    GradientSet g = GradientSet::zeros_like(copy);
    g.layers[0].weight(0, 0) = 0.3;
    g.layers[0].bias[0] = -2.0;
    double w = 0.5, m = 0.0, v = 0.0;
    for (int t = 1; t <= 200; ++t) {
      adam_step(copy, g, s, StepDirection::descend);
      m = 0.5 * m + 0.5 * 0.3;
      v = 0.99 * v + 0.01 * 0.09;
      w -= 2e-4 * (m / (1 - std::pow(0.5, t))) / (std::sqrt(v / (1 - std::pow(0.99, t))) + 1e-8);
    }
    CHECK(copy.layer(0).weight(0, 0) == doctest::Approx(w).epsilon(1e-12));
    // Per-step movement approaches lr in the direction opposite the gradient sign.
    CHECK(copy.layer(0).weight(0, 0) == doctest::Approx(0.5 - 200 * 2e-4).epsilon(1e-4));
    CHECK(copy.layer(0).bias[0] == doctest::Approx(-0.25 + 200 * 2e-4).epsilon(1e-4));
  }
  SUBCASE("ascend negates descend at the first step") {
    DenseNet a = net, b = net;
    AdamState sa = AdamState::for_net(a), sb = AdamState::for_net(b);
    GradientSet g = GradientSet::zeros_like(net);
    g.layers[0].weight(0, 0) = 1.7;
    g.layers[0].bias[0] = -0.2;
    adam_step(a, g, sa, StepDirection::descend);
    adam_step(b, g, sb, StepDirection::ascend);
    CHECK(a.layer(0).weight(0, 0) - 0.5 == doctest::Approx(-(b.layer(0).weight(0, 0) - 0.5)));
    CHECK(a.layer(0).bias[0] + 0.25 == doctest::Approx(-(b.layer(0).bias[0] + 0.25)));
  }
  SUBCASE("non-finite gradients name the layer") {
    DenseNet copy = net;
    AdamState s = AdamState::for_net(copy);
    GradientSet g = GradientSet::zeros_like(copy);
    g.layers[0].bias[0] = std::nan("");
    try {
      adam_step(copy, g, s, StepDirection::descend);
      FAIL("expected InvalidInput");
    } catch (const InvalidInput& e) {
      CHECK(std::string(e.what()).find("layer 0") != std::string::npos);
    }
    CHECK(s.step == 0);
  }
}

TEST_CASE("gradient set arithmetic") {
  DenseNet net({2, 3, 1});
  GradientSet a = GradientSet::zeros_like(net);
  a.layers[0].weight.setConstant(1.0);
  GradientSet b = a;
  a += b;
  a *= 0.5;
  CHECK(a.squared_norm() == doctest::Approx(6.0));
  CHECK(a.all_finite());
  a.layers[1].bias[0] = std::nan("");
  CHECK_FALSE(a.all_finite());
  GradientSet shallow;
  CHECK_THROWS_AS(a += shallow, ShapeMismatch);
}

TEST_CASE("binary checkpoints round trip bitwise") {
  std::mt19937_64 rng(53);
  DenseNet net = random_net({3, 5, 2}, 54);
  AdamState opt = AdamState::for_net(net, 1e-3, 0.4, 0.9, 1e-7);
  GradientSet g = GradientSet::zeros_like(net);
  for (auto& l : g.layers) {
    l.weight = random_matrix(l.weight.rows(), l.weight.cols(), rng);
    l.bias = random_matrix(l.bias.size(), 1, rng);
  }
  adam_step(net, g, opt, StepDirection::descend);
  adam_step(net, g, opt, StepDirection::ascend);

  std::stringstream buf;
  save_checkpoint(buf, net, &opt);
  const Checkpoint back = load_checkpoint(buf);
  CHECK(back.net == net);
  REQUIRE(back.has_optimizer);
  CHECK(back.optimizer == opt);

  std::stringstream bare;
  save_checkpoint(bare, net);
  CHECK_FALSE(load_checkpoint(bare).has_optimizer);

  const auto path = std::filesystem::temp_directory_path() / "gwgen_test_neural.ckpt";
  save_checkpoint_file(path, net, &opt);
  CHECK(load_checkpoint_file(path).net == net);
  std::filesystem::remove(path);

  std::stringstream junk("definitely not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(junk), InvalidInput);
  std::string bytes;
  {
    std::stringstream full;
    save_checkpoint(full, net, &opt);
    bytes = full.str();
  }
  std::stringstream truncated(bytes.substr(0, bytes.size() / 2));
  CHECK_THROWS_AS(load_checkpoint(truncated), InvalidInput);
}

TEST_CASE("json checkpoint dump lists shapes and parameters") {
  const DenseNet net = random_net({3, 4, 2}, 55);
  const auto j = nlohmann::json::parse(checkpoint_json(net));
  REQUIRE(j.contains("layers"));
  CHECK(j["layers"].size() == 2);
  CHECK(j["layers"][0]["activation"] == "relu");
  CHECK(j["layers"][1]["activation"] == "identity");
}
