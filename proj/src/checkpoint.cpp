// Network checkpoints.
//
// Binary layout (little-endian, version 1):
//   char[8]  "GWGNCKPT"
//   u32      format version
//   u32      layer count L
//   L times: u32 out, u32 in, u8 activation (0 identity, 1 relu),
//            f64[out*in] weights row-major, f64[out] bias
//   u8       has optimizer state
//   if set:  f64 lr, f64 beta1, f64 beta2, f64 eps_hat, u64 step,
//            then per layer: first-moment W, b, second-moment W, b (row-major)

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "gwgen/error.hpp"
#include "gwgen/neural.hpp"
#include "json.hpp"

namespace gwgen {

namespace {

constexpr char kMagic[8] = {'G', 'W', 'G', 'N', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kFormatVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw InvalidInput("checkpoint truncated");
  return value;
}

void put_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) put<double>(out, m(i, j));
}

void get_matrix(std::istream& in, Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = get<double>(in);
}

void put_vector(std::ostream& out, const Vector& v) {
  for (Index i = 0; i < v.size(); ++i) put<double>(out, v[i]);
}

void get_vector(std::istream& in, Vector& v) {
  for (Index i = 0; i < v.size(); ++i) v[i] = get<double>(in);
}

nlohmann::json matrix_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

nlohmann::json vector_json(const Vector& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

}  // namespace

void save_checkpoint(std::ostream& out, const DenseNet& net, const AdamState* optimizer) {
  out.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(net.layer_count()));
  for (const auto& l : net.layers()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_dim()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_dim()));
    put<std::uint8_t>(out, l.activation == Activation::relu ? 1 : 0);
    put_matrix(out, l.weight);
    put_vector(out, l.bias);
  }
  put<std::uint8_t>(out, optimizer != nullptr ? 1 : 0);
  if (optimizer != nullptr) {
    put<double>(out, optimizer->lr);
    put<double>(out, optimizer->beta1);
    put<double>(out, optimizer->beta2);
    put<double>(out, optimizer->eps_hat);
    put<std::uint64_t>(out, optimizer->step);
    const GradientSet m = optimizer->first_moment.layers.empty() ? GradientSet::zeros_like(net)
                                                                 : optimizer->first_moment;
    const GradientSet v = optimizer->second_moment.layers.empty() ? GradientSet::zeros_like(net)
                                                                  : optimizer->second_moment;
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
      put_matrix(out, m.layers[k].weight);
      put_vector(out, m.layers[k].bias);
      put_matrix(out, v.layers[k].weight);
      put_vector(out, v.layers[k].bias);
    }
  }
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw InvalidInput("not a gwgen checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kFormatVersion)
    throw InvalidInput("unsupported checkpoint version " + std::to_string(version));
  const auto count = get<std::uint32_t>(in);
  std::vector<DenseLayer> layers;
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    const auto act = get<std::uint8_t>(in);
    if (act > 1) throw InvalidInput("bad activation code in checkpoint");
    DenseLayer l{Matrix(rows, cols), Vector(rows), act == 1 ? Activation::relu : Activation::identity};
    get_matrix(in, l.weight);
    get_vector(in, l.bias);
    layers.push_back(std::move(l));
  }
  Checkpoint ck{DenseNet(std::move(layers)), false, {}};
  ck.has_optimizer = get<std::uint8_t>(in) != 0;
  if (ck.has_optimizer) {
    AdamState& s = ck.optimizer;
    s.lr = get<double>(in);
    s.beta1 = get<double>(in);
    s.beta2 = get<double>(in);
    s.eps_hat = get<double>(in);
    s.step = get<std::uint64_t>(in);
    s.first_moment = GradientSet::zeros_like(ck.net);
    s.second_moment = GradientSet::zeros_like(ck.net);
    for (std::size_t k = 0; k < ck.net.layer_count(); ++k) {
      get_matrix(in, s.first_moment.layers[k].weight);
      get_vector(in, s.first_moment.layers[k].bias);
      get_matrix(in, s.second_moment.layers[k].weight);
      get_vector(in, s.second_moment.layers[k].bias);
    }
  }
  return ck;
}

void save_checkpoint_file(const std::filesystem::path& path, const DenseNet& net,
                          const AdamState* optimizer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  save_checkpoint(out, net, optimizer);
}

Checkpoint load_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

std::string checkpoint_json(const DenseNet& net, const AdamState* optimizer) {
  nlohmann::json j;
  j["format"] = "gwgen-checkpoint";
  j["version"] = kFormatVersion;
  for (const auto& l : net.layers()) {
    j["layers"].push_back({{"out", l.out_dim()},
                           {"in", l.in_dim()},
                           {"activation", to_string(l.activation)},
                           {"weight", matrix_json(l.weight)},
                           {"bias", vector_json(l.bias)}});
  }
  if (optimizer != nullptr) {
    j["adam"] = {{"lr", optimizer->lr},
                 {"beta1", optimizer->beta1},
                 {"beta2", optimizer->beta2},
                 {"eps_hat", optimizer->eps_hat},
                 {"step", optimizer->step}};
  }
  return j.dump(2);
}

}  // namespace gwgen
