#include "bbat/model.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "bbat/rng.hpp"

namespace bbat {

Labels argmax_rows(const Matrix& logits) {
  Labels out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j) {
      if (row[j] > row[best]) best = j;
    }
    out[i] = static_cast<int>(best);
  }
  return out;
}

std::vector<double> cross_entropy_rows(const Matrix& logits, std::span<const int> labels) {
  if (labels.size() != logits.rows) throw std::invalid_argument("cross_entropy_rows: label count mismatch");
  std::vector<double> out(logits.rows);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto z = logits.row(i);
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= z.size()) throw std::out_of_range("cross_entropy_rows: label out of range");
    const double zmax = *std::ranges::max_element(z);
    double denom = 0.0;
    for (double v : z) denom += std::exp(v - zmax);
    out[i] = zmax + std::log(denom) - z[static_cast<std::size_t>(y)];
  }
  return out;
}

void Classifier::check_width(const Matrix& x, const char* op) const {
  if (x.cols != input_dim()) {
    throw std::invalid_argument(std::string(op) + ": batch width " + std::to_string(x.cols) +
                                " does not match input dim " + std::to_string(input_dim()));
  }
}

Labels Classifier::classify(const Matrix& x) const {
  check_width(x, "classify");
  return argmax_rows(logits(x));
}

std::vector<double> Classifier::per_sample_loss(const Matrix& x, std::span<const int> y) const {
  check_width(x, "per_sample_loss");
  return cross_entropy_rows(logits(x), y);
}

double Classifier::mean_loss(const Matrix& x, std::span<const int> y) const {
  const auto losses = per_sample_loss(x, y);
  double s = 0.0;
  for (double v : losses) s += v;
  return s / static_cast<double>(losses.size());
}

Mlp Mlp::init(std::span<const std::size_t> dims, std::uint64_t seed) {
  if (dims.size() < 2) throw std::invalid_argument("mlp_init: need at least input and output dims");
  for (auto d : dims) {
    if (d == 0) throw std::invalid_argument("mlp_init: layer dims must be positive");
  }
  Rng rng(seed);
  std::vector<Tensor> weights, biases;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const double bound = std::sqrt(6.0 / static_cast<double>(dims[l]));
    std::vector<double> w(dims[l] * dims[l + 1]);
    for (auto& v : w) v = rng.uniform(-bound, bound);
    weights.emplace_back(Shape{dims[l], dims[l + 1]}, std::move(w), true);
    biases.emplace_back(Shape{dims[l + 1]}, std::vector<double>(dims[l + 1], 0.0), true);
  }
  return Mlp(std::move(weights), std::move(biases));
}

Mlp::Mlp(std::vector<Tensor> weights, std::vector<Tensor> biases) { set_parameters(std::move(weights), std::move(biases)); }

void Mlp::set_parameters(std::vector<Tensor> weights, std::vector<Tensor> biases) {
  if (weights.empty() || weights.size() != biases.size()) {
    throw std::invalid_argument("Mlp: need one bias per weight and at least one layer");
  }
  std::vector<std::size_t> dims;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    const auto& ws = weights[l].shape();
    if (ws.size() != 2) throw std::invalid_argument("Mlp: weight " + std::to_string(l) + " is not rank 2");
    if (l == 0) dims.push_back(ws[0]);
    if (ws[0] != dims.back()) {
      throw std::invalid_argument("Mlp: layer " + std::to_string(l) + " weight " + to_string(ws) +
                                  " does not conform to previous width " + std::to_string(dims.back()));
    }
    if (biases[l].shape() != Shape{ws[1]}) {
      throw std::invalid_argument("Mlp: bias " + std::to_string(l) + " shape " + to_string(biases[l].shape()) +
                                  " does not match weight " + to_string(ws));
    }
    dims.push_back(ws[1]);
  }
  if (!dims_.empty() && dims != dims_) throw std::invalid_argument("Mlp: set_parameters changed layer dims");

  auto track = [](const Tensor& t) {
    return t.requires_grad() ? t : Tensor(t.shape(), {t.data().begin(), t.data().end()}, true);
  };
  auto freeze = [](const Tensor& t) { return Tensor(t.shape(), {t.data().begin(), t.data().end()}, false); };
  dims_ = std::move(dims);
  weights_.clear();
  biases_.clear();
  frozen_weights_.clear();
  frozen_biases_.clear();
  for (std::size_t l = 0; l < weights.size(); ++l) {
    weights_.push_back(track(weights[l]));
    biases_.push_back(track(biases[l]));
    frozen_weights_.push_back(freeze(weights[l]));
    frozen_biases_.push_back(freeze(biases[l]));
  }
}

Tensor Mlp::forward(Tape& tape, const Tensor& x, bool track_params) const {
  if (x.shape().size() != 2 || x.shape()[1] != input_dim()) {
    throw TensorError("Mlp::forward: input shape " + to_string(x.shape()) + " does not match input dim " +
                      std::to_string(input_dim()));
  }
  const auto& ws = track_params ? weights_ : frozen_weights_;
  const auto& bs = track_params ? biases_ : frozen_biases_;
  Tensor h = x;
  for (std::size_t l = 0; l < ws.size(); ++l) {
    h = tape.add_bias(tape.matmul(h, ws[l]), bs[l]);
    if (l + 1 < ws.size()) h = tape.relu(h);
  }
  return h;
}

Matrix Mlp::logits(const Matrix& x) const {
  check_width(x, "logits");
  if (x.empty()) return Matrix(0, num_classes());
  Tape tape;
  return forward(tape, Tensor::from_matrix(x), false).to_matrix();
}

LossGrad Mlp::loss_and_input_grad(const Matrix& x, std::span<const int> y) const {
  check_width(x, "loss_and_input_grad");
  Tape tape;
  const Tensor input = Tensor::from_matrix(x, true);
  const Tensor loss = tape.softmax_cross_entropy(forward(tape, input, false), y);
  const Gradients grads = tape.backward(loss);
  return {loss.item(), grads.of(input).to_matrix()};
}

ParamGrads Mlp::loss_and_param_grads(const Matrix& x, std::span<const int> y) const {
  check_width(x, "loss_and_param_grads");
  Tape tape;
  const Tensor loss = tape.softmax_cross_entropy(forward(tape, Tensor::from_matrix(x), true), y);
  const Gradients grads = tape.backward(loss);
  ParamGrads out;
  out.loss = loss.item();
  for (std::size_t l = 0; l < layers(); ++l) {
    out.weights.push_back(grads.of(weights_[l]));
    out.biases.push_back(grads.of(biases_[l]));
  }
  return out;
}

bool operator==(const Mlp& a, const Mlp& b) {
  if (a.dims_ != b.dims_) return false;
  auto same = [](const Tensor& x, const Tensor& y) { return std::ranges::equal(x.data(), y.data()); };
  for (std::size_t l = 0; l < a.layers(); ++l) {
    if (!same(a.weights_[l], b.weights_[l]) || !same(a.biases_[l], b.biases_[l])) return false;
  }
  return true;
}

namespace {

constexpr std::array<char, 8> kMagic{'B', 'B', 'A', 'T', 'M', 'L', 'P', '1'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

void put_f64(std::ostream& os, double d) {
  const auto v = std::bit_cast<std::uint64_t>(d);
  for (int i = 0; i < 8; ++i) os.put(static_cast<char>((v >> (8 * i)) & 0xffu));
}

std::uint64_t get_le(std::istream& is, int bytes, const char* what) {
  std::array<unsigned char, 8> buf{};
  if (!is.read(reinterpret_cast<char*>(buf.data()), bytes)) {
    throw std::runtime_error(std::string("checkpoint truncated while reading ") + what);
  }
  std::uint64_t v = 0;
  for (int i = bytes - 1; i >= 0; --i) v = (v << 8) | buf[static_cast<std::size_t>(i)];
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Mlp& model, const std::string& config_hash) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot open checkpoint for writing: " + path.string());
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(config_hash.size()));
  os.write(config_hash.data(), static_cast<std::streamsize>(config_hash.size()));
  put_u32(os, static_cast<std::uint32_t>(model.dims().size()));
  for (auto d : model.dims()) put_u32(os, static_cast<std::uint32_t>(d));
  for (std::size_t l = 0; l < model.layers(); ++l) {
    for (double v : model.weight(l).data()) put_f64(os, v);
    for (double v : model.bias(l).data()) put_f64(os, v);
  }
  if (!os) throw std::runtime_error("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw std::runtime_error("not a model checkpoint (bad magic): " + path.string());
  }
  const auto version = get_le(is, 4, "version");
  if (version != kVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto hash_len = get_le(is, 4, "hash length");
  if (hash_len > 1024) throw std::runtime_error("checkpoint hash length is implausible");
  std::string hash(hash_len, '\0');
  if (!is.read(hash.data(), static_cast<std::streamsize>(hash_len))) throw std::runtime_error("checkpoint truncated in hash");
  const auto ndims = get_le(is, 4, "dim count");
  if (ndims < 2 || ndims > 64) throw std::runtime_error("checkpoint has an implausible layer count");
  std::vector<std::size_t> dims;
  for (std::uint64_t i = 0; i < ndims; ++i) dims.push_back(get_le(is, 4, "dims"));
  std::vector<Tensor> weights, biases;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::vector<double> w(dims[l] * dims[l + 1]), b(dims[l + 1]);
    for (auto& v : w) v = std::bit_cast<double>(get_le(is, 8, "weights"));
    for (auto& v : b) v = std::bit_cast<double>(get_le(is, 8, "biases"));
    weights.emplace_back(Shape{dims[l], dims[l + 1]}, std::move(w), true);
    biases.emplace_back(Shape{dims[l + 1]}, std::move(b), true);
  }
  return {Mlp(std::move(weights), std::move(biases)), std::move(hash)};
}

}  // namespace bbat
