#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "bbat/matrix.hpp"
#include "bbat/tensor.hpp"

namespace bbat {

struct LossGrad {
  double loss = 0.0;
  Matrix grad;  // same shape as the input batch
};

/// Row-wise argmax; ties go to the lowest class index.
Labels argmax_rows(const Matrix& logits);

/// Per-row softmax cross-entropy, log-sum-exp stabilized.
std::vector<double> cross_entropy_rows(const Matrix& logits, std::span<const int> labels);

/// Anything that maps a batch to logits and can differentiate its mean
/// cross-entropy with respect to the inputs. Attacks, selection and metrics
/// are written against this, so tests can substitute scripted classifiers.
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::size_t input_dim() const = 0;
  virtual std::size_t num_classes() const = 0;
  virtual Matrix logits(const Matrix& x) const = 0;
  virtual LossGrad loss_and_input_grad(const Matrix& x, std::span<const int> y) const = 0;

  Labels classify(const Matrix& x) const;
  std::vector<double> per_sample_loss(const Matrix& x, std::span<const int> y) const;
  double mean_loss(const Matrix& x, std::span<const int> y) const;

 protected:
  void check_width(const Matrix& x, const char* op) const;
};

struct ParamGrads {
  double loss = 0.0;
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;
};

/// Dense feed-forward classifier: affine layers with relu between them and
/// identity on the output. Weight l has shape (dims[l] x dims[l+1]).
class Mlp final : public Classifier {
 public:
  /// Weights uniform on +-sqrt(6 / fan_in), biases zero.
  static Mlp init(std::span<const std::size_t> dims, std::uint64_t seed);

  Mlp(std::vector<Tensor> weights, std::vector<Tensor> biases);

  const std::vector<std::size_t>& dims() const { return dims_; }
  std::size_t layers() const { return weights_.size(); }
  const Tensor& weight(std::size_t l) const { return weights_.at(l); }
  const Tensor& bias(std::size_t l) const { return biases_.at(l); }

  std::size_t input_dim() const override { return dims_.front(); }
  std::size_t num_classes() const override { return dims_.back(); }

  /// Records the forward pass on `tape`. Parameters take part in
  /// differentiation only when `track_params` is set.
  Tensor forward(Tape& tape, const Tensor& x, bool track_params) const;

  Matrix logits(const Matrix& x) const override;
  LossGrad loss_and_input_grad(const Matrix& x, std::span<const int> y) const override;
  ParamGrads loss_and_param_grads(const Matrix& x, std::span<const int> y) const;

  /// Replaces all parameters; shapes must match the current ones.
  void set_parameters(std::vector<Tensor> weights, std::vector<Tensor> biases);

  friend bool operator==(const Mlp& a, const Mlp& b);

 private:
  std::vector<std::size_t> dims_;
  std::vector<Tensor> weights_;
  std::vector<Tensor> biases_;
  // Same values without requires_grad, for input-only differentiation.
  std::vector<Tensor> frozen_weights_;
  std::vector<Tensor> frozen_biases_;
};

/// Checkpoint layout (all integers little-endian):
///   8 bytes  magic "BBATMLP1"
///   u32      format version (1)
///   u32      hash length h, then h bytes of config hash (ASCII)
///   u32      number of dims L, then L x u32 dims
///   per layer l: dims[l]*dims[l+1] f64 weights (row-major), dims[l+1] f64 biases
struct Checkpoint {
  Mlp model;
  std::string config_hash;
};

void save_checkpoint(const std::filesystem::path& path, const Mlp& model, const std::string& config_hash);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace bbat
