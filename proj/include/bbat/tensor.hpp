#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "bbat/matrix.hpp"

namespace bbat {

using Shape = std::vector<std::size_t>;

std::string to_string(const Shape& shape);

/// Raised for malformed operands: mismatched shapes, bad labels, misuse of the tape.
class TensorError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Immutable dense f64 array. Copies share storage; identity (for gradient
/// lookup) is the storage, so a copied handle refers to the same tensor.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor from_matrix(const Matrix& m, bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);

  const Shape& shape() const { return storage_->shape; }
  std::span<const double> data() const { return storage_->data; }
  bool requires_grad() const { return storage_->requires_grad; }
  std::size_t numel() const { return storage_->data.size(); }
  bool defined() const { return storage_ != nullptr; }

  /// Value of a one-element tensor.
  double item() const;
  /// Copy of a rank-2 tensor as a Matrix.
  Matrix to_matrix() const;

  const void* id() const { return storage_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<double> data;
    bool requires_grad = false;
  };
  std::shared_ptr<const Storage> storage_;
};

/// Gradient buffers produced by Tape::backward, keyed by tensor identity.
class Gradients {
 public:
  /// Gradient with respect to `t`; throws if `t` was not recorded on the tape
  /// or does not require grad.
  Tensor of(const Tensor& t) const;
  bool contains(const Tensor& t) const { return grads_.count(t.id()) != 0; }
  std::size_t size() const { return grads_.size(); }

 private:
  friend class Tape;
  struct Entry {
    Shape shape;
    std::vector<double> values;
  };
  std::unordered_map<const void*, Entry> grads_;
};

/// Records primitive operations in execution order (which is a topological
/// order) and replays them in reverse for reverse-mode differentiation.
///
/// A tape is single-threaded. Leaves may be shared across tapes, since
/// gradients are returned in a separate Gradients object and never written
/// into the tensors themselves.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// (n x k) . (k x m) -> (n x m)
  Tensor matmul(const Tensor& a, const Tensor& b);
  /// (n x m) + broadcast (m) -> (n x m)
  Tensor add_bias(const Tensor& a, const Tensor& bias);
  Tensor add(const Tensor& a, const Tensor& b);
  /// Elementwise product.
  Tensor mul(const Tensor& a, const Tensor& b);
  /// Sum of all entries, shape {1}.
  Tensor sum(const Tensor& a);
  Tensor relu(const Tensor& a);
  /// sign with sign(0) = 0; differentiates to zero everywhere.
  Tensor sign(const Tensor& a);
  /// Entrywise clamp to [lo, hi]; gradient passes only where lo <= a <= hi.
  Tensor clamp(const Tensor& a, double lo, double hi);
  /// Mean softmax cross-entropy of (n x C) logits against labels in [0, C).
  Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

  /// Reverse sweep from a one-element `loss` produced on this tape. Every
  /// requires_grad tensor seen by the tape receives a (possibly zero) gradient.
  Gradients backward(const Tensor& loss) const;

  std::size_t size() const { return nodes_.size(); }

 private:
  enum class Op { MatMul, AddBias, Add, Mul, Sum, Relu, Sign, Clamp, SoftmaxCE };

  struct Node {
    Op op;
    Tensor out;
    Tensor lhs;
    Tensor rhs;
    double lo = 0.0;
    double hi = 0.0;
    std::vector<int> labels{};
    std::vector<double> cache{};  // softmax probabilities for SoftmaxCE
  };

  Tensor record(Node node);

  std::vector<Node> nodes_;
};

}  // namespace bbat
