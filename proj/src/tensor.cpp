#include "bbat/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace bbat {

std::string to_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {

std::size_t product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw TensorError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) + " and " +
                    to_string(b.shape()));
}

void require_rank2(const char* op, const Tensor& a) {
  if (a.shape().size() != 2) {
    throw TensorError(std::string(op) + ": expected a rank-2 operand, got " + to_string(a.shape()));
  }
}

std::vector<double>& slot(std::unordered_map<const void*, std::vector<double>>& grads, const Tensor& t) {
  auto& g = grads[t.id()];
  if (g.empty()) g.assign(t.numel(), 0.0);
  return g;
}

}  // namespace

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad) {
  if (shape.empty()) throw TensorError("Tensor: shape must have at least one extent");
  for (auto e : shape) {
    if (e == 0) throw TensorError("Tensor: zero extent in shape " + to_string(shape));
  }
  if (product(shape) != data.size()) {
    throw TensorError("Tensor: shape " + to_string(shape) + " does not match " + std::to_string(data.size()) +
                      " values");
  }
  storage_ = std::make_shared<const Storage>(Storage{std::move(shape), std::move(data), requires_grad});
}

Tensor Tensor::from_matrix(const Matrix& m, bool requires_grad) {
  return Tensor({m.rows, m.cols}, m.values, requires_grad);
}

Tensor Tensor::scalar(double v, bool requires_grad) { return Tensor({1}, {v}, requires_grad); }

double Tensor::item() const {
  if (numel() != 1) throw TensorError("item: tensor of shape " + to_string(shape()) + " is not a scalar");
  return storage_->data[0];
}

Matrix Tensor::to_matrix() const {
  require_rank2("to_matrix", *this);
  return Matrix(shape()[0], shape()[1], storage_->data);
}

Tensor Gradients::of(const Tensor& t) const {
  auto it = grads_.find(t.id());
  if (it == grads_.end()) {
    throw TensorError("gradient requested for a tensor that is not a requires_grad member of the tape");
  }
  return Tensor(it->second.shape, it->second.values);
}

Tensor Tape::record(Node node) {
  Tensor out = node.out;
  nodes_.push_back(std::move(node));
  return out;
}

Tensor Tape::matmul(const Tensor& a, const Tensor& b) {
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
  if (b.shape()[0] != k) shape_error("matmul", a, b);
  std::vector<double> out(n * m, 0.0);
  const double* pa = a.data().data();
  const double* pb = b.data().data();
  for (std::size_t i = 0; i < n; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double s = pa[i * k + p];
      if (s == 0.0) continue;
      const double* brow = pb + p * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += s * brow[j];
    }
  }
  const bool rg = a.requires_grad() || b.requires_grad();
  return record({Op::MatMul, Tensor({n, m}, std::move(out), rg), a, b});
}

Tensor Tape::add_bias(const Tensor& a, const Tensor& bias) {
  require_rank2("add_bias", a);
  if (bias.shape().size() != 1 || bias.shape()[0] != a.shape()[1]) shape_error("add_bias", a, bias);
  const std::size_t n = a.shape()[0], m = a.shape()[1];
  std::vector<double> out(a.data().begin(), a.data().end());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) out[i * m + j] += bias.data()[j];
  }
  const bool rg = a.requires_grad() || bias.requires_grad();
  return record({Op::AddBias, Tensor(a.shape(), std::move(out), rg), a, bias});
}

Tensor Tape::add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("add", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  return record({Op::Add, Tensor(a.shape(), std::move(out), rg), a, b});
}

Tensor Tape::mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  const bool rg = a.requires_grad() || b.requires_grad();
  return record({Op::Mul, Tensor(a.shape(), std::move(out), rg), a, b});
}

Tensor Tape::sum(const Tensor& a) {
  const double s = std::accumulate(a.data().begin(), a.data().end(), 0.0);
  return record({Op::Sum, Tensor::scalar(s, a.requires_grad()), a, {}});
}

Tensor Tape::relu(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] > 0.0 ? a.data()[i] : 0.0;
  return record({Op::Relu, Tensor(a.shape(), std::move(out), a.requires_grad()), a, {}});
}

Tensor Tape::sign(const Tensor& a) {
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = a.data()[i];
    out[i] = v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0);
  }
  return record({Op::Sign, Tensor(a.shape(), std::move(out), a.requires_grad()), a, {}});
}

Tensor Tape::clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw TensorError("clamp: lower bound exceeds upper bound");
  std::vector<double> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::clamp(a.data()[i], lo, hi);
  Node node{Op::Clamp, Tensor(a.shape(), std::move(out), a.requires_grad()), a, {}};
  node.lo = lo;
  node.hi = hi;
  return record(std::move(node));
}

Tensor Tape::softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank2("softmax_cross_entropy", logits);
  const std::size_t n = logits.shape()[0], c = logits.shape()[1];
  if (labels.size() != n) {
    throw TensorError("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for logits of shape " +
                      to_string(logits.shape()));
  }
  std::vector<double> probs(n * c);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= c) {
      throw TensorError("softmax_cross_entropy: label " + std::to_string(y) + " out of range [0, " +
                        std::to_string(c) + ")");
    }
    const double* z = logits.data().data() + i * c;
    const double zmax = *std::max_element(z, z + c);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      probs[i * c + j] = std::exp(z[j] - zmax);
      denom += probs[i * c + j];
    }
    for (std::size_t j = 0; j < c; ++j) probs[i * c + j] /= denom;
    total += zmax + std::log(denom) - z[y];
  }
  Node node{Op::SoftmaxCE, Tensor::scalar(total / static_cast<double>(n), logits.requires_grad()), logits, {}};
  node.labels.assign(labels.begin(), labels.end());
  node.cache = std::move(probs);
  return record(std::move(node));
}

Gradients Tape::backward(const Tensor& loss) const {
  if (!loss.defined() || loss.numel() != 1) {
    throw TensorError("backward: loss must be a scalar, got shape " +
                      (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  const auto last = std::find_if(nodes_.rbegin(), nodes_.rend(), [&](const Node& n) { return n.out.id() == loss.id(); });
  if (last == nodes_.rend()) throw TensorError("backward: loss was not produced on this tape");

  std::unordered_map<const void*, std::vector<double>> acc;
  Gradients result;
  auto remember = [&](const Tensor& t) {
    if (t.defined() && t.requires_grad() && !result.grads_.count(t.id())) result.grads_[t.id()] = {t.shape(), {}};
  };
  for (const auto& n : nodes_) {
    remember(n.lhs);
    remember(n.rhs);
    remember(n.out);
  }
  if (!loss.requires_grad()) return result;

  acc[loss.id()] = {1.0};
  for (auto it = last; it != nodes_.rend(); ++it) {
    const Node& node = *it;
    auto found = acc.find(node.out.id());
    if (found == acc.end()) continue;
    const std::vector<double>& g = found->second;  // node-based map: stays valid across inserts
    const Tensor& a = node.lhs;
    const Tensor& b = node.rhs;
    switch (node.op) {
      case Op::MatMul: {
        const std::size_t n = a.shape()[0], k = a.shape()[1], m = b.shape()[1];
        if (a.requires_grad()) {
          auto& ga = slot(acc, a);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < m; ++j) s += g[i * m + j] * b.data()[p * m + j];
              ga[i * k + p] += s;
            }
          }
        }
        if (b.requires_grad()) {
          auto& gb = slot(acc, b);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double s = a.data()[i * k + p];
              if (s == 0.0) continue;
              for (std::size_t j = 0; j < m; ++j) gb[p * m + j] += s * g[i * m + j];
            }
          }
        }
        break;
      }
      case Op::AddBias: {
        const std::size_t n = a.shape()[0], m = a.shape()[1];
        if (a.requires_grad()) {
          auto& ga = slot(acc, a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
        }
        if (b.requires_grad()) {
          auto& gb = slot(acc, b);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < m; ++j) gb[j] += g[i * m + j];
          }
        }
        break;
      }
      case Op::Add:
        for (const Tensor* t : {&a, &b}) {
          if (!t->requires_grad()) continue;
          auto& gt = slot(acc, *t);
          for (std::size_t i = 0; i < g.size(); ++i) gt[i] += g[i];
        }
        break;
      case Op::Mul:
        if (a.requires_grad()) {
          auto& ga = slot(acc, a);
          for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b.data()[i];
        }
        if (b.requires_grad()) {
          auto& gb = slot(acc, b);
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a.data()[i];
        }
        break;
      case Op::Sum:
        if (a.requires_grad()) {
          auto& ga = slot(acc, a);
          for (auto& v : ga) v += g[0];
        }
        break;
      case Op::Relu:
        if (a.requires_grad()) {
          auto& ga = slot(acc, a);
          for (std::size_t i = 0; i < g.size(); ++i) {
            if (a.data()[i] > 0.0) ga[i] += g[i];
          }
        }
        break;
      case Op::Sign:
        if (a.requires_grad()) slot(acc, a);
        break;
      case Op::Clamp:
        if (a.requires_grad()) {
          auto& ga = slot(acc, a);
          for (std::size_t i = 0; i < g.size(); ++i) {
            const double v = a.data()[i];
            if (v >= node.lo && v <= node.hi) ga[i] += g[i];
          }
        }
        break;
      case Op::SoftmaxCE:
        if (a.requires_grad()) {
          auto& ga = slot(acc, a);
          const std::size_t n = a.shape()[0], c = a.shape()[1];
          const double scale = g[0] / static_cast<double>(n);
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < c; ++j) {
              const double onehot = static_cast<std::size_t>(node.labels[i]) == j ? 1.0 : 0.0;
              ga[i * c + j] += scale * (node.cache[i * c + j] - onehot);
            }
          }
        }
        break;
    }
  }

  for (auto& [id, entry] : result.grads_) {
    auto it = acc.find(id);
    if (it != acc.end()) {
      entry.values = std::move(it->second);
    } else {
      std::size_t count = 1;
      for (auto e : entry.shape) count *= e;
      entry.values.assign(count, 0.0);
    }
  }
  return result;
}

}  // namespace bbat
