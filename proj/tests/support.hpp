#pragma once

// Stub classifiers, finite-difference and brute-force oracles shared by the
// unit tests and the acceptance runner. Nothing here calls into the code
// under test except for the Classifier interface and plain data types.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <unistd.h>

#include "bbat/batch_in_batch.hpp"
#include "bbat/matrix.hpp"
#include "bbat/model.hpp"
#include "bbat/tensor.hpp"

namespace testing {

using bbat::Labels;
using bbat::LossGrad;
using bbat::Matrix;

/// Classifier whose prediction for each row is decided by a callback. Logits
/// put `margin` on the predicted class and 0 elsewhere; the input gradient is
/// zero, so attacks leave their initialization unchanged.
class ScriptedClassifier final : public bbat::Classifier {
 public:
  using Rule = std::function<int(std::span<const double>)>;
  ScriptedClassifier(std::size_t d, std::size_t classes, Rule rule, double margin = 10.0)
      : d_(d), classes_(classes), rule_(std::move(rule)), margin_(margin) {}

  std::size_t input_dim() const override { return d_; }
  std::size_t num_classes() const override { return classes_; }
  Matrix logits(const Matrix& x) const override {
    check_width(x, "ScriptedClassifier");
    Matrix out(x.rows, classes_);
    for (std::size_t r = 0; r < x.rows; ++r) out(r, static_cast<std::size_t>(rule_(x.row(r)))) = margin_;
    return out;
  }
  LossGrad loss_and_input_grad(const Matrix& x, std::span<const int> y) const override {
    return {mean_loss(x, y), Matrix(x.rows, x.cols)};
  }

 private:
  std::size_t d_, classes_;
  Rule rule_;
  double margin_;
};

/// Affine logits z = x W + b with an analytic input gradient. Independent of
/// the autodiff engine; used as a closed-form oracle model.
class LinearClassifier final : public bbat::Classifier {
 public:
  LinearClassifier(Matrix w, std::vector<double> b) : w_(std::move(w)), b_(std::move(b)) {}

  std::size_t input_dim() const override { return w_.rows; }
  std::size_t num_classes() const override { return w_.cols; }
  const Matrix& weights() const { return w_; }

  Matrix logits(const Matrix& x) const override {
    check_width(x, "LinearClassifier");
    Matrix z(x.rows, w_.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
      for (std::size_t c = 0; c < w_.cols; ++c) {
        double s = b_[c];
        for (std::size_t k = 0; k < w_.rows; ++k) s += x(r, k) * w_(k, c);
        z(r, c) = s;
      }
    }
    return z;
  }

  /// Softmax probabilities minus one-hot, times W^T, divided by the batch size.
  LossGrad loss_and_input_grad(const Matrix& x, std::span<const int> y) const override {
    const Matrix z = logits(x);
    Matrix g(x.rows, x.cols);
    double total = 0.0;
    for (std::size_t r = 0; r < x.rows; ++r) {
      double zmax = z(r, 0);
      for (std::size_t c = 1; c < z.cols; ++c) zmax = std::max(zmax, z(r, c));
      double denom = 0.0;
      for (std::size_t c = 0; c < z.cols; ++c) denom += std::exp(z(r, c) - zmax);
      total += zmax + std::log(denom) - z(r, static_cast<std::size_t>(y[r]));
      for (std::size_t c = 0; c < z.cols; ++c) {
        const double p = std::exp(z(r, c) - zmax) / denom - (static_cast<int>(c) == y[r] ? 1.0 : 0.0);
        for (std::size_t k = 0; k < x.cols; ++k) g(r, k) += p * w_(k, c) / static_cast<double>(x.rows);
      }
    }
    return {total / static_cast<double>(x.rows), g};
  }

 private:
  Matrix w_;
  std::vector<double> b_;
};

/// Softmax cross-entropy of one logit row, computed directly.
inline double ce_of_row(std::span<const double> z, int y) {
  double zmax = *std::max_element(z.begin(), z.end());
  double denom = 0.0;
  for (double v : z) denom += std::exp(v - zmax);
  return zmax + std::log(denom) - z[static_cast<std::size_t>(y)];
}

/// Plain forward pass of an Mlp computed from its parameter values with
/// explicit loops (no tape).
inline Matrix reference_forward(const bbat::Mlp& model, const Matrix& x) {
  Matrix a = x;
  for (std::size_t l = 0; l < model.layers(); ++l) {
    const auto& w = model.weight(l);
    const auto& b = model.bias(l);
    const std::size_t in = w.shape()[0], out = w.shape()[1];
    Matrix z(a.rows, out);
    for (std::size_t r = 0; r < a.rows; ++r) {
      for (std::size_t c = 0; c < out; ++c) {
        double s = 0.0;
        for (std::size_t k = 0; k < in; ++k) s += a(r, k) * w.data()[k * out + c];
        z(r, c) = s + b.data()[c];
        if (l + 1 < model.layers()) z(r, c) = std::max(z(r, c), 0.0);
      }
    }
    a = std::move(z);
  }
  return a;
}

inline double reference_mean_loss(const bbat::Mlp& model, const Matrix& x, std::span<const int> y) {
  const Matrix z = reference_forward(model, x);
  double s = 0.0;
  for (std::size_t r = 0; r < z.rows; ++r) s += ce_of_row(z.row(r), y[r]);
  return s / static_cast<double>(z.rows);
}

/// Central finite differences of f around v, step h.
inline std::vector<double> central_fd(const std::function<double(const std::vector<double>&)>& f,
                                      std::vector<double> v, double h = 1e-5) {
  std::vector<double> g(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double keep = v[i];
    v[i] = keep + h;
    const double up = f(v);
    v[i] = keep - h;
    const double down = f(v);
    v[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

/// ||a - b||_inf / (1 + ||b||_inf).
inline double fd_relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / (1.0 + scale);
}

inline Matrix random_matrix(std::size_t r, std::size_t c, double lo, double hi, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(r, c);
  for (auto& v : m.values) v = dist(gen);
  return m;
}

inline Labels random_labels(std::size_t n, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  Labels y(n);
  for (auto& v : y) v = static_cast<int>(gen() % classes);
  return y;
}

// Brute-force selection oracles written straight from the set definitions.

struct Selected {
  std::vector<std::vector<double>> rows;
  Labels labels;
  std::vector<bbat::SampleOrigin> origin;
  friend bool operator==(const Selected&, const Selected&) = default;
};

inline Selected as_selected(const bbat::FinalBatch& b) {
  Selected s;
  for (std::size_t r = 0; r < b.size(); ++r) s.rows.emplace_back(b.x.row(r).begin(), b.x.row(r).end());
  s.labels = b.y;
  s.origin = b.origin;
  return s;
}

inline bool misclassified(const bbat::Classifier& model, std::span<const double> x, int y) {
  const Matrix one(1, x.size(), std::vector<double>(x.begin(), x.end()));
  const Matrix z = model.logits(one);
  int best = 0;
  for (std::size_t c = 1; c < z.cols; ++c) {
    if (z(0, c) > z(0, static_cast<std::size_t>(best))) best = static_cast<int>(c);
  }
  return best != y;
}

inline double linf_between(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

/// Nearest misclassified duplicate per row, else farthest; lowest j on ties.
inline Selected oracle_cp(const bbat::AdvGrid& g, const bbat::Classifier& model) {
  Selected s;
  for (std::size_t i = 0; i < g.n(); ++i) {
    std::vector<std::size_t> wrong;
    for (std::size_t j = 0; j < g.m(); ++j) {
      if (misclassified(model, g.sample(i, j), g.labels()[i])) wrong.push_back(j);
    }
    auto dist = [&](std::size_t j) { return linf_between(g.sample(i, j), g.originals().row(i)); };
    std::size_t pick = 0;
    if (!wrong.empty()) {
      pick = wrong.front();
      for (auto j : wrong) {
        if (dist(j) < dist(pick)) pick = j;
      }
    } else {
      for (std::size_t j = 1; j < g.m(); ++j) {
        if (dist(j) > dist(pick)) pick = j;
      }
    }
    s.rows.emplace_back(g.sample(i, pick).begin(), g.sample(i, pick).end());
    s.labels.push_back(g.labels()[i]);
    s.origin.push_back({i, pick});
  }
  return s;
}

inline Selected oracle_gs(const bbat::AdvGrid& g, const bbat::Classifier& model) {
  Selected s;
  for (std::size_t i = 0; i < g.n(); ++i) {
    for (std::size_t j = 0; j < g.m(); ++j) {
      if (!misclassified(model, g.sample(i, j), g.labels()[i])) continue;
      s.rows.emplace_back(g.sample(i, j).begin(), g.sample(i, j).end());
      s.labels.push_back(g.labels()[i]);
      s.origin.push_back({i, j});
    }
  }
  return s;
}

inline Selected oracle_bg(const bbat::AdvGrid& g, const bbat::Classifier& model) {
  Selected s;
  for (std::size_t i = 0; i < g.n(); ++i) {
    if (!misclassified(model, g.originals().row(i), g.labels()[i])) continue;
    s.rows.emplace_back(g.originals().row(i).begin(), g.originals().row(i).end());
    s.labels.push_back(g.labels()[i]);
    s.origin.push_back({i, std::nullopt});
  }
  const Selected adv = oracle_gs(g, model);
  s.rows.insert(s.rows.end(), adv.rows.begin(), adv.rows.end());
  s.labels.insert(s.labels.end(), adv.labels.begin(), adv.labels.end());
  s.origin.insert(s.origin.end(), adv.origin.begin(), adv.origin.end());
  return s;
}

/// Grid whose samples encode their own (i, j): column 0 carries the distance
/// driver, column 1 the duplicate tag (j + 1) * 1e-7, column 2 the original
/// index i. Clean originals have a zero tag. Distances come from `dist`.
struct TaggedGrid {
  Matrix originals;
  Labels labels;
  Matrix deltas;
};

inline TaggedGrid tagged_grid(std::size_t n, std::size_t m, std::size_t classes,
                              const std::function<double(std::size_t, std::size_t)>& dist, std::uint64_t seed) {
  TaggedGrid t{Matrix(n, 3), random_labels(n, classes, seed), Matrix(m * n, 3)};
  for (std::size_t i = 0; i < n; ++i) t.originals(i, 2) = static_cast<double>(i);
  for (std::size_t j = 0; j < m; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      t.deltas(j * n + i, 0) = dist(i, j);
      t.deltas(j * n + i, 1) = static_cast<double>(j + 1) * 1e-7;
    }
  }
  return t;
}

/// Decodes (i, j) from a tagged sample; j = -1 for the clean original.
inline std::pair<std::size_t, int> decode_tag(std::span<const double> x) {
  const auto i = static_cast<std::size_t>(std::lround(x[2]));
  const int j = static_cast<int>(std::lround(x[1] / 1e-7)) - 1;
  return {i, j};
}

// Scripted predictions over a tagged grid: wrong(i, j) decides whether sample
// (i, j) is misclassified; j = -1 is the clean original.
inline ScriptedClassifier tagged_stub(const bbat::Labels& labels, std::size_t classes,
                                      std::function<bool(std::size_t, int)> wrong) {
  return ScriptedClassifier(3, classes, [labels, classes, wrong](std::span<const double> x) {
    const auto [i, j] = decode_tag(x);
    const int y = labels.at(i);
    return wrong(i, j) ? (y + 1) % static_cast<int>(classes) : y;
  });
}

/// Scoped temporary directory.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("bbat_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
