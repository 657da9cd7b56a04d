#include "bbat/batch_in_batch.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace bbat {

std::string_view to_string(SelectKind kind) {
  switch (kind) {
    case SelectKind::None: return "none";
    case SelectKind::CP: return "cp";
    case SelectKind::GS: return "gs";
    case SelectKind::BG: return "bg";
  }
  return "?";
}

SelectKind parse_select_kind(std::string_view name) {
  if (name == "none") return SelectKind::None;
  if (name == "cp") return SelectKind::CP;
  if (name == "gs") return SelectKind::GS;
  if (name == "bg") return SelectKind::BG;
  throw std::invalid_argument("unknown select kind '" + std::string(name) + "' (expected none, cp, gs, bg)");
}

AdvGrid::AdvGrid(Matrix originals, Labels labels, Matrix deltas, std::size_t m, bool clamp_input_domain)
    : originals_(std::move(originals)), labels_(std::move(labels)), deltas_(std::move(deltas)), m_(m),
      clamp_(clamp_input_domain) {
  if (m_ < 1) throw std::invalid_argument("AdvGrid: m must be >= 1");
  if (labels_.size() != originals_.rows) throw std::invalid_argument("AdvGrid: label count does not match originals");
  if (deltas_.rows != m_ * originals_.rows || deltas_.cols != originals_.cols) {
    throw std::invalid_argument("AdvGrid: perturbations must be (m*n) x d");
  }
  adversarial_ = apply_perturbation(repeat_rows(originals_, m_), deltas_, clamp_);
  distances_.resize(adversarial_.rows);
  for (std::size_t j = 0; j < m_; ++j) {
    for (std::size_t i = 0; i < n(); ++i) distances_[flat_index(i, j)] = recompute_distance(i, j);
  }
}

Labels AdvGrid::adversarial_labels() const {
  Labels out;
  out.reserve(adversarial_.rows);
  for (std::size_t j = 0; j < m_; ++j) out.insert(out.end(), labels_.begin(), labels_.end());
  return out;
}

double AdvGrid::recompute_distance(std::size_t i, std::size_t j) const {
  const auto x = originals_.row(i);
  const auto a = sample(i, j);
  double d = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) d = std::max(d, std::abs(a[k] - x[k]));
  return d;
}

std::vector<double> AdvGrid::reconstruct(std::size_t i, std::size_t j) const {
  const auto x = originals_.row(i);
  const auto delta = deltas_.row(flat_index(i, j));
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double v = x[k] + delta[k];
    out[k] = clamp_ ? std::clamp(v, 0.0, 1.0) : v;
  }
  return out;
}

std::size_t FinalBatch::clean_count() const {
  return static_cast<std::size_t>(std::ranges::count_if(origin, [](const SampleOrigin& o) { return o.clean(); }));
}

namespace {

class BatchBuilder {
 public:
  explicit BatchBuilder(std::size_t d) : d_(d) {}

  void add(std::span<const double> row, int label, SampleOrigin origin) {
    values_.insert(values_.end(), row.begin(), row.end());
    batch_.y.push_back(label);
    batch_.origin.push_back(origin);
  }

  FinalBatch finish() && {
    batch_.x = Matrix(batch_.y.size(), d_, std::move(values_));
    return std::move(batch_);
  }

 private:
  std::size_t d_;
  std::vector<double> values_;
  FinalBatch batch_;
};

// Adds misclassified adversarial samples in row-major grid order.
void add_misclassified(const AdvGrid& grid, const Labels& predicted, BatchBuilder& out) {
  for (std::size_t i = 0; i < grid.n(); ++i) {
    for (std::size_t j = 0; j < grid.m(); ++j) {
      if (predicted[grid.flat_index(i, j)] != grid.labels()[i]) out.add(grid.sample(i, j), grid.labels()[i], {i, j});
    }
  }
}

}  // namespace

FinalBatch select_none(const AdvGrid& grid) {
  BatchBuilder out(grid.dim());
  for (std::size_t j = 0; j < grid.m(); ++j) {
    for (std::size_t i = 0; i < grid.n(); ++i) out.add(grid.sample(i, j), grid.labels()[i], {i, j});
  }
  return std::move(out).finish();
}

FinalBatch select_cp(const AdvGrid& grid, const Classifier& model) {
  const Labels predicted = model.classify(grid.adversarial());
  BatchBuilder out(grid.dim());
  for (std::size_t i = 0; i < grid.n(); ++i) {
    std::optional<std::size_t> nearest_wrong;
    std::size_t farthest = 0;
    for (std::size_t j = 0; j < grid.m(); ++j) {
      const double dist = grid.distance(i, j);
      if (predicted[grid.flat_index(i, j)] != grid.labels()[i]) {
        if (!nearest_wrong || dist < grid.distance(i, *nearest_wrong)) nearest_wrong = j;
      }
      if (dist > grid.distance(i, farthest)) farthest = j;
    }
    const std::size_t pick = nearest_wrong.value_or(farthest);
    out.add(grid.sample(i, pick), grid.labels()[i], {i, pick});
  }
  return std::move(out).finish();
}

FinalBatch select_gs(const AdvGrid& grid, const Classifier& model) {
  BatchBuilder out(grid.dim());
  add_misclassified(grid, model.classify(grid.adversarial()), out);
  return std::move(out).finish();
}

FinalBatch select_bg(const AdvGrid& grid, const Classifier& model) {
  BatchBuilder out(grid.dim());
  const Labels clean_pred = model.classify(grid.originals());
  for (std::size_t i = 0; i < grid.n(); ++i) {
    if (clean_pred[i] != grid.labels()[i]) out.add(grid.originals().row(i), grid.labels()[i], {i, std::nullopt});
  }
  add_misclassified(grid, model.classify(grid.adversarial()), out);
  return std::move(out).finish();
}

FinalBatch select_samples(SelectKind kind, const AdvGrid& grid, const Classifier& model) {
  switch (kind) {
    case SelectKind::None: return select_none(grid);
    case SelectKind::CP: return select_cp(grid, model);
    case SelectKind::GS: return select_gs(grid, model);
    case SelectKind::BG: return select_bg(grid, model);
  }
  throw std::logic_error("unreachable select kind");
}

BbOutput bb_generate(const Matrix& originals, const Labels& labels, const Classifier& model, std::size_t m,
                     const NoiseSpec& noise, const AttackSpec& attack, SelectKind select) {
  if (m < 1) throw std::invalid_argument("bb_generate: m must be >= 1");
  if (originals.rows == 0) throw std::invalid_argument("bb_generate: empty batch");
  if (labels.size() != originals.rows) throw std::invalid_argument("bb_generate: label count does not match batch");
  noise.validate();
  attack.validate();
  if (noise.m != m) {
    throw std::invalid_argument("bb_generate: noise is designed for m=" + std::to_string(noise.m) +
                                " copies but the batch is duplicated m=" + std::to_string(m) + " times");
  }
  const double expected = attack.init_radius();
  if (std::abs(noise.radius - expected) > 1e-12 * expected) {
    throw std::invalid_argument("bb_generate: noise radius " + std::to_string(noise.radius) + " does not match the " +
                                std::string(to_string(attack.kind)) + " initialization radius " +
                                std::to_string(expected));
  }

  const Matrix duplicated = repeat_rows(originals, m);
  Labels dup_labels;
  dup_labels.reserve(duplicated.rows);
  for (std::size_t j = 0; j < m; ++j) dup_labels.insert(dup_labels.end(), labels.begin(), labels.end());

  const Matrix delta0 = make_initial_perturbation(noise, originals.rows, originals.cols);
  AttackOutput adv = run_attack(model, attack, duplicated, delta0, dup_labels);

  AdvGrid grid(originals, labels, std::move(adv.delta), m, attack.clamp_input_domain);
  FinalBatch batch = select_samples(select, grid, model);
  return {std::move(grid), std::move(batch)};
}

}  // namespace bbat
