#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bbat/attacks.hpp"
#include "bbat/matrix.hpp"
#include "bbat/model.hpp"
#include "bbat/noise.hpp"

namespace bbat {

/// None passes every adversarial sample through (the plain baselines).
enum class SelectKind { None, CP, GS, BG };

std::string_view to_string(SelectKind kind);
SelectKind parse_select_kind(std::string_view name);

/// Where a selected training sample came from: original row i, and either
/// duplicate j or the clean original itself.
struct SampleOrigin {
  std::size_t original = 0;
  std::optional<std::size_t> duplicate;

  bool clean() const { return !duplicate.has_value(); }
  friend bool operator==(const SampleOrigin&, const SampleOrigin&) = default;
};

/// The m adversarial versions of each of n originals. Storage follows the
/// duplicated-batch layout: sample (i, j) is row j*n + i.
class AdvGrid {
 public:
  AdvGrid(Matrix originals, Labels labels, Matrix deltas, std::size_t m, bool clamp_input_domain);

  std::size_t n() const { return originals_.rows; }
  std::size_t m() const { return m_; }
  std::size_t dim() const { return originals_.cols; }

  const Matrix& originals() const { return originals_; }
  const Labels& labels() const { return labels_; }
  const Matrix& deltas() const { return deltas_; }
  const Matrix& adversarial() const { return adversarial_; }
  bool clamps_input_domain() const { return clamp_; }

  /// Labels aligned with adversarial() rows.
  Labels adversarial_labels() const;

  std::size_t flat_index(std::size_t i, std::size_t j) const { return j * n() + i; }
  std::span<const double> sample(std::size_t i, std::size_t j) const { return adversarial_.row(flat_index(i, j)); }

  /// Cached ||x_i^(j) - x_i||_inf.
  double distance(std::size_t i, std::size_t j) const { return distances_[flat_index(i, j)]; }
  double recompute_distance(std::size_t i, std::size_t j) const;

  /// Rebuilds sample (i, j) from the original and its logged perturbation.
  std::vector<double> reconstruct(std::size_t i, std::size_t j) const;

 private:
  Matrix originals_;
  Labels labels_;
  Matrix deltas_;
  Matrix adversarial_;
  std::vector<double> distances_;
  std::size_t m_;
  bool clamp_;
};

/// Final training batch; may be empty, in which case the step is skipped.
struct FinalBatch {
  Matrix x;
  Labels y;
  std::vector<SampleOrigin> origin;

  bool empty() const { return y.empty(); }
  std::size_t size() const { return y.size(); }
  std::size_t clean_count() const;
};

/// Every adversarial sample in duplicated-batch order.
FinalBatch select_none(const AdvGrid& grid);

/// Per original: the misclassified duplicate nearest to it in l_inf, or the
/// farthest duplicate when none is misclassified. Ties go to the lowest j.
FinalBatch select_cp(const AdvGrid& grid, const Classifier& model);

/// Every misclassified adversarial sample, in row-major grid order (i outer, j inner).
FinalBatch select_gs(const AdvGrid& grid, const Classifier& model);

/// Misclassified members of the clean originals followed by the adversarial grid.
FinalBatch select_bg(const AdvGrid& grid, const Classifier& model);

FinalBatch select_samples(SelectKind kind, const AdvGrid& grid, const Classifier& model);

struct BbOutput {
  AdvGrid grid;
  FinalBatch batch;
};

/// Duplicate, jointly initialize, attack, select.
BbOutput bb_generate(const Matrix& originals, const Labels& labels, const Classifier& model, std::size_t m,
                     const NoiseSpec& noise, const AttackSpec& attack, SelectKind select);

}  // namespace bbat
