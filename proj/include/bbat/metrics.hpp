#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bbat/attacks.hpp"
#include "bbat/dataset.hpp"
#include "bbat/matrix.hpp"
#include "bbat/model.hpp"
#include "bbat/noise.hpp"

namespace bbat {

/// Probabilities are floored here before taking logs.
inline constexpr double kProbabilityFloor = 1e-12;

double accuracy_clean(const Classifier& model, const Dataset& data);

struct AdvEvalOptions {
  std::size_t steps = 50;
  double alpha = 0.0;  // 0 means epsilon / 4
  std::uint64_t seed = 0;
  bool zero_init = false;  // start PGD at delta = 0 instead of a uniform draw
  bool clamp_input_domain = false;
};

/// Fraction still classified correctly after PGD from a uniform epsilon-ball start.
double accuracy_adversarial(const Classifier& model, const Dataset& data, double epsilon,
                            const AdvEvalOptions& options = {});

/// Fraction misclassified after `attack`, initialized by `init` at attack.init_radius().
double attack_success_rate(const Classifier& model, const Dataset& data, const AttackSpec& attack, std::uint64_t seed,
                           NoiseKind init = NoiseKind::Uniform);

/// Fraction correctly classified after the same attack as attack_success_rate.
double accuracy_under_attack(const Classifier& model, const Dataset& data, const AttackSpec& attack,
                             std::uint64_t seed, NoiseKind init = NoiseKind::Uniform);

Matrix softmax_rows(const Matrix& logits);

/// Mean over rows of -(1/C) sum_c log max(p_c, floor): cross-entropy of the
/// predicted distribution against the uniform one. Minimum ln C at uniform.
double uniform_ce_of_probabilities(const Matrix& probabilities);

double confidence_uniform_ce(const Classifier& model, const Dataset& data);

struct Landscape {
  std::vector<double> t;  // shared coordinate grid for both directions
  Matrix loss;            // loss(a, b) at x + t[a] * r1 + t[b] * r2
  double std_dev = 0.0;   // population std over the whole grid
  bool degenerate = false;  // input gradient was zero, so r1 = 0
  std::vector<double> r1;
  std::vector<double> r2;
};

/// Loss surface around one sample along r1 = sign(grad_x L) and a Rademacher
/// direction r2, over t in [-half_width, half_width] with `resolution` points.
Landscape loss_landscape_grid(const Classifier& model, std::span<const double> x, int y, double half_width = 0.1,
                              std::size_t resolution = 21, std::uint64_t seed = 0);

struct DiversityOptions {
  std::size_t reps = 4;
  std::uint64_t seed = 0;
  bool identical_inits = false;  // every rep reuses one initialization
};

/// Mean over samples of the population std of the losses of `reps`
/// adversarial samples per original, each from its own initialization.
/// TLHS designs the reps initializations jointly.
double loss_std_diversity(const Classifier& model, const Dataset& data, const AttackSpec& attack, NoiseKind init,
                          const DiversityOptions& options = {});

}  // namespace bbat
