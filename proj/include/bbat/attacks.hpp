#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>

#include "bbat/matrix.hpp"
#include "bbat/model.hpp"

namespace bbat {

enum class AttackKind { NFGSM, PGD };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);

struct AttackSpec {
  AttackKind kind = AttackKind::PGD;
  double epsilon = 8.0 / 255.0;
  double k = 2.0;          // N-FGSM initialization radius multiplier
  double alpha = 0.0;      // PGD step length; 0 means epsilon / 4
  std::size_t steps = 10;  // PGD iterations
  bool clamp_input_domain = false;

  void validate() const;
  double step_length() const { return alpha > 0.0 ? alpha : epsilon / 4.0; }
  /// Radius the initial perturbation is drawn at: k*epsilon for N-FGSM, epsilon for PGD.
  double init_radius() const { return kind == AttackKind::NFGSM ? k * epsilon : epsilon; }

  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

/// Adversarial batch together with the perturbation that produced it;
/// adversarial == apply_perturbation(x_orig, delta, clamp) bit for bit.
struct AttackOutput {
  Matrix adversarial;
  Matrix delta;
};

/// x + delta, clamped into [0, 1] when `clamp` is set.
Matrix apply_perturbation(const Matrix& x, const Matrix& delta, bool clamp);

/// Entrywise clamp to [-epsilon, epsilon].
Matrix project_linf(const Matrix& delta, double epsilon);

/// Largest absolute entry.
double linf_norm(std::span<const double> v);

/// delta0 + epsilon * sign(grad at x + delta0). No projection, no clipping of
/// the perturbation.
AttackOutput n_fgsm_delta(const Classifier& model, const Matrix& x_orig, const Matrix& delta0,
                          std::span<const int> y, double epsilon, bool clamp_input_domain = false);

/// Called after every PGD iteration with the projected perturbation.
using PgdObserver = std::function<void(std::size_t iteration, const Matrix& delta)>;

/// `steps` iterations of delta <- Proj[delta + alpha * sign(grad)], starting
/// from delta0 with ||delta0||_inf <= epsilon.
AttackOutput pgd_delta(const Classifier& model, const Matrix& x_orig, const Matrix& delta0, std::span<const int> y,
                       double epsilon, double alpha, std::size_t steps, bool clamp_input_domain = false,
                       const PgdObserver& observer = {});

/// N-FGSM on an already perturbed batch x_init = x_orig + delta0.
Matrix n_fgsm(const Classifier& model, const Matrix& x_init, const Matrix& x_orig, std::span<const int> y,
              double epsilon, bool clamp_input_domain = false);

/// PGD from an already perturbed batch x_init inside the epsilon ball around x_orig.
Matrix pgd_attack(const Classifier& model, const Matrix& x_init, const Matrix& x_orig, std::span<const int> y,
                  double epsilon, double alpha, std::size_t steps, bool clamp_input_domain = false);

/// Dispatches on spec.kind; delta0 must come from a generator at spec.init_radius().
AttackOutput run_attack(const Classifier& model, const AttackSpec& spec, const Matrix& x_orig, const Matrix& delta0,
                        std::span<const int> y);

}  // namespace bbat
