#include "bbat/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace bbat {

std::string_view to_string(AttackKind kind) { return kind == AttackKind::NFGSM ? "nfgsm" : "pgd"; }

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "nfgsm") return AttackKind::NFGSM;
  if (name == "pgd") return AttackKind::PGD;
  throw std::invalid_argument("unknown attack kind '" + std::string(name) + "' (expected nfgsm, pgd)");
}

void AttackSpec::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) throw std::invalid_argument("attack epsilon must be positive");
  if (kind == AttackKind::NFGSM && !(k >= 1.0)) throw std::invalid_argument("N-FGSM radius multiplier k must be >= 1");
  if (kind == AttackKind::PGD) {
    if (alpha < 0.0 || !std::isfinite(alpha)) throw std::invalid_argument("PGD step length alpha must be positive");
    if (steps < 1) throw std::invalid_argument("PGD steps must be >= 1");
  }
}

namespace {

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

void check_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows != b.rows || a.cols != b.cols) {
    std::ostringstream msg;
    msg << op << ": shape mismatch " << a.rows << "x" << a.cols << " vs " << b.rows << "x" << b.cols;
    throw std::invalid_argument(msg.str());
  }
}

void check_labels(const Matrix& x, std::span<const int> y, const char* op) {
  if (y.size() != x.rows) {
    throw std::invalid_argument(std::string(op) + ": " + std::to_string(y.size()) + " labels for " +
                                std::to_string(x.rows) + " rows");
  }
}

Matrix difference(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows, a.cols);
  for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] = a.values[i] - b.values[i];
  return out;
}

}  // namespace

Matrix apply_perturbation(const Matrix& x, const Matrix& delta, bool clamp) {
  check_same_shape(x, delta, "apply_perturbation");
  Matrix out(x.rows, x.cols);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double v = x.values[i] + delta.values[i];
    out.values[i] = clamp ? std::clamp(v, 0.0, 1.0) : v;
  }
  return out;
}

Matrix project_linf(const Matrix& delta, double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("project_linf: epsilon must be positive");
  Matrix out = delta;
  for (auto& v : out.values) v = std::clamp(v, -epsilon, epsilon);
  return out;
}

double linf_norm(std::span<const double> v) {
  double m = 0.0;
  for (double e : v) m = std::max(m, std::abs(e));
  return m;
}

AttackOutput n_fgsm_delta(const Classifier& model, const Matrix& x_orig, const Matrix& delta0, std::span<const int> y,
                          double epsilon, bool clamp_input_domain) {
  check_same_shape(x_orig, delta0, "n_fgsm");
  check_labels(x_orig, y, "n_fgsm");
  if (!(epsilon > 0.0)) throw std::invalid_argument("n_fgsm: epsilon must be positive");
  const Matrix x_init = apply_perturbation(x_orig, delta0, clamp_input_domain);
  const LossGrad lg = model.loss_and_input_grad(x_init, y);
  Matrix delta = delta0;
  for (std::size_t i = 0; i < delta.values.size(); ++i) delta.values[i] += epsilon * sign_of(lg.grad.values[i]);
  return {apply_perturbation(x_orig, delta, clamp_input_domain), std::move(delta)};
}

AttackOutput pgd_delta(const Classifier& model, const Matrix& x_orig, const Matrix& delta0, std::span<const int> y,
                       double epsilon, double alpha, std::size_t steps, bool clamp_input_domain,
                       const PgdObserver& observer) {
  check_same_shape(x_orig, delta0, "pgd_attack");
  check_labels(x_orig, y, "pgd_attack");
  if (!(epsilon > 0.0)) throw std::invalid_argument("pgd_attack: epsilon must be positive");
  if (!(alpha > 0.0)) throw std::invalid_argument("pgd_attack: alpha must be positive");
  if (steps < 1) throw std::invalid_argument("pgd_attack: steps must be >= 1");
  const double start = linf_norm(delta0.values);
  // Slack absorbs the rounding of x_init - x_orig when callers pass x_init.
  if (start > epsilon * (1.0 + 1e-12) + 1e-15) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "pgd_attack: initial perturbation leaves the epsilon ball (max |delta0| = " << start
        << ", epsilon = " << epsilon << ", violation = " << start - epsilon << ")";
    throw std::invalid_argument(msg.str());
  }
  Matrix delta = project_linf(delta0, epsilon);
  for (std::size_t t = 0; t < steps; ++t) {
    const LossGrad lg = model.loss_and_input_grad(apply_perturbation(x_orig, delta, clamp_input_domain), y);
    for (std::size_t i = 0; i < delta.values.size(); ++i) {
      delta.values[i] = std::clamp(delta.values[i] + alpha * sign_of(lg.grad.values[i]), -epsilon, epsilon);
    }
    if (observer) observer(t, delta);
  }
  return {apply_perturbation(x_orig, delta, clamp_input_domain), std::move(delta)};
}

Matrix n_fgsm(const Classifier& model, const Matrix& x_init, const Matrix& x_orig, std::span<const int> y,
              double epsilon, bool clamp_input_domain) {
  check_same_shape(x_init, x_orig, "n_fgsm");
  return n_fgsm_delta(model, x_orig, difference(x_init, x_orig), y, epsilon, clamp_input_domain).adversarial;
}

Matrix pgd_attack(const Classifier& model, const Matrix& x_init, const Matrix& x_orig, std::span<const int> y,
                  double epsilon, double alpha, std::size_t steps, bool clamp_input_domain) {
  check_same_shape(x_init, x_orig, "pgd_attack");
  return pgd_delta(model, x_orig, difference(x_init, x_orig), y, epsilon, alpha, steps, clamp_input_domain).adversarial;
}

AttackOutput run_attack(const Classifier& model, const AttackSpec& spec, const Matrix& x_orig, const Matrix& delta0,
                        std::span<const int> y) {
  spec.validate();
  if (spec.kind == AttackKind::NFGSM) {
    return n_fgsm_delta(model, x_orig, delta0, y, spec.epsilon, spec.clamp_input_domain);
  }
  return pgd_delta(model, x_orig, delta0, y, spec.epsilon, spec.step_length(), spec.steps, spec.clamp_input_domain);
}

}  // namespace bbat
