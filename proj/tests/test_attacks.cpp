#include <doctest.h>

#include <cmath>

#include "bbat/attacks.hpp"
#include "bbat/noise.hpp"
#include "support.hpp"

using namespace bbat;
using testing::random_labels;
using testing::random_matrix;

namespace {

double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

Mlp linear_mlp(const Matrix& w, const std::vector<double>& b) {
  return Mlp({Tensor::from_matrix(w, true)}, {Tensor({b.size()}, b, true)});
}

Mlp zero_mlp(std::size_t d, std::size_t c) {
  return linear_mlp(Matrix(d, c), std::vector<double>(c, 0.0));
}

}  // namespace

TEST_CASE("project_linf") {
  const Matrix inside(1, 3, {0.05, -0.02, 0.0});
  CHECK(project_linf(inside, 0.1) == inside);
  CHECK(project_linf(Matrix(1, 2, {0.5, -0.5}), 0.1) == Matrix(1, 2, {0.1, -0.1}));
  const Matrix x = random_matrix(4, 4, -1, 1, 3);
  CHECK(project_linf(project_linf(x, 0.3), 0.3) == project_linf(x, 0.3));
  CHECK_THROWS(project_linf(x, 0.0));
}

TEST_CASE("N-FGSM at a zero-gradient point returns its starting point") {
  const Mlp m = zero_mlp(3, 4);
  const Matrix x = random_matrix(5, 3, 0, 1, 1);
  const Matrix d0 = uniform_noise(5, 3, 0.06, 2);
  const Labels y = random_labels(5, 4, 3);
  const AttackOutput out = n_fgsm_delta(m, x, d0, y, 0.03);
  CHECK(out.delta == d0);
  CHECK(out.adversarial == apply_perturbation(x, d0, false));
  const Matrix x_init = apply_perturbation(x, d0, false);
  CHECK(max_abs_diff(n_fgsm(m, x_init, x, y, 0.03), x_init) <= 1e-15);
}

TEST_CASE("N-FGSM on a linear binary model matches the closed-form gradient sign") {
  const double eps = 8.0 / 255.0;
  const Matrix w = random_matrix(6, 2, -1, 1, 10);
  const std::vector<double> b{0.1, -0.2};
  const Mlp m = linear_mlp(w, b);
  const testing::LinearClassifier oracle(w, b);
  const Matrix x = random_matrix(8, 6, 0, 1, 11);
  const Labels y = random_labels(8, 2, 12);
  const Matrix d0 = uniform_noise(8, 6, 2 * eps, 13);
  const AttackOutput out = n_fgsm_delta(m, x, d0, y, eps);
  const Matrix g = oracle.loss_and_input_grad(apply_perturbation(x, d0, false), y).grad;
  for (std::size_t r = 0; r < 8; ++r) {
    // closed form row gradient: (p - onehot) W^T; its sign for two classes
    // is sign(p_other * (w_other - w_y)), independent of p.
    const std::size_t yo = static_cast<std::size_t>(1 - y[r]);
    for (std::size_t k = 0; k < 6; ++k) {
      const double expected = sgn(w(k, yo) - w(k, static_cast<std::size_t>(y[r])));
      CHECK(sgn(g(r, k)) == expected);
      CHECK(out.delta(r, k) == d0(r, k) + eps * expected);
    }
  }
}

TEST_CASE("N-FGSM perturbation is bounded by (k + 1) epsilon and can exceed epsilon") {
  const double eps = 8.0 / 255.0;
  const double k = 2.0;
  const std::size_t dims[] = {10, 16, 3};
  const Mlp m = Mlp::init(dims, 4);
  const Matrix x = random_matrix(32, 10, 0, 1, 5);
  const Labels y = random_labels(32, 3, 6);
  const double radius = k * eps;
  const AttackOutput out = n_fgsm_delta(m, x, uniform_noise(32, 10, radius, 7), y, eps);
  const double bound = radius + eps;
  CHECK(linf_norm(out.delta.values) <= bound);
  bool beyond = false;
  for (double v : out.delta.values) beyond = beyond || std::abs(v) > eps;
  CHECK(beyond);
}

TEST_CASE("PGD with one full step from zero equals projected FGSM") {
  const double eps = 0.05;
  const std::size_t dims[] = {5, 8, 3};
  const Mlp m = Mlp::init(dims, 20);
  const Matrix x = random_matrix(6, 5, 0, 1, 21);
  const Labels y = random_labels(6, 3, 22);
  const AttackOutput out = pgd_delta(m, x, Matrix(6, 5), y, eps, eps, 1);
  const Matrix g = m.loss_and_input_grad(x, y).grad;
  for (std::size_t i = 0; i < g.values.size(); ++i) CHECK(out.delta.values[i] == eps * sgn(g.values[i]));
}

TEST_CASE("PGD on a linear binary model converges to the loss-maximizing corner") {
  const double eps = 0.1;
  const Matrix w = random_matrix(4, 2, -1, 1, 30);
  const Mlp m = linear_mlp(w, {0.0, 0.3});
  const Matrix x = random_matrix(5, 4, 0, 1, 31);
  const Labels y = random_labels(5, 2, 32);
  const AttackOutput out = pgd_delta(m, x, uniform_noise(5, 4, eps, 33), y, eps, eps / 4, 10);
  for (std::size_t r = 0; r < 5; ++r) {
    const std::size_t yy = static_cast<std::size_t>(y[r]);
    for (std::size_t k = 0; k < 4; ++k) CHECK(out.delta(r, k) == eps * sgn(w(k, 1 - yy) - w(k, yy)));
  }
}

TEST_CASE("PGD stays inside the ball at every iteration") {
  const double eps = 8.0 / 255.0;
  const std::size_t dims[] = {12, 16, 4};
  const Mlp m = Mlp::init(dims, 40);
  const Matrix x = random_matrix(16, 12, 0, 1, 41);
  const Labels y = random_labels(16, 4, 42);
  std::size_t calls = 0;
  const AttackOutput out = pgd_delta(m, x, uniform_noise(16, 12, eps, 43), y, eps, eps / 4, 10, false,
                                     [&](std::size_t, const Matrix& d) {
                                       ++calls;
                                       CHECK(linf_norm(d.values) <= eps);
                                     });
  CHECK(calls == 10);
  CHECK(linf_norm(out.delta.values) <= eps + 1e-12);
}

TEST_CASE("PGD rejects a start outside the ball and names the violation") {
  const Mlp m = zero_mlp(2, 2);
  const Matrix x(1, 2, {0.5, 0.5});
  const Labels y{0};
  CHECK_THROWS_WITH(pgd_delta(m, x, Matrix(1, 2, {0.15, 0.0}), y, 0.1, 0.025, 3),
                    doctest::Contains("violation"));
  CHECK_THROWS(pgd_attack(m, Matrix(1, 2, {0.7, 0.5}), x, y, 0.1, 0.025, 3));
  CHECK_THROWS(pgd_delta(m, x, Matrix(1, 2), y, 0.1, 0.0, 3));
  CHECK_THROWS(pgd_delta(m, x, Matrix(1, 2), y, 0.1, 0.025, 0));
}

TEST_CASE("attacks reject shape mismatches") {
  const Mlp m = zero_mlp(2, 2);
  const Labels y{0};
  CHECK_THROWS(n_fgsm_delta(m, Matrix(1, 2), Matrix(1, 3), y, 0.1));
  CHECK_THROWS(n_fgsm_delta(m, Matrix(1, 2), Matrix(1, 2), Labels{0, 1}, 0.1));
  CHECK_THROWS(pgd_delta(m, Matrix(2, 2), Matrix(1, 2), y, 0.1, 0.1, 1));
}

TEST_CASE("input-domain clamp keeps adversarial samples in [0, 1]") {
  const double eps = 0.3;
  const std::size_t dims[] = {6, 8, 3};
  const Mlp m = Mlp::init(dims, 50);
  const Matrix x = random_matrix(10, 6, 0, 1, 51);
  const Labels y = random_labels(10, 3, 52);
  for (const AttackOutput& out : {n_fgsm_delta(m, x, uniform_noise(10, 6, 2 * eps, 53), y, eps, true),
                                  pgd_delta(m, x, uniform_noise(10, 6, eps, 54), y, eps, eps / 4, 5, true)}) {
    for (double v : out.adversarial.values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
}

TEST_CASE("attacks on stacked duplicates equal separate per-copy runs") {
  const double eps = 8.0 / 255.0;
  const std::size_t dims[] = {7, 9, 3};
  const Mlp m = Mlp::init(dims, 60);
  const std::size_t n = 4, mm = 3;
  const Matrix x = random_matrix(n, 7, 0, 1, 61);
  const Labels y = random_labels(n, 3, 62);
  Labels yy;
  for (std::size_t j = 0; j < mm; ++j) yy.insert(yy.end(), y.begin(), y.end());
  for (AttackKind kind : {AttackKind::NFGSM, AttackKind::PGD}) {
    AttackSpec spec;
    spec.kind = kind;
    spec.epsilon = eps;
    const Matrix d0 = uniform_noise(mm * n, 7, spec.init_radius(), 63);
    const AttackOutput joint = run_attack(m, spec, repeat_rows(x, mm), d0, yy);
    for (std::size_t j = 0; j < mm; ++j) {
      std::vector<std::size_t> rows;
      for (std::size_t i = 0; i < n; ++i) rows.push_back(j * n + i);
      const AttackOutput alone = run_attack(m, spec, x, gather_rows(d0, rows), y);
      CHECK(gather_rows(joint.delta, rows) == alone.delta);
      CHECK(gather_rows(joint.adversarial, rows) == alone.adversarial);
    }
  }
}

TEST_CASE("attack spec validation and names") {
  AttackSpec s;
  CHECK(s.step_length() == doctest::Approx(s.epsilon / 4));
  s.kind = AttackKind::NFGSM;
  CHECK(s.init_radius() == doctest::Approx(2 * s.epsilon));
  s.epsilon = 0.0;
  CHECK_THROWS(s.validate());
  s.epsilon = 0.1;
  s.k = 0.5;
  CHECK_THROWS(s.validate());
  for (AttackKind k : {AttackKind::NFGSM, AttackKind::PGD}) CHECK(parse_attack_kind(to_string(k)) == k);
  CHECK_THROWS(parse_attack_kind("fgsm"));
}
