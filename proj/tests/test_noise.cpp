#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "bbat/noise.hpp"

using namespace bbat;

namespace {

// Stratum index computed independently: the value's offset from -r in units
// of the stratum width 2r/m.
long oracle_stratum(double v, std::size_t m, double r) {
  return static_cast<long>(std::floor((v + r) / (2.0 * r / static_cast<double>(m))));
}

}  // namespace

TEST_CASE("uniform noise stays within the N-FGSM radius") {
  const double r = 2.0 * 8.0 / 255.0;
  const Matrix u = uniform_noise(64, 100, r, 3);
  for (double v : u.values) {
    CHECK(v >= -r);
    CHECK(v < r);
  }
  CHECK(*std::max_element(u.values.begin(), u.values.end()) <= 16.0 / 255.0);
}

TEST_CASE("uniform noise mean obeys a CLT bound") {
  const double r = 0.1;
  const Matrix u = uniform_noise(1000, 100, r, 17);
  double s = 0.0;
  for (double v : u.values) s += v;
  const double n = static_cast<double>(u.values.size());
  const double sigma = r / std::sqrt(3.0) / std::sqrt(n);  // std of U(-r, r) is r / sqrt(3)
  CHECK(std::abs(s / n) < 3.0 * sigma);
}

TEST_CASE("uniform noise is deterministic and rejects bad radius") {
  CHECK(uniform_noise(5, 7, 0.3, 9) == uniform_noise(5, 7, 0.3, 9));
  CHECK_FALSE(uniform_noise(5, 7, 0.3, 9) == uniform_noise(5, 7, 0.3, 10));
  CHECK_THROWS(uniform_noise(5, 7, 0.0, 9));
  CHECK_THROWS(uniform_noise(5, 7, -1.0, 9));
}

TEST_CASE("sign-normal noise entries are exactly +-step") {
  const double step = 0.037;
  const Matrix s = sign_normal_noise(1000, 100, step, 5);
  for (double v : s.values) CHECK(std::abs(v) == step);
  std::size_t pos = 0;
  for (double v : s.values) pos += v > 0;
  const double n = static_cast<double>(s.values.size());
  CHECK(std::abs(static_cast<double>(pos) / n - 0.5) < 3.0 * std::sqrt(0.25 / n));
  CHECK_THROWS(sign_normal_noise(2, 2, 0.0, 1));
  CHECK(sign_normal_noise(3, 4, step, 8) == sign_normal_noise(3, 4, step, 8));
}

TEST_CASE("tLHS with m = 1 covers the whole range") {
  const double r = 0.2;
  const Matrix d = tlhs_design(1, 500, r, 4);
  CHECK(d.rows == 1);
  double lo = 1, hi = -1;
  for (double v : d.values) {
    CHECK(v >= -r);
    CHECK(v < r);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo < -0.9 * r);
  CHECK(hi > 0.9 * r);
}

TEST_CASE("tLHS m = 4, d = 1: the four entries occupy four distinct strata of width 4/255") {
  const double r = 8.0 / 255.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Matrix d = tlhs_design(4, 1, r, seed);
    std::set<long> strata;
    for (double v : d.values) {
      const long s = oracle_stratum(v, 4, r);
      // membership of [-r + s * 4/255, -r + (s + 1) * 4/255)
      CHECK(v >= -r + static_cast<double>(s) * 4.0 / 255.0 - 1e-15);
      CHECK(v < -r + static_cast<double>(s + 1) * 4.0 / 255.0 + 1e-15);
      strata.insert(s);
    }
    CHECK(strata == std::set<long>{0, 1, 2, 3});
  }
}

TEST_CASE("tLHS stratification and range property") {
  for (std::size_t m : {2u, 3u, 5u, 8u}) {
    for (std::size_t d : {1u, 10u, 257u}) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const double r = 0.05 * static_cast<double>(seed + 1);
        const Matrix x = tlhs_design(m, d, r, seed);
        for (std::size_t k = 0; k < d; ++k) {
          std::vector<std::size_t> idx;
          for (std::size_t j = 0; j < m; ++j) {
            CHECK(x(j, k) >= -r);
            CHECK(x(j, k) < r);
            idx.push_back(stratum_of(x(j, k), m, r));
          }
          std::sort(idx.begin(), idx.end());
          for (std::size_t j = 0; j < m; ++j) CHECK(idx[j] == j);
        }
      }
    }
  }
}

TEST_CASE("stratum_of edge cases") {
  CHECK(stratum_of(-0.1, 4, 0.1) == 0);
  CHECK(stratum_of(0.0, 4, 0.1) == 2);
  CHECK(stratum_of(0.1, 4, 0.1) >= 4);
  CHECK(stratum_of(-0.2, 4, 0.1) == SIZE_MAX);
}

TEST_CASE("tLHS is linear in the radius with a shared seed") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Matrix a = tlhs_design(3, 64, 1.0, seed);
    for (double c : {2.0 / 255.0, 0.5, 3.0}) {
      const Matrix b = tlhs_design(3, 64, c, seed);
      for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(std::abs(b.values[i] - c * a.values[i]) <= 4e-16 * c);
    }
  }
}

TEST_CASE("tLHS rejects bad arguments") {
  CHECK_THROWS(tlhs_design(0, 3, 0.1, 1));
  CHECK_THROWS(tlhs_design(3, 0, 0.1, 1));
  CHECK_THROWS(tlhs_design(3, 3, 0.0, 1));
}

TEST_CASE("tile_design follows block-by-copy order") {
  const Matrix design(2, 2, {1, 2, 3, 4});
  const Matrix t = tile_design(design, 3);
  CHECK(t == Matrix(6, 2, {1, 2, 1, 2, 1, 2, 3, 4, 3, 4, 3, 4}));
  const Matrix one(1, 3, {5, 6, 7});
  CHECK(tile_design(one, 4) == Matrix(4, 3, {5, 6, 7, 5, 6, 7, 5, 6, 7, 5, 6, 7}));
  const Matrix big = tlhs_design(4, 5, 0.3, 2);
  const Matrix tb = tile_design(big, 6);
  for (std::size_t j = 0; j < 4; ++j) {
    for (std::size_t i = 0; i < 6; ++i) {
      CHECK(std::equal(tb.row(j * 6 + i).begin(), tb.row(j * 6 + i).end(), big.row(j).begin()));
    }
  }
  CHECK_THROWS(tile_design(design, 0));
}

TEST_CASE("initial perturbation layouts") {
  const NoiseSpec tl{NoiseKind::TLHS, 0.1, 3, 5};
  const Matrix p = make_initial_perturbation(tl, 4, 6);
  CHECK(p == tile_design(tlhs_design(3, 6, 0.1, 5), 4));
  const NoiseSpec un{NoiseKind::Uniform, 0.1, 3, 5};
  CHECK(make_initial_perturbation(un, 4, 6) == uniform_noise(12, 6, 0.1, 5));
  const NoiseSpec sn{NoiseKind::SignNormal, 0.1, 3, 5};
  CHECK(make_initial_perturbation(sn, 4, 6) == sign_normal_noise(12, 6, 0.1, 5));
  CHECK_THROWS(make_initial_perturbation(NoiseSpec{NoiseKind::Uniform, 0.0, 1, 0}, 4, 6));
  CHECK_THROWS(make_initial_perturbation(NoiseSpec{NoiseKind::Uniform, 0.1, 0, 0}, 4, 6));
}

TEST_CASE("noise kind names round trip") {
  for (NoiseKind k : {NoiseKind::Uniform, NoiseKind::SignNormal, NoiseKind::TLHS}) {
    CHECK(parse_noise_kind(to_string(k)) == k);
  }
  CHECK_THROWS(parse_noise_kind("gaussian"));
}

TEST_CASE("min pairwise distance") {
  CHECK(min_pairwise_distance(Matrix(3, 2, {0, 0, 3, 4, 10, 10})) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(min_pairwise_distance(Matrix(2, 3, {1, 2, 3, 1, 2, 3})) == 0.0);
  CHECK_THROWS(min_pairwise_distance(Matrix(1, 3)));
  Matrix x(4, 5);
  for (std::size_t i = 0; i < x.values.size(); ++i) x.values[i] = std::sin(static_cast<double>(i));
  const double base = min_pairwise_distance(x);
  for (double c : {-2.5, 0.5, 7.0}) {
    Matrix y = x;
    for (auto& v : y.values) v *= c;
    CHECK(min_pairwise_distance(y) == doctest::Approx(std::abs(c) * base).epsilon(1e-12));
  }
}
