#include "bbat/noise.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "bbat/rng.hpp"

namespace bbat {

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::Uniform: return "uniform";
    case NoiseKind::SignNormal: return "sign_normal";
    case NoiseKind::TLHS: return "tlhs";
  }
  return "?";
}

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "uniform") return NoiseKind::Uniform;
  if (name == "sign_normal") return NoiseKind::SignNormal;
  if (name == "tlhs") return NoiseKind::TLHS;
  throw std::invalid_argument("unknown noise kind '" + std::string(name) + "' (expected uniform, sign_normal, tlhs)");
}

void NoiseSpec::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw std::invalid_argument("noise radius must be positive");
  if (m < 1) throw std::invalid_argument("noise duplication count m must be >= 1");
}

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument(std::string(what) + " must be positive");
}

}  // namespace

Matrix uniform_noise(std::size_t rows, std::size_t d, double radius, std::uint64_t seed) {
  require_positive(radius, "uniform_noise: radius");
  Rng rng(seed);
  Matrix out(rows, d);
  for (auto& v : out.values) v = rng.uniform(-radius, radius);
  return out;
}

Matrix sign_normal_noise(std::size_t rows, std::size_t d, double step, std::uint64_t seed) {
  require_positive(step, "sign_normal_noise: step");
  Rng rng(seed);
  Matrix out(rows, d);
  for (auto& v : out.values) {
    double z = rng.normal();
    while (z == 0.0) z = rng.normal();
    v = z > 0.0 ? step : -step;
  }
  return out;
}

Matrix tlhs_design(std::size_t m, std::size_t d, double radius, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("tlhs_design: m must be >= 1");
  if (d < 1) throw std::invalid_argument("tlhs_design: d must be >= 1");
  require_positive(radius, "tlhs_design: radius");
  Rng rng(seed);
  const double width = 1.0 / static_cast<double>(m);
  std::vector<std::size_t> stratum(m * d);
  std::vector<std::size_t> perm(m);
  for (std::size_t col = 0; col < d; ++col) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm.begin(), perm.end());
    for (std::size_t r = 0; r < m; ++r) stratum[r * d + col] = perm[r];
  }
  // Entries are kept a few ulps away from stratum boundaries, so any
  // reasonable evaluation of floor(m (v + r) / 2r) recovers the stratum.
  const double margin = 16.0 * std::numeric_limits<double>::epsilon() * radius;
  const double cell = 2.0 * radius / static_cast<double>(m);
  Matrix out(m, d);
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double s = static_cast<double>(stratum[i]);
    const double u = s * width + rng.uniform() * width;
    const double lo = -radius + s * cell;
    const double hi = -radius + (s + 1.0) * cell;
    out.values[i] = std::clamp(radius * (2.0 * u - 1.0), lo + margin, hi - margin);
  }
  return out;
}

std::size_t stratum_of(double value, std::size_t m, double radius) {
  const double pos = static_cast<double>(m) * (value + radius) / (2.0 * radius);
  const double f = std::floor(pos);
  if (f < 0.0) return std::numeric_limits<std::size_t>::max();
  return static_cast<std::size_t>(f);
}

Matrix tile_design(const Matrix& design, std::size_t n) {
  if (design.rows == 0 || design.cols == 0) throw std::invalid_argument("tile_design: empty design");
  if (n == 0) throw std::invalid_argument("tile_design: batch size must be positive");
  Matrix out(design.rows * n, design.cols);
  for (std::size_t j = 0; j < design.rows; ++j) {
    const auto src = design.row(j);
    for (std::size_t i = 0; i < n; ++i) std::ranges::copy(src, out.row(j * n + i).begin());
  }
  return out;
}

Matrix make_initial_perturbation(const NoiseSpec& spec, std::size_t n, std::size_t d) {
  spec.validate();
  switch (spec.kind) {
    case NoiseKind::Uniform: return uniform_noise(spec.m * n, d, spec.radius, spec.seed);
    case NoiseKind::SignNormal: return sign_normal_noise(spec.m * n, d, spec.radius, spec.seed);
    case NoiseKind::TLHS: return tile_design(tlhs_design(spec.m, d, spec.radius, spec.seed), n);
  }
  throw std::logic_error("unreachable noise kind");
}

double min_pairwise_distance(const Matrix& samples) {
  if (samples.rows < 2) throw std::invalid_argument("min_pairwise_distance: need at least two samples");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a < samples.rows; ++a) {
    for (std::size_t b = a + 1; b < samples.rows; ++b) {
      double s = 0.0;
      for (std::size_t k = 0; k < samples.cols; ++k) {
        const double diff = samples(a, k) - samples(b, k);
        s += diff * diff;
      }
      best = std::min(best, s);
    }
  }
  return std::sqrt(best);
}

}  // namespace bbat
