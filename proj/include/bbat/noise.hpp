#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>

#include "bbat/matrix.hpp"

namespace bbat {

enum class NoiseKind { Uniform, SignNormal, TLHS };

std::string_view to_string(NoiseKind kind);
NoiseKind parse_noise_kind(std::string_view name);

/// Initial-perturbation generator for the duplicated batch.
struct NoiseSpec {
  NoiseKind kind = NoiseKind::Uniform;
  double radius = 0.0;  // epsilon for PGD, k * epsilon for N-FGSM
  std::size_t m = 1;    // number of copies designed jointly
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const NoiseSpec&, const NoiseSpec&) = default;
};

/// i.i.d. uniform on [-radius, radius).
Matrix uniform_noise(std::size_t rows, std::size_t d, double radius, std::uint64_t seed);

/// step * sign(N(0, 1)) per entry; entries are exactly +-step.
Matrix sign_normal_noise(std::size_t rows, std::size_t d, double step, std::uint64_t seed);

/// Tuned Latin hypercube design (m x d). Every column holds one entry from
/// each of the m equal-width strata of [-radius, radius), in random order,
/// jittered uniformly inside its stratum.
Matrix tlhs_design(std::size_t m, std::size_t d, double radius, std::uint64_t seed);

/// Stratum index of `value` among m strata of [-radius, radius). Values at or
/// above +radius map to m or more; values below -radius map to SIZE_MAX.
std::size_t stratum_of(double value, std::size_t m, double radius);

/// Expands an m x d design to the (m*n) x d duplicated-batch layout: row
/// j*n + i holds design row j, so duplicate block j shares design row j.
Matrix tile_design(const Matrix& design, std::size_t n);

/// Initial perturbation for a duplicated batch of n originals, laid out like
/// the duplicated batch (block by copy). TLHS tiles one joint design; the
/// other kinds draw every row independently.
Matrix make_initial_perturbation(const NoiseSpec& spec, std::size_t n, std::size_t d);

/// Minimum pairwise euclidean distance among the rows (k >= 2).
double min_pairwise_distance(const Matrix& samples);

}  // namespace bbat
