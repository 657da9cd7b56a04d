#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbat/matrix.hpp"

namespace bbat {

/// Features in [0, 1]^d, labels in [0, classes).
struct Dataset {
  std::string name;
  Matrix features;
  Labels labels;
  std::size_t classes = 0;
  std::vector<std::size_t> sample_shape;  // e.g. {28, 28} for IDX images, {d} otherwise
  std::string normalization;

  std::size_t size() const { return labels.size(); }
  std::size_t dim() const { return features.cols; }

  /// Throws if any feature leaves [0, 1] or any label leaves [0, classes).
  void validate() const;

  Dataset subset(std::span<const std::size_t> indices) const;
  /// First min(count, size()) samples.
  Dataset head(std::size_t count) const;
};

/// One isotropic Gaussian per class around a mean with coordinates in
/// {0.2, 0.8} (coordinate k is 0.8 for class k mod classes), clamped to [0, 1].
/// Samples are class-major.
Dataset gen_gaussian_blobs(std::size_t classes, std::size_t d, std::size_t n_per_class, double spread,
                           std::uint64_t seed);

class IdxError : public std::runtime_error {
 public:
  enum class Kind { Io, BadMagic, Truncated, CountMismatch, Unsupported };
  IdxError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// IDX (MNIST container) loader for unsigned-byte images and labels. Pixels
/// are scaled by 1/255 and each image is flattened row-major.
Dataset load_idx_dataset(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

/// Writes features back as unsigned bytes (round(255 * v)) using sample_shape.
void save_idx_images(const std::filesystem::path& path, const Dataset& data);
void save_idx_labels(const std::filesystem::path& path, const Labels& labels);

/// Indices of each batch for one epoch: a seeded Fisher-Yates permutation cut
/// into consecutive chunks; the final partial batch is kept.
std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed);

}  // namespace bbat
