#include "bbat/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>

#include "bbat/rng.hpp"

namespace bbat {

void Dataset::validate() const {
  if (features.rows != labels.size()) throw std::invalid_argument(name + ": feature rows do not match label count");
  for (double v : features.values) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(name + ": feature value outside [0, 1]");
  }
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) throw std::invalid_argument(name + ": label out of range");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out{name, gather_rows(features, indices), {}, classes, sample_shape, normalization};
  out.labels.reserve(indices.size());
  for (auto i : indices) out.labels.push_back(labels.at(i));
  return out;
}

Dataset Dataset::head(std::size_t count) const {
  std::vector<std::size_t> idx(std::min(count, size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return subset(idx);
}

Dataset gen_gaussian_blobs(std::size_t classes, std::size_t d, std::size_t n_per_class, double spread,
                           std::uint64_t seed) {
  if (classes < 2) throw std::invalid_argument("gen_gaussian_blobs: need at least 2 classes");
  if (d < 2) throw std::invalid_argument("gen_gaussian_blobs: need d >= 2");
  if (classes > d) throw std::invalid_argument("gen_gaussian_blobs: classes must not exceed d (distinct means)");
  if (n_per_class < 1) throw std::invalid_argument("gen_gaussian_blobs: n_per_class must be positive");
  if (!(spread > 0.0) || !std::isfinite(spread)) throw std::invalid_argument("gen_gaussian_blobs: spread must be positive");

  Rng rng(seed);
  Dataset out;
  out.name = "blobs";
  out.classes = classes;
  out.sample_shape = {d};
  out.normalization = "none (generated in [0,1])";
  out.features = Matrix(classes * n_per_class, d);
  out.labels.reserve(classes * n_per_class);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t s = 0; s < n_per_class; ++s) {
      auto row = out.features.row(c * n_per_class + s);
      for (std::size_t k = 0; k < d; ++k) {
        const double mean = (k % classes == c) ? 0.8 : 0.2;
        row[k] = std::clamp(mean + spread * rng.normal(), 0.0, 1.0);
      }
      out.labels.push_back(static_cast<int>(c));
    }
  }
  out.validate();
  return out;
}

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

struct IdxFile {
  std::vector<std::size_t> dims;
  std::vector<std::uint8_t> payload;
};

IdxFile read_idx(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IdxError(IdxError::Kind::Io, "cannot open IDX file: " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  if (bytes.size() < 4) throw IdxError(IdxError::Kind::Truncated, "IDX file truncated in header: " + path.string());
  if (bytes[0] != 0 || bytes[1] != 0) throw IdxError(IdxError::Kind::BadMagic, "bad IDX magic in " + path.string());
  if (bytes[2] != kUnsignedByte) {
    throw IdxError(IdxError::Kind::Unsupported, "only unsigned-byte IDX data is supported: " + path.string());
  }
  const std::size_t ndims = bytes[3];
  if (ndims == 0) throw IdxError(IdxError::Kind::BadMagic, "IDX file declares zero dimensions: " + path.string());
  const std::size_t header = 4 + 4 * ndims;
  if (bytes.size() < header) throw IdxError(IdxError::Kind::Truncated, "IDX file truncated in dims: " + path.string());
  IdxFile out;
  std::size_t count = 1;
  for (std::size_t i = 0; i < ndims; ++i) {
    const std::size_t o = 4 + 4 * i;
    const std::size_t dim = (std::size_t{bytes[o]} << 24) | (std::size_t{bytes[o + 1]} << 16) |
                            (std::size_t{bytes[o + 2]} << 8) | std::size_t{bytes[o + 3]};
    out.dims.push_back(dim);
    count *= dim;
  }
  if (bytes.size() < header + count) {
    throw IdxError(IdxError::Kind::Truncated, "IDX file truncated: expected " + std::to_string(count) +
                                                  " data bytes in " + path.string());
  }
  out.payload.assign(bytes.begin() + static_cast<std::ptrdiff_t>(header),
                     bytes.begin() + static_cast<std::ptrdiff_t>(header + count));
  return out;
}

void write_idx(const std::filesystem::path& path, const std::vector<std::size_t>& dims,
               const std::vector<std::uint8_t>& payload) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IdxError(IdxError::Kind::Io, "cannot open IDX file for writing: " + path.string());
  os.put(0);
  os.put(0);
  os.put(static_cast<char>(kUnsignedByte));
  os.put(static_cast<char>(dims.size()));
  for (auto d : dims) {
    for (int shift = 24; shift >= 0; shift -= 8) os.put(static_cast<char>((d >> shift) & 0xffu));
  }
  os.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
  if (!os) throw IdxError(IdxError::Kind::Io, "failed writing IDX file: " + path.string());
}

}  // namespace

Dataset load_idx_dataset(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
  const IdxFile images = read_idx(images_path);
  const IdxFile labels = read_idx(labels_path);
  if (labels.dims.size() != 1) {
    throw IdxError(IdxError::Kind::Unsupported, "label file must be one-dimensional: " + labels_path.string());
  }
  const std::size_t n = images.dims[0];
  if (labels.dims[0] != n) {
    throw IdxError(IdxError::Kind::CountMismatch, "label/image count mismatch: " + std::to_string(n) + " images, " +
                                                      std::to_string(labels.dims[0]) + " labels");
  }
  Dataset out;
  out.name = images_path.filename().string();
  out.sample_shape.assign(images.dims.begin() + 1, images.dims.end());
  if (out.sample_shape.empty()) out.sample_shape = {1};
  const std::size_t d = n == 0 ? 0 : images.payload.size() / n;
  out.features = Matrix(n, d);
  for (std::size_t i = 0; i < images.payload.size(); ++i) out.features.values[i] = images.payload[i] / 255.0;
  out.labels.assign(labels.payload.begin(), labels.payload.end());
  out.classes = labels.payload.empty() ? 0 : std::size_t{*std::ranges::max_element(labels.payload)} + 1;
  out.normalization = "scale 1/255";
  out.validate();
  return out;
}

void save_idx_images(const std::filesystem::path& path, const Dataset& data) {
  std::vector<std::size_t> dims{data.size()};
  dims.insert(dims.end(), data.sample_shape.begin(), data.sample_shape.end());
  std::vector<std::uint8_t> payload(data.features.values.size());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    payload[i] = static_cast<std::uint8_t>(std::lround(std::clamp(data.features.values[i], 0.0, 1.0) * 255.0));
  }
  write_idx(path, dims, payload);
}

void save_idx_labels(const std::filesystem::path& path, const Labels& labels) {
  std::vector<std::uint8_t> payload;
  payload.reserve(labels.size());
  for (int y : labels) {
    if (y < 0 || y > 255) throw IdxError(IdxError::Kind::Unsupported, "label does not fit in an unsigned byte");
    payload.push_back(static_cast<std::uint8_t>(y));
  }
  write_idx(path, {labels.size()}, payload);
}

std::vector<std::vector<std::size_t>> batch_iter(std::size_t n, std::size_t batch_size, std::uint64_t epoch_seed) {
  if (batch_size < 1) throw std::invalid_argument("batch_iter: batch size must be >= 1");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(epoch_seed);
  rng.shuffle(order.begin(), order.end());
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace bbat
