#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "bbat/dataset.hpp"
#include "bbat/trainer.hpp"

namespace bbat {

/// Raised for any problem with a run configuration. what() names the key path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key_path, const std::string& message)
      : std::runtime_error(key_path.empty() ? message : "config key '" + key_path + "': " + message),
        key_path_(std::move(key_path)) {}
  const std::string& key_path() const { return key_path_; }

 private:
  std::string key_path_;
};

struct DatasetConfig {
  std::string kind = "blobs";  // "blobs" or "idx"
  std::size_t classes = 3;
  std::size_t dim = 20;
  std::size_t per_class = 300;
  std::size_t test_per_class = 100;
  double spread = 0.15;
  std::uint64_t seed = 0;  // blobs only; independent of the run seed
  std::string train_images;
  std::string train_labels;
  std::string test_images;
  std::string test_labels;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct EvalConfig {
  std::vector<double> epsilons;  // empty means {attack.epsilon}
  std::size_t steps = 50;
  std::size_t subsample = 200;  // 0 evaluates the whole test set (eval) / disables per-epoch eval (train)
  std::string checkpoint;       // empty means <output_dir>/model.ckpt

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct LandscapeConfig {
  std::size_t sample_index = 0;
  double half_width = 0.1;
  std::size_t resolution = 21;

  friend bool operator==(const LandscapeConfig&, const LandscapeConfig&) = default;
};

struct DiversityConfig {
  std::size_t reps = 4;
  std::size_t subsample = 200;

  friend bool operator==(const DiversityConfig&, const DiversityConfig&) = default;
};

struct DminConfig {
  std::size_t m = 3;
  std::size_t dim = 3072;
  std::size_t seeds = 1000;
  std::vector<double> epsilons{8.0 / 255.0};

  friend bool operator==(const DminConfig&, const DminConfig&) = default;
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "runs/default";
  DatasetConfig dataset;
  std::vector<std::size_t> hidden{64, 64};
  TrainConfig train;  // seed and eval_* are mirrored from the fields above by sync()
  EvalConfig eval;
  LandscapeConfig landscape;
  DiversityConfig diversity;
  DminConfig dmin;

  /// Throws ConfigError with the offending key path.
  void validate() const;
  /// Copies seed and eval settings into train.
  void sync();
  std::vector<double> eval_epsilons() const;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Strict JSON parse: unknown keys, wrong types and constraint violations are
/// ConfigErrors naming the key path. Missing keys take their defaults.
RunConfig parse_run_config_text(const std::string& text);
RunConfig parse_run_config(const std::filesystem::path& path);

/// Every field, defaults included, pretty-printed.
std::string serialize_run_config(const RunConfig& config);

/// FNV-1a 64 over the compact serialization with output_dir removed, as 16 hex digits.
std::string config_hash(const RunConfig& config);

/// Loads the train and test sets described by the dataset section.
struct DataSplit {
  Dataset train;
  Dataset test;
};
DataSplit load_data(const RunConfig& config);

}  // namespace bbat
