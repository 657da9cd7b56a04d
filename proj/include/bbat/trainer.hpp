#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bbat/attacks.hpp"
#include "bbat/batch_in_batch.hpp"
#include "bbat/dataset.hpp"
#include "bbat/model.hpp"
#include "bbat/noise.hpp"
#include "bbat/records.hpp"

namespace bbat {

struct TrainConfig {
  std::size_t epochs = 75;
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<std::size_t> decay_epochs{28, 56};
  double decay_factor = 0.1;
  std::size_t batch_size = 128;
  std::uint64_t seed = 0;

  // Batch-in-batch settings. m = 1, uniform noise and SelectKind::None is
  // the plain attack's training loop.
  std::size_t m = 1;
  NoiseKind noise = NoiseKind::Uniform;
  AttackSpec attack;
  SelectKind select = SelectKind::None;

  // Per-epoch evaluation on fixed random subsamples; 0 disables it.
  std::size_t eval_subsample = 200;
  std::size_t eval_steps = 50;
  double eval_epsilon = 0.0;  // 0 means attack.epsilon

  void validate() const;
  double effective_eval_epsilon() const { return eval_epsilon > 0.0 ? eval_epsilon : attack.epsilon; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// lr0 * decay_factor^(number of decay epochs <= epoch).
double lr_at_epoch(const TrainConfig& config, std::size_t epoch);

/// Velocity buffers mirroring the model parameters.
struct OptState {
  std::vector<std::vector<double>> weight_velocity;
  std::vector<std::vector<double>> bias_velocity;

  static OptState zeros_like(const Mlp& model);
};

/// Classical momentum with weight decay folded into the gradient:
///   g' = g + wd * theta;  v = mu * v + g';  theta -= lr * v
void sgd_step(Mlp& model, const ParamGrads& grads, OptState& state, double lr, double momentum, double weight_decay);

struct StepRecord {
  std::size_t epoch = 0;
  std::size_t step = 0;  // global step index
  double lr = 0.0;
  std::size_t n = 0;
  std::size_t m = 0;
  std::size_t selected = 0;
  std::size_t selected_clean = 0;
  bool skipped = false;
  double loss = 0.0;  // training loss on the final batch (0 when skipped)
  double step_ms = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  std::size_t last_step = 0;
  double lr = 0.0;
  std::size_t selected = 0;
  std::size_t steps = 0;
  std::size_t skipped = 0;
  double mean_step_ms = 0.0;  // over non-skipped steps
  bool evaluated = false;
  double clean_acc = 0.0;
  double adv_acc = 0.0;  // PGD-eval_steps on the test subsample
  double sr_single = 0.0;  // N-FGSM success rate on the train subsample
  double sr_multi = 0.0;   // PGD-10 success rate on the train subsample
  double conf_ce = 0.0;
};

struct TrainResult {
  Mlp best_model;
  Mlp final_model;
  std::size_t best_epoch = 0;
  double best_clean_acc = 0.0;
  double best_adv_acc = 0.0;
  std::optional<std::size_t> co_epoch;
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;

  double skip_rate(std::size_t from_epoch = 0) const;
  double mean_step_ms() const;
};

/// Invoked after every step (skipped or not) with the model as it stands.
using StepObserver = std::function<void(const StepRecord&, const Mlp&)>;

/// Seeds used by the training loop, exposed so independent reference loops
/// can reproduce its randomness.
std::uint64_t epoch_order_seed(std::uint64_t seed, std::size_t epoch);
std::uint64_t step_noise_seed(std::uint64_t seed, std::size_t epoch, std::size_t step_in_epoch);

TrainResult train_run(const TrainConfig& config, const Dataset& train, const Dataset& test, Mlp initial,
                      const StepObserver& observer = {});

/// First epoch at which multi-step adversarial accuracy (percent) drops below
/// `floor_percent` after having exceeded `peak_percent` earlier.
std::optional<std::size_t> detect_co(std::span<const double> adv_acc_percent, double floor_percent = 1.0,
                                     double peak_percent = 10.0);

std::vector<MetricsRecord> step_records(const TrainResult& result, const TrainConfig& config,
                                        const std::string& config_hash);
std::vector<MetricsRecord> epoch_records(const TrainResult& result, const std::string& config_hash);

}  // namespace bbat
