#include "bbat/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "bbat/metrics.hpp"
#include "bbat/rng.hpp"

namespace bbat {

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (!(lr0 > 0.0)) throw std::invalid_argument("train.lr0 must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("train.momentum must be in [0, 1)");
  if (!(weight_decay >= 0.0)) throw std::invalid_argument("train.weight_decay must be >= 0");
  if (!(decay_factor > 0.0)) throw std::invalid_argument("train.decay_factor must be positive");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (m < 1) throw std::invalid_argument("bb.m must be >= 1");
  attack.validate();
  if (eval_subsample > 0 && eval_steps < 1) throw std::invalid_argument("eval.steps must be >= 1");
  if (eval_epsilon < 0.0) throw std::invalid_argument("eval.epsilon must be positive");
}

double lr_at_epoch(const TrainConfig& config, std::size_t epoch) {
  if (epoch >= config.epochs) {
    throw std::out_of_range("lr_at_epoch: epoch " + std::to_string(epoch) + " outside [0, " +
                            std::to_string(config.epochs) + ")");
  }
  double lr = config.lr0;
  for (auto d : config.decay_epochs) {
    if (d <= epoch) lr *= config.decay_factor;
  }
  return lr;
}

OptState OptState::zeros_like(const Mlp& model) {
  OptState s;
  for (std::size_t l = 0; l < model.layers(); ++l) {
    s.weight_velocity.emplace_back(model.weight(l).numel(), 0.0);
    s.bias_velocity.emplace_back(model.bias(l).numel(), 0.0);
  }
  return s;
}

namespace {

Tensor momentum_update(const Tensor& param, const Tensor& grad, std::vector<double>& velocity, double lr,
                       double momentum, double weight_decay) {
  if (grad.shape() != param.shape() || velocity.size() != param.numel()) {
    throw std::invalid_argument("sgd_step: gradient " + to_string(grad.shape()) + " does not match parameter " +
                                to_string(param.shape()));
  }
  std::vector<double> next(param.numel());
  for (std::size_t i = 0; i < next.size(); ++i) {
    const double g = grad.data()[i] + weight_decay * param.data()[i];
    velocity[i] = momentum * velocity[i] + g;
    next[i] = param.data()[i] - lr * velocity[i];
  }
  return Tensor(param.shape(), std::move(next), true);
}

}  // namespace

void sgd_step(Mlp& model, const ParamGrads& grads, OptState& state, double lr, double momentum, double weight_decay) {
  const std::size_t layers = model.layers();
  if (grads.weights.size() != layers || grads.biases.size() != layers || state.weight_velocity.size() != layers ||
      state.bias_velocity.size() != layers) {
    throw std::invalid_argument("sgd_step: layer count mismatch between model, gradients and optimizer state");
  }
  std::vector<Tensor> weights, biases;
  for (std::size_t l = 0; l < layers; ++l) {
    weights.push_back(momentum_update(model.weight(l), grads.weights[l], state.weight_velocity[l], lr, momentum,
                                      weight_decay));
    biases.push_back(
        momentum_update(model.bias(l), grads.biases[l], state.bias_velocity[l], lr, momentum, weight_decay));
  }
  model.set_parameters(std::move(weights), std::move(biases));
}

std::uint64_t epoch_order_seed(std::uint64_t seed, std::size_t epoch) { return derive_seed({seed, 1, epoch}); }

std::uint64_t step_noise_seed(std::uint64_t seed, std::size_t epoch, std::size_t step_in_epoch) {
  return derive_seed({seed, 2, epoch, step_in_epoch});
}

double TrainResult::skip_rate(std::size_t from_epoch) const {
  std::size_t total = 0, skipped = 0;
  for (const auto& s : steps) {
    if (s.epoch < from_epoch) continue;
    ++total;
    skipped += s.skipped;
  }
  return total == 0 ? 0.0 : static_cast<double>(skipped) / static_cast<double>(total);
}

double TrainResult::mean_step_ms() const {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& s : steps) {
    if (s.skipped) continue;
    sum += s.step_ms;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

namespace {

Dataset random_subsample(const Dataset& data, std::size_t count, std::uint64_t seed) {
  auto order = batch_iter(data.size(), std::max<std::size_t>(1, std::min(count, data.size())), seed);
  return data.subset(order.front());
}

void evaluate_epoch(const TrainConfig& config, const Mlp& model, const Dataset& train_sub, const Dataset& test_sub,
                    EpochRecord& rec) {
  const double eps = config.effective_eval_epsilon();
  const std::uint64_t base = derive_seed({config.seed, 3, rec.epoch});
  rec.evaluated = true;
  rec.clean_acc = accuracy_clean(model, test_sub);
  rec.adv_acc = accuracy_adversarial(model, test_sub, eps, {.steps = config.eval_steps, .seed = mix64(base ^ 1)});
  AttackSpec single{AttackKind::NFGSM, eps, config.attack.k};
  AttackSpec multi{AttackKind::PGD, eps, config.attack.k, eps / 4.0, 10};
  rec.sr_single = attack_success_rate(model, train_sub, single, mix64(base ^ 2));
  rec.sr_multi = attack_success_rate(model, train_sub, multi, mix64(base ^ 3));
  rec.conf_ce = confidence_uniform_ce(model, test_sub);
}

}  // namespace

TrainResult train_run(const TrainConfig& config, const Dataset& train, const Dataset& test, Mlp initial,
                      const StepObserver& observer) {
  config.validate();
  if (train.size() == 0) throw std::invalid_argument("train_run: empty training set");
  if (train.dim() != initial.input_dim()) {
    throw std::invalid_argument("train_run: training features have width " + std::to_string(train.dim()) +
                                " but the model expects " + std::to_string(initial.input_dim()));
  }
  if (train.classes > initial.num_classes()) {
    throw std::invalid_argument("train_run: dataset has more classes than the model outputs");
  }
  const bool evaluate = config.eval_subsample > 0 && test.size() > 0;
  if (test.size() > 0 && test.dim() != initial.input_dim()) {
    throw std::invalid_argument("train_run: test features do not match the model input dim");
  }

  Dataset train_sub, test_sub;
  if (evaluate) {
    train_sub = random_subsample(train, config.eval_subsample, derive_seed({config.seed, 4}));
    test_sub = random_subsample(test, config.eval_subsample, derive_seed({config.seed, 5}));
  }

  Mlp model = std::move(initial);
  OptState state = OptState::zeros_like(model);
  TrainResult result{model, model, 0, 0.0, 0.0, std::nullopt, {}, {}};
  std::vector<double> adv_history;
  bool have_best = false;
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = lr_at_epoch(config, epoch);
    EpochRecord erec;
    erec.epoch = epoch;
    erec.lr = lr;
    double ms_sum = 0.0;
    const auto batches = batch_iter(train.size(), config.batch_size, epoch_order_seed(config.seed, epoch));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto start = std::chrono::steady_clock::now();
      const Dataset batch = train.subset(batches[b]);
      const NoiseSpec noise{config.noise, config.attack.init_radius(), config.m, step_noise_seed(config.seed, epoch, b)};
      const BbOutput bb =
          bb_generate(batch.features, batch.labels, model, config.m, noise, config.attack, config.select);

      StepRecord srec;
      srec.epoch = epoch;
      srec.step = global_step++;
      srec.lr = lr;
      srec.n = batch.size();
      srec.m = config.m;
      srec.selected = bb.batch.size();
      srec.selected_clean = bb.batch.clean_count();
      srec.skipped = bb.batch.empty();
      if (!srec.skipped) {
        const ParamGrads grads = model.loss_and_param_grads(bb.batch.x, bb.batch.y);
        sgd_step(model, grads, state, lr, config.momentum, config.weight_decay);
        srec.loss = grads.loss;
      }
      srec.step_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      if (!srec.skipped) ms_sum += srec.step_ms;
      erec.selected += srec.selected;
      erec.skipped += srec.skipped;
      ++erec.steps;
      erec.last_step = srec.step;
      result.steps.push_back(srec);
      if (observer) observer(srec, model);
    }
    const std::size_t ran = erec.steps - erec.skipped;
    erec.mean_step_ms = ran == 0 ? 0.0 : ms_sum / static_cast<double>(ran);

    if (evaluate) {
      evaluate_epoch(config, model, train_sub, test_sub, erec);
      adv_history.push_back(100.0 * erec.adv_acc);
      if (!have_best || erec.adv_acc > result.best_adv_acc) {
        have_best = true;
        result.best_model = model;
        result.best_epoch = epoch;
        result.best_adv_acc = erec.adv_acc;
        result.best_clean_acc = erec.clean_acc;
      }
    }
    result.epochs.push_back(erec);
  }

  result.final_model = model;
  if (!have_best) {
    result.best_model = model;
    result.best_epoch = config.epochs - 1;
  }
  if (!adv_history.empty()) result.co_epoch = detect_co(adv_history);
  return result;
}

std::optional<std::size_t> detect_co(std::span<const double> adv_acc_percent, double floor_percent,
                                     double peak_percent) {
  bool learned = false;
  for (std::size_t e = 0; e < adv_acc_percent.size(); ++e) {
    if (learned && adv_acc_percent[e] < floor_percent) return e;
    if (adv_acc_percent[e] > peak_percent) learned = true;
  }
  return std::nullopt;
}

std::vector<MetricsRecord> step_records(const TrainResult& result, const TrainConfig& config,
                                        const std::string& config_hash) {
  std::vector<MetricsRecord> out;
  for (const auto& s : result.steps) {
    MetricsRecord r{config_hash, static_cast<std::int64_t>(s.epoch), static_cast<std::int64_t>(s.step), {}};
    r.set("strategy", std::string(to_string(config.select)))
        .set("n", static_cast<std::int64_t>(s.n))
        .set("m", static_cast<std::int64_t>(s.m))
        .set("selected_count", static_cast<std::int64_t>(s.selected))
        .set("selected_clean_count", static_cast<std::int64_t>(s.selected_clean))
        .set("skipped", static_cast<std::int64_t>(s.skipped))
        .set("lr", s.lr)
        .set("loss", s.loss)
        .set("step_ms", s.step_ms);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<MetricsRecord> epoch_records(const TrainResult& result, const std::string& config_hash) {
  std::vector<MetricsRecord> out;
  for (const auto& e : result.epochs) {
    MetricsRecord r{config_hash, static_cast<std::int64_t>(e.epoch), static_cast<std::int64_t>(e.last_step), {}};
    const double nan = std::nan("");
    r.set("lr", e.lr)
        .set("batch_selected", static_cast<std::int64_t>(e.selected))
        .set("skipped_steps", static_cast<std::int64_t>(e.skipped))
        .set("clean_acc", e.evaluated ? e.clean_acc : nan)
        .set("adv_acc_pgd50", e.evaluated ? e.adv_acc : nan)
        .set("sr_single", e.evaluated ? e.sr_single : nan)
        .set("sr_multi", e.evaluated ? e.sr_multi : nan)
        .set("sr_gap", e.evaluated ? e.sr_multi - e.sr_single : nan)
        .set("conf_ce", e.evaluated ? e.conf_ce : nan)
        .set("step_ms", e.mean_step_ms);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace bbat
