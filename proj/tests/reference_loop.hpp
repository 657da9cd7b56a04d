#pragma once

// Hand-written plain adversarial training loop (N-FGSM or PGD-n, no
// duplication, no selection). Shares only the data shuffling, the noise
// generator and the seed derivation with the library, so it can be compared
// step for step against the batch-in-batch trainer in baseline mode.

#include <cmath>
#include <vector>

#include "bbat/dataset.hpp"
#include "bbat/model.hpp"
#include "bbat/noise.hpp"
#include "bbat/trainer.hpp"

namespace testing {

struct PlainSettings {
  bool single_step = true;  // N-FGSM, else PGD
  double epsilon = 8.0 / 255.0;
  double k = 2.0;
  std::size_t pgd_steps = 10;
  std::size_t epochs = 3;
  std::size_t batch_size = 32;
  double lr0 = 0.01;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::vector<std::size_t> decay_epochs{28, 56};
  std::uint64_t seed = 0;
};

inline std::vector<double> flatten(const bbat::Mlp& m) {
  std::vector<double> out;
  for (std::size_t l = 0; l < m.layers(); ++l) {
    out.insert(out.end(), m.weight(l).data().begin(), m.weight(l).data().end());
    out.insert(out.end(), m.bias(l).data().begin(), m.bias(l).data().end());
  }
  return out;
}

/// Parameter vector after every step.
inline std::vector<std::vector<double>> plain_training_trajectory(const PlainSettings& s, const bbat::Dataset& data,
                                                                  bbat::Mlp model) {
  auto sgn = [](double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); };
  std::vector<std::vector<double>> vel_w, vel_b;
  for (std::size_t l = 0; l < model.layers(); ++l) {
    vel_w.emplace_back(model.weight(l).numel(), 0.0);
    vel_b.emplace_back(model.bias(l).numel(), 0.0);
  }
  std::vector<std::vector<double>> trajectory;
  for (std::size_t epoch = 0; epoch < s.epochs; ++epoch) {
    double lr = s.lr0;
    for (auto d : s.decay_epochs) {
      if (epoch >= d) lr *= 0.1;
    }
    const auto batches = bbat::batch_iter(data.size(), s.batch_size, bbat::epoch_order_seed(s.seed, epoch));
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const bbat::Dataset batch = data.subset(batches[b]);
      const bbat::Matrix& x = batch.features;
      const double radius = s.single_step ? s.k * s.epsilon : s.epsilon;
      bbat::Matrix delta = bbat::uniform_noise(x.rows, x.cols, radius, bbat::step_noise_seed(s.seed, epoch, b));
      auto perturbed = [&] {
        bbat::Matrix p = x;
        for (std::size_t i = 0; i < p.values.size(); ++i) p.values[i] = x.values[i] + delta.values[i];
        return p;
      };
      const std::size_t iterations = s.single_step ? 1 : s.pgd_steps;
      const double step = s.single_step ? s.epsilon : s.epsilon / 4.0;
      for (std::size_t t = 0; t < iterations; ++t) {
        const bbat::Matrix g = model.loss_and_input_grad(perturbed(), batch.labels).grad;
        for (std::size_t i = 0; i < delta.values.size(); ++i) {
          double v = delta.values[i] + step * sgn(g.values[i]);
          if (!s.single_step) v = std::min(std::max(v, -s.epsilon), s.epsilon);
          delta.values[i] = v;
        }
      }
      const bbat::ParamGrads pg = model.loss_and_param_grads(perturbed(), batch.labels);
      std::vector<bbat::Tensor> w, bias;
      for (std::size_t l = 0; l < model.layers(); ++l) {
        auto update = [&](const bbat::Tensor& p, const bbat::Tensor& g, std::vector<double>& v) {
          std::vector<double> next(p.numel());
          for (std::size_t i = 0; i < next.size(); ++i) {
            v[i] = s.momentum * v[i] + (g.data()[i] + s.weight_decay * p.data()[i]);
            next[i] = p.data()[i] - lr * v[i];
          }
          return bbat::Tensor(p.shape(), next, true);
        };
        w.push_back(update(model.weight(l), pg.weights[l], vel_w[l]));
        bias.push_back(update(model.bias(l), pg.biases[l], vel_b[l]));
      }
      model.set_parameters(w, bias);
      trajectory.push_back(flatten(model));
    }
  }
  return trajectory;
}

/// Baseline-mode TrainConfig matching `s`.
inline bbat::TrainConfig baseline_config(const PlainSettings& s) {
  bbat::TrainConfig c;
  c.epochs = s.epochs;
  c.batch_size = s.batch_size;
  c.lr0 = s.lr0;
  c.momentum = s.momentum;
  c.weight_decay = s.weight_decay;
  c.decay_epochs = s.decay_epochs;
  c.seed = s.seed;
  c.m = 1;
  c.noise = bbat::NoiseKind::Uniform;
  c.select = bbat::SelectKind::None;
  c.attack.kind = s.single_step ? bbat::AttackKind::NFGSM : bbat::AttackKind::PGD;
  c.attack.epsilon = s.epsilon;
  c.attack.k = s.k;
  c.attack.steps = s.pgd_steps;
  c.eval_subsample = 0;
  return c;
}

}  // namespace testing
