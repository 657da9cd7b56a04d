#include "bbat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "bbat/rng.hpp"

namespace bbat {

namespace {

void require_nonempty(const Dataset& data, const char* op) {
  if (data.size() == 0) throw std::invalid_argument(std::string(op) + ": empty dataset");
}

double fraction_correct(const Classifier& model, const Matrix& x, const Labels& y) {
  const Labels pred = model.classify(x);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < y.size(); ++i) correct += pred[i] == y[i];
  return static_cast<double>(correct) / static_cast<double>(y.size());
}

double population_std(std::span<const double> v) {
  if (std::ranges::all_of(v, [&](double x) { return x == v.front(); })) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size()));
}

Matrix attacked_inputs(const Classifier& model, const Dataset& data, const AttackSpec& attack, std::uint64_t seed,
                       NoiseKind init) {
  const NoiseSpec noise{init, attack.init_radius(), 1, seed};
  const Matrix delta0 = make_initial_perturbation(noise, data.size(), data.dim());
  return run_attack(model, attack, data.features, delta0, data.labels).adversarial;
}

}  // namespace

double accuracy_clean(const Classifier& model, const Dataset& data) {
  require_nonempty(data, "accuracy_clean");
  return fraction_correct(model, data.features, data.labels);
}

double accuracy_adversarial(const Classifier& model, const Dataset& data, double epsilon,
                            const AdvEvalOptions& options) {
  require_nonempty(data, "accuracy_adversarial");
  if (!(epsilon > 0.0)) throw std::invalid_argument("accuracy_adversarial: epsilon must be positive");
  const double alpha = options.alpha > 0.0 ? options.alpha : epsilon / 4.0;
  const Matrix delta0 = options.zero_init ? Matrix(data.size(), data.dim(), 0.0)
                                          : uniform_noise(data.size(), data.dim(), epsilon, options.seed);
  const AttackOutput adv = pgd_delta(model, data.features, delta0, data.labels, epsilon, alpha, options.steps,
                                     options.clamp_input_domain);
  return fraction_correct(model, adv.adversarial, data.labels);
}

double accuracy_under_attack(const Classifier& model, const Dataset& data, const AttackSpec& attack,
                             std::uint64_t seed, NoiseKind init) {
  require_nonempty(data, "accuracy_under_attack");
  return fraction_correct(model, attacked_inputs(model, data, attack, seed, init), data.labels);
}

double attack_success_rate(const Classifier& model, const Dataset& data, const AttackSpec& attack, std::uint64_t seed,
                           NoiseKind init) {
  require_nonempty(data, "attack_success_rate");
  const Labels pred = model.classify(attacked_inputs(model, data, attack, seed, init));
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) wrong += pred[i] != data.labels[i];
  return static_cast<double>(wrong) / static_cast<double>(pred.size());
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows, logits.cols);
  for (std::size_t i = 0; i < logits.rows; ++i) {
    const auto z = logits.row(i);
    const double zmax = *std::ranges::max_element(z);
    double denom = 0.0;
    for (std::size_t j = 0; j < z.size(); ++j) denom += p(i, j) = std::exp(z[j] - zmax);
    for (std::size_t j = 0; j < z.size(); ++j) p(i, j) /= denom;
  }
  return p;
}

double uniform_ce_of_probabilities(const Matrix& probabilities) {
  if (probabilities.rows == 0 || probabilities.cols == 0) {
    throw std::invalid_argument("uniform_ce_of_probabilities: no predictions");
  }
  const double c = static_cast<double>(probabilities.cols);
  double total = 0.0;
  for (std::size_t i = 0; i < probabilities.rows; ++i) {
    double row = 0.0;
    for (double p : probabilities.row(i)) row -= std::log(std::max(p, kProbabilityFloor));
    total += row / c;
  }
  return total / static_cast<double>(probabilities.rows);
}

double confidence_uniform_ce(const Classifier& model, const Dataset& data) {
  require_nonempty(data, "confidence_uniform_ce");
  return uniform_ce_of_probabilities(softmax_rows(model.logits(data.features)));
}

Landscape loss_landscape_grid(const Classifier& model, std::span<const double> x, int y, double half_width,
                              std::size_t resolution, std::uint64_t seed) {
  if (x.size() != model.input_dim()) throw std::invalid_argument("loss_landscape_grid: sample width mismatch");
  if (resolution < 2) throw std::invalid_argument("loss_landscape_grid: resolution must be >= 2");
  if (!(half_width > 0.0)) throw std::invalid_argument("loss_landscape_grid: half width must be positive");
  const std::size_t d = x.size();
  const Matrix point(1, d, std::vector<double>(x.begin(), x.end()));
  const Labels label{y};

  Landscape out;
  const LossGrad lg = model.loss_and_input_grad(point, label);
  out.r1.resize(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double g = lg.grad.values[k];
    out.r1[k] = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
  }
  out.degenerate = std::ranges::all_of(out.r1, [](double v) { return v == 0.0; });
  Rng rng(seed);
  out.r2.resize(d);
  for (auto& v : out.r2) v = rng.below(2) ? 1.0 : -1.0;

  const double last = static_cast<double>(resolution - 1);
  for (std::size_t k = 0; k < resolution; ++k) {
    out.t.push_back(half_width * (2.0 * static_cast<double>(k) - last) / last);
  }
  Matrix probes(resolution * resolution, d);
  Labels probe_labels(probes.rows, y);
  for (std::size_t a = 0; a < resolution; ++a) {
    for (std::size_t b = 0; b < resolution; ++b) {
      auto row = probes.row(a * resolution + b);
      for (std::size_t k = 0; k < d; ++k) row[k] = x[k] + out.t[a] * out.r1[k] + out.t[b] * out.r2[k];
    }
  }
  out.loss = Matrix(resolution, resolution, model.per_sample_loss(probes, probe_labels));
  out.std_dev = population_std(out.loss.values);
  return out;
}

double loss_std_diversity(const Classifier& model, const Dataset& data, const AttackSpec& attack, NoiseKind init,
                          const DiversityOptions& options) {
  require_nonempty(data, "loss_std_diversity");
  if (options.reps < 2) throw std::invalid_argument("loss_std_diversity: reps must be >= 2");
  const std::size_t n = data.size(), reps = options.reps;
  const Matrix duplicated = repeat_rows(data.features, reps);
  Labels labels;
  for (std::size_t j = 0; j < reps; ++j) labels.insert(labels.end(), data.labels.begin(), data.labels.end());

  Matrix delta0;
  if (options.identical_inits) {
    const NoiseSpec one{init, attack.init_radius(), 1, options.seed};
    delta0 = repeat_rows(make_initial_perturbation(one, n, data.dim()), reps);
  } else {
    const NoiseSpec joint{init, attack.init_radius(), reps, options.seed};
    delta0 = make_initial_perturbation(joint, n, data.dim());
  }
  const AttackOutput adv = run_attack(model, attack, duplicated, delta0, labels);
  const std::vector<double> losses = model.per_sample_loss(adv.adversarial, labels);

  double total = 0.0;
  std::vector<double> per(reps);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < reps; ++j) per[j] = losses[j * n + i];
    total += population_std(per);
  }
  return total / static_cast<double>(n);
}

}  // namespace bbat
