#include "bbat/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "bbat/config.hpp"
#include "bbat/metrics.hpp"
#include "bbat/model.hpp"
#include "bbat/noise.hpp"
#include "bbat/records.hpp"
#include "bbat/rng.hpp"
#include "bbat/trainer.hpp"

namespace bbat {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

struct Options {
  std::string config_path;
  std::string output_dir;
  std::string checkpoint;
};

struct Context {
  RunConfig config;
  std::string hash;
  fs::path out_dir;
};

Context make_context(const Options& opts) {
  Context ctx;
  ctx.config = opts.config_path.empty() ? RunConfig{} : parse_run_config(opts.config_path);
  if (opts.config_path.empty()) {
    ctx.config.sync();
    ctx.config.validate();
  }
  if (!opts.output_dir.empty()) {
    ctx.config.output_dir = opts.output_dir;
  } else if (const char* env = std::getenv(kOutputDirEnv); env && *env) {
    ctx.config.output_dir = env;
  }
  ctx.hash = config_hash(ctx.config);
  ctx.out_dir = ctx.config.output_dir;
  fs::create_directories(ctx.out_dir);
  return ctx;
}

void write_json_file(const fs::path& path, const Json& j) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << j.dump(2) << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

Json config_echo(const RunConfig& config) { return Json::parse(serialize_run_config(config)); }

std::vector<std::size_t> model_dims(const RunConfig& config, const Dataset& train) {
  std::vector<std::size_t> dims{train.dim()};
  dims.insert(dims.end(), config.hidden.begin(), config.hidden.end());
  dims.push_back(train.classes);
  return dims;
}

fs::path checkpoint_path(const Options& opts, const Context& ctx) {
  fs::path p = !opts.checkpoint.empty()          ? fs::path(opts.checkpoint)
               : !ctx.config.eval.checkpoint.empty() ? fs::path(ctx.config.eval.checkpoint)
                                                  : ctx.out_dir / "model.ckpt";
  if (!fs::exists(p)) throw std::runtime_error("checkpoint not found: " + p.string());
  return p;
}

Mlp load_model_for(const Options& opts, const Context& ctx, const Dataset& data) {
  const auto path = checkpoint_path(opts, ctx);
  Mlp model = load_checkpoint(path).model;
  if (model.input_dim() != data.dim()) {
    throw std::runtime_error("checkpoint " + path.string() + " expects input dim " +
                             std::to_string(model.input_dim()) + " but the dataset has " + std::to_string(data.dim()));
  }
  if (model.num_classes() < data.classes) {
    throw std::runtime_error("checkpoint " + path.string() + " has fewer outputs than the dataset has classes");
  }
  return model;
}

const Dataset& eval_set(const DataSplit& split) { return split.test.size() > 0 ? split.test : split.train; }

Dataset maybe_subsample(const Dataset& data, std::size_t count, std::uint64_t seed) {
  if (count == 0 || count >= data.size()) return data;
  return data.subset(batch_iter(data.size(), count, seed).front());
}

int cmd_train(const Options& opts, std::ostream& out) {
  Context ctx = make_context(opts);
  const DataSplit split = load_data(ctx.config);
  Mlp initial = Mlp::init(model_dims(ctx.config, split.train), derive_seed({ctx.config.seed, 6}));
  const TrainResult result = train_run(ctx.config.train, split.train, split.test, std::move(initial));

  save_checkpoint(ctx.out_dir / "model.ckpt", result.best_model, ctx.hash);
  save_checkpoint(ctx.out_dir / "final.ckpt", result.final_model, ctx.hash);
  const auto epochs = epoch_records(result, ctx.hash);
  emit_metrics(epochs, ctx.out_dir / "metrics.csv", RecordFormat::Csv);
  emit_metrics(epochs, ctx.out_dir / "metrics.json", RecordFormat::Json);
  const auto steps = step_records(result, ctx.config.train, ctx.hash);
  emit_metrics(steps, ctx.out_dir / "step_metrics.csv", RecordFormat::Csv);

  Json summary;
  summary["config_hash"] = ctx.hash;
  summary["config"] = config_echo(ctx.config);
  // without per-epoch evaluation model.ckpt is simply the final model
  const bool evaluated = !result.epochs.empty() && result.epochs.back().evaluated;
  summary["evaluated"] = evaluated;
  summary["best_epoch"] = evaluated ? Json(result.best_epoch) : Json(nullptr);
  summary["best_clean_acc"] = evaluated ? Json(result.best_clean_acc) : Json(nullptr);
  summary["best_adv_acc"] = evaluated ? Json(result.best_adv_acc) : Json(nullptr);
  summary["co_flag"] = result.co_epoch.has_value();
  summary["co_epoch"] = result.co_epoch ? Json(*result.co_epoch) : Json(nullptr);
  summary["steps"] = result.steps.size();
  summary["skip_rate"] = result.skip_rate();
  summary["mean_step_ms"] = result.mean_step_ms();
  write_json_file(ctx.out_dir / "summary.json", summary);

  out << "trained " << ctx.config.train.epochs << " epochs; ";
  if (evaluated) {
    out << "best epoch " << result.best_epoch << " clean " << format_double(result.best_clean_acc) << " adv "
        << format_double(result.best_adv_acc) << (result.co_epoch ? " (catastrophic overfitting detected)" : "");
  } else {
    out << "per-epoch evaluation off (eval.subsample = 0), model.ckpt is the final model";
  }
  out << "; skip rate " << format_double(result.skip_rate()) << "\n"
      << "artifacts in " << ctx.out_dir.string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& opts, std::ostream& out) {
  Context ctx = make_context(opts);
  const DataSplit split = load_data(ctx.config);
  const Dataset& full = eval_set(split);
  const Mlp model = load_model_for(opts, ctx, full);
  const Dataset data = maybe_subsample(full, ctx.config.eval.subsample, derive_seed({ctx.config.seed, 7}));

  const double clean = accuracy_clean(model, data);
  Table table{{"config_hash", "epsilon", "steps", "n", "clean_acc", "adv_acc"}, {}};
  Json report;
  report["config_hash"] = ctx.hash;
  report["n"] = data.size();
  report["clean_acc"] = clean;
  report["adversarial"] = Json::array();
  const auto epsilons = ctx.config.eval_epsilons();
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    AdvEvalOptions o;
    o.steps = ctx.config.eval.steps;
    o.seed = derive_seed({ctx.config.seed, 7, i + 1});
    o.clamp_input_domain = ctx.config.train.attack.clamp_input_domain;
    const double adv = accuracy_adversarial(model, data, epsilons[i], o);
    table.rows.push_back({ctx.hash, epsilons[i], static_cast<std::int64_t>(o.steps),
                          static_cast<std::int64_t>(data.size()), clean, adv});
    report["adversarial"].push_back({{"epsilon", epsilons[i]}, {"steps", o.steps}, {"adv_acc", adv}});
    out << "epsilon " << format_double(epsilons[i]) << ": clean " << format_double(clean) << " adv "
        << format_double(adv) << "\n";
  }
  write_table_csv(table, ctx.out_dir / "eval.csv");
  write_json_file(ctx.out_dir / "eval.json", report);
  return kExitOk;
}

int cmd_landscape(const Options& opts, std::ostream& out) {
  Context ctx = make_context(opts);
  const DataSplit split = load_data(ctx.config);
  const Dataset& data = eval_set(split);
  const Mlp model = load_model_for(opts, ctx, data);
  const auto& lc = ctx.config.landscape;
  if (lc.sample_index >= data.size()) {
    throw std::runtime_error("landscape.sample_index " + std::to_string(lc.sample_index) + " outside a dataset of " +
                             std::to_string(data.size()) + " samples");
  }
  const Landscape ls = loss_landscape_grid(model, data.features.row(lc.sample_index), data.labels[lc.sample_index],
                                           lc.half_width, lc.resolution, derive_seed({ctx.config.seed, 8}));
  Table table{{"config_hash", "t1", "t2", "loss"}, {}};
  for (std::size_t a = 0; a < ls.t.size(); ++a) {
    for (std::size_t b = 0; b < ls.t.size(); ++b) table.rows.push_back({ctx.hash, ls.t[a], ls.t[b], ls.loss(a, b)});
  }
  write_table_csv(table, ctx.out_dir / "landscape.csv");
  write_json_file(ctx.out_dir / "landscape.json", {{"config_hash", ctx.hash},
                                                   {"sample_index", lc.sample_index},
                                                   {"label", data.labels[lc.sample_index]},
                                                   {"std", ls.std_dev},
                                                   {"degenerate", ls.degenerate}});
  out << "landscape std " << format_double(ls.std_dev) << (ls.degenerate ? " (zero gradient)" : "") << "\n";
  return kExitOk;
}

int cmd_diversity(const Options& opts, std::ostream& out) {
  Context ctx = make_context(opts);
  const DataSplit split = load_data(ctx.config);
  const Mlp model = load_model_for(opts, ctx, split.train);
  const Dataset data = maybe_subsample(split.train, ctx.config.diversity.subsample, derive_seed({ctx.config.seed, 9}));
  Table table{{"config_hash", "attack", "init", "epsilon", "mean_std"}, {}};
  std::uint64_t tag = 0;
  for (AttackKind kind : {AttackKind::NFGSM, AttackKind::PGD}) {
    AttackSpec spec = ctx.config.train.attack;
    spec.kind = kind;
    for (NoiseKind init : {NoiseKind::Uniform, NoiseKind::SignNormal, NoiseKind::TLHS}) {
      DiversityOptions o;
      o.reps = ctx.config.diversity.reps;
      o.seed = derive_seed({ctx.config.seed, 9, ++tag});
      const double v = loss_std_diversity(model, data, spec, init, o);
      table.rows.push_back({ctx.hash, std::string(to_string(kind)), std::string(to_string(init)), spec.epsilon, v});
      out << to_string(kind) << " / " << to_string(init) << ": mean loss std " << format_double(v) << "\n";
    }
  }
  write_table_csv(table, ctx.out_dir / "diversity.csv");
  return kExitOk;
}

int cmd_dmin(const Options& opts, std::ostream& out) {
  Context ctx = make_context(opts);
  const auto& dc = ctx.config.dmin;
  Table table{{"config_hash", "method", "epsilon", "seed", "d_min"}, {}};
  for (double eps : dc.epsilons) {
    double sum_u = 0.0, sum_t = 0.0;
    for (std::size_t s = 0; s < dc.seeds; ++s) {
      // Seeds are shared across epsilons so d_min is exactly linear in epsilon.
      const std::uint64_t seed = derive_seed({ctx.config.seed, 12, s});
      const double du = min_pairwise_distance(uniform_noise(dc.m, dc.dim, eps, seed));
      const double dt = min_pairwise_distance(tlhs_design(dc.m, dc.dim, eps, seed));
      sum_u += du;
      sum_t += dt;
      table.rows.push_back({ctx.hash, std::string("uniform"), eps, static_cast<std::int64_t>(s), du});
      table.rows.push_back({ctx.hash, std::string("tlhs"), eps, static_cast<std::int64_t>(s), dt});
    }
    const double n = static_cast<double>(dc.seeds);
    out << "epsilon " << format_double(eps) << ": mean d_min uniform " << format_double(sum_u / n) << " tlhs "
        << format_double(sum_t / n) << "\n";
  }
  write_table_csv(table, ctx.out_dir / "dmin.csv");
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Batch-in-batch adversarial training toolkit"};
  app.require_subcommand(1);
  Options opts;

  auto add_common = [&](CLI::App* sub, bool with_checkpoint) {
    sub->add_option("-c,--config", opts.config_path, "JSON run configuration (defaults when omitted)")
        ->check(CLI::ExistingFile);
    sub->add_option("-o,--output-dir", opts.output_dir, "Override the output directory");
    if (with_checkpoint) sub->add_option("--checkpoint", opts.checkpoint, "Model checkpoint to load");
  };
  CLI::App* train = app.add_subcommand("train", "Train a model and write checkpoint, metrics and summary");
  CLI::App* eval = app.add_subcommand("eval", "Clean and PGD accuracy of a checkpoint");
  CLI::App* landscape = app.add_subcommand("landscape", "Loss surface around one sample");
  CLI::App* diversity = app.add_subcommand("diversity", "Loss std of adversarial samples per initialization");
  CLI::App* dmin = app.add_subcommand("dmin-bench", "Minimum pairwise distance of uniform and tLHS initializations");
  CLI::App* print = app.add_subcommand("print-config", "Print the effective configuration with all defaults");
  add_common(train, false);
  add_common(eval, true);
  add_common(landscape, true);
  add_common(diversity, true);
  add_common(dmin, false);
  add_common(print, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitConfigError;
  }

  try {
    if (train->parsed()) return cmd_train(opts, out);
    if (eval->parsed()) return cmd_eval(opts, out);
    if (landscape->parsed()) return cmd_landscape(opts, out);
    if (diversity->parsed()) return cmd_diversity(opts, out);
    if (dmin->parsed()) return cmd_dmin(opts, out);
    RunConfig config = opts.config_path.empty() ? RunConfig{} : parse_run_config(opts.config_path);
    config.sync();
    out << serialize_run_config(config);
    return kExitOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntimeError;
  }
}

}  // namespace bbat
