#include "bbat/config.hpp"

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "bbat/rng.hpp"

namespace bbat {

using Json = nlohmann::ordered_json;

namespace {

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

std::string type_name(const Json& j) {
  if (j.is_number_unsigned()) return "non-negative integer";
  if (j.is_number_integer()) return "integer";
  return j.type_name();
}

// Object reader that remembers which keys were consumed; finish() rejects the rest.
class Section {
 public:
  Section(const Json& obj, std::string path) : obj_(obj), path_(std::move(path)) {
    require(obj_.is_object(), path_, "expected an object, got " + type_name(obj_));
  }

  std::string key_path(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  const Json* take(const std::string& key) {
    seen_.insert(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  template <std::unsigned_integral T>
    requires(!std::same_as<T, bool>)
  void read(const std::string& key, T& out) {
    if (const Json* j = take(key)) out = static_cast<T>(as_uint(*j, key_path(key)));
  }
  void read(const std::string& key, double& out) {
    if (const Json* j = take(key)) out = as_double(*j, key_path(key));
  }
  void read(const std::string& key, bool& out) {
    if (const Json* j = take(key)) {
      require(j->is_boolean(), key_path(key), "expected boolean, got " + type_name(*j));
      out = j->get<bool>();
    }
  }
  void read(const std::string& key, std::string& out) {
    if (const Json* j = take(key)) {
      require(j->is_string(), key_path(key), "expected string, got " + type_name(*j));
      out = j->get<std::string>();
    }
  }
  template <class T>
  void read(const std::string& key, std::vector<T>& out) {
    if (const Json* j = take(key)) {
      const std::string p = key_path(key);
      require(j->is_array(), p, "expected array, got " + type_name(*j));
      out.clear();
      for (std::size_t i = 0; i < j->size(); ++i) {
        const std::string ip = p + "[" + std::to_string(i) + "]";
        if constexpr (std::is_same_v<T, double>) {
          out.push_back(as_double((*j)[i], ip));
        } else {
          out.push_back(static_cast<T>(as_uint((*j)[i], ip)));
        }
      }
    }
  }

  template <class Fn>
  void section(const std::string& key, Fn&& fn) {
    if (const Json* j = take(key)) {
      Section sub(*j, key_path(key));
      fn(sub);
      sub.finish();
    }
  }

  void finish() const {
    for (const auto& [key, _] : obj_.items()) {
      if (!seen_.count(key)) throw ConfigError(key_path(key), "unknown key");
    }
  }

 private:
  static std::uint64_t as_uint(const Json& j, const std::string& path) {
    require(j.is_number_unsigned(), path, "expected non-negative integer, got " + type_name(j));
    return j.get<std::uint64_t>();
  }
  static double as_double(const Json& j, const std::string& path) {
    require(j.is_number(), path, "expected number, got " + type_name(j));
    const double v = j.get<double>();
    require(std::isfinite(v), path, "must be finite");
    return v;
  }

  const Json& obj_;
  std::string path_;
  std::set<std::string> seen_;
};

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  const auto& d = c.dataset;
  j["dataset"] = {{"kind", d.kind},
                  {"classes", d.classes},
                  {"dim", d.dim},
                  {"per_class", d.per_class},
                  {"test_per_class", d.test_per_class},
                  {"spread", d.spread},
                  {"seed", d.seed},
                  {"train_images", d.train_images},
                  {"train_labels", d.train_labels},
                  {"test_images", d.test_images},
                  {"test_labels", d.test_labels}};
  j["model"] = {{"hidden", c.hidden}};
  const auto& t = c.train;
  j["train"] = {{"epochs", t.epochs},           {"lr0", t.lr0},
                {"momentum", t.momentum},       {"weight_decay", t.weight_decay},
                {"decay_epochs", t.decay_epochs}, {"decay_factor", t.decay_factor},
                {"batch_size", t.batch_size}};
  j["bb"] = {{"m", t.m}, {"select", std::string(to_string(t.select))}};
  j["noise"] = {{"kind", std::string(to_string(t.noise))}};
  const auto& a = t.attack;
  j["attack"] = {{"kind", std::string(to_string(a.kind))},
                 {"epsilon", a.epsilon},
                 {"k", a.k},
                 {"alpha", a.alpha},
                 {"steps", a.steps},
                 {"clamp_input_domain", a.clamp_input_domain}};
  j["eval"] = {{"epsilons", c.eval.epsilons},
               {"steps", c.eval.steps},
               {"subsample", c.eval.subsample},
               {"checkpoint", c.eval.checkpoint}};
  j["landscape"] = {{"sample_index", c.landscape.sample_index},
                    {"half_width", c.landscape.half_width},
                    {"resolution", c.landscape.resolution}};
  j["diversity"] = {{"reps", c.diversity.reps}, {"subsample", c.diversity.subsample}};
  j["dmin"] = {{"m", c.dmin.m}, {"dim", c.dmin.dim}, {"seeds", c.dmin.seeds}, {"epsilons", c.dmin.epsilons}};
  return j;
}

template <class Parse>
auto parse_enum(Section& s, const std::string& key, Parse parse, decltype(parse(std::string_view{})) current) {
  std::string name(to_string(current));
  s.read(key, name);
  try {
    return parse(name);
  } catch (const std::exception&) {
    throw ConfigError(s.key_path(key), "unrecognized value '" + name + "'");
  }
}

}  // namespace

void RunConfig::sync() {
  train.seed = seed;
  train.eval_subsample = eval.subsample;
  train.eval_steps = eval.steps;
  train.eval_epsilon = eval.epsilons.empty() ? 0.0 : eval.epsilons.front();
}

std::vector<double> RunConfig::eval_epsilons() const {
  return eval.epsilons.empty() ? std::vector<double>{train.attack.epsilon} : eval.epsilons;
}

void RunConfig::validate() const {
  require(!output_dir.empty(), "output_dir", "must not be empty");
  const auto& d = dataset;
  require(d.kind == "blobs" || d.kind == "idx", "dataset.kind", "must be \"blobs\" or \"idx\"");
  if (d.kind == "blobs") {
    require(d.classes >= 2, "dataset.classes", "must be >= 2");
    require(d.dim >= 2, "dataset.dim", "must be >= 2");
    require(d.classes <= d.dim, "dataset.classes", "must not exceed dataset.dim");
    require(d.per_class >= 1, "dataset.per_class", "must be >= 1");
    require(d.spread > 0.0, "dataset.spread", "must be positive");
  } else {
    require(!d.train_images.empty(), "dataset.train_images", "required when dataset.kind is \"idx\"");
    require(!d.train_labels.empty(), "dataset.train_labels", "required when dataset.kind is \"idx\"");
    require(d.test_images.empty() == d.test_labels.empty(), "dataset.test_labels",
            "test_images and test_labels must be given together");
  }
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    require(hidden[i] >= 1, "model.hidden[" + std::to_string(i) + "]", "must be >= 1");
  }
  const auto& t = train;
  require(t.epochs >= 1, "train.epochs", "must be >= 1");
  require(t.lr0 > 0.0, "train.lr0", "must be positive");
  require(t.momentum >= 0.0 && t.momentum < 1.0, "train.momentum", "must be in [0, 1)");
  require(t.weight_decay >= 0.0, "train.weight_decay", "must be >= 0");
  require(t.decay_factor > 0.0, "train.decay_factor", "must be positive");
  require(t.batch_size >= 1, "train.batch_size", "must be >= 1");
  require(t.m >= 1, "bb.m", "must be >= 1");
  const auto& a = t.attack;
  require(a.epsilon > 0.0, "attack.epsilon", "must be positive");
  require(a.k > 0.0, "attack.k", "must be positive");
  require(a.alpha >= 0.0, "attack.alpha", "must be >= 0 (0 selects epsilon/4)");
  require(a.kind != AttackKind::PGD || a.steps >= 1, "attack.steps", "must be >= 1");
  for (std::size_t i = 0; i < eval.epsilons.size(); ++i) {
    require(eval.epsilons[i] > 0.0, "eval.epsilons[" + std::to_string(i) + "]", "must be positive");
  }
  require(eval.steps >= 1, "eval.steps", "must be >= 1");
  require(landscape.half_width > 0.0, "landscape.half_width", "must be positive");
  require(landscape.resolution >= 2, "landscape.resolution", "must be >= 2");
  require(diversity.reps >= 2, "diversity.reps", "must be >= 2");
  require(dmin.m >= 2, "dmin.m", "must be >= 2");
  require(dmin.dim >= 1, "dmin.dim", "must be >= 1");
  require(dmin.seeds >= 1, "dmin.seeds", "must be >= 1");
  require(!dmin.epsilons.empty(), "dmin.epsilons", "must not be empty");
  for (std::size_t i = 0; i < dmin.epsilons.size(); ++i) {
    require(dmin.epsilons[i] > 0.0, "dmin.epsilons[" + std::to_string(i) + "]", "must be positive");
  }
}

RunConfig parse_run_config_text(const std::string& text) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ConfigError("", std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section s(root, "");
  s.read("seed", c.seed);
  s.read("output_dir", c.output_dir);
  s.section("dataset", [&](Section& d) {
    auto& ds = c.dataset;
    d.read("kind", ds.kind);
    d.read("classes", ds.classes);
    d.read("dim", ds.dim);
    d.read("per_class", ds.per_class);
    d.read("test_per_class", ds.test_per_class);
    d.read("spread", ds.spread);
    d.read("seed", ds.seed);
    d.read("train_images", ds.train_images);
    d.read("train_labels", ds.train_labels);
    d.read("test_images", ds.test_images);
    d.read("test_labels", ds.test_labels);
  });
  s.section("model", [&](Section& m) { m.read("hidden", c.hidden); });
  s.section("train", [&](Section& t) {
    t.read("epochs", c.train.epochs);
    t.read("lr0", c.train.lr0);
    t.read("momentum", c.train.momentum);
    t.read("weight_decay", c.train.weight_decay);
    t.read("decay_epochs", c.train.decay_epochs);
    t.read("decay_factor", c.train.decay_factor);
    t.read("batch_size", c.train.batch_size);
  });
  s.section("bb", [&](Section& b) {
    b.read("m", c.train.m);
    c.train.select = parse_enum(b, "select", parse_select_kind, c.train.select);
  });
  s.section("noise", [&](Section& n) { c.train.noise = parse_enum(n, "kind", parse_noise_kind, c.train.noise); });
  s.section("attack", [&](Section& a) {
    auto& at = c.train.attack;
    at.kind = parse_enum(a, "kind", parse_attack_kind, at.kind);
    a.read("epsilon", at.epsilon);
    a.read("k", at.k);
    a.read("alpha", at.alpha);
    a.read("steps", at.steps);
    a.read("clamp_input_domain", at.clamp_input_domain);
  });
  s.section("eval", [&](Section& e) {
    e.read("epsilons", c.eval.epsilons);
    e.read("steps", c.eval.steps);
    e.read("subsample", c.eval.subsample);
    e.read("checkpoint", c.eval.checkpoint);
  });
  s.section("landscape", [&](Section& l) {
    l.read("sample_index", c.landscape.sample_index);
    l.read("half_width", c.landscape.half_width);
    l.read("resolution", c.landscape.resolution);
  });
  s.section("diversity", [&](Section& d) {
    d.read("reps", c.diversity.reps);
    d.read("subsample", c.diversity.subsample);
  });
  s.section("dmin", [&](Section& d) {
    d.read("m", c.dmin.m);
    d.read("dim", c.dmin.dim);
    d.read("seeds", c.dmin.seeds);
    d.read("epsilons", c.dmin.epsilons);
  });
  s.finish();
  c.sync();
  c.validate();
  return c;
}

RunConfig parse_run_config(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ConfigError("", "cannot read config file: " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse_run_config_text(ss.str());
}

std::string serialize_run_config(const RunConfig& config) { return to_json(config).dump(2) + "\n"; }

std::string config_hash(const RunConfig& config) {
  Json j = to_json(config);
  j.erase("output_dir");
  const std::string text = j.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

DataSplit load_data(const RunConfig& config) {
  const auto& d = config.dataset;
  if (d.kind == "blobs") {
    DataSplit split{gen_gaussian_blobs(d.classes, d.dim, d.per_class, d.spread, derive_seed({d.seed, 10})), {}};
    if (d.test_per_class > 0) {
      split.test = gen_gaussian_blobs(d.classes, d.dim, d.test_per_class, d.spread, derive_seed({d.seed, 11}));
    }
    return split;
  }
  DataSplit split{load_idx_dataset(d.train_images, d.train_labels), {}};
  if (!d.test_images.empty()) {
    split.test = load_idx_dataset(d.test_images, d.test_labels);
    const std::size_t classes = std::max(split.train.classes, split.test.classes);
    split.train.classes = classes;
    split.test.classes = classes;
  }
  return split;
}

}  // namespace bbat
