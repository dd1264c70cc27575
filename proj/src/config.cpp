#include "sarsfe/config.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "sarsfe/error.hpp"
#include "sarsfe/tensor_io.hpp"

namespace sarsfe {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

void RunConfig::validate() const {
  augment.validate();
  encoder.validate();
  loss.validate();
  train.validate();
  eval.validate();
  if (augment.local_crop < encoder.patch_size) {
    throw Error(ErrorKind::Config, "augment.local_crop is smaller than encoder.patch_size");
  }
}

namespace {

[[noreturn]] void config_error(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::Config, path + ": " + what);
}

// Reads keys out of one JSON object and remembers which ones were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_error(path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key); }
  std::string path_of(const std::string& key) const { return path_ + "." + key; }

  const json* take(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v->is_boolean()) config_error(path_of(key), "expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v->is_number_integer()) config_error(path_of(key), "expected an integer");
        if (std::is_unsigned_v<T> && v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0) {
          config_error(path_of(key), "expected a non-negative integer");
        }
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v->is_number()) config_error(path_of(key), "expected a number");
      } else if constexpr (std::is_same_v<T, std::string>) {
        if (!v->is_string()) config_error(path_of(key), "expected a string");
      }
      out = v->get<T>();
    } catch (const json::exception& e) {
      config_error(path_of(key), e.what());
    }
  }

  template <typename T>
  void get(const std::string& key, std::optional<T>& out) {
    const json* v = take(key);
    if (v == nullptr) return;
    if (v->is_null()) {
      out.reset();
      return;
    }
    T value{};
    seen_.erase(key);
    get(key, value);
    out = value;
  }

  void get_path(const std::string& key, fs::path& out, const fs::path& base) {
    std::string s;
    get(key, s);
    if (!has(key)) return;
    out = s.empty() || base.empty() || fs::path(s).is_absolute() ? fs::path(s) : base / s;
  }

  Section child(const std::string& key) {
    const json* v = take(key);
    static const json empty = json::object();
    return Section(v == nullptr ? empty : *v, path_of(key));
  }

  /// Rejects keys that were never looked up.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) config_error(path_of(it.key()), "unknown key");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Pooling parse_pooling(const std::string& s, const std::string& path) {
  if (s == "cls") return Pooling::ClassToken;
  if (s == "mean") return Pooling::MeanPool;
  config_error(path, "expected \"cls\" or \"mean\"");
}

const char* pooling_name(Pooling p) { return p == Pooling::ClassToken ? "cls" : "mean"; }

SubbandDomain parse_domain(const std::string& s, const std::string& path) {
  if (s == "amplitude") return SubbandDomain::Amplitude;
  if (s == "slc") return SubbandDomain::Slc;
  config_error(path, "expected \"amplitude\" or \"slc\"");
}

const char* domain_name(SubbandDomain d) { return d == SubbandDomain::Amplitude ? "amplitude" : "slc"; }

void read_augment(Section s, AugmentConfig& a, bool& seed_given) {
  s.get("global_crop", a.global_crop);
  s.get("local_crop", a.local_crop);
  s.get("n_local", a.n_local);
  s.get("subband_fraction", a.subband_fraction);
  s.get("subband_probability", a.subband_probability);
  std::string domain;
  s.get("subband_domain", domain);
  if (!domain.empty()) a.subband_domain = parse_domain(domain, s.path_of("subband_domain"));
  s.get("mask_ratio", a.mask_ratio);
  s.get("mean_shift_range", a.mean_shift_range);
  s.get("despeckle_looks", a.despeckle_looks);
  seed_given = s.has("rng_seed");
  s.get("rng_seed", a.rng_seed);
  s.finish();
}

void read_encoder(Section s, EncoderConfig& e) {
  std::string preset;
  s.get("preset", preset);
  if (preset == "full") {
    e = EncoderConfig::full();
  } else if (preset == "desk") {
    e = EncoderConfig::desk();
  } else if (!preset.empty()) {
    config_error(s.path_of("preset"), "expected \"desk\" or \"full\"");
  }
  s.get("patch_size", e.patch_size);
  s.get("embed_dim", e.embed_dim);
  s.get("depth", e.depth);
  s.get("n_heads", e.n_heads);
  s.get("mlp_hidden", e.mlp_hidden);
  s.get("head_hidden", e.head_hidden);
  s.get("proj_dim", e.proj_dim);
  s.get("n_prototypes", e.n_prototypes);
  std::string pooling;
  s.get("pooling", pooling);
  if (!pooling.empty()) e.pooling = parse_pooling(pooling, s.path_of("pooling"));
  s.finish();
}

void read_loss(Section s, LossConfig& l) {
  s.get("tau_student", l.tau_student);
  s.get("tau_teacher", l.tau_teacher);
  s.get("lambda", l.lambda);
  s.finish();
}

void read_train(Section s, TrainConfig& t, bool& seed_given) {
  s.get("epochs", t.epochs);
  s.get("batch_size", t.batch_size);
  s.get("learning_rate", t.learning_rate);
  s.get("warmup_steps", t.warmup_steps);
  s.get("min_learning_rate", t.min_learning_rate);
  s.get("momentum", t.momentum);
  s.get("momentum_ramp", t.momentum_ramp);
  s.get("weight_decay", t.weight_decay);
  s.get("adam_beta1", t.adam_beta1);
  s.get("adam_beta2", t.adam_beta2);
  s.get("adam_eps", t.adam_eps);
  seed_given = s.has("seed");
  s.get("seed", t.seed);
  s.get("checkpoint_every", t.checkpoint_every);
  s.get("max_steps", t.max_steps);
  s.finish();
}

void read_eval(Section s, EvalConfig& e) {
  s.get("k", e.k);
  std::string metric;
  s.get("metric", metric);
  if (!metric.empty()) {
    try {
      e.metric = parse_distance_metric(metric);
    } catch (const Error&) {
      config_error(s.path_of("metric"), "expected \"cosine\" or \"euclidean\"");
    }
  }
  if (const json* v = s.take("shots")) {
    if (!v->is_array()) config_error(s.path_of("shots"), "expected an array of integers");
    e.shots.clear();
    for (const auto& x : *v) {
      if (!x.is_number_unsigned()) config_error(s.path_of("shots"), "expected an array of non-negative integers");
      e.shots.push_back(x.get<std::uint32_t>());
    }
  }
  s.get("repeats", e.repeats);
  s.get("pca_resize", e.pca_resize);
  s.get("pca_dim", e.pca_dim);
  s.get("perplexity", e.perplexity);
  s.get("tsne_iters", e.tsne_iters);
  s.finish();
}

json opt(const auto& o) { return o ? json(*o) : json(nullptr); }

}  // namespace

RunConfig parse_run_config(const std::string& json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::Config, std::string("$: invalid JSON: ") + e.what());
  }
  RunConfig cfg;
  Section root(j, "$");
  {
    Section d = root.child("data");
    d.get_path("manifest", cfg.data.manifest, base_dir);
    d.get_path("root", cfg.data.root, base_dir);
    d.finish();
  }
  root.get("seed", cfg.seed);
  bool aug_seed = false;
  bool train_seed = false;
  read_augment(root.child("augment"), cfg.augment, aug_seed);
  read_encoder(root.child("encoder"), cfg.encoder);
  read_loss(root.child("loss"), cfg.loss);
  read_train(root.child("train"), cfg.train, train_seed);
  read_eval(root.child("eval"), cfg.eval);
  root.get_path("output_dir", cfg.output_dir, base_dir);
  root.finish();
  if (!aug_seed) cfg.augment.rng_seed = cfg.seed;
  if (!train_seed) cfg.train.seed = cfg.seed;
  try {
    cfg.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::Config, e.what());
  }
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_run_config(std::string(bytes.begin(), bytes.end()), fs::absolute(path).parent_path());
}

std::string run_config_to_json(const RunConfig& c) {
  json j;
  j["data"] = {{"manifest", c.data.manifest.string()}, {"root", c.data.root.string()}};
  const auto& a = c.augment;
  j["augment"] = {{"global_crop", a.global_crop},
                  {"local_crop", a.local_crop},
                  {"n_local", a.n_local},
                  {"subband_fraction", a.subband_fraction},
                  {"subband_probability", a.subband_probability},
                  {"subband_domain", domain_name(a.subband_domain)},
                  {"mask_ratio", a.mask_ratio},
                  {"mean_shift_range", a.mean_shift_range},
                  {"despeckle_looks", a.despeckle_looks},
                  {"rng_seed", a.rng_seed}};
  const auto& e = c.encoder;
  j["encoder"] = {{"patch_size", e.patch_size}, {"embed_dim", e.embed_dim},       {"depth", e.depth},
                  {"n_heads", e.n_heads},       {"mlp_hidden", e.mlp_hidden},     {"head_hidden", e.head_hidden},
                  {"proj_dim", e.proj_dim},     {"n_prototypes", e.n_prototypes}, {"pooling", pooling_name(e.pooling)}};
  j["loss"] = {{"tau_student", c.loss.tau_student}, {"tau_teacher", c.loss.tau_teacher}, {"lambda", c.loss.lambda}};
  const auto& t = c.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"warmup_steps", opt(t.warmup_steps)},
                {"min_learning_rate", t.min_learning_rate},
                {"momentum", t.momentum},
                {"momentum_ramp", t.momentum_ramp},
                {"weight_decay", t.weight_decay},
                {"adam_beta1", t.adam_beta1},
                {"adam_beta2", t.adam_beta2},
                {"adam_eps", t.adam_eps},
                {"seed", t.seed},
                {"checkpoint_every", t.checkpoint_every},
                {"max_steps", opt(t.max_steps)}};
  const auto& v = c.eval;
  j["eval"] = {{"k", v.k},
               {"metric", to_string(v.metric)},
               {"shots", v.shots},
               {"repeats", v.repeats},
               {"pca_resize", v.pca_resize},
               {"pca_dim", v.pca_dim},
               {"perplexity", v.perplexity},
               {"tsne_iters", v.tsne_iters}};
  j["output_dir"] = c.output_dir.string();
  j["seed"] = c.seed;
  return j.dump(2) + "\n";
}

fs::path write_resolved_config(const RunConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  const fs::path path = cfg.output_dir / "config.resolved.json";
  const std::string text = run_config_to_json(cfg);
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
  return path;
}

DatasetManifest load_dataset(const RunConfig& cfg) {
  if (!cfg.data.manifest.empty()) return load_manifest(cfg.data.manifest);
  if (!cfg.data.root.empty()) return build_manifest(cfg.data.root);
  throw Error(ErrorKind::Config, "$.data: neither manifest nor root is set");
}

}  // namespace sarsfe
