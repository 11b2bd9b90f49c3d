#include "pathosr/config.hpp"

#include <fstream>
#include <set>

#include "pathosr/errors.hpp"

namespace pathosr {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

// Reads typed fields out of one JSON object, remembering which keys were
// consumed so leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be a JSON object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    known_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  const json* child(const char* key) {
    known_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  std::string where(const std::string& key = {}) const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!known_.count(key)) throw ConfigError("unknown key '" + where(key) + "'");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> known_;
};

std::optional<fs::path> optional_path(const json* node, const std::string& where, const fs::path& base) {
  if (node == nullptr || node->is_null()) return std::nullopt;
  if (!node->is_string()) throw ConfigError(where + " must be a path string or null");
  fs::path p = node->get<std::string>();
  return p.is_relative() && !base.empty() ? base / p : p;
}

json path_or_null(const std::optional<fs::path>& p) { return p ? json(p->string()) : json(nullptr); }

json loss_to_json(const LossWeights& w) {
  return {{"eta", w.eta}, {"lambda_t1", w.lambda_t1}, {"lambda_t2", w.lambda_t2}, {"alpha_edge", w.alpha_edge}};
}

LossWeights loss_from_json(const json& j, const std::string& path) {
  LossWeights w;
  ObjectReader r(j, path);
  r.get("eta", w.eta);
  r.get("lambda_t1", w.lambda_t1);
  r.get("lambda_t2", w.lambda_t2);
  r.get("alpha_edge", w.alpha_edge);
  r.finish();
  return w;
}

CriticSpec critic_from_json(const json& j, const std::string& path, CriticSpec spec) {
  ObjectReader r(j, path);
  if (const json* size = r.child("input_size")) {
    if (!size->is_array() || size->size() != 2 || !(*size)[0].is_number_integer() ||
        !(*size)[1].is_number_integer()) {
      throw ConfigError(r.where("input_size") + " must be [height, width]");
    }
    spec.input_height = (*size)[0].get<int>();
    spec.input_width = (*size)[1].get<int>();
  }
  r.get("in_channels", spec.in_channels);
  if (const json* stages = r.child("conv_stages")) {
    if (!stages->is_array()) throw ConfigError(r.where("conv_stages") + " must be a list of [channels, stride]");
    spec.conv_stages.clear();
    for (const json& s : *stages) {
      if (!s.is_array() || s.size() != 2 || !s[0].is_number_integer() || !s[1].is_number_integer()) {
        throw ConfigError(r.where("conv_stages") + " entries must be [channels, stride]");
      }
      spec.conv_stages.push_back({s[0].get<int>(), s[1].get<int>()});
    }
  }
  r.get("leak", spec.leak);
  r.get("head_hidden", spec.head_hidden);
  r.finish();
  return spec;
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {{"total_iters", c.total_iters},
          {"base_lr", c.base_lr},
          {"decay_factor", c.decay_factor},
          {"decay_interval", c.decay_interval},
          {"batch_size", c.batch_size},
          {"linear_scale", c.linear_scale},
          {"crop_size", c.crop_size},
          {"roi_patch_size", c.roi_patch_size},
          {"roi_max_patches", c.roi_max_patches},
          {"roi_min_coverage", c.roi_min_coverage},
          {"data_seed", c.data_seed},
          {"model_seed", c.model_seed},
          {"checkpoint_interval", c.checkpoint_interval},
          {"pretrain_iters", c.pretrain_iters},
          {"variant", to_string(c.variant)},
          {"loss", loss_to_json(c.weights)}};
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  ObjectReader r(j, "train");
  r.get("total_iters", c.total_iters);
  r.get("base_lr", c.base_lr);
  r.get("decay_factor", c.decay_factor);
  r.get("decay_interval", c.decay_interval);
  r.get("batch_size", c.batch_size);
  r.get("linear_scale", c.linear_scale);
  r.get("crop_size", c.crop_size);
  r.get("roi_patch_size", c.roi_patch_size);
  r.get("roi_max_patches", c.roi_max_patches);
  r.get("roi_min_coverage", c.roi_min_coverage);
  r.get("data_seed", c.data_seed);
  r.get("model_seed", c.model_seed);
  r.get("checkpoint_interval", c.checkpoint_interval);
  r.get("pretrain_iters", c.pretrain_iters);
  std::string variant = to_string(c.variant);
  r.get("variant", variant);
  c.variant = parse_variant(variant);
  if (const json* loss = r.child("loss")) c.weights = loss_from_json(*loss, "train.loss");
  r.finish();
  return c;
}

json to_json(const GeneratorSpec& s) {
  return {{"in_channels", s.in_channels},
          {"n_rrdb_blocks", s.n_rrdb_blocks},
          {"base_channels", s.base_channels},
          {"growth_channels", s.growth_channels},
          {"linear_scale", s.linear_scale},
          {"residual_scaling", s.residual_scaling}};
}

GeneratorSpec generator_spec_from_json(const json& j) {
  GeneratorSpec s;
  ObjectReader r(j, "generator");
  r.get("in_channels", s.in_channels);
  r.get("n_rrdb_blocks", s.n_rrdb_blocks);
  r.get("base_channels", s.base_channels);
  r.get("growth_channels", s.growth_channels);
  r.get("linear_scale", s.linear_scale);
  r.get("residual_scaling", s.residual_scaling);
  r.finish();
  return s;
}

json to_json(const CriticSpec& s) {
  json stages = json::array();
  for (const auto& st : s.conv_stages) stages.push_back({st.channels, st.stride});
  return {{"input_size", {s.input_height, s.input_width}},
          {"in_channels", s.in_channels},
          {"conv_stages", stages},
          {"leak", s.leak},
          {"head_hidden", s.head_hidden}};
}

CriticSpec critic_spec_from_json(const json& j) { return critic_from_json(j, "critic", CriticSpec{}); }

json to_json(const RunConfig& cfg) {
  json gen = to_json(cfg.setup.generator);
  gen.erase("linear_scale");  // always taken from train.linear_scale
  return {{"schema_version", RunConfig::kSchemaVersion},
          {"manifest", cfg.manifest.string()},
          {"output_dir", cfg.output_dir.string()},
          {"train", to_json(cfg.setup.train)},
          {"generator", gen},
          {"critic_t1", to_json(cfg.setup.t1)},
          {"critic_t2", to_json(cfg.setup.t2)},
          {"perceptual",
           {{"weights", path_or_null(cfg.perceptual.weights)},
            {"tap_conv", cfg.perceptual.tap_conv},
            {"random_seed", cfg.perceptual.random_seed ? json(*cfg.perceptual.random_seed) : json(nullptr)}}},
          {"metrics",
           {{"niqe_model", path_or_null(cfg.metrics.niqe_model)},
            {"ma_scorer", cfg.metrics.ma_scorer ? json(*cfg.metrics.ma_scorer) : json(nullptr)}}}};
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig cfg;
  ObjectReader r(j, "");
  int version = 0;
  r.get("schema_version", version);
  if (version != RunConfig::kSchemaVersion) {
    throw ConfigError("schema_version must be " + std::to_string(RunConfig::kSchemaVersion));
  }

  std::string manifest, output_dir = cfg.output_dir.string();
  r.get("manifest", manifest);
  r.get("output_dir", output_dir);
  auto resolve = [&](const std::string& p) -> fs::path {
    fs::path path = p;
    return path.is_relative() && !base_dir.empty() && !p.empty() ? base_dir / path : path;
  };
  cfg.manifest = resolve(manifest);
  cfg.output_dir = resolve(output_dir);

  if (const json* t = r.child("train")) cfg.setup.train = train_config_from_json(*t);
  const TrainConfig& tc = cfg.setup.train;

  if (const json* g = r.child("generator")) {
    if (g->is_object() && g->contains("linear_scale") &&
        (*g)["linear_scale"] != json(tc.linear_scale)) {
      throw ConfigError("generator.linear_scale must match train.linear_scale");
    }
    cfg.setup.generator = generator_spec_from_json(*g);
  }
  cfg.setup.generator.linear_scale = tc.linear_scale;

  CriticSpec t1_default;
  t1_default.input_height = t1_default.input_width = tc.crop_size;
  CriticSpec t2_default;
  t2_default.input_height = t2_default.input_width = tc.roi_patch_size;
  t2_default.conv_stages = {{64, 1}, {64, 2}, {128, 1}, {128, 2}, {256, 1}, {256, 2}, {512, 1}, {512, 2}};
  const json* t1 = r.child("critic_t1");
  const json* t2 = r.child("critic_t2");
  cfg.setup.t1 = t1 ? critic_from_json(*t1, "critic_t1", t1_default) : t1_default;
  cfg.setup.t2 = t2 ? critic_from_json(*t2, "critic_t2", t2_default) : t2_default;

  if (const json* p = r.child("perceptual")) {
    ObjectReader pr(*p, "perceptual");
    cfg.perceptual.weights = optional_path(pr.child("weights"), "perceptual.weights", base_dir);
    pr.get("tap_conv", cfg.perceptual.tap_conv);
    if (const json* seed = pr.child("random_seed"); seed && !seed->is_null()) {
      if (!seed->is_number_unsigned()) throw ConfigError("perceptual.random_seed must be a non-negative integer");
      cfg.perceptual.random_seed = seed->get<std::uint64_t>();
    }
    pr.finish();
  }
  if (const json* m = r.child("metrics")) {
    ObjectReader mr(*m, "metrics");
    cfg.metrics.niqe_model = optional_path(mr.child("niqe_model"), "metrics.niqe_model", base_dir);
    if (const json* ma = mr.child("ma_scorer"); ma && !ma->is_null()) {
      if (!ma->is_string()) throw ConfigError("metrics.ma_scorer must be a command string or null");
      cfg.metrics.ma_scorer = ma->get<std::string>();
    }
    mr.finish();
  }
  r.finish();

  cfg.setup.validate();
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j, path.parent_path());
}

void save_run_config(const RunConfig& cfg, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config " + path.string());
  out << to_json(cfg).dump(2) << '\n';
}

FeatureExtractor make_feature_extractor(const PerceptualOptions& opts) {
  const FeatureExtractorSpec spec = FeatureExtractorSpec::vgg19(opts.tap_conv);
  if (opts.weights) return load_feature_extractor(*opts.weights, spec);
  if (opts.random_seed) return random_feature_extractor(spec, *opts.random_seed);
  return nullptr;
}

}  // namespace pathosr
