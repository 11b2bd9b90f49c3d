#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "pathosr/trainer.hpp"

namespace pathosr {

struct PerceptualOptions {
  /// Exported VGG-19 weights; when absent the perceptual term is disabled
  /// unless `random_seed` asks for a randomly initialised stand-in.
  std::optional<std::filesystem::path> weights;
  int tap_conv = 16;
  std::optional<std::uint64_t> random_seed;

  friend bool operator==(const PerceptualOptions&, const PerceptualOptions&) = default;
};

struct MetricOptions {
  std::optional<std::filesystem::path> niqe_model;
  /// External command printing a Ma et al. score for the image path appended to it.
  std::optional<std::string> ma_scorer;

  friend bool operator==(const MetricOptions&, const MetricOptions&) = default;
};

/// The whole run description, one JSON document with a schema version.
struct RunConfig {
  static constexpr int kSchemaVersion = 1;

  std::filesystem::path manifest;
  std::filesystem::path output_dir = "runs/default";
  TrainSetup setup;
  PerceptualOptions perceptual;
  MetricOptions metrics;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

// Each *_from_json rejects unknown keys and wrong types with ConfigError
// naming the offending key path. Missing keys keep their defaults.
nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GeneratorSpec& spec);
GeneratorSpec generator_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const CriticSpec& spec);
CriticSpec critic_spec_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunConfig& cfg);
/// Relative paths resolve against `base_dir`. The result has been validated.
RunConfig run_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

RunConfig load_run_config(const std::filesystem::path& path);
void save_run_config(const RunConfig& cfg, const std::filesystem::path& path);

/// Perceptual feature extractor described by `opts`: pretrained weights when
/// given, otherwise a seeded random stand-in, otherwise empty (term disabled).
FeatureExtractor make_feature_extractor(const PerceptualOptions& opts);

}  // namespace pathosr
