#include "testing.hpp"

#include <fstream>

#include "pathosr/config.hpp"
#include "pathosr/errors.hpp"
#include "support.hpp"

using namespace pathosr;
using nlohmann::json;

namespace {

json sample_config() {
  return json::parse(R"({
    "schema_version": 1,
    "manifest": "data/manifest.jsonl",
    "output_dir": "runs/toy",
    "train": {"total_iters": 20, "batch_size": 2, "linear_scale": 2, "crop_size": 32, "roi_patch_size": 16,
              "variant": "t1", "loss": {"eta": 0.5, "lambda_t2": 0.0}},
    "generator": {"n_rrdb_blocks": 1, "base_channels": 8, "growth_channels": 4},
    "critic_t1": {"conv_stages": [[8, 1], [8, 2]], "head_hidden": 8},
    "perceptual": {"random_seed": 4, "tap_conv": 2},
    "metrics": {"ma_scorer": "ma-score"}
  })");
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("parsing fills defaults and derived sizes") {
    const RunConfig c = run_config_from_json(sample_config(), "/base");
    CHECK(c.manifest == "/base/data/manifest.jsonl");
    CHECK(c.output_dir == "/base/runs/toy");
    CHECK(c.setup.train.variant == Variant::kT1);
    CHECK(c.setup.train.weights.eta == 0.5);
    CHECK(c.setup.train.weights.lambda_t1 == LossWeights{}.lambda_t1);
    CHECK(c.setup.generator.linear_scale == 2);
    CHECK(c.setup.t1.input_height == 32);
    CHECK(c.setup.t2.input_width == 16);
    CHECK(c.perceptual.random_seed == 4u);
    CHECK(c.metrics.ma_scorer == "ma-score");
    CHECK_FALSE(c.metrics.niqe_model.has_value());
  }

  TEST_CASE("serialise then parse gives an equal config") {
    const RunConfig c = run_config_from_json(sample_config(), "/base");
    CHECK(run_config_from_json(to_json(c)) == c);
    const RunConfig d = run_config_from_json(json{{"schema_version", 1}, {"manifest", "m.jsonl"}});
    CHECK(run_config_from_json(to_json(d)) == d);
    test::TempDir dir;
    save_run_config(c, dir / "c.json");
    CHECK(load_run_config(dir / "c.json") == c);
  }

  TEST_CASE("unknown keys are rejected with their path") {
    for (const char* pointer : {"/bogus", "/train/bogus", "/train/loss/bogus", "/generator/bogus", "/critic_t1/bogus",
                                "/perceptual/bogus", "/metrics/bogus"}) {
      json j = sample_config();
      j[json::json_pointer(pointer)] = 1;
      try {
        run_config_from_json(j);
        FAIL("accepted " << pointer);
      } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("bogus") != std::string::npos);
      }
    }
  }

  TEST_CASE("schema violations") {
    auto rejects = [](json j) { CHECK_THROWS_AS(run_config_from_json(j), ConfigError); };
    json j = sample_config();
    j.erase("schema_version");
    rejects(j);
    j = sample_config();
    j["train"]["batch_size"] = "two";
    rejects(j);
    j = sample_config();
    j["train"]["variant"] = "gan";
    rejects(j);
    j = sample_config();
    j["train"]["total_iters"] = 0;
    rejects(j);
    j = sample_config();
    j["generator"]["linear_scale"] = 4;
    rejects(j);
    j = sample_config();
    j["critic_t1"]["input_size"] = {48, 48};
    rejects(j);
    j = sample_config();
    j["train"]["linear_scale"] = 5;
    rejects(j);
  }

  TEST_CASE("config files") {
    test::TempDir dir;
    CHECK_THROWS_AS(load_run_config(dir / "missing.json"), ConfigError);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_THROWS_AS(load_run_config(dir / "bad.json"), ConfigError);
  }

  TEST_CASE("shipped example config matches the defaults") {
    const RunConfig cfg = load_run_config(test::test_data_dir() / ".." / ".." / "configs" / "all_idb1_x4.json");
    CHECK(cfg.setup.train == TrainConfig{});
    CHECK(cfg.setup.generator == GeneratorSpec{});
    CHECK(cfg.setup.t1 == CriticSpec{});
    CriticSpec roi_critic;
    roi_critic.input_height = roi_critic.input_width = 64;
    roi_critic.conv_stages.resize(8);
    CHECK(cfg.setup.t2 == roi_critic);
    CHECK(cfg.manifest.filename() == "manifest.jsonl");
    REQUIRE(cfg.perceptual.weights);
    CHECK(cfg.perceptual.weights->filename() == "vgg19.blob");
  }

  TEST_CASE("feature extractor selection") {
    PerceptualOptions none;
    CHECK_FALSE(make_feature_extractor(none));
    PerceptualOptions random;
    random.random_seed = 1;
    random.tap_conv = 2;
    FeatureExtractor phi = make_feature_extractor(random);
    REQUIRE(phi);
    CHECK(phi->forward(torch::rand({1, 3, 16, 16})).size(1) == 64);
    PerceptualOptions missing;
    missing.weights = "/nonexistent/vgg.blob";
    CHECK_THROWS(make_feature_extractor(missing));
  }
}
