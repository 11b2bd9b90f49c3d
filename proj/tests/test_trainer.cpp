#include "testing.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "pathosr/checkpoint.hpp"
#include "pathosr/errors.hpp"
#include "pathosr/params.hpp"
#include "pathosr/trainer.hpp"
#include "support.hpp"

using namespace pathosr;
namespace fs = std::filesystem;

namespace {

struct Hashes {
  std::uint64_t g, t1, t2;
  bool operator==(const Hashes&) const = default;
};

Hashes hashes(Trainer& tr) {
  return {parameter_hash(*tr.generator()), parameter_hash(*tr.t1()), parameter_hash(*tr.t2())};
}

fs::path zero_mask_corpus(const fs::path& dir) {
  const auto manifest = test::write_toy_corpus(dir, 2, 0, 32, false);
  save_mask(RoiMask(32, 32), dir / "empty.png");
  std::ofstream out(manifest);
  for (int i = 0; i < 2; ++i) {
    out << R"({"id": "t)" << i << R"(", "hr": "hr/tile00)" << i << R"(.png", "mask": "empty.png", "split": "train"})"
        << '\n';
  }
  return manifest;
}

}  // namespace

TEST_SUITE("trainer") {
  TEST_CASE("learning rate schedule") {
    TrainConfig c;
    CHECK(lr_at_iteration(c, 0) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(lr_at_iteration(c, 99999) == doctest::Approx(1e-4).epsilon(1e-15));
    CHECK(lr_at_iteration(c, 150000) == doctest::Approx(5e-5).epsilon(1e-15));
    CHECK(lr_at_iteration(c, 450000) == doctest::Approx(6.25e-6).epsilon(1e-15));
    double prev = lr_at_iteration(c, 0);
    for (std::int64_t it = 0; it <= 500000; it += 2500) {
      const double lr = lr_at_iteration(c, it);
      CHECK(lr <= prev);
      prev = lr;
    }
  }

  TEST_CASE("config validation") {
    TrainConfig c;
    c.total_iters = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    TrainSetup s = test::tiny_setup(32, 16, 2, Variant::kT1T2);
    s.t1.input_height = s.t1.input_width = 64;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    CHECK(parse_variant("t1_t2") == Variant::kT1T2);
    CHECK(std::string(to_string(Variant::kSrnetW)) == "srnet_w");
    CHECK_THROWS_AS(parse_variant("gan"), ConfigError);
  }

  TEST_CASE("variant gating") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 4, 0, 32), 2, 16);
    for (Variant v : {Variant::kSrnet, Variant::kSrnetW, Variant::kT1, Variant::kT1T2}) {
      CAPTURE(to_string(v));
      Trainer tr(test::tiny_setup(32, 16, 2, v), idx);
      const Hashes before = hashes(tr);
      StepLosses last;
      for (int i = 0; i < 3; ++i) last = tr.train_step(tr.next_batch());
      const Hashes after = hashes(tr);
      CHECK(after.g != before.g);
      CHECK((after.t1 != before.t1) == (v == Variant::kT1 || v == Variant::kT1T2));
      CHECK((after.t2 != before.t2) == (v == Variant::kT1T2));
      if (v != Variant::kT1T2) CHECK(last.j_t2 == 0.0);
      if (v == Variant::kSrnet || v == Variant::kSrnetW) CHECK(last.j_adv == 0.0);
      CHECK(tr.iteration() == 3);
    }
  }

  TEST_CASE("pretraining delays the adversarial stages") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 2, 0, 32), 2, 16);
    TrainSetup s = test::tiny_setup(32, 16, 2, Variant::kT1T2);
    s.train.pretrain_iters = 2;
    Trainer tr(s, idx);
    const auto t1 = parameter_hash(*tr.t1());
    tr.train_step(tr.next_batch());
    tr.train_step(tr.next_batch());
    CHECK(parameter_hash(*tr.t1()) == t1);
    CHECK(tr.train_step(tr.next_batch()).j_t1 > 0.0);
    CHECK(parameter_hash(*tr.t1()) != t1);
  }

  TEST_CASE("empty ROI lists skip stage 3 only") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(zero_mask_corpus(dir.path()), 2, 16);
    Trainer tr(test::tiny_setup(32, 16, 2, Variant::kT1T2), idx);
    std::set<int> ran;
    tr.set_stage_observer([&](Stage s, bool after) {
      if (after) ran.insert(static_cast<int>(s));
    });
    const auto t2 = parameter_hash(*tr.t2());
    const StepLosses l = tr.train_step(tr.next_batch());
    CHECK((ran == std::set<int>{1, 2, 4}));
    CHECK(l.j_t2 == 0.0);
    CHECK(parameter_hash(*tr.t2()) == t2);
  }

  TEST_CASE("stages only touch their own networks") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 4, 0, 32), 2, 16);
    Trainer tr(test::tiny_setup(32, 16, 2, Variant::kT1T2), idx);
    Hashes before{};
    int violations = 0, stages = 0;
    tr.set_stage_observer([&](Stage s, bool after) {
      if (!after) {
        before = hashes(tr);
        return;
      }
      ++stages;
      const Hashes now = hashes(tr);
      const bool g_changed = now.g != before.g;
      const bool c_changed = now.t1 != before.t1 || now.t2 != before.t2;
      if ((s == Stage::kReconstruction || s == Stage::kAdversarial) && c_changed) ++violations;
      if ((s == Stage::kWholeImageCritic || s == Stage::kRoiCritic) && g_changed) ++violations;
    });
    for (int i = 0; i < 10; ++i) tr.train_step(tr.next_batch());
    CHECK(stages == 40);
    CHECK(violations == 0);
  }

  TEST_CASE("non-finite loss aborts with a diagnostic checkpoint") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 2, 0, 32), 2, 16);
    TrainSetup s = test::tiny_setup(32, 16, 2, Variant::kT1T2);
    s.train.total_iters = 1;
    Trainer tr(s, idx);
    tr.fit(dir / "run", false);
    TrainBatch b = tr.next_batch();
    b.hr[0][0][0][0] = std::numeric_limits<float>::quiet_NaN();
    CHECK_THROWS_AS(tr.train_step(b), TrainingAborted);
    CHECK(fs::exists(dir / "run" / "diagnostic.ckpt"));
  }

  TEST_CASE("fit writes checkpoints, log and panels") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 3, 0, 32), 2, 16);
    Trainer tr(test::tiny_setup(32, 16, 2, Variant::kT1T2), idx);
    int calls = 0;
    tr.fit(dir / "run", false, [&](const StepLosses&) { ++calls; });
    CHECK(calls == 10);
    for (const char* f : {"ckpt_00000005.ckpt", "ckpt_00000010.ckpt", "latest.ckpt", "final.ckpt",
                          "samples/iter_00000005.png", "samples/iter_00000010.png", "train_log.csv"}) {
      CHECK_MESSAGE(fs::exists(dir / "run" / f), f);
    }
    const auto rows = test::loss_columns(dir / "run" / "train_log.csv");
    REQUIRE(rows.size() == 11);
    CHECK(rows[0] == "iter,lr,j_recon,j_t1,j_t2,j_adv");
    const Image panel = load_image(dir / "run" / "samples" / "iter_00000010.png");
    CHECK(panel.height == 32);
    CHECK(panel.width == 3 * 32 + 8);

    const LoadedGenerator g = load_generator(dir / "run" / "final.ckpt");
    CHECK(g.iteration == 10);
    CHECK(parameter_hash(*g.generator) == parameter_hash(*tr.generator()));
  }

  TEST_CASE("checkpoint round-trip restores every network") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 3, 0, 32), 2, 16);
    const TrainSetup s = test::tiny_setup(32, 16, 2, Variant::kT1T2);
    Trainer a(s, idx);
    for (int i = 0; i < 3; ++i) a.train_step(a.next_batch());
    a.save_checkpoint(dir / "a.ckpt");
    TrainSetup other = s;
    other.train.model_seed = 99;
    Trainer b(other, idx);
    b.load_checkpoint(dir / "a.ckpt");
    CHECK(hashes(b) == hashes(a));
    CHECK(b.iteration() == 3);
    CHECK(b.history().size() == 3);
  }

  TEST_CASE("bad checkpoints leave the trainer untouched") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 2, 0, 32), 2, 16);
    const TrainSetup s = test::tiny_setup(32, 16, 2, Variant::kT1T2);
    Trainer a(s, idx);
    a.save_checkpoint(dir / "a.ckpt");

    std::string bytes;
    {
      std::ifstream in(dir / "a.ckpt", std::ios::binary);
      bytes.assign(std::istreambuf_iterator<char>(in), {});
    }
    auto write = [&](const std::string& name, std::string data) {
      std::ofstream(dir / name, std::ios::binary) << data;
      return dir / name;
    };
    std::string versioned = bytes;
    versioned[8] = 7;
    std::string flipped = bytes;
    flipped[bytes.size() / 2] ^= 0x5a;

    TrainSetup other = s;
    other.train.model_seed = 5;
    Trainer b(other, idx);
    b.train_step(b.next_batch());
    const Hashes before = hashes(b);
    try {
      b.load_checkpoint(write("v.ckpt", versioned));
      FAIL("expected CheckpointError");
    } catch (const CheckpointError& e) {
      CHECK(std::string(e.what()).find("version") != std::string::npos);
    }
    CHECK_THROWS_AS(b.load_checkpoint(write("c.ckpt", flipped)), CheckpointError);
    CHECK_THROWS_AS(b.load_checkpoint(write("t.ckpt", bytes.substr(0, bytes.size() - 20))), CheckpointError);
    TrainSetup bigger = s;
    bigger.generator.base_channels = 16;
    Trainer c(bigger, idx);
    CHECK_THROWS_AS(c.load_checkpoint(dir / "a.ckpt"), CheckpointError);
    CHECK(hashes(b) == before);
    CHECK(b.iteration() == 1);
  }

  TEST_CASE("resume reproduces an uninterrupted run bit for bit") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 5, 0, 32), 2, 16);
    TrainSetup s = test::tiny_setup(32, 16, 2, Variant::kT1T2);
    s.train.total_iters = 12;
    s.train.checkpoint_interval = 4;
    Trainer full(s, idx);
    full.fit(dir / "full", false);

    TrainSetup first = s;
    first.train.total_iters = 6;  // stops after the checkpoint at 4, log runs to 6
    Trainer part(first, idx);
    part.fit(dir / "part", false);
    fs::copy_file(dir / "part" / "ckpt_00000004.ckpt", dir / "part" / "latest.ckpt",
                  fs::copy_options::overwrite_existing);
    Trainer resumed(s, idx);
    resumed.fit(dir / "part", true);
    CHECK(resumed.iteration() == 12);
    CHECK(test::loss_columns(dir / "part" / "train_log.csv") == test::loss_columns(dir / "full" / "train_log.csv"));
    CHECK(hashes(resumed) == hashes(full));
  }

  TEST_CASE("seeded runs are identical") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 4, 0, 32), 2, 16);
    const TrainSetup s = test::tiny_setup(32, 16, 2, Variant::kT1T2);
    Trainer a(s, idx), b(s, idx);
    a.fit(dir / "a", false);
    b.fit(dir / "b", false);
    CHECK(test::loss_columns(dir / "a" / "train_log.csv") == test::loss_columns(dir / "b" / "train_log.csv"));
  }

  TEST_CASE("reconstruction-only training reduces the loss") {
    test::TempDir dir;
    const DatasetIndex idx = load_manifest(test::write_toy_corpus(dir.path(), 8, 0, 64), 2, 16);
    TrainSetup s = test::tiny_setup(32, 16, 2, Variant::kSrnet);
    s.train.base_lr = 1e-3;
    s.train.weights.eta = 1.0;
    s.train.batch_size = 4;
    Trainer tr(s, idx);
    std::vector<double> losses;
    for (int i = 0; i < 200; ++i) losses.push_back(tr.train_step(tr.next_batch()).j_recon);
    double head = 0, tail = 0;
    for (int i = 0; i < 10; ++i) {
      head += losses[i] / 10;
      tail += losses[190 + i] / 10;
    }
    CHECK(tail <= 0.7 * head);
  }
}
