#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "pathosr/adam.hpp"
#include "pathosr/critic.hpp"
#include "pathosr/dataset.hpp"
#include "pathosr/feature_extractor.hpp"
#include "pathosr/generator.hpp"
#include "pathosr/losses.hpp"

namespace pathosr {

/// Which stages run. srnet / srnet_w: reconstruction only (srnet_w with the
/// edge-weighted pixel term); t1: stages 1, 2, 4 without the ROI term;
/// t1_t2: all four stages.
enum class Variant { kSrnet, kSrnetW, kT1, kT1T2 };

const char* to_string(Variant v) noexcept;
Variant parse_variant(const std::string& s);

struct TrainConfig {
  std::int64_t total_iters = 500000;
  double base_lr = 1e-4;
  double decay_factor = 0.5;
  std::int64_t decay_interval = 100000;
  int batch_size = 16;
  int linear_scale = 4;
  int crop_size = 128;  ///< HR crop side; 0 trains on whole (equal-sized) images
  int roi_patch_size = 64;
  int roi_max_patches = 4;
  double roi_min_coverage = 0.1;
  LossWeights weights;
  std::uint64_t data_seed = 1;
  std::uint64_t model_seed = 1;
  std::int64_t checkpoint_interval = 5000;
  std::int64_t pretrain_iters = 0;  ///< iterations with stages 2-4 disabled
  Variant variant = Variant::kT1T2;

  void validate() const;
  bool trains_t1() const noexcept { return variant == Variant::kT1 || variant == Variant::kT1T2; }
  bool trains_t2() const noexcept { return variant == Variant::kT1T2; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// base_lr * decay_factor ^ floor(iter / decay_interval).
double lr_at_iteration(const TrainConfig& cfg, std::int64_t iter);

/// Everything needed to construct the three networks.
struct TrainSetup {
  TrainConfig train;
  GeneratorSpec generator;
  CriticSpec t1;
  CriticSpec t2;

  /// Checks that the specs agree with each other and with the training crop.
  void validate() const;
  friend bool operator==(const TrainSetup&, const TrainSetup&) = default;
};

enum class Stage { kReconstruction = 1, kWholeImageCritic = 2, kRoiCritic = 3, kAdversarial = 4 };

struct StepLosses {
  std::int64_t iter = 0;  ///< iteration count after the step (1-based)
  double lr = 0.0;
  double j_recon = 0.0;
  double j_t1 = 0.0;
  double j_t2 = 0.0;
  double j_adv = 0.0;
  double wall_ms = 0.0;
};

struct TrainBatch {
  torch::Tensor lr;  ///< [N, C, h, w]
  torch::Tensor hr;  ///< [N, C, s*h, s*w]
  std::vector<RoiMask> masks;
};

/// Owns the generator, both critics, their optimisers and the sampling RNG.
/// Single writer: not safe to share across threads while training.
class Trainer {
 public:
  /// `phi` may be empty, which disables the perceptual term.
  Trainer(TrainSetup setup, const DatasetIndex& dataset, FeatureExtractor phi = nullptr);

  /// Draws the next mini-batch (random crops aligned to the scale factor).
  TrainBatch next_batch();

  /// Runs stages 1-4 (as gated by the variant) on one batch and advances the
  /// iteration counter. Throws TrainingAborted if any loss is non-finite,
  /// after writing diagnostic.ckpt when an output directory is set.
  StepLosses train_step(const TrainBatch& batch);

  /// Trains until total_iters, writing train_log.csv, periodic checkpoints
  /// (ckpt_<iter>.ckpt and latest.ckpt), sample panels and final.ckpt.
  /// With `resume`, continues from out_dir/latest.ckpt when it exists.
  void fit(const std::filesystem::path& out_dir, bool resume,
           const std::function<void(const StepLosses&)>& progress = {});

  void save_checkpoint(const std::filesystem::path& path) const;
  /// Restores parameters, optimiser moments, RNG state, iteration and loss
  /// history. Throws CheckpointError (state untouched) on any mismatch.
  void load_checkpoint(const std::filesystem::path& path);

  /// Writes an LR (pixel-replicated) | SR | HR panel for the first training record.
  void save_triptych(const std::filesystem::path& path);

  std::int64_t iteration() const noexcept { return iteration_; }
  const TrainSetup& setup() const noexcept { return setup_; }
  Generator& generator() noexcept { return g_; }
  Critic& t1() noexcept { return t1_; }
  Critic& t2() noexcept { return t2_; }
  const std::deque<StepLosses>& history() const noexcept { return history_; }

  /// Called before (`after == false`) and after each executed stage.
  void set_stage_observer(std::function<void(Stage, bool after)> observer) { observer_ = std::move(observer); }

  static constexpr std::size_t kHistoryCapacity = 1000;
  static constexpr const char* kLogHeader = "iter,lr,j_recon,j_t1,j_t2,j_adv,wall_ms";

 private:
  void check_finite(const char* name, double value);
  void notify(Stage stage, bool after);

  TrainSetup setup_;
  BatchIterator batches_;
  std::mt19937_64 crop_rng_;
  FeatureExtractor phi_;
  Generator g_;
  Critic t1_;
  Critic t2_;
  Adam opt_g_;
  Adam opt_t1_;
  Adam opt_t2_;
  std::int64_t iteration_ = 0;
  std::deque<StepLosses> history_;
  std::function<void(Stage, bool)> observer_;
  std::filesystem::path diagnostic_dir_;
};

/// Generator and spec restored from a trainer checkpoint, for inference.
struct LoadedGenerator {
  Generator generator;
  GeneratorSpec spec;
  std::int64_t iteration = 0;
};
LoadedGenerator load_generator(const std::filesystem::path& checkpoint);

/// One CSV row in the training log format (full double precision).
std::string format_log_row(const StepLosses& s);

}  // namespace pathosr
