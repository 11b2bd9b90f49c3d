#include "pathosr/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>


#include "pathosr/checkpoint.hpp"
#include "pathosr/config.hpp"
#include "pathosr/errors.hpp"
#include "pathosr/log.hpp"
#include "pathosr/params.hpp"
#include "pathosr/resample.hpp"
#include "pathosr/roi.hpp"

namespace pathosr {

namespace fs = std::filesystem;

const char* to_string(Variant v) noexcept {
  switch (v) {
    case Variant::kSrnet: return "srnet";
    case Variant::kSrnetW: return "srnet_w";
    case Variant::kT1: return "t1";
    case Variant::kT1T2: return "t1_t2";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "srnet") return Variant::kSrnet;
  if (s == "srnet_w") return Variant::kSrnetW;
  if (s == "t1") return Variant::kT1;
  if (s == "t1_t2") return Variant::kT1T2;
  throw ConfigError("unknown variant '" + s + "' (expected srnet, srnet_w, t1 or t1_t2)");
}

void TrainConfig::validate() const {
  if (total_iters <= 0) throw ConfigError("total_iters must be positive");
  if (!(base_lr > 0.0) || !std::isfinite(base_lr)) throw ConfigError("base_lr must be positive");
  if (!(decay_factor > 0.0 && decay_factor <= 1.0)) throw ConfigError("decay_factor must lie in (0, 1]");
  if (decay_interval <= 0) throw ConfigError("decay_interval must be positive");
  if (batch_size <= 0) throw ConfigError("batch_size must be positive");
  if (!is_supported_scale(linear_scale)) {
    throw ConfigError("unsupported linear_scale " + std::to_string(linear_scale) + " (expected 2, 3, 4 or 8)");
  }
  if (crop_size < 0 || crop_size % linear_scale != 0) {
    throw ConfigError("crop_size must be a non-negative multiple of linear_scale");
  }
  if (roi_patch_size < 1) throw ConfigError("roi_patch_size must be positive");
  if (crop_size > 0 && roi_patch_size > crop_size) throw ConfigError("roi_patch_size exceeds crop_size");
  if (roi_max_patches < 0) throw ConfigError("roi_max_patches must be non-negative");
  if (!(roi_min_coverage >= 0.0 && roi_min_coverage <= 1.0)) throw ConfigError("roi_min_coverage must lie in [0, 1]");
  if (checkpoint_interval <= 0) throw ConfigError("checkpoint_interval must be positive");
  if (pretrain_iters < 0) throw ConfigError("pretrain_iters must be non-negative");
  weights.validate();
}

double lr_at_iteration(const TrainConfig& cfg, std::int64_t iter) {
  return cfg.base_lr * std::pow(cfg.decay_factor, static_cast<double>(iter / cfg.decay_interval));
}

void TrainSetup::validate() const {
  train.validate();
  generator.validate();
  t1.validate();
  t2.validate();
  if (generator.linear_scale != train.linear_scale) throw ConfigError("generator scale differs from train scale");
  if (t1.in_channels != generator.in_channels || t2.in_channels != generator.in_channels) {
    throw ConfigError("critic channels must match the generator");
  }
  if (train.crop_size > 0 && (t1.input_height != train.crop_size || t1.input_width != train.crop_size)) {
    throw ConfigError("critic_t1 input_size must equal the training crop");
  }
  if (t2.input_height != train.roi_patch_size || t2.input_width != train.roi_patch_size) {
    throw ConfigError("critic_t2 input_size must equal roi_patch_size");
  }
}

namespace {

std::vector<torch::Tensor> params_of(torch::nn::Module& m) { return m.parameters(true); }

void save_module(BlobArchive& a, const std::string& prefix, const torch::nn::Module& m) {
  for (const auto& item : m.named_parameters(true)) a.put(prefix + "/" + item.key(), item.value());
}

// Copies archived parameters into `m`; all shapes are checked before any write.
void load_module(const BlobArchive& a, const std::string& prefix, torch::nn::Module& m) {
  auto named = m.named_parameters(true);
  for (const auto& item : named) {
    const auto& t = a.tensor(prefix + "/" + item.key());
    if (t.sizes() != item.value().sizes()) {
      throw CheckpointError("checkpoint parameter '" + prefix + "/" + item.key() + "' has the wrong shape");
    }
  }
  torch::NoGradGuard no_grad;
  for (auto& item : named) item.value().copy_(a.tensor(prefix + "/" + item.key()));
}

std::string rng_text(const std::mt19937_64& rng) {
  std::ostringstream os;
  os << rng;
  return os.str();
}

nlohmann::json checkpoint_meta(const TrainSetup& s, std::int64_t iteration) {
  return {{"format", "pathosr-checkpoint"},
          {"iteration", iteration},
          {"train", to_json(s.train)},
          {"generator", to_json(s.generator)},
          {"critic_t1", to_json(s.t1)},
          {"critic_t2", to_json(s.t2)}};
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string format_log_row(const StepLosses& s) {
  std::ostringstream os;
  os << s.iter << ',' << fmt_double(s.lr) << ',' << fmt_double(s.j_recon) << ',' << fmt_double(s.j_t1) << ','
     << fmt_double(s.j_t2) << ',' << fmt_double(s.j_adv) << ',' << fmt_double(s.wall_ms);
  return os.str();
}

Trainer::Trainer(TrainSetup setup, const DatasetIndex& dataset, FeatureExtractor phi)
    : setup_((setup.validate(), std::move(setup))),
      batches_([&] {
        if (dataset.count(Split::kTrain) == 0) throw ConfigError("dataset has no train records");
        DatasetIndex idx = dataset;
        idx.linear_scale = setup_.train.linear_scale;
        idx.patch_size = setup_.train.roi_patch_size;
        return BatchIterator(idx, Split::kTrain, static_cast<std::size_t>(setup_.train.batch_size),
                             setup_.train.data_seed);
      }()),
      crop_rng_(setup_.train.data_seed ^ 0x9e3779b97f4a7c15ull),
      phi_(std::move(phi)),
      g_(build_generator(setup_.generator, setup_.train.model_seed)),
      t1_(build_critic(setup_.t1, setup_.train.model_seed + 1)),
      t2_(build_critic(setup_.t2, setup_.train.model_seed + 2)),
      opt_g_(params_of(*g_), AdamOptions{setup_.train.base_lr}),
      opt_t1_(params_of(*t1_), AdamOptions{setup_.train.base_lr}),
      opt_t2_(params_of(*t2_), AdamOptions{setup_.train.base_lr}) {}

TrainBatch Trainer::next_batch() {
  const TrainConfig& cfg = setup_.train;
  const int s = cfg.linear_scale;
  std::vector<Image> lr, hr;
  TrainBatch batch;
  for (const SamplePair* sample : batches_.next()) {
    if (sample->hr.channels != setup_.generator.in_channels) {
      throw ShapeError("record '" + sample->id + "' has " + std::to_string(sample->hr.channels) +
                       " channels, generator expects " + std::to_string(setup_.generator.in_channels));
    }
    if (cfg.crop_size == 0) {
      const int h = sample->lr.height * s, w = sample->lr.width * s;
      if (h != sample->hr.height || w != sample->hr.width) {
        throw ShapeError("record '" + sample->id + "': whole-image training needs sides divisible by the scale");
      }
      hr.push_back(sample->hr);
      lr.push_back(sample->lr);
      batch.masks.push_back(sample->mask);
      continue;
    }
    const int c = cfg.crop_size;
    if (sample->hr.height < c || sample->hr.width < c) {
      throw ShapeError("record '" + sample->id + "' is smaller than crop_size");
    }
    // Crops start on the LR grid so the LR crop is an exact sub-window.
    const auto rows = static_cast<std::uint64_t>((sample->hr.height - c) / s + 1);
    const auto cols = static_cast<std::uint64_t>((sample->hr.width - c) / s + 1);
    const int r0 = static_cast<int>(crop_rng_() % rows);
    const int c0 = static_cast<int>(crop_rng_() % cols);
    hr.push_back(sample->hr.crop(r0 * s, c0 * s, c, c));
    lr.push_back(sample->lr.crop(r0, c0, c / s, c / s));
    batch.masks.push_back(sample->mask.crop(r0 * s, c0 * s, c, c));
  }
  const auto dtype = g_->parameters().front().scalar_type();
  batch.hr = to_batch(hr, dtype);
  batch.lr = to_batch(lr, dtype);
  return batch;
}

void Trainer::check_finite(const char* name, double value) {
  if (std::isfinite(value)) return;
  std::string where;
  if (!diagnostic_dir_.empty()) {
    const fs::path p = diagnostic_dir_ / "diagnostic.ckpt";
    save_checkpoint(p);
    where = "; state saved to " + p.string();
  }
  throw TrainingAborted(std::string(name) + " became non-finite at iteration " + std::to_string(iteration_ + 1) +
                        where);
}

void Trainer::notify(Stage stage, bool after) {
  if (observer_) observer_(stage, after);
}

StepLosses Trainer::train_step(const TrainBatch& batch) {
  const auto start = std::chrono::steady_clock::now();
  const TrainConfig& cfg = setup_.train;
  if (batch.lr.size(0) == 0) throw std::invalid_argument("train_step on an empty batch");

  StepLosses out;
  out.lr = lr_at_iteration(cfg, iteration_);
  opt_g_.set_lr(out.lr);
  opt_t1_.set_lr(out.lr);
  opt_t2_.set_lr(out.lr);
  FeatureExtractor* phi = phi_ ? &phi_ : nullptr;

  // Stage 1: reconstruction.
  notify(Stage::kReconstruction, false);
  {
    opt_g_.zero_grad();
    torch::Tensor sr = g_->forward(batch.lr);
    torch::Tensor loss = recon_loss(sr, batch.hr, cfg.weights, phi, cfg.variant == Variant::kSrnetW);
    out.j_recon = loss.item<double>();
    check_finite("j_recon", out.j_recon);
    loss.backward();
    opt_g_.step();
  }
  notify(Stage::kReconstruction, true);

  const bool adversarial = cfg.trains_t1() && iteration_ >= cfg.pretrain_iters;
  if (adversarial) {
    torch::Tensor sr_detached;
    {
      torch::NoGradGuard no_grad;
      sr_detached = g_->forward(batch.lr);
    }

    // Stage 2: whole-image critic.
    notify(Stage::kWholeImageCritic, false);
    {
      opt_t1_.zero_grad();
      torch::Tensor loss = critic_loss(t1_, batch.hr, sr_detached);
      out.j_t1 = loss.item<double>();
      check_finite("j_t1", out.j_t1);
      loss.backward();
      opt_t1_.step();
    }
    notify(Stage::kWholeImageCritic, true);

    // ROI proposals depend only on the masks.
    std::vector<RoiSelection> rois;
    if (cfg.trains_t2()) {
      const RoiOptions opts{cfg.roi_patch_size, cfg.roi_max_patches, cfg.roi_min_coverage};
      for (std::size_t i = 0; i < batch.masks.size(); ++i) {
        for (const RoiWindow& w : propose_roi_windows(batch.masks[i], opts)) {
          rois.push_back({static_cast<int>(i), w});
        }
      }
    }

    // Stage 3: ROI critic; skipped when no sample has a qualifying window.
    if (!rois.empty()) {
      notify(Stage::kRoiCritic, false);
      opt_t2_.zero_grad();
      torch::Tensor loss = critic_loss(t2_, gather_patches(batch.hr, rois), gather_patches(sr_detached, rois));
      out.j_t2 = loss.item<double>();
      check_finite("j_t2", out.j_t2);
      loss.backward();
      opt_t2_.step();
      notify(Stage::kRoiCritic, true);
    }

    // Stage 4: adversarial generator update against frozen critics.
    notify(Stage::kAdversarial, false);
    {
      FreezeGuard freeze_t1(*t1_);
      FreezeGuard freeze_t2(*t2_);
      LossWeights w = cfg.weights;
      if (!cfg.trains_t2()) w.lambda_t2 = 0.0;
      opt_g_.zero_grad();
      torch::Tensor sr = g_->forward(batch.lr);
      torch::Tensor loss = generator_adv_loss(t1_, &t2_, sr, batch.hr, rois, w);
      out.j_adv = loss.item<double>();
      check_finite("j_adv", out.j_adv);
      loss.backward();
      opt_g_.step();
    }
    notify(Stage::kAdversarial, true);
  }

  ++iteration_;
  out.iter = iteration_;
  out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  history_.push_back(out);
  if (history_.size() > kHistoryCapacity) history_.pop_front();
  return out;
}

void Trainer::save_checkpoint(const fs::path& path) const {
  BlobArchive a;
  a.put_text("meta", checkpoint_meta(setup_, iteration_).dump());
  a.put("iteration", torch::tensor({iteration_}, torch::kInt64));
  save_module(a, "G", *g_);
  save_module(a, "T1", *t1_);
  save_module(a, "T2", *t2_);
  opt_g_.save(a, "opt/G");
  opt_t1_.save(a, "opt/T1");
  opt_t2_.save(a, "opt/T2");
  a.put_text("rng/sampler", batches_.sampler().state());
  a.put_text("rng/crop", rng_text(crop_rng_));
  auto hist = torch::empty({static_cast<std::int64_t>(history_.size()), 7}, torch::kFloat64);
  for (std::size_t i = 0; i < history_.size(); ++i) {
    const auto& h = history_[i];
    const double row[7] = {static_cast<double>(h.iter), h.lr, h.j_recon, h.j_t1, h.j_t2, h.j_adv, h.wall_ms};
    for (int k = 0; k < 7; ++k) hist[static_cast<std::int64_t>(i)][k] = row[k];
  }
  a.put("history", hist);
  a.save(path);
}

void Trainer::load_checkpoint(const fs::path& path) {
  const BlobArchive a = BlobArchive::load(path);
  const auto meta = nlohmann::json::parse(a.text("meta"), nullptr, false);
  if (meta.is_discarded() || meta.value("format", "") != "pathosr-checkpoint") {
    throw CheckpointError(path.string() + " is not a training checkpoint");
  }
  if (generator_spec_from_json(meta.at("generator")) != setup_.generator ||
      critic_spec_from_json(meta.at("critic_t1")) != setup_.t1 ||
      critic_spec_from_json(meta.at("critic_t2")) != setup_.t2) {
    throw CheckpointError("checkpoint " + path.string() + " was written for different network specs");
  }

  // Stage everything into temporaries first so a failure leaves the trainer untouched.
  Generator g = build_generator(setup_.generator, 0);
  Critic t1 = build_critic(setup_.t1, 0);
  Critic t2 = build_critic(setup_.t2, 0);
  load_module(a, "G", *g);
  load_module(a, "T1", *t1);
  load_module(a, "T2", *t2);
  Adam og(params_of(*g), AdamOptions{setup_.train.base_lr});
  Adam o1(params_of(*t1), AdamOptions{setup_.train.base_lr});
  Adam o2(params_of(*t2), AdamOptions{setup_.train.base_lr});
  og.load(a, "opt/G");
  o1.load(a, "opt/T1");
  o2.load(a, "opt/T2");
  BatchSampler sampler = batches_.sampler();
  sampler.restore(a.text("rng/sampler"));
  std::mt19937_64 crop_rng;
  {
    std::istringstream is(a.text("rng/crop"));
    is >> crop_rng;
    if (!is) throw CheckpointError("corrupt crop RNG state in " + path.string());
  }
  std::deque<StepLosses> history;
  const auto& hist = a.tensor("history");
  if (hist.dim() != 2 || (hist.size(0) > 0 && hist.size(1) != 7)) throw CheckpointError("corrupt loss history");
  for (std::int64_t i = 0; i < hist.size(0); ++i) {
    auto row = hist[i];
    history.push_back({static_cast<std::int64_t>(row[0].item<double>()), row[1].item<double>(),
                       row[2].item<double>(), row[3].item<double>(), row[4].item<double>(),
                       row[5].item<double>(), row[6].item<double>()});
  }

  torch::NoGradGuard no_grad;
  auto copy_params = [](torch::nn::Module& dst, torch::nn::Module& src) {
    auto d = dst.parameters(true);
    auto s = src.parameters(true);
    for (std::size_t i = 0; i < d.size(); ++i) d[i].copy_(s[i]);
  };
  copy_params(*g_, *g);
  copy_params(*t1_, *t1);
  copy_params(*t2_, *t2);
  // Moments are re-bound to the live parameters via a save/load round trip.
  BlobArchive moments;
  og.save(moments, "G");
  o1.save(moments, "T1");
  o2.save(moments, "T2");
  opt_g_.load(moments, "G");
  opt_t1_.load(moments, "T1");
  opt_t2_.load(moments, "T2");
  batches_.sampler() = sampler;
  crop_rng_ = crop_rng;
  history_ = std::move(history);
  iteration_ = a.tensor("iteration").item<std::int64_t>();
}

void Trainer::save_triptych(const fs::path& path) {
  const int s = setup_.train.linear_scale;
  const SamplePair& sample = batches_.cache().get(0);
  Image hr = sample.hr, lr = sample.lr;
  if (setup_.train.crop_size > 0) {
    const int c = setup_.train.crop_size;
    hr = hr.crop(0, 0, c, c);
    lr = lr.crop(0, 0, c / s, c / s);
  }
  const Image sr = upscale_to(generator_forward(g_, lr), 1, hr.height, hr.width, false);
  const Image up = upscale_to(lr, s, hr.height, hr.width, false);

  constexpr int kGap = 4;
  Image panel(hr.height, hr.width * 3 + kGap * 2, hr.channels, 1.0f);
  const Image* parts[3] = {&up, &sr, &hr};
  for (int p = 0; p < 3; ++p) {
    const int x0 = p * (hr.width + kGap);
    for (int r = 0; r < hr.height; ++r) {
      for (int c = 0; c < hr.width; ++c) {
        for (int k = 0; k < hr.channels; ++k) panel.at(r, x0 + c, k) = parts[p]->at(r, c, k);
      }
    }
  }
  save_image(panel, path);
}

void Trainer::fit(const fs::path& out_dir, bool resume, const std::function<void(const StepLosses&)>& progress) {
  const TrainConfig& cfg = setup_.train;
  fs::create_directories(out_dir);
  diagnostic_dir_ = out_dir;
  const fs::path log_path = out_dir / "train_log.csv";
  const fs::path latest = out_dir / "latest.ckpt";

  std::vector<std::string> kept_rows;
  if (resume && fs::exists(latest)) {
    load_checkpoint(latest);
    log::info("resumed from " + latest.string() + " at iteration " + std::to_string(iteration_));
    // Drop log rows written after the checkpoint so the log stays consistent.
    std::ifstream in(log_path);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      if (!line.empty() && std::stoll(line.substr(0, line.find(','))) <= iteration_) kept_rows.push_back(line);
    }
  } else if (resume) {
    log::warn("no checkpoint in " + out_dir.string() + "; starting from scratch");
  }
  {
    std::ofstream log(log_path, std::ios::trunc);
    log << kLogHeader << '\n';
    for (const auto& row : kept_rows) log << row << '\n';
  }
  std::ofstream log(log_path, std::ios::app);

  while (iteration_ < cfg.total_iters) {
    const StepLosses s = train_step(next_batch());
    log << format_log_row(s) << '\n';
    if (progress) progress(s);
    if (iteration_ % cfg.checkpoint_interval == 0 || iteration_ == cfg.total_iters) {
      log.flush();
      char name[64];
      std::snprintf(name, sizeof name, "ckpt_%08lld.ckpt", static_cast<long long>(iteration_));
      save_checkpoint(out_dir / name);
      save_checkpoint(latest);
      std::snprintf(name, sizeof name, "iter_%08lld.png", static_cast<long long>(iteration_));
      save_triptych(out_dir / "samples" / name);
    }
  }
  log.flush();
  save_checkpoint(out_dir / "final.ckpt");
}

LoadedGenerator load_generator(const fs::path& checkpoint) {
  const BlobArchive a = BlobArchive::load(checkpoint);
  const auto meta = nlohmann::json::parse(a.text("meta"), nullptr, false);
  if (meta.is_discarded() || !meta.contains("generator")) {
    throw CheckpointError(checkpoint.string() + " has no generator description");
  }
  LoadedGenerator out{nullptr, generator_spec_from_json(meta.at("generator")), meta.value("iteration", 0LL)};
  out.generator = build_generator(out.spec, 0);
  load_module(a, "G", *out.generator);
  out.generator->eval();
  return out;
}

}  // namespace pathosr
