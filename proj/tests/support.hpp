#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pathosr/critic.hpp"
#include "pathosr/feature_extractor.hpp"
#include "pathosr/generator.hpp"
#include "pathosr/image.hpp"
#include "pathosr/trainer.hpp"

namespace pathosr::test {

/// Unique directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "pathosr");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

std::filesystem::path test_data_dir();

/// The 512 x 512 immunohistochemistry sample used as natural test content.
const Image& ihc_image();

Image random_image(int h, int w, int c, std::mt19937_64& rng);
Image constant_image(int h, int w, int c, float value);
Image add_noise(const Image& img, double sigma, std::mt19937_64& rng);

/// Writes `n_train + n_test` crops of the IHC sample with dark-stain masks
/// plus a manifest.jsonl, returning the manifest path. Test records come last.
std::filesystem::path write_toy_corpus(const std::filesystem::path& dir, int n_train, int n_test, int size,
                                       bool with_masks = true);

/// Dark-stain mask: luma below the image's 30th percentile.
RoiMask stain_mask(const Image& img);

/// Small networks so training tests run in seconds.
GeneratorSpec tiny_generator(int linear_scale);
CriticSpec tiny_critic(int size, int channels = 3);
TrainSetup tiny_setup(int crop_size, int roi_patch, int linear_scale, Variant variant);

/// Two-stage critic and a three-layer random feature extractor (float64)
/// small enough for finite differences on 4 x 4 inputs.
CriticSpec micro_critic(int size);
FeatureExtractor micro_phi();

/// Rows of a training log with the trailing wall_ms column removed.
std::vector<std::string> loss_columns(const std::filesystem::path& csv);

/// Relative error |a - n| / max(|a|, |n|, floor) between the autograd
/// gradient `a` of the scalar `f` and its central finite difference `n`,
/// both taken over all elements of `wrt` (float64 tensors with requires_grad
/// set) as one concatenated vector.
double gradient_check(const std::function<torch::Tensor()>& f, const std::vector<torch::Tensor>& wrt,
                      double step = 1e-6, double floor = 1e-8);

/// Independent metric oracles: joint MSE in long double, and SSIM evaluated
/// window by window with explicit Gaussian-weighted moments of the luma.
double oracle_psnr(const Image& a, const Image& b);
double oracle_ssim(const Image& a, const Image& b);

}  // namespace pathosr::test
