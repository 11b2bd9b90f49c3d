#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pathosr/image.hpp"

namespace pathosr {

/// 18 MSCN statistics per scale, two scales.
inline constexpr int kNiqeFeatureDim = 36;

/// Multivariate Gaussian fitted to patch features of pristine images.
///
/// File layout (little-endian): magic "PSRNIQE\0" | u32 version | u32 dim |
/// u32 patch size | f64 mean[dim] | f64 covariance[dim * dim] (row-major).
struct NiqeModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  int patch_size = 96;
  std::vector<double> mean;
  std::vector<double> covariance;

  void save(const std::filesystem::path& path) const;
  static NiqeModel load(const std::filesystem::path& path);
};

/// Per-patch feature rows (36 values each) of one image, computed on the
/// 0..255 luma over non-overlapping patch_size blocks. When `sharpness_fraction`
/// is set, only blocks whose mean local deviation exceeds that fraction of
/// the image maximum are kept (used for the pristine fit).
std::vector<std::vector<double>> niqe_patch_features(const Image& img, int patch_size,
                                                     std::optional<double> sharpness_fraction = std::nullopt);

/// Fits the pristine model from a corpus (blocks sharper than 0.75 of each
/// image's maximum). Throws std::invalid_argument if no usable patch exists.
NiqeModel fit_niqe_model(const std::vector<Image>& pristine, int patch_size = 96, double sharpness_fraction = 0.75);

/// Distance between the image's feature MVG and the pristine MVG; lower is
/// more natural. Throws ShapeError for images smaller than one patch.
double niqe(const Image& img, const NiqeModel& model);

/// Model shipped with the project (fitted from the corpus documented in data/README.md).
NiqeModel default_niqe_model();
std::filesystem::path default_niqe_model_path();

/// Returns Ma et al.'s no-reference score for an image, or nullopt on failure.
using MaScorer = std::function<std::optional<double>(const Image&)>;

/// Runs `command <png path>` and parses the first number printed on stdout.
MaScorer external_ma_scorer(std::string command);

/// 0.5 * ((10 - ma) + niqe).
double perceptual_index(double ma, double niqe_score) noexcept;

/// Perceptual index of an image, or nullopt when no Ma scorer is available or it fails.
std::optional<double> perceptual_index(const Image& img, const NiqeModel& model, const MaScorer* ma_scorer);

}  // namespace pathosr
