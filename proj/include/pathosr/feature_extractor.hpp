#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

namespace pathosr {

/// Layout of a VGG-family feature stack. Positive entries are 3x3 conv widths,
/// zero marks a 2x2 max-pool. The extractor returns the pre-activation output
/// of conv number `tap_conv` (1-based).
struct FeatureExtractorSpec {
  std::vector<int> layers;
  int tap_conv = 1;
  bool imagenet_normalize = true;

  /// VGG-19 trunk tapped at conv5_4 (the 16th convolution).
  static FeatureExtractorSpec vgg19(int tap_conv = 16);

  void validate() const;
};

/// Frozen convolutional feature map used by the perceptual term.
class FeatureExtractorImpl : public torch::nn::Module {
 public:
  explicit FeatureExtractorImpl(const FeatureExtractorSpec& spec);

  /// [N, 1|3, H, W] in [0, 1] -> features at the tap point.
  torch::Tensor forward(const torch::Tensor& x);
  const FeatureExtractorSpec& spec() const noexcept { return spec_; }

  /// Parameter names follow torchvision's `features.<index>` numbering so
  /// exported VGG weights load without renaming.
  void freeze();

 private:
  FeatureExtractorSpec spec_;
  std::vector<torch::nn::Conv2d> convs_;
  std::vector<int> pools_after_;  // number of pools preceding each conv
};
TORCH_MODULE(FeatureExtractor);

/// Loads weights written by tools/export_vgg19.py (blob archive with
/// `features.<i>.weight` / `features.<i>.bias` entries).
FeatureExtractor load_feature_extractor(const std::filesystem::path& path,
                                        const FeatureExtractorSpec& spec = FeatureExtractorSpec::vgg19());

/// Randomly initialised frozen extractor; a stand-in when no pretrained weights exist.
FeatureExtractor random_feature_extractor(const FeatureExtractorSpec& spec, std::uint64_t seed);

}  // namespace pathosr
