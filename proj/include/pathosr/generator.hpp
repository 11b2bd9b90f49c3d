#pragma once

#include <cstdint>
#include <vector>

#include <torch/torch.h>

#include "pathosr/image.hpp"

namespace pathosr {

/// Hyperparameters of the RRDB super-resolution generator.
struct GeneratorSpec {
  int in_channels = 3;
  int n_rrdb_blocks = 8;
  int base_channels = 64;
  int growth_channels = 32;
  int linear_scale = 4;
  double residual_scaling = 0.2;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;

  /// Per-stage upsampling factors, e.g. 8 -> {2, 2, 2}, 3 -> {3}.
  std::vector<int> upsampling_stages() const;

  friend bool operator==(const GeneratorSpec&, const GeneratorSpec&) = default;
};

// Five densely connected 3x3 convolutions with a scaled residual.
class ResidualDenseBlockImpl : public torch::nn::Module {
 public:
  ResidualDenseBlockImpl(int channels, int growth, double residual_scaling);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  std::vector<torch::nn::Conv2d> convs_;
  double residual_scaling_;
};
TORCH_MODULE(ResidualDenseBlock);

// Residual-in-residual: three dense blocks wrapped in another scaled residual.
class RRDBImpl : public torch::nn::Module {
 public:
  RRDBImpl(int channels, int growth, double residual_scaling);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  torch::nn::Sequential blocks_;
  double residual_scaling_;
};
TORCH_MODULE(RRDB);

/// conv -> RRDB trunk (+ long skip) -> strided transposed-conv upsampling
/// stages -> two output convolutions. forward() returns the unclamped output.
class GeneratorImpl : public torch::nn::Module {
 public:
  explicit GeneratorImpl(const GeneratorSpec& spec);

  torch::Tensor forward(const torch::Tensor& lr);
  const GeneratorSpec& spec() const noexcept { return spec_; }

 private:
  GeneratorSpec spec_;
  torch::nn::Conv2d head_{nullptr};
  torch::nn::Sequential trunk_;
  torch::nn::Conv2d trunk_tail_{nullptr};
  torch::nn::ModuleList upsample_;
  torch::nn::Conv2d hr_conv_{nullptr};
  torch::nn::Conv2d out_conv_{nullptr};
};
TORCH_MODULE(Generator);

/// Deterministically initialised generator: scaled Kaiming fan-in, with the
/// dense-block convolutions additionally scaled by 0.1.
Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed);

/// LR pixels of edge replication added around inference inputs so the
/// convolutions' zero padding does not darken the output border.
inline constexpr int kInferenceBorder = 8;

/// Inference on a batch [N, C, h, w]: shape-checked, the input padded by
/// `border` replicated pixels per side, the output cropped back to s*h x s*w
/// and clamped to [0, 1].
torch::Tensor generator_forward(Generator& g, const torch::Tensor& lr, int border = kInferenceBorder);
Image generator_forward(Generator& g, const Image& lr, int border = kInferenceBorder);

}  // namespace pathosr
