#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <torch/torch.h>

namespace pathosr {

struct ConvStage {
  int channels = 64;
  int stride = 1;
  friend bool operator==(const ConvStage&, const ConvStage&) = default;
};

/// VGG-style critic: 3x3 conv + leaky ReLU stages, global average pooling,
/// then two dense layers down to one logit per image.
struct CriticSpec {
  int input_height = 128;
  int input_width = 128;
  int in_channels = 3;
  std::vector<ConvStage> conv_stages = default_stages();
  double leak = 0.2;
  int head_hidden = 100;

  /// The 10-stage, /32 layout used for 128 x 128 inputs.
  static std::vector<ConvStage> default_stages();

  /// Throws ConfigError when the input size does not divide by the product of
  /// the strides or the leak is not positive.
  void validate() const;

  friend bool operator==(const CriticSpec&, const CriticSpec&) = default;
};

class CriticImpl : public torch::nn::Module {
 public:
  explicit CriticImpl(const CriticSpec& spec);

  /// [N, C, H, W] -> [N] logits. H, W must equal the spec's input size.
  torch::Tensor forward(const torch::Tensor& x);
  const CriticSpec& spec() const noexcept { return spec_; }

 private:
  CriticSpec spec_;
  torch::nn::ModuleList convs_;
  torch::nn::Linear hidden_{nullptr};
  torch::nn::Linear score_{nullptr};
};
TORCH_MODULE(Critic);

Critic build_critic(const CriticSpec& spec, std::uint64_t seed);

/// sigma(C(a_i) - mean_j C(b_j)) for every element of `a`, from raw logits.
torch::Tensor relativistic_prob_from_scores(const torch::Tensor& scores_a, const torch::Tensor& scores_b);

/// Probability that each a_i is more realistic than the average b.
/// Throws std::invalid_argument when `b` is empty.
torch::Tensor relativistic_prob(Critic& critic, const torch::Tensor& a, const torch::Tensor& b);

}  // namespace pathosr
