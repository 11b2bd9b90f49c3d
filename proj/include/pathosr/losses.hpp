#pragma once

#include <span>

#include <torch/torch.h>

#include "pathosr/critic.hpp"
#include "pathosr/feature_extractor.hpp"
#include "pathosr/image.hpp"
#include "pathosr/roi.hpp"

namespace pathosr {

/// Probabilities are clamped into [eps, 1 - eps] before taking logs.
inline constexpr double kProbEpsilon = 1e-7;

struct LossWeights {
  double eta = 1e-2;        ///< pixel term of the reconstruction loss
  double lambda_t1 = 5e-3;  ///< whole-image critic term of the adversarial loss
  double lambda_t2 = 5e-3;  ///< ROI critic term of the adversarial loss
  double alpha_edge = 1.0;  ///< edge emphasis of the weighted pixel term

  void validate() const;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// 1 + alpha * |Sobel(luma)| / max|Sobel(luma)| per image, replicate-padded.
/// [N, C, H, W] -> [N, 1, H, W]; identically 1 where the image has no gradient.
torch::Tensor edge_weight_map(const torch::Tensor& hr, double alpha);
Image edge_weight_map(const Image& hr, double alpha);

/// eta * mean|sr - hr| + mean (phi(sr) - phi(hr))^2. With `edge_weighted`
/// the pixel term becomes eta * mean(w_edge * |sr - hr|). `phi` may be null,
/// which drops the perceptual term.
torch::Tensor recon_loss(const torch::Tensor& sr, const torch::Tensor& hr, const LossWeights& w,
                         FeatureExtractor* phi, bool edge_weighted);

/// -E_a[log T(a, b)] - E_b[log(1 - T(b, a))] from critic logits of two batches.
torch::Tensor relativistic_pair_loss(const torch::Tensor& scores_a, const torch::Tensor& scores_b);

/// Critic objective on (real, fake). The caller passes `fake` detached from
/// the generator graph.
torch::Tensor critic_loss(Critic& critic, const torch::Tensor& real, const torch::Tensor& fake);

/// One ROI window belonging to sample `sample` of a batch.
struct RoiSelection {
  int sample = 0;
  RoiWindow window;
};

/// Stacks the selected windows of `batch` into [K, C, p, p]. Slicing keeps the
/// autograd connection to `batch`.
torch::Tensor gather_patches(const torch::Tensor& batch, std::span<const RoiSelection> rois);

/// Generator objective against frozen critics:
///   lambda_t1 * pair_loss(T1(sr), T1(hr)) + lambda_t2 * pair_loss(T2(x_sr), T2(x_hr)).
/// The ROI term is zero when `t2` is null, lambda_t2 is zero or `rois` is empty.
torch::Tensor generator_adv_loss(Critic& t1, Critic* t2, const torch::Tensor& sr, const torch::Tensor& hr,
                                 std::span<const RoiSelection> rois, const LossWeights& w);

}  // namespace pathosr
