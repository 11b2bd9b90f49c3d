#include "pathosr/losses.hpp"

#include <cmath>
#include <stdexcept>

#include "pathosr/errors.hpp"

namespace pathosr {

namespace F = torch::nn::functional;

void LossWeights::validate() const {
  for (double v : {eta, lambda_t1, lambda_t2, alpha_edge}) {
    if (!std::isfinite(v) || v < 0.0) throw ConfigError("loss weights must be finite and non-negative");
  }
}

torch::Tensor edge_weight_map(const torch::Tensor& hr, double alpha) {
  torch::NoGradGuard no_grad;
  if (hr.dim() != 4) throw ShapeError("edge_weight_map expects [N, C, H, W]");
  torch::Tensor y;
  if (hr.size(1) == 3) {
    auto coeffs = torch::tensor({0.299, 0.587, 0.114}, hr.options()).view({1, 3, 1, 1});
    y = (hr * coeffs).sum(1, true);
  } else if (hr.size(1) == 1) {
    y = hr;
  } else {
    throw ShapeError("edge_weight_map expects 1 or 3 channels");
  }
  // Sobel as explicit shifted differences: exact zeros on flat regions,
  // which a convolution kernel does not guarantee.
  auto p = F::pad(y, F::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate));
  const auto h = y.size(2), w = y.size(3);
  auto at = [&](int dr, int dc) { return p.narrow(2, 1 + dr, h).narrow(3, 1 + dc, w); };
  auto gx = (at(-1, 1) - at(-1, -1)) + 2.0 * (at(0, 1) - at(0, -1)) + (at(1, 1) - at(1, -1));
  auto gy = (at(1, -1) - at(-1, -1)) + 2.0 * (at(1, 0) - at(-1, 0)) + (at(1, 1) - at(-1, 1));
  auto mag = torch::sqrt(gx * gx + gy * gy);
  auto peak = std::get<0>(mag.flatten(1).max(1)).view({-1, 1, 1, 1});
  auto normalised = torch::where(peak > 0, mag / peak.clamp_min(1e-300), torch::zeros_like(mag));
  return 1.0 + alpha * normalised;
}

Image edge_weight_map(const Image& hr, double alpha) {
  return from_tensor(edge_weight_map(to_tensor(hr, torch::kFloat64).unsqueeze(0), alpha));
}

torch::Tensor recon_loss(const torch::Tensor& sr, const torch::Tensor& hr, const LossWeights& w,
                         FeatureExtractor* phi, bool edge_weighted) {
  if (sr.sizes() != hr.sizes()) throw ShapeError("recon_loss: sr and hr shapes differ");
  torch::Tensor abs_err = (sr - hr).abs();
  torch::Tensor pixel = edge_weighted ? (edge_weight_map(hr, w.alpha_edge) * abs_err).mean() : abs_err.mean();
  torch::Tensor loss = w.eta * pixel;
  if (phi != nullptr && *phi) {
    torch::Tensor target;
    {
      torch::NoGradGuard no_grad;
      target = (*phi)->forward(hr);
    }
    loss = loss + ((*phi)->forward(sr) - target).pow(2).mean();
  }
  return loss;
}

torch::Tensor relativistic_pair_loss(const torch::Tensor& scores_a, const torch::Tensor& scores_b) {
  if (scores_a.numel() == 0 || scores_b.numel() == 0) {
    throw std::invalid_argument("relativistic loss on an empty batch");
  }
  auto p_ab = relativistic_prob_from_scores(scores_a, scores_b).clamp(kProbEpsilon, 1.0 - kProbEpsilon);
  auto p_ba = relativistic_prob_from_scores(scores_b, scores_a).clamp(kProbEpsilon, 1.0 - kProbEpsilon);
  return -p_ab.log().mean() - (1.0 - p_ba).log().mean();
}

torch::Tensor critic_loss(Critic& critic, const torch::Tensor& real, const torch::Tensor& fake) {
  if (real.dim() == 0 || fake.dim() == 0 || real.size(0) == 0 || fake.size(0) == 0) {
    throw std::invalid_argument("critic_loss on an empty batch");
  }
  return relativistic_pair_loss(critic->forward(real), critic->forward(fake));
}

torch::Tensor gather_patches(const torch::Tensor& batch, std::span<const RoiSelection> rois) {
  std::vector<torch::Tensor> patches;
  patches.reserve(rois.size());
  for (const RoiSelection& r : rois) {
    const auto& w = r.window;
    if (r.sample < 0 || r.sample >= batch.size(0) || w.row + w.size > batch.size(2) ||
        w.col + w.size > batch.size(3)) {
      throw ShapeError("ROI window outside batch tensor");
    }
    patches.push_back(batch[r.sample].narrow(1, w.row, w.size).narrow(2, w.col, w.size));
  }
  if (patches.empty()) throw ShapeError("gather_patches on empty selection");
  return torch::stack(patches);
}

torch::Tensor generator_adv_loss(Critic& t1, Critic* t2, const torch::Tensor& sr, const torch::Tensor& hr,
                                 std::span<const RoiSelection> rois, const LossWeights& w) {
  if (sr.sizes() != hr.sizes()) throw ShapeError("generator_adv_loss: sr and hr shapes differ");
  // Roles are swapped relative to the critic objective: the generator wants
  // its outputs judged more realistic than the real images.
  torch::Tensor loss = w.lambda_t1 * relativistic_pair_loss(t1->forward(sr), t1->forward(hr));
  if (t2 != nullptr && w.lambda_t2 > 0.0 && !rois.empty()) {
    torch::Tensor x_sr = gather_patches(sr, rois);
    torch::Tensor x_hr = gather_patches(hr, rois);
    loss = loss + w.lambda_t2 * relativistic_pair_loss((*t2)->forward(x_sr), (*t2)->forward(x_hr));
  }
  return loss;
}

}  // namespace pathosr
