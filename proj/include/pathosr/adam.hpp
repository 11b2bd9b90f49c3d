#pragma once

#include <string>
#include <vector>

#include <torch/torch.h>

namespace pathosr {

class BlobArchive;

struct AdamOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are plain tensors so a checkpoint can
/// restore them exactly.
class Adam {
 public:
  Adam(std::vector<torch::Tensor> params, AdamOptions options);

  void zero_grad();
  /// Updates every parameter that has a gradient.
  void step();

  void set_lr(double lr) noexcept { options_.lr = lr; }
  double lr() const noexcept { return options_.lr; }
  std::int64_t steps() const noexcept { return steps_; }

  void save(BlobArchive& archive, const std::string& prefix) const;
  void load(const BlobArchive& archive, const std::string& prefix);

 private:
  std::vector<torch::Tensor> params_;
  std::vector<torch::Tensor> exp_avg_;
  std::vector<torch::Tensor> exp_avg_sq_;
  AdamOptions options_;
  std::int64_t steps_ = 0;
};

}  // namespace pathosr
