#pragma once

#include <cstdint>

#include <torch/torch.h>

namespace pathosr {

/// FNV-1a over parameter names and raw bytes. Any change to any parameter
/// changes the hash; used to assert stage isolation.
std::uint64_t parameter_hash(const torch::nn::Module& module);

std::int64_t parameter_count(const torch::nn::Module& module);

/// Toggles requires_grad on every parameter of `module` for the guard's
/// lifetime, restoring the previous flags on destruction.
class FreezeGuard {
 public:
  explicit FreezeGuard(torch::nn::Module& module);
  ~FreezeGuard();
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<torch::Tensor> params_;
  std::vector<bool> previous_;
};

/// Kaiming (fan-in) normal initialisation scaled by `gain`, drawn from `gen`.
/// Biases are zeroed.
void init_kaiming(torch::nn::Module& module, at::Generator& gen, double gain = 1.0);

}  // namespace pathosr
