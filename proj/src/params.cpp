#include "pathosr/params.hpp"

#include <cmath>

namespace pathosr {
namespace {

constexpr std::uint64_t kFnvOffset = 14695981039346656037ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

void fnv_mix(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= kFnvPrime;
  }
}

}  // namespace

std::uint64_t parameter_hash(const torch::nn::Module& module) {
  std::uint64_t h = kFnvOffset;
  for (const auto& item : module.named_parameters(true)) {
    fnv_mix(h, item.key().data(), item.key().size());
    torch::Tensor t = item.value().detach().contiguous().cpu();
    fnv_mix(h, t.data_ptr(), static_cast<std::size_t>(t.numel()) * t.element_size());
  }
  return h;
}

std::int64_t parameter_count(const torch::nn::Module& module) {
  std::int64_t n = 0;
  for (const auto& p : module.parameters(true)) n += p.numel();
  return n;
}

FreezeGuard::FreezeGuard(torch::nn::Module& module) : params_(module.parameters(true)) {
  previous_.reserve(params_.size());
  for (auto& p : params_) {
    previous_.push_back(p.requires_grad());
    p.set_requires_grad(false);
  }
}

FreezeGuard::~FreezeGuard() {
  for (std::size_t i = 0; i < params_.size(); ++i) params_[i].set_requires_grad(previous_[i]);
}

void init_kaiming(torch::nn::Module& module, at::Generator& gen, double gain) {
  torch::NoGradGuard no_grad;
  for (auto& item : module.named_parameters(false)) {
    torch::Tensor& p = item.value();
    if (item.key() == "bias") {
      p.zero_();
      continue;
    }
    // Conv weight [out, in, kh, kw]; transposed conv weight [in, out, k, k]
    // whose stride equals k, so its effective fan-in is `in`.
    std::int64_t fan_in = 1;
    if (dynamic_cast<torch::nn::ConvTranspose2dImpl*>(&module) != nullptr) {
      fan_in = p.size(0);
    } else {
      for (int d = 1; d < p.dim(); ++d) fan_in *= p.size(d);
    }
    const double std = gain * std::sqrt(2.0 / static_cast<double>(fan_in));
    p.normal_(0.0, std, gen);
  }
}

}  // namespace pathosr
