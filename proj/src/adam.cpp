#include "pathosr/adam.hpp"

#include <cmath>

#include "pathosr/checkpoint.hpp"
#include "pathosr/errors.hpp"

namespace pathosr {

Adam::Adam(std::vector<torch::Tensor> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    exp_avg_.push_back(torch::zeros_like(p));
    exp_avg_sq_.push_back(torch::zeros_like(p));
  }
}

void Adam::zero_grad() {
  for (auto& p : params_) {
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
}

void Adam::step() {
  torch::NoGradGuard no_grad;
  ++steps_;
  const double bias1 = 1.0 - std::pow(options_.beta1, static_cast<double>(steps_));
  const double bias2 = 1.0 - std::pow(options_.beta2, static_cast<double>(steps_));
  const double step_size = options_.lr / bias1;
  const double bias2_sqrt = std::sqrt(bias2);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const torch::Tensor& g = params_[i].grad();
    if (!g.defined()) continue;
    exp_avg_[i].mul_(options_.beta1).add_(g, 1.0 - options_.beta1);
    exp_avg_sq_[i].mul_(options_.beta2).addcmul_(g, g, 1.0 - options_.beta2);
    auto denom = (exp_avg_sq_[i].sqrt() / bias2_sqrt).add_(options_.eps);
    params_[i].addcdiv_(exp_avg_[i], denom, -step_size);
  }
}

void Adam::save(BlobArchive& archive, const std::string& prefix) const {
  archive.put(prefix + "/steps", torch::tensor({steps_}, torch::kInt64));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    archive.put(prefix + "/m/" + std::to_string(i), exp_avg_[i]);
    archive.put(prefix + "/v/" + std::to_string(i), exp_avg_sq_[i]);
  }
}

void Adam::load(const BlobArchive& archive, const std::string& prefix) {
  std::vector<torch::Tensor> m, v;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const auto& mi = archive.tensor(prefix + "/m/" + std::to_string(i));
    const auto& vi = archive.tensor(prefix + "/v/" + std::to_string(i));
    if (mi.sizes() != params_[i].sizes() || vi.sizes() != params_[i].sizes()) {
      throw CheckpointError("optimizer state '" + prefix + "' does not match the network");
    }
    m.push_back(mi.to(params_[i].scalar_type()).clone());
    v.push_back(vi.to(params_[i].scalar_type()).clone());
  }
  steps_ = archive.tensor(prefix + "/steps").item<std::int64_t>();
  exp_avg_ = std::move(m);
  exp_avg_sq_ = std::move(v);
}

}  // namespace pathosr
