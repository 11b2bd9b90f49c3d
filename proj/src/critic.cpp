#include "pathosr/critic.hpp"

#include <stdexcept>

#include "pathosr/errors.hpp"
#include "pathosr/params.hpp"

namespace pathosr {

namespace nn = torch::nn;

std::vector<ConvStage> CriticSpec::default_stages() {
  return {{64, 1}, {64, 2}, {128, 1}, {128, 2}, {256, 1}, {256, 2}, {512, 1}, {512, 2}, {512, 1}, {512, 2}};
}

void CriticSpec::validate() const {
  if (in_channels < 1) throw ConfigError("critic in_channels must be positive");
  if (conv_stages.empty()) throw ConfigError("critic needs at least one conv stage");
  if (!(leak > 0.0)) throw ConfigError("critic leak must be positive");
  if (head_hidden < 1) throw ConfigError("critic head_hidden must be positive");
  int reduction = 1;
  for (const auto& s : conv_stages) {
    if (s.channels < 1 || s.stride < 1) throw ConfigError("critic stage channels and stride must be positive");
    reduction *= s.stride;
  }
  if (input_height < 1 || input_width < 1 || input_height % reduction != 0 || input_width % reduction != 0) {
    throw ConfigError("critic input " + std::to_string(input_height) + "x" + std::to_string(input_width) +
                      " is not divisible by the stride pyramid (" + std::to_string(reduction) + ")");
  }
}

CriticImpl::CriticImpl(const CriticSpec& spec) : spec_(spec) {
  spec_.validate();
  int in = spec.in_channels;
  for (const auto& s : spec.conv_stages) {
    convs_->push_back(nn::Conv2d(nn::Conv2dOptions(in, s.channels, 3).stride(s.stride).padding(1)));
    in = s.channels;
  }
  register_module("convs", convs_);
  hidden_ = register_module("hidden", nn::Linear(in, spec.head_hidden));
  score_ = register_module("score", nn::Linear(spec.head_hidden, 1));
}

torch::Tensor CriticImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != spec_.in_channels || x.size(2) != spec_.input_height ||
      x.size(3) != spec_.input_width) {
    throw ShapeError("critic expects [N, " + std::to_string(spec_.in_channels) + ", " +
                     std::to_string(spec_.input_height) + ", " + std::to_string(spec_.input_width) + "] input");
  }
  torch::Tensor h = x;
  for (auto& conv : *convs_) h = torch::leaky_relu(conv->as<nn::Conv2d>()->forward(h), spec_.leak);
  h = h.mean({2, 3});
  h = torch::leaky_relu(hidden_->forward(h), spec_.leak);
  return score_->forward(h).squeeze(1);
}

Critic build_critic(const CriticSpec& spec, std::uint64_t seed) {
  Critic c(spec);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (const auto& item : c->named_modules()) {
    auto& m = *item.value();
    if (m.as<nn::Conv2dImpl>() != nullptr || m.as<nn::LinearImpl>() != nullptr) init_kaiming(m, gen);
  }
  return c;
}

torch::Tensor relativistic_prob_from_scores(const torch::Tensor& scores_a, const torch::Tensor& scores_b) {
  if (scores_b.numel() == 0) throw std::invalid_argument("relativistic_prob: reference batch is empty");
  return torch::sigmoid(scores_a - scores_b.mean());
}

torch::Tensor relativistic_prob(Critic& critic, const torch::Tensor& a, const torch::Tensor& b) {
  if (b.dim() == 0 || b.size(0) == 0) throw std::invalid_argument("relativistic_prob: reference batch is empty");
  return relativistic_prob_from_scores(critic->forward(a), critic->forward(b));
}

}  // namespace pathosr
