#include "pathosr/generator.hpp"

#include "pathosr/errors.hpp"
#include "pathosr/params.hpp"
#include "pathosr/resample.hpp"

namespace pathosr {

namespace nn = torch::nn;

namespace {

constexpr double kLeak = 0.2;

nn::Conv2d conv3x3(int in, int out) { return nn::Conv2d(nn::Conv2dOptions(in, out, 3).padding(1)); }

torch::Tensor lrelu(const torch::Tensor& x) { return torch::leaky_relu(x, kLeak); }

}  // namespace

void GeneratorSpec::validate() const {
  if (in_channels != 1 && in_channels != 3) throw ConfigError("generator in_channels must be 1 or 3");
  if (n_rrdb_blocks < 1) throw ConfigError("generator needs at least one RRDB block");
  if (base_channels < 1 || growth_channels < 1) throw ConfigError("generator channel counts must be positive");
  if (!(residual_scaling > 0.0 && residual_scaling <= 1.0)) {
    throw ConfigError("residual_scaling must lie in (0, 1]");
  }
  if (!is_supported_scale(linear_scale)) {
    throw ConfigError("unsupported generator scale " + std::to_string(linear_scale));
  }
}

std::vector<int> GeneratorSpec::upsampling_stages() const {
  switch (linear_scale) {
    case 2: return {2};
    case 3: return {3};
    case 4: return {2, 2};
    case 8: return {2, 2, 2};
    default: throw ConfigError("unsupported generator scale " + std::to_string(linear_scale));
  }
}

ResidualDenseBlockImpl::ResidualDenseBlockImpl(int channels, int growth, double residual_scaling)
    : residual_scaling_(residual_scaling) {
  for (int i = 0; i < 5; ++i) {
    const int in = channels + i * growth;
    const int out = i == 4 ? channels : growth;
    convs_.push_back(register_module("conv" + std::to_string(i + 1), conv3x3(in, out)));
  }
}

torch::Tensor ResidualDenseBlockImpl::forward(const torch::Tensor& x) {
  std::vector<torch::Tensor> features{x};
  for (std::size_t i = 0; i < 4; ++i) {
    features.push_back(lrelu(convs_[i]->forward(torch::cat(features, 1))));
  }
  return convs_[4]->forward(torch::cat(features, 1)) * residual_scaling_ + x;
}

RRDBImpl::RRDBImpl(int channels, int growth, double residual_scaling) : residual_scaling_(residual_scaling) {
  for (int i = 0; i < 3; ++i) blocks_->push_back(ResidualDenseBlock(channels, growth, residual_scaling));
  register_module("blocks", blocks_);
}

torch::Tensor RRDBImpl::forward(const torch::Tensor& x) { return blocks_->forward(x) * residual_scaling_ + x; }

GeneratorImpl::GeneratorImpl(const GeneratorSpec& spec) : spec_(spec) {
  spec_.validate();
  const int nf = spec.base_channels;
  head_ = register_module("head", conv3x3(spec.in_channels, nf));
  for (int i = 0; i < spec.n_rrdb_blocks; ++i) {
    trunk_->push_back(RRDB(nf, spec.growth_channels, spec.residual_scaling));
  }
  register_module("trunk", trunk_);
  trunk_tail_ = register_module("trunk_tail", conv3x3(nf, nf));
  for (int factor : spec_.upsampling_stages()) {
    upsample_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(nf, nf, factor).stride(factor)));
  }
  register_module("upsample", upsample_);
  hr_conv_ = register_module("hr_conv", conv3x3(nf, nf));
  out_conv_ = register_module("out_conv", conv3x3(nf, spec.in_channels));
}

torch::Tensor GeneratorImpl::forward(const torch::Tensor& lr) {
  torch::Tensor feat = head_->forward(lr);
  feat = feat + trunk_tail_->forward(trunk_->forward(feat));
  for (auto& stage : *upsample_) {
    feat = lrelu(stage->as<nn::ConvTranspose2d>()->forward(feat));
  }
  return out_conv_->forward(lrelu(hr_conv_->forward(feat)));
}

Generator build_generator(const GeneratorSpec& spec, std::uint64_t seed) {
  Generator g(spec);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  // named_modules is ordered, so the draw sequence is fixed for a given spec.
  for (const auto& item : g->named_modules()) {
    auto& m = *item.value();
    if (m.as<nn::Conv2dImpl>() == nullptr && m.as<nn::ConvTranspose2dImpl>() == nullptr) continue;
    const bool in_dense_block = item.key().find("trunk.") == 0;
    init_kaiming(m, gen, in_dense_block ? 0.1 : 1.0);
  }
  return g;
}

torch::Tensor generator_forward(Generator& g, const torch::Tensor& lr, int border) {
  if (lr.dim() != 4 || lr.size(1) != g->spec().in_channels) {
    throw ShapeError("generator expects [N, " + std::to_string(g->spec().in_channels) + ", H, W] input");
  }
  torch::NoGradGuard no_grad;
  if (border <= 0) return g->forward(lr).clamp(0.0, 1.0);
  namespace F = torch::nn::functional;
  const auto padded = F::pad(lr, F::PadFuncOptions({border, border, border, border}).mode(torch::kReplicate));
  const int s = g->spec().linear_scale;
  return g->forward(padded)
      .narrow(2, s * border, s * lr.size(2))
      .narrow(3, s * border, s * lr.size(3))
      .clamp(0.0, 1.0);
}

Image generator_forward(Generator& g, const Image& lr, int border) {
  if (lr.channels != g->spec().in_channels) throw ShapeError("LR channel count does not match generator");
  const auto dtype = g->parameters().front().scalar_type();
  return from_tensor(generator_forward(g, to_tensor(lr, dtype).unsqueeze(0), border));
}

}  // namespace pathosr
