#include "pathosr/feature_extractor.hpp"

#include "pathosr/checkpoint.hpp"
#include "pathosr/errors.hpp"
#include "pathosr/params.hpp"

namespace pathosr {

namespace nn = torch::nn;

FeatureExtractorSpec FeatureExtractorSpec::vgg19(int tap_conv) {
  FeatureExtractorSpec s;
  s.layers = {64, 64, 0, 128, 128, 0, 256, 256, 256, 256, 0, 512, 512, 512, 512, 0, 512, 512, 512, 512};
  s.tap_conv = tap_conv;
  return s;
}

void FeatureExtractorSpec::validate() const {
  int convs = 0;
  for (int l : layers) {
    if (l < 0) throw ConfigError("feature extractor layer widths must be >= 0");
    convs += l > 0 ? 1 : 0;
  }
  if (tap_conv < 1 || tap_conv > convs) throw ConfigError("feature extractor tap_conv out of range");
}

FeatureExtractorImpl::FeatureExtractorImpl(const FeatureExtractorSpec& spec) : spec_(spec) {
  spec_.validate();
  int in = 3, index = 0, pools = 0;
  for (int width : spec_.layers) {
    if (width == 0) {
      ++pools;
      index += 1;
      continue;
    }
    if (static_cast<int>(convs_.size()) == spec_.tap_conv) break;
    auto conv = nn::Conv2d(nn::Conv2dOptions(in, width, 3).padding(1));
    convs_.push_back(register_module("features_" + std::to_string(index), conv));
    pools_after_.push_back(pools);
    in = width;
    index += 2;  // conv + relu
  }
}

void FeatureExtractorImpl::freeze() {
  for (auto& p : parameters()) p.set_requires_grad(false);
  eval();
}

torch::Tensor FeatureExtractorImpl::forward(const torch::Tensor& x) {
  torch::Tensor h = x.size(1) == 1 ? x.repeat({1, 3, 1, 1}) : x;
  if (spec_.imagenet_normalize) {
    auto mean = torch::tensor({0.485, 0.456, 0.406}, h.options()).view({1, 3, 1, 1});
    auto std = torch::tensor({0.229, 0.224, 0.225}, h.options()).view({1, 3, 1, 1});
    h = (h - mean) / std;
  }
  int pools_done = 0;
  for (std::size_t i = 0; i < convs_.size(); ++i) {
    for (; pools_done < pools_after_[i]; ++pools_done) h = torch::max_pool2d(h, 2);
    h = convs_[i]->forward(h);
    if (i + 1 < convs_.size()) h = torch::relu(h);
  }
  return h;
}

FeatureExtractor load_feature_extractor(const std::filesystem::path& path, const FeatureExtractorSpec& spec) {
  FeatureExtractor fx(spec);
  const BlobArchive archive = BlobArchive::load(path);
  torch::NoGradGuard no_grad;
  for (auto& item : fx->named_parameters(true)) {
    // features_<i>.weight -> features.<i>.weight
    std::string name = item.key();
    name.replace(name.find('_'), 1, ".");
    if (!archive.contains(name)) throw CheckpointError("feature weights missing '" + name + "' in " + path.string());
    const torch::Tensor& src = archive.tensor(name);
    if (src.sizes() != item.value().sizes()) {
      throw CheckpointError("feature weights '" + name + "' have the wrong shape in " + path.string());
    }
    item.value().copy_(src);
  }
  fx->freeze();
  return fx;
}

FeatureExtractor random_feature_extractor(const FeatureExtractorSpec& spec, std::uint64_t seed) {
  FeatureExtractor fx(spec);
  auto gen = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (const auto& item : fx->named_children()) init_kaiming(*item.value(), gen);
  fx->freeze();
  return fx;
}

}  // namespace pathosr
