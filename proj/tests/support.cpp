#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "pathosr/errors.hpp"

namespace fs = std::filesystem;

namespace pathosr::test {

TempDir::TempDir(const std::string& tag) {
  std::random_device rd;
  for (int attempt = 0; attempt < 100; ++attempt) {
    fs::path p = fs::temp_directory_path() / (tag + "-" + std::to_string(rd()));
    if (fs::create_directory(p)) {
      path_ = p;
      return;
    }
  }
  throw std::runtime_error("cannot create temp dir");
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

fs::path test_data_dir() { return PATHOSR_TEST_DATA; }

const Image& ihc_image() {
  static const Image img = load_image(test_data_dir() / "ihc.png");
  return img;
}

Image random_image(int h, int w, int c, std::mt19937_64& rng) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(h, w, c);
  for (float& v : img.pixels) v = u(rng);
  return img;
}

Image constant_image(int h, int w, int c, float value) { return Image(h, w, c, value); }

Image add_noise(const Image& img, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, sigma);
  Image out = img;
  for (float& v : out.pixels) v = static_cast<float>(std::clamp(v + n(rng), 0.0, 1.0));
  return out;
}

RoiMask stain_mask(const Image& img) {
  const Image y = luma(img);
  std::vector<float> sorted = y.pixels;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() * 3 / 10, sorted.end());
  const float threshold = sorted[sorted.size() * 3 / 10];
  RoiMask mask(img.height, img.width);
  for (int r = 0; r < img.height; ++r) {
    for (int c = 0; c < img.width; ++c) mask.at(r, c) = y.at(r, c, 0) < threshold ? 1 : 0;
  }
  return mask;
}

fs::path write_toy_corpus(const fs::path& dir, int n_train, int n_test, int size, bool with_masks) {
  fs::create_directories(dir / "hr");
  fs::create_directories(dir / "masks");
  const Image& src = ihc_image();
  const int n = n_train + n_test;
  const int per_row = std::max(1, (src.width - size) / size + 1);
  std::ofstream manifest(dir / "manifest.jsonl");
  for (int i = 0; i < n; ++i) {
    const int row = (i / per_row) * size % (src.height - size + 1);
    const int col = (i % per_row) * size;
    const Image crop = src.crop(row, col, size, size);
    char id[32];
    std::snprintf(id, sizeof id, "tile%03d", i);
    save_image(crop, dir / "hr" / (std::string(id) + ".png"));
    std::string mask_field = "null";
    if (with_masks) {
      save_mask(stain_mask(crop), dir / "masks" / (std::string(id) + ".png"));
      mask_field = "\"masks/" + std::string(id) + ".png\"";
    }
    manifest << "{\"id\": \"" << id << "\", \"hr\": \"hr/" << id << ".png\", \"mask\": " << mask_field
             << ", \"split\": \"" << (i < n_train ? "train" : "test") << "\"}\n";
  }
  return dir / "manifest.jsonl";
}

GeneratorSpec tiny_generator(int linear_scale) {
  GeneratorSpec g;
  g.n_rrdb_blocks = 1;
  g.base_channels = 8;
  g.growth_channels = 4;
  g.linear_scale = linear_scale;
  return g;
}

CriticSpec tiny_critic(int size, int channels) {
  CriticSpec c;
  c.input_height = c.input_width = size;
  c.in_channels = channels;
  c.conv_stages = {{8, 1}, {8, 2}, {16, 2}};
  c.head_hidden = 16;
  return c;
}

TrainSetup tiny_setup(int crop_size, int roi_patch, int linear_scale, Variant variant) {
  TrainSetup s;
  s.train.total_iters = 10;
  s.train.batch_size = 2;
  s.train.linear_scale = linear_scale;
  s.train.crop_size = crop_size;
  s.train.roi_patch_size = roi_patch;
  s.train.checkpoint_interval = 5;
  s.train.variant = variant;
  s.generator = tiny_generator(linear_scale);
  s.t1 = tiny_critic(crop_size);
  s.t2 = tiny_critic(roi_patch);
  return s;
}

double gradient_check(const std::function<torch::Tensor()>& f, const std::vector<torch::Tensor>& wrt, double step,
                      double floor) {
  std::vector<torch::Tensor> inputs(wrt.begin(), wrt.end());
  const auto grads = torch::autograd::grad({f()}, inputs, {}, false, false, true);
  std::vector<torch::Tensor> analytic, numeric;
  torch::NoGradGuard no_grad;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    auto flat = inputs[t].view({-1});
    torch::Tensor num = torch::zeros_like(flat);
    for (std::int64_t i = 0; i < flat.numel(); ++i) {
      const double orig = flat[i].item<double>();
      flat[i].fill_(orig + step);
      const double up = f().item<double>();
      flat[i].fill_(orig - step);
      const double down = f().item<double>();
      flat[i].fill_(orig);
      num[i].fill_((up - down) / (2.0 * step));
    }
    numeric.push_back(num);
    analytic.push_back(grads[t].defined() ? grads[t].reshape({-1}) : torch::zeros_like(num));
  }
  const torch::Tensor a = torch::cat(analytic), n = torch::cat(numeric);
  const double scale = std::max({a.norm().item<double>(), n.norm().item<double>(), floor});
  return (a - n).norm().item<double>() / scale;
}

double oracle_psnr(const Image& a, const Image& b) {
  long double sse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) sse += std::pow(static_cast<long double>(a.pixels[i]) - b.pixels[i], 2);
  return static_cast<double>(10.0L * std::log10(1.0L / (sse / a.size())));
}

double oracle_ssim(const Image& a, const Image& b) {
  auto y = [](const Image& img, int r, int c) {
    if (img.channels == 1) return static_cast<double>(img.at(r, c, 0));
    return 0.299 * img.at(r, c, 0) + 0.587 * img.at(r, c, 1) + 0.114 * img.at(r, c, 2);
  };
  double g[11][11], gsum = 0;
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) gsum += g[i][j] = std::exp(-((i - 5) * (i - 5) + (j - 5) * (j - 5)) / (2 * 1.5 * 1.5));
  const double c1 = 1e-4, c2 = 9e-4;
  double total = 0;
  int windows = 0;
  for (int r = 0; r + 11 <= a.height; ++r) {
    for (int c = 0; c + 11 <= a.width; ++c) {
      double mx = 0, my = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          mx += g[i][j] / gsum * y(a, r + i, c + j);
          my += g[i][j] / gsum * y(b, r + i, c + j);
        }
      double vx = 0, vy = 0, cxy = 0;
      for (int i = 0; i < 11; ++i)
        for (int j = 0; j < 11; ++j) {
          const double dx = y(a, r + i, c + j) - mx, dy = y(b, r + i, c + j) - my, w = g[i][j] / gsum;
          vx += w * dx * dx;
          vy += w * dy * dy;
          cxy += w * dx * dy;
        }
      total += (2 * mx * my + c1) * (2 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
      ++windows;
    }
  }
  return total / windows;
}

CriticSpec micro_critic(int size) {
  CriticSpec c;
  c.input_height = c.input_width = size;
  c.conv_stages = {{4, 1}, {4, 2}};
  c.head_hidden = 4;
  return c;
}

FeatureExtractor micro_phi() {
  FeatureExtractorSpec spec;
  spec.layers = {4, 0, 4};
  spec.tap_conv = 2;
  FeatureExtractor phi = random_feature_extractor(spec, 3);
  phi->to(torch::kFloat64);
  return phi;
}

std::vector<std::string> loss_columns(const std::filesystem::path& csv) {
  std::ifstream in(csv);
  std::vector<std::string> rows;
  std::string line;
  while (std::getline(in, line)) rows.push_back(line.substr(0, line.rfind(',')));
  return rows;
}

}  // namespace pathosr::test
