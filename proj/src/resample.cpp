#include "pathosr/resample.hpp"

#include <algorithm>
#include <cmath>

#include "pathosr/errors.hpp"

namespace pathosr {
namespace {

// Contributions of input samples to one output sample along an axis.
struct Taps {
  int first = 0;
  std::vector<double> weights;
};

std::vector<Taps> make_taps(int in_len, int out_len, int factor, bool downscale) {
  const double step = downscale ? static_cast<double>(factor) : 1.0 / factor;
  const double stretch = downscale ? static_cast<double>(factor) : 1.0;
  const double support = 2.0 * stretch;

  std::vector<Taps> taps(static_cast<std::size_t>(out_len));
  for (int o = 0; o < out_len; ++o) {
    const double centre = (o + 0.5) * step - 0.5;
    const int lo = std::max(0, static_cast<int>(std::floor(centre - support)) + 1);
    const int hi = std::min(in_len - 1, static_cast<int>(std::ceil(centre + support)) - 1);
    Taps& t = taps[static_cast<std::size_t>(o)];
    t.first = lo;
    double total = 0.0;
    for (int i = lo; i <= hi; ++i) {
      const double w = cubic_kernel((i - centre) / stretch);
      t.weights.push_back(w);
      total += w;
    }
    for (double& w : t.weights) w /= total;
  }
  return taps;
}

Image resample(const Image& img, int out_h, int out_w, int factor, bool downscale) {
  const auto row_taps = make_taps(img.height, out_h, factor, downscale);
  const auto col_taps = make_taps(img.width, out_w, factor, downscale);
  const int ch = img.channels;

  // Horizontal pass into a double buffer, then vertical pass.
  std::vector<double> tmp(static_cast<std::size_t>(img.height) * out_w * ch, 0.0);
  for (int r = 0; r < img.height; ++r) {
    for (int o = 0; o < out_w; ++o) {
      const Taps& t = col_taps[static_cast<std::size_t>(o)];
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          acc += t.weights[k] * img.at(r, t.first + static_cast<int>(k), c);
        }
        tmp[(static_cast<std::size_t>(r) * out_w + o) * ch + c] = acc;
      }
    }
  }
  Image out(out_h, out_w, ch);
  for (int o = 0; o < out_h; ++o) {
    const Taps& t = row_taps[static_cast<std::size_t>(o)];
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.weights.size(); ++k) {
          acc += t.weights[k] * tmp[((t.first + k) * out_w + x) * ch + c];
        }
        out.at(o, x, c) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

bool is_supported_scale(int linear_scale) noexcept {
  return std::find(kSupportedScales.begin(), kSupportedScales.end(), linear_scale) != kSupportedScales.end();
}

double cubic_kernel(double x, double a) noexcept {
  x = std::abs(x);
  if (x < 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return (((x - 5.0) * x + 8.0) * x - 4.0) * a;
  return 0.0;
}

Image downscale_bicubic(const Image& img, int factor) {
  if (factor < 1) throw ConfigError("downscale factor must be >= 1");
  if (factor == 1) return img;
  return resample(img, ceil_div(img.height, factor), ceil_div(img.width, factor), factor, true);
}

Image upscale_bicubic(const Image& img, int factor) {
  if (factor < 1) throw ConfigError("upscale factor must be >= 1");
  if (factor == 1) return img;
  return resample(img, img.height * factor, img.width * factor, factor, false);
}

Image upscale_nearest(const Image& img, int factor) {
  if (factor < 1) throw ConfigError("upscale factor must be >= 1");
  Image out(img.height * factor, img.width * factor, img.channels);
  for (int r = 0; r < out.height; ++r) {
    for (int c = 0; c < out.width; ++c) {
      for (int k = 0; k < img.channels; ++k) out.at(r, c, k) = img.at(r / factor, c / factor, k);
    }
  }
  return out;
}

Image synthesize_lr(const Image& hr, int linear_scale) {
  if (!is_supported_scale(linear_scale)) {
    throw ConfigError("unsupported linear scale " + std::to_string(linear_scale) + " (expected 2, 3, 4 or 8)");
  }
  if (hr.height < linear_scale || hr.width < linear_scale) {
    throw ShapeError("image smaller than scale factor");
  }
  Image lr = downscale_bicubic(hr, linear_scale);
  lr.clamp01();
  return lr;
}

Image upscale_to(const Image& lr, int linear_scale, int height, int width, bool bicubic) {
  Image up = bicubic ? upscale_bicubic(lr, linear_scale) : upscale_nearest(lr, linear_scale);
  up.clamp01();
  if (up.height < height || up.width < width) throw ShapeError("upscaled image smaller than target");
  if (up.height == height && up.width == width) return up;
  return up.crop(0, 0, height, width);
}

}  // namespace pathosr
