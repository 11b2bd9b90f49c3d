#include "pathosr/metrics.hpp"

#include <cmath>
#include <vector>

#include "pathosr/errors.hpp"

namespace pathosr {

namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;

std::vector<double> gaussian_taps() {
  std::vector<double> taps(kWindow);
  double total = 0.0;
  for (int i = 0; i < kWindow; ++i) {
    const double d = i - kWindow / 2;
    taps[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    total += taps[static_cast<std::size_t>(i)];
  }
  for (double& t : taps) t /= total;
  return taps;
}

// Separable 'valid' Gaussian filtering of a row-major h x w plane.
std::vector<double> filter_valid(const std::vector<double>& src, int h, int w, const std::vector<double>& taps) {
  const int ow = w - kWindow + 1, oh = h - kWindow + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[static_cast<std::size_t>(k)] * src[static_cast<std::size_t>(r) * w + c + k];
      tmp[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += taps[static_cast<std::size_t>(k)] * tmp[static_cast<std::size_t>(r + k) * ow + c];
      out[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const Image& a, const Image& b, double peak) {
  if (!a.same_shape(b)) throw ShapeError("psnr: images differ in shape");
  double sse = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = static_cast<double>(a.pixels[i]) - b.pixels[i];
    sse += d * d;
  }
  const double mse = sse / static_cast<double>(a.pixels.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

double ssim(const Image& a, const Image& b, double peak) {
  if (!a.same_shape(b)) throw ShapeError("ssim: images differ in shape");
  if (a.height < kWindow || a.width < kWindow) throw ShapeError("ssim: image smaller than the 11x11 window");

  const Image ya = luma(a), yb = luma(b);
  const std::size_t n = ya.pixels.size();
  std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = ya.pixels[i];
    y[i] = yb.pixels[i];
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const auto taps = gaussian_taps();
  const int h = a.height, w = a.width;
  const auto mx = filter_valid(x, h, w, taps), my = filter_valid(y, h, w, taps);
  const auto sxx = filter_valid(xx, h, w, taps), syy = filter_valid(yy, h, w, taps), sxy = filter_valid(xy, h, w, taps);

  const double c1 = (0.01 * peak) * (0.01 * peak);
  const double c2 = (0.03 * peak) * (0.03 * peak);
  double total = 0.0;
  for (std::size_t i = 0; i < mx.size(); ++i) {
    const double vx = sxx[i] - mx[i] * mx[i];
    const double vy = syy[i] - my[i] * my[i];
    const double cov = sxy[i] - mx[i] * my[i];
    total += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
  }
  return total / static_cast<double>(mx.size());
}

}  // namespace pathosr
