#include "pathosr/image.hpp"

#include <algorithm>
#include <numeric>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pathosr/errors.hpp"

namespace pathosr {

Image::Image(int h, int w, int c, float fill)
    : height(h), width(w), channels(c),
      pixels(static_cast<std::size_t>(h) * w * c, fill) {
  if (h < 1 || w < 1 || c < 1) {
    throw ShapeError("image dimensions must be positive");
  }
}

Image Image::crop(int row, int col, int h, int w) const {
  if (row < 0 || col < 0 || h < 1 || w < 1 || row + h > height || col + w > width) {
    throw ShapeError("crop window outside image");
  }
  Image out(h, w, channels);
  const std::size_t row_len = static_cast<std::size_t>(w) * channels;
  for (int r = 0; r < h; ++r) {
    const float* src = &pixels[index(row + r, col, 0)];
    std::copy(src, src + row_len, out.pixels.begin() + static_cast<std::ptrdiff_t>(r * row_len));
  }
  return out;
}

void Image::clamp01() {
  for (float& v : pixels) v = std::clamp(v, 0.0f, 1.0f);
}

RoiMask::RoiMask(int h, int w, std::uint8_t fill)
    : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill ? 1 : 0) {
  if (h < 1 || w < 1) throw ShapeError("mask dimensions must be positive");
}

RoiMask RoiMask::crop(int row, int col, int h, int w) const {
  if (row < 0 || col < 0 || h < 1 || w < 1 || row + h > height || col + w > width) {
    throw ShapeError("crop window outside mask");
  }
  RoiMask out(h, w);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) out.at(r, c) = at(row + r, col + c);
  }
  return out;
}

std::size_t RoiMask::count() const noexcept {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](auto b) { return b != 0; }));
}

Image luma(const Image& img) {
  if (img.channels == 1) return img;
  if (img.channels != 3) throw ShapeError("luma expects 1 or 3 channels");
  Image out(img.height, img.width, 1);
  for (std::size_t i = 0, n = out.pixels.size(); i < n; ++i) {
    const float* p = &img.pixels[i * 3];
    out.pixels[i] = 0.299f * p[0] + 0.587f * p[1] + 0.114f * p[2];
  }
  return out;
}

Image load_image(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_ANYCOLOR);
  if (m.empty()) throw LoadError("cannot decode image " + path.string());

  double divisor = 255.0;
  switch (m.depth()) {
    case CV_8U: divisor = 255.0; break;
    case CV_16U: divisor = 65535.0; break;
    case CV_32F: divisor = 1.0; break;
    default: throw LoadError("unsupported pixel depth in " + path.string());
  }
  if (m.channels() == 4) {
    cv::cvtColor(m, m, cv::COLOR_BGRA2BGR);
  }
  if (m.channels() == 3) {
    cv::cvtColor(m, m, cv::COLOR_BGR2RGB);
  } else if (m.channels() != 1) {
    throw LoadError("unsupported channel count in " + path.string());
  }
  cv::Mat f;
  m.convertTo(f, CV_MAKETYPE(CV_32F, m.channels()), 1.0 / divisor);

  Image img(f.rows, f.cols, f.channels());
  for (int r = 0; r < f.rows; ++r) {
    const float* src = f.ptr<float>(r);
    std::copy(src, src + static_cast<std::ptrdiff_t>(f.cols) * f.channels(),
              img.pixels.begin() + static_cast<std::ptrdiff_t>(r) * f.cols * f.channels());
  }
  img.clamp01();
  return img;
}

void save_image(const Image& img, const std::filesystem::path& path) {
  if (img.channels != 1 && img.channels != 3) throw ShapeError("save_image expects 1 or 3 channels");
  cv::Mat f(img.height, img.width, CV_MAKETYPE(CV_32F, img.channels),
            const_cast<float*>(img.pixels.data()));
  cv::Mat u8;
  f.convertTo(u8, CV_MAKETYPE(CV_8U, img.channels), 255.0);
  if (img.channels == 3) cv::cvtColor(u8, u8, cv::COLOR_RGB2BGR);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), u8)) throw LoadError("cannot write image " + path.string());
}

RoiMask load_mask(const std::filesystem::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.empty()) throw LoadError("cannot decode mask " + path.string());
  RoiMask mask(m.rows, m.cols);
  cv::Mat nz = m != 0;
  for (int r = 0; r < m.rows; ++r) {
    const auto* src = nz.ptr<std::uint8_t>(r);
    for (int c = 0; c < m.cols; ++c) mask.at(r, c) = src[c] ? 1 : 0;
  }
  return mask;
}

void save_mask(const RoiMask& mask, const std::filesystem::path& path) {
  cv::Mat m(mask.height, mask.width, CV_8UC1);
  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) m.at<std::uint8_t>(r, c) = mask.at(r, c) ? 255 : 0;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), m)) throw LoadError("cannot write mask " + path.string());
}

torch::Tensor to_tensor(const Image& img, torch::Dtype dtype) {
  auto hwc = torch::from_blob(const_cast<float*>(img.pixels.data()),
                              {img.height, img.width, img.channels}, torch::kFloat32);
  return hwc.permute({2, 0, 1}).contiguous().to(dtype);
}

torch::Tensor to_batch(const std::vector<Image>& images, torch::Dtype dtype) {
  if (images.empty()) throw ShapeError("to_batch on empty list");
  std::vector<torch::Tensor> ts;
  ts.reserve(images.size());
  for (const auto& img : images) {
    if (!img.same_shape(images.front())) throw ShapeError("batch images differ in shape");
    ts.push_back(to_tensor(img, dtype));
  }
  return torch::stack(ts);
}

Image from_tensor(const torch::Tensor& t) {
  torch::Tensor chw = t.dim() == 4 ? t.squeeze(0) : t;
  if (chw.dim() != 3) throw ShapeError("from_tensor expects [C,H,W] or [1,C,H,W]");
  auto hwc = chw.detach().to(torch::kCPU, torch::kFloat32).permute({1, 2, 0}).contiguous();
  Image img(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), static_cast<int>(hwc.size(2)));
  std::copy(hwc.data_ptr<float>(), hwc.data_ptr<float>() + hwc.numel(), img.pixels.begin());
  return img;
}

}  // namespace pathosr
