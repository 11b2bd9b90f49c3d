#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <torch/torch.h>

namespace pathosr {

/// Floating-point raster, interleaved H x W x C, values in [0, 1].
/// Channel order is RGB for colour images.
struct Image {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int h, int w, int c, float fill = 0.0f);

  bool empty() const noexcept { return pixels.empty(); }
  std::size_t size() const noexcept { return pixels.size(); }

  float& at(int row, int col, int ch) { return pixels[index(row, col, ch)]; }
  float at(int row, int col, int ch) const { return pixels[index(row, col, ch)]; }

  bool same_shape(const Image& other) const noexcept {
    return height == other.height && width == other.width && channels == other.channels;
  }

  /// Copy of the window [row, row+h) x [col, col+w). Throws ShapeError when
  /// the window leaves the image.
  Image crop(int row, int col, int h, int w) const;

  /// Clamp every value into [0, 1].
  void clamp01();

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int row, int col, int ch) const noexcept {
    return (static_cast<std::size_t>(row) * width + col) * channels + ch;
  }
};

/// Binary H x W region-of-interest mask; nonzero marks diagnostically relevant pixels.
struct RoiMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  RoiMask() = default;
  RoiMask(int h, int w, std::uint8_t fill = 0);

  static RoiMask ones(int h, int w) { return RoiMask(h, w, 1); }

  std::uint8_t& at(int row, int col) { return bits[static_cast<std::size_t>(row) * width + col]; }
  std::uint8_t at(int row, int col) const { return bits[static_cast<std::size_t>(row) * width + col]; }

  RoiMask crop(int row, int col, int h, int w) const;
  std::size_t count() const noexcept;

  friend bool operator==(const RoiMask&, const RoiMask&) = default;
};

/// BT.601 luma (0.299 R + 0.587 G + 0.114 B). Single-channel images pass through.
Image luma(const Image& img);

// File IO. 8-bit sources are divided by 255, 16-bit sources by 65535.
Image load_image(const std::filesystem::path& path);
/// Writes 8-bit PNG/TIFF/JPEG depending on the extension.
void save_image(const Image& img, const std::filesystem::path& path);
/// Single-channel mask; any nonzero pixel of the first channel is ROI.
RoiMask load_mask(const std::filesystem::path& path);
void save_mask(const RoiMask& mask, const std::filesystem::path& path);

// Tensor bridges. Tensors are laid out [C, H, W] (or [N, C, H, W] for batches).
torch::Tensor to_tensor(const Image& img, torch::Dtype dtype = torch::kFloat32);
torch::Tensor to_batch(const std::vector<Image>& images, torch::Dtype dtype = torch::kFloat32);
/// Accepts [C, H, W] or [1, C, H, W].
Image from_tensor(const torch::Tensor& t);

}  // namespace pathosr
