#pragma once

#include <array>

#include "pathosr/image.hpp"

namespace pathosr {

/// Linear scale factors the degradation and generator pipelines accept.
inline constexpr std::array<int, 4> kSupportedScales{2, 3, 4, 8};
bool is_supported_scale(int linear_scale) noexcept;

/// Keys cubic convolution kernel; a = -0.5 gives Catmull-Rom.
double cubic_kernel(double x, double a = -0.5) noexcept;

/// Antialiased bicubic reduction by an integer factor. The kernel is stretched
/// by the factor so it acts as a low-pass filter; taps falling outside the
/// image are dropped and the remaining weights renormalised.
/// Output is ceil(H/factor) x ceil(W/factor); pixel centres follow the
/// half-pixel convention, so output pixel o samples input coordinate
/// (o + 0.5) * factor - 0.5.
Image downscale_bicubic(const Image& img, int factor);

/// Bicubic enlargement by an integer factor (output factor*H x factor*W).
Image upscale_bicubic(const Image& img, int factor);

/// Pixel replication by an integer factor.
Image upscale_nearest(const Image& img, int factor);

/// Produces the low-resolution counterpart of an HR image: antialiased
/// Catmull-Rom downsampling by `linear_scale`, clamped to [0, 1].
/// Throws ConfigError for unsupported scales and ShapeError when the image is
/// smaller than the scale.
Image synthesize_lr(const Image& hr, int linear_scale);

/// Upscales `lr` by `linear_scale` and crops the result to height x width.
/// This undoes the ceil() in the LR shape when HR sides are not multiples of the scale.
Image upscale_to(const Image& lr, int linear_scale, int height, int width, bool bicubic);

}  // namespace pathosr
