#pragma once

#include "pathosr/image.hpp"

namespace pathosr {

/// Reported PSNR for identical images (the true value is +infinity).
inline constexpr double kPsnrCapDb = 99.0;

/// 10 log10(peak^2 / MSE) with the MSE taken jointly over all pixels and
/// channels. Throws ShapeError on shape mismatch.
double psnr(const Image& a, const Image& b, double peak = 1.0);

/// Mean SSIM over all valid 11x11 Gaussian (sigma 1.5) windows of the BT.601
/// luma, C1 = (0.01 peak)^2, C2 = (0.03 peak)^2. Throws ShapeError on shape
/// mismatch or when the image is smaller than the window.
double ssim(const Image& a, const Image& b, double peak = 1.0);

}  // namespace pathosr
