#pragma once

#include <vector>

#include "pathosr/image.hpp"

namespace pathosr {

/// Square p x p window in HR coordinates.
struct RoiWindow {
  int row = 0;
  int col = 0;
  int size = 0;
  double coverage = 0.0;  ///< fraction of window pixels inside the mask

  friend bool operator==(const RoiWindow&, const RoiWindow&) = default;
};

/// Matching HR/SR patches cut from the same window.
struct RoiPatchPair {
  Image x_hr;
  Image x_sr;
  int row = 0;
  int col = 0;
};

struct RoiOptions {
  int patch_size = 64;
  int max_patches = 4;
  double min_coverage = 0.1;
};

/// 8-connected component of a mask with its bounding box (inclusive) and area.
struct MaskComponent {
  int top = 0;
  int left = 0;
  int bottom = 0;
  int right = 0;
  std::size_t area = 0;
};

std::vector<MaskComponent> connected_components(const RoiMask& mask);

/// Fraction of the p x p window at (row, col) covered by the mask.
double window_coverage(const RoiMask& mask, int row, int col, int size);

/// Region proposals from a ground-truth mask. Each connected component
/// proposes one window centred on its bounding box, shifted to stay inside
/// the image. Windows below the coverage threshold are dropped; duplicates
/// are merged; the rest are ordered by coverage (then component area) and
/// truncated to `max_patches`. An all-zero mask yields no windows.
/// Throws ShapeError when the patch does not fit in the mask.
std::vector<RoiWindow> propose_roi_windows(const RoiMask& mask, const RoiOptions& options);

/// Cuts x_hr and x_sr from identical windows proposed on `mask`.
std::vector<RoiPatchPair> propose_roi_patches(const Image& hr, const Image& sr, const RoiMask& mask,
                                              const RoiOptions& options);

}  // namespace pathosr
