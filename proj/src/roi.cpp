#include "pathosr/roi.hpp"

#include <algorithm>
#include <array>

#include "pathosr/errors.hpp"

namespace pathosr {

std::vector<MaskComponent> connected_components(const RoiMask& mask) {
  std::vector<MaskComponent> out;
  std::vector<std::uint8_t> seen(mask.bits.size(), 0);
  std::vector<std::pair<int, int>> stack;

  for (int r = 0; r < mask.height; ++r) {
    for (int c = 0; c < mask.width; ++c) {
      const std::size_t idx = static_cast<std::size_t>(r) * mask.width + c;
      if (!mask.bits[idx] || seen[idx]) continue;

      MaskComponent comp{r, c, r, c, 0};
      seen[idx] = 1;
      stack.assign(1, {r, c});
      while (!stack.empty()) {
        auto [y, x] = stack.back();
        stack.pop_back();
        ++comp.area;
        comp.top = std::min(comp.top, y);
        comp.bottom = std::max(comp.bottom, y);
        comp.left = std::min(comp.left, x);
        comp.right = std::max(comp.right, x);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int ny = y + dy, nx = x + dx;
            if (ny < 0 || nx < 0 || ny >= mask.height || nx >= mask.width) continue;
            const std::size_t nidx = static_cast<std::size_t>(ny) * mask.width + nx;
            if (mask.bits[nidx] && !seen[nidx]) {
              seen[nidx] = 1;
              stack.emplace_back(ny, nx);
            }
          }
        }
      }
      out.push_back(comp);
    }
  }
  return out;
}

double window_coverage(const RoiMask& mask, int row, int col, int size) {
  std::size_t hits = 0;
  for (int r = row; r < row + size; ++r) {
    for (int c = col; c < col + size; ++c) hits += mask.at(r, c) ? 1 : 0;
  }
  return static_cast<double>(hits) / (static_cast<double>(size) * size);
}

std::vector<RoiWindow> propose_roi_windows(const RoiMask& mask, const RoiOptions& options) {
  const int p = options.patch_size;
  if (p < 1 || p > std::min(mask.height, mask.width)) {
    throw ShapeError("ROI patch size " + std::to_string(p) + " does not fit a " +
                     std::to_string(mask.height) + "x" + std::to_string(mask.width) + " mask");
  }
  if (options.max_patches <= 0) return {};

  struct Candidate {
    RoiWindow window;
    std::size_t area;
  };
  std::vector<Candidate> candidates;
  for (const MaskComponent& comp : connected_components(mask)) {
    // Centre of the inclusive bounding box is (top + bottom + 1) / 2 in
    // pixel-edge coordinates; the window starts p/2 before it.
    const int row = std::clamp((comp.top + comp.bottom + 1 - p) / 2, 0, mask.height - p);
    const int col = std::clamp((comp.left + comp.right + 1 - p) / 2, 0, mask.width - p);
    const double cov = window_coverage(mask, row, col, p);
    if (cov < options.min_coverage) continue;
    candidates.push_back({{row, col, p, cov}, comp.area});
  }

  std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.window.coverage != b.window.coverage) return a.window.coverage > b.window.coverage;
    return a.area > b.area;
  });

  std::vector<RoiWindow> out;
  for (const Candidate& c : candidates) {
    if (static_cast<int>(out.size()) == options.max_patches) break;
    const bool dup = std::any_of(out.begin(), out.end(), [&](const RoiWindow& w) {
      return w.row == c.window.row && w.col == c.window.col;
    });
    if (!dup) out.push_back(c.window);
  }
  return out;
}

std::vector<RoiPatchPair> propose_roi_patches(const Image& hr, const Image& sr, const RoiMask& mask,
                                              const RoiOptions& options) {
  if (!hr.same_shape(sr) || hr.height != mask.height || hr.width != mask.width) {
    throw ShapeError("hr, sr and mask must share dimensions");
  }
  std::vector<RoiPatchPair> out;
  for (const RoiWindow& w : propose_roi_windows(mask, options)) {
    out.push_back({hr.crop(w.row, w.col, w.size, w.size), sr.crop(w.row, w.col, w.size, w.size), w.row, w.col});
  }
  return out;
}

}  // namespace pathosr
