#include "pathosr/niqe.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>

#include <Eigen/Dense>

#include "pathosr/errors.hpp"
#include "pathosr/log.hpp"
#include "pathosr/resample.hpp"

#ifndef PATHOSR_DATA_DIR
#define PATHOSR_DATA_DIR "data"
#endif

namespace pathosr {

namespace {

constexpr char kMagic[8] = {'P', 'S', 'R', 'N', 'I', 'Q', 'E', '\0'};
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Plane {
  int h = 0, w = 0;
  std::vector<double> v;
  double& at(int r, int c) { return v[static_cast<std::size_t>(r) * w + c]; }
  double at(int r, int c) const { return v[static_cast<std::size_t>(r) * w + c]; }
};

// 7x7 Gaussian, sigma 7/6, replicate borders.
Plane gaussian_replicate(const Plane& src) {
  constexpr int kRadius = 3;
  std::array<double, 7> taps{};
  double total = 0.0;
  for (int i = -kRadius; i <= kRadius; ++i) {
    taps[static_cast<std::size_t>(i + kRadius)] = std::exp(-(i * i) / (2.0 * (7.0 / 6.0) * (7.0 / 6.0)));
    total += taps[static_cast<std::size_t>(i + kRadius)];
  }
  for (double& t : taps) t /= total;

  Plane tmp{src.h, src.w, std::vector<double>(src.v.size())};
  for (int r = 0; r < src.h; ++r) {
    for (int c = 0; c < src.w; ++c) {
      double acc = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) acc += taps[static_cast<std::size_t>(k + kRadius)] * src.at(r, std::clamp(c + k, 0, src.w - 1));
      tmp.at(r, c) = acc;
    }
  }
  Plane out{src.h, src.w, std::vector<double>(src.v.size())};
  for (int r = 0; r < src.h; ++r) {
    for (int c = 0; c < src.w; ++c) {
      double acc = 0.0;
      for (int k = -kRadius; k <= kRadius; ++k) acc += taps[static_cast<std::size_t>(k + kRadius)] * tmp.at(std::clamp(r + k, 0, src.h - 1), c);
      out.at(r, c) = acc;
    }
  }
  return out;
}

// Shape grid for the generalised Gaussian moment-matching search.
struct GammaTable {
  std::vector<double> shape;
  std::vector<double> ratio;  // Gamma(2/g)^2 / (Gamma(1/g) Gamma(3/g))
  GammaTable() {
    for (int i = 200; i <= 10000; ++i) {
      const double g = i / 1000.0;
      shape.push_back(g);
      ratio.push_back(std::pow(std::tgamma(2.0 / g), 2) / (std::tgamma(1.0 / g) * std::tgamma(3.0 / g)));
    }
  }
  double match(double target) const {
    std::size_t best = 0;
    double best_err = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < ratio.size(); ++i) {
      const double e = (ratio[i] - target) * (ratio[i] - target);
      if (e < best_err) {
        best_err = e;
        best = i;
      }
    }
    return shape[best];
  }
};

const GammaTable& gamma_table() {
  static const GammaTable table;
  return table;
}

struct AggdFit {
  double alpha, left, right;
};

// Asymmetric generalised Gaussian fit by moment matching.
AggdFit estimate_aggd(const std::vector<double>& x) {
  double left_sq = 0.0, right_sq = 0.0, abs_sum = 0.0, sq_sum = 0.0;
  std::size_t n_left = 0, n_right = 0;
  for (double v : x) {
    if (v < 0) {
      left_sq += v * v;
      ++n_left;
    } else if (v > 0) {
      right_sq += v * v;
      ++n_right;
    }
    abs_sum += std::abs(v);
    sq_sum += v * v;
  }
  if (n_left == 0 || n_right == 0 || sq_sum == 0.0) return {kNaN, kNaN, kNaN};
  const double n = static_cast<double>(x.size());
  const double left_std = std::sqrt(left_sq / static_cast<double>(n_left));
  const double right_std = std::sqrt(right_sq / static_cast<double>(n_right));
  const double gamma_hat = left_std / right_std;
  const double r_hat = std::pow(abs_sum / n, 2) / (sq_sum / n);
  const double r_norm = r_hat * (std::pow(gamma_hat, 3) + 1) * (gamma_hat + 1) / std::pow(gamma_hat * gamma_hat + 1, 2);
  const double alpha = gamma_table().match(r_norm);
  const double scale = std::sqrt(std::tgamma(1.0 / alpha) / std::tgamma(3.0 / alpha));
  return {alpha, left_std * scale, right_std * scale};
}

// 18 statistics of one MSCN block.
void block_features(const Plane& mscn, int r0, int c0, int size, std::vector<double>& out) {
  std::vector<double> block(static_cast<std::size_t>(size) * size);
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) block[static_cast<std::size_t>(r) * size + c] = mscn.at(r0 + r, c0 + c);
  }
  const AggdFit base = estimate_aggd(block);
  out.push_back(base.alpha);
  out.push_back((base.left + base.right) / 2.0);

  // Products with circularly shifted neighbours: horizontal, vertical, two diagonals.
  constexpr std::array<std::array<int, 2>, 4> kShifts{{{0, 1}, {1, 0}, {1, 1}, {1, -1}}};
  std::vector<double> pair(block.size());
  for (const auto& s : kShifts) {
    for (int r = 0; r < size; ++r) {
      for (int c = 0; c < size; ++c) {
        const int sr = ((r - s[0]) % size + size) % size;
        const int sc = ((c - s[1]) % size + size) % size;
        pair[static_cast<std::size_t>(r) * size + c] =
            block[static_cast<std::size_t>(r) * size + c] * block[static_cast<std::size_t>(sr) * size + sc];
      }
    }
    const AggdFit f = estimate_aggd(pair);
    const double mean = (f.right - f.left) * (std::tgamma(2.0 / f.alpha) / std::tgamma(1.0 / f.alpha));
    out.insert(out.end(), {f.alpha, mean, f.left, f.right});
  }
}

Plane to_plane(const Image& y, double scale) {
  Plane p{y.height, y.width, std::vector<double>(y.pixels.size())};
  for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = scale * y.pixels[i];
  return p;
}

bool row_finite(const std::vector<double>& row) {
  return std::all_of(row.begin(), row.end(), [](double v) { return std::isfinite(v); });
}

void fit_mvg(const std::vector<std::vector<double>>& rows, Eigen::VectorXd& mean, Eigen::MatrixXd& cov) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::MatrixXd x(n, kNiqeFeatureDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < kNiqeFeatureDim; ++k) x(i, k) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
  }
  mean = x.colwise().mean();
  if (n < 2) {
    cov = Eigen::MatrixXd::Zero(kNiqeFeatureDim, kNiqeFeatureDim);
    return;
  }
  Eigen::MatrixXd centred = x.rowwise() - mean.transpose();
  cov = centred.transpose() * centred / static_cast<double>(n - 1);
}

}  // namespace

std::vector<std::vector<double>> niqe_patch_features(const Image& img, int patch_size,
                                                     std::optional<double> sharpness_fraction) {
  if (patch_size < 2 || patch_size % 2 != 0) throw std::invalid_argument("NIQE patch size must be even");
  const Image y = luma(img);
  const int rows = y.height / patch_size, cols = y.width / patch_size;
  if (rows < 1 || cols < 1) {
    throw ShapeError("NIQE needs an image of at least " + std::to_string(patch_size) + "x" + std::to_string(patch_size));
  }
  Image scale_img = y.crop(0, 0, rows * patch_size, cols * patch_size);

  std::vector<std::vector<double>> features(static_cast<std::size_t>(rows * cols));
  std::vector<double> sharpness(features.size(), 0.0);
  for (int scale = 1; scale <= 2; ++scale) {
    const int block = patch_size / scale;
    const Plane im = to_plane(scale_img, 255.0);
    Plane sq = im;
    for (double& v : sq.v) v *= v;
    const Plane mu = gaussian_replicate(im);
    const Plane mu_sq2 = gaussian_replicate(sq);
    Plane sigma = mu;
    Plane mscn = mu;
    for (std::size_t i = 0; i < im.v.size(); ++i) {
      sigma.v[i] = std::sqrt(std::abs(mu_sq2.v[i] - mu.v[i] * mu.v[i]));
      mscn.v[i] = (im.v[i] - mu.v[i]) / (sigma.v[i] + 1.0);
    }
    for (int br = 0; br < rows; ++br) {
      for (int bc = 0; bc < cols; ++bc) {
        const auto idx = static_cast<std::size_t>(br * cols + bc);
        block_features(mscn, br * block, bc * block, block, features[idx]);
        if (scale == 1) {
          double s = 0.0;
          for (int r = 0; r < block; ++r) {
            for (int c = 0; c < block; ++c) s += sigma.at(br * block + r, bc * block + c);
          }
          sharpness[idx] = s / (static_cast<double>(block) * block);
        }
      }
    }
    if (scale == 1) scale_img = downscale_bicubic(scale_img, 2);
  }

  if (!sharpness_fraction) return features;
  const double peak = *std::max_element(sharpness.begin(), sharpness.end());
  std::vector<std::vector<double>> kept;
  for (std::size_t i = 0; i < features.size(); ++i) {
    if (sharpness[i] > *sharpness_fraction * peak) kept.push_back(std::move(features[i]));
  }
  return kept;
}

NiqeModel fit_niqe_model(const std::vector<Image>& pristine, int patch_size, double sharpness_fraction) {
  std::vector<std::vector<double>> rows;
  for (const Image& img : pristine) {
    for (auto& row : niqe_patch_features(img, patch_size, sharpness_fraction)) {
      if (row_finite(row)) rows.push_back(std::move(row));
    }
  }
  if (rows.empty()) throw std::invalid_argument("no usable pristine patches");
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  fit_mvg(rows, mean, cov);
  NiqeModel model;
  model.patch_size = patch_size;
  model.mean.assign(mean.data(), mean.data() + mean.size());
  model.covariance.resize(static_cast<std::size_t>(kNiqeFeatureDim * kNiqeFeatureDim));
  for (int r = 0; r < kNiqeFeatureDim; ++r) {
    for (int c = 0; c < kNiqeFeatureDim; ++c) model.covariance[static_cast<std::size_t>(r * kNiqeFeatureDim + c)] = cov(r, c);
  }
  return model;
}

double niqe(const Image& img, const NiqeModel& model) {
  if (model.mean.size() != kNiqeFeatureDim || model.covariance.size() != kNiqeFeatureDim * kNiqeFeatureDim) {
    throw std::invalid_argument("NIQE model has the wrong dimension");
  }
  std::vector<std::vector<double>> rows;
  for (auto& row : niqe_patch_features(img, model.patch_size)) {
    if (row_finite(row)) rows.push_back(std::move(row));
  }
  if (rows.empty()) return kNaN;  // e.g. a perfectly flat image
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  fit_mvg(rows, mean, cov);

  const Eigen::Map<const Eigen::VectorXd> pristine_mean(model.mean.data(), kNiqeFeatureDim);
  const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> pristine_cov(
      model.covariance.data(), kNiqeFeatureDim, kNiqeFeatureDim);
  const Eigen::MatrixXd pooled = (pristine_cov + cov) / 2.0;
  const Eigen::MatrixXd pooled_inv = pooled.completeOrthogonalDecomposition().pseudoInverse();
  const Eigen::VectorXd d = pristine_mean - mean;
  return std::sqrt(std::max(0.0, d.dot(pooled_inv * d)));
}

void NiqeModel::save(const std::filesystem::path& path) const {
  static_assert(std::endian::native == std::endian::little);
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw LoadError("cannot write NIQE model " + path.string());
  const std::uint32_t header[3] = {kFormatVersion, kNiqeFeatureDim, static_cast<std::uint32_t>(patch_size)};
  out.write(kMagic, sizeof kMagic);
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  out.write(reinterpret_cast<const char*>(mean.data()), static_cast<std::streamsize>(mean.size() * sizeof(double)));
  out.write(reinterpret_cast<const char*>(covariance.data()),
            static_cast<std::streamsize>(covariance.size() * sizeof(double)));
  if (!out) throw LoadError("short write to " + path.string());
}

NiqeModel NiqeModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open NIQE model " + path.string());
  char magic[8];
  std::uint32_t header[3];
  in.read(magic, sizeof magic);
  in.read(reinterpret_cast<char*>(header), sizeof header);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError(path.string() + " is not a NIQE model");
  if (header[0] != kFormatVersion) {
    throw CheckpointError("unsupported NIQE model version " + std::to_string(header[0]) + " in " + path.string());
  }
  if (header[1] != kNiqeFeatureDim) throw CheckpointError("NIQE model dimension mismatch in " + path.string());
  NiqeModel m;
  m.patch_size = static_cast<int>(header[2]);
  m.mean.resize(kNiqeFeatureDim);
  m.covariance.resize(kNiqeFeatureDim * kNiqeFeatureDim);
  in.read(reinterpret_cast<char*>(m.mean.data()), kNiqeFeatureDim * sizeof(double));
  in.read(reinterpret_cast<char*>(m.covariance.data()), kNiqeFeatureDim * kNiqeFeatureDim * sizeof(double));
  if (!in) throw CheckpointError("truncated NIQE model " + path.string());
  return m;
}

std::filesystem::path default_niqe_model_path() {
  if (const char* env = std::getenv("PATHOSR_NIQE_MODEL")) return env;
  return std::filesystem::path(PATHOSR_DATA_DIR) / "niqe_pristine.bin";
}

NiqeModel default_niqe_model() { return NiqeModel::load(default_niqe_model_path()); }

MaScorer external_ma_scorer(std::string command) {
  return [command = std::move(command)](const Image& img) -> std::optional<double> {
    const auto tmp = std::filesystem::temp_directory_path() /
                     ("pathosr_ma_" + std::to_string(reinterpret_cast<std::uintptr_t>(&img)) + ".png");
    save_image(img, tmp);
    const std::string cmd = command + " '" + tmp.string() + "'";
    std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
    std::optional<double> score;
    if (pipe) {
      char buf[256] = {};
      if (std::fgets(buf, sizeof buf, pipe.get()) != nullptr) {
        char* end = nullptr;
        const double v = std::strtod(buf, &end);
        if (end != buf && std::isfinite(v)) score = v;
      }
    }
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    if (!score) log::warn("Ma scorer '" + command + "' failed; perceptual index unavailable");
    return score;
  };
}

double perceptual_index(double ma, double niqe_score) noexcept { return 0.5 * ((10.0 - ma) + niqe_score); }

std::optional<double> perceptual_index(const Image& img, const NiqeModel& model, const MaScorer* ma_scorer) {
  if (ma_scorer == nullptr || !*ma_scorer) return std::nullopt;
  const std::optional<double> ma = (*ma_scorer)(img);
  if (!ma) return std::nullopt;
  return perceptual_index(*ma, niqe(img, model));
}

}  // namespace pathosr
