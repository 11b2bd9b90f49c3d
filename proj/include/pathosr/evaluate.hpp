#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pathosr/dataset.hpp"
#include "pathosr/niqe.hpp"

namespace pathosr {

enum class MethodKind { kNearest, kBicubic, kCheckpoint, kIdentity };

struct MethodSpec {
  MethodKind kind = MethodKind::kBicubic;
  std::filesystem::path checkpoint;  ///< only for kCheckpoint
  std::string label;                 ///< column title in reports
};

/// "nearest", "bicubic", "identity" or "ckpt:<path>[=label]".
MethodSpec parse_method(const std::string& text);

struct ImageScores {
  std::string id;
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::optional<double> niqe;
  std::optional<double> pi;
};

struct MetricReport {
  std::string method;
  std::string dataset;
  int area_scale = 0;
  std::vector<ImageScores> per_image;

  /// Column means. NIQE averages the images that have a score; PI is null
  /// unless every image has one.
  ImageScores aggregate() const;
};

struct EvaluationOptions {
  const NiqeModel* niqe_model = nullptr;  ///< NIQE column left empty when null
  const MaScorer* ma_scorer = nullptr;    ///< PI column left empty when null
};

/// Scores one method on the test split: each HR image is degraded with
/// synthesize_lr, reconstructed by the method, cropped back to the HR size
/// and compared with the original. Throws ConfigError for an empty test split
/// or a checkpoint trained for another scale.
MetricReport evaluate_model(const MethodSpec& method, const DatasetIndex& dataset, int linear_scale,
                            const std::string& dataset_label, const EvaluationOptions& options = {});

/// CSV with header method,dataset,area_scale,id,psnr_db,ssim,niqe,pi and a
/// trailing "__mean__" row. Missing values are empty fields.
std::string report_csv(const MetricReport& report);
std::vector<MetricReport> parse_report_csv(const std::string& text);

/// One table per (dataset, area scale): methods as columns, PSNR / SSIM /
/// NIQE / PI as rows.
std::string reports_markdown(const std::vector<MetricReport>& reports);

/// Figure caption such as "(22.17 dB/0.59/6.38)". The third value is the
/// perceptual index (or NIQE when no Ma scorer is configured); "n/a" if absent.
std::string metric_caption(double psnr_db, double ssim, std::optional<double> perceptual);

}  // namespace pathosr
