// Command line entry points: prepare, train, infer, evaluate, report, niqe-fit.
//
// Exit codes: 0 success, 1 usage or invalid configuration, 2 runtime
// failure, 3 partial failure (some inputs or methods failed, others did not).

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "pathosr/config.hpp"
#include "pathosr/errors.hpp"
#include "pathosr/evaluate.hpp"
#include "pathosr/generator.hpp"
#include "pathosr/log.hpp"
#include "pathosr/metrics.hpp"
#include "pathosr/niqe.hpp"
#include "pathosr/resample.hpp"
#include "pathosr/roi.hpp"
#include "pathosr/trainer.hpp"

namespace fs = std::filesystem;
using namespace pathosr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitPartial = 3;

const std::vector<std::string> kImageExtensions{".png", ".tif", ".tiff", ".jpg", ".jpeg", ".bmp"};

bool is_image_file(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return std::find(kImageExtensions.begin(), kImageExtensions.end(), ext) != kImageExtensions.end();
}

std::vector<fs::path> list_images(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("not a directory: " + dir.string());
  std::vector<fs::path> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && is_image_file(entry.path())) out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct MetricTools {
  std::optional<NiqeModel> niqe_model;
  std::optional<MaScorer> ma_scorer;

  EvaluationOptions options() const {
    return {niqe_model ? &*niqe_model : nullptr, ma_scorer ? &*ma_scorer : nullptr};
  }
};

MetricTools load_metric_tools(const MetricOptions& opts) {
  MetricTools tools;
  if (opts.niqe_model) {
    tools.niqe_model = NiqeModel::load(*opts.niqe_model);
  } else if (fs::exists(default_niqe_model_path())) {
    tools.niqe_model = default_niqe_model();
  } else {
    log::warn("no NIQE model found at " + default_niqe_model_path().string() + "; NIQE and PI columns stay empty");
  }
  if (opts.ma_scorer) tools.ma_scorer = external_ma_scorer(*opts.ma_scorer);
  return tools;
}

// ---- prepare ---------------------------------------------------------------

struct PrepareArgs {
  std::string config;
  int scale = 0;
  std::string out;
};

fs::path cache_dir(const RunConfig& cfg, const std::string& out_flag) {
  if (!out_flag.empty()) return out_flag;
  if (const char* env = std::getenv("PATHOSR_CACHE"); env != nullptr && *env != '\0') {
    return fs::path(env) / cfg.manifest.stem();
  }
  return cfg.output_dir / "cache";
}

int cmd_prepare(const PrepareArgs& args) {
  const RunConfig cfg = load_run_config(args.config);
  const int scale = args.scale > 0 ? args.scale : cfg.setup.train.linear_scale;
  if (!is_supported_scale(scale)) throw ConfigError("unsupported scale " + std::to_string(scale));
  const DatasetIndex index = load_manifest(cfg.manifest, scale, cfg.setup.train.roi_patch_size);
  const fs::path dir = cache_dir(cfg, args.out) / ("x" + std::to_string(scale));
  fs::create_directories(dir);

  RoiOptions roi;
  roi.patch_size = cfg.setup.train.roi_patch_size;
  roi.max_patches = cfg.setup.train.roi_max_patches;
  roi.min_coverage = cfg.setup.train.roi_min_coverage;

  std::size_t failures = 0, windows = 0;
  for (const RecordDescriptor& rec : index.records) {
    try {
      const SamplePair s = load_sample(rec, scale);
      save_image(s.lr, dir / (rec.id + ".png"));
      if (s.hr.height >= roi.patch_size && s.hr.width >= roi.patch_size) {
        windows += propose_roi_windows(s.mask, roi).size();
      }
    } catch (const std::exception& e) {
      log::warn("record " + rec.id + ": " + e.what());
      ++failures;
    }
  }
  std::cout << "records: " << index.records.size() << " (train " << index.count(Split::kTrain) << ", test "
            << index.count(Split::kTest) << ")\n"
            << "ROI windows: " << windows << "\n"
            << "LR images: " << dir.string() << "\n";
  if (failures == 0) return kExitOk;
  return failures == index.records.size() ? kExitRuntime : kExitPartial;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  bool resume = false;
  std::optional<std::uint64_t> seed;
  int scale = 0;
  std::string out;
};

int cmd_train(const TrainArgs& args) {
  RunConfig cfg = load_run_config(args.config);
  if (args.seed) {
    cfg.setup.train.data_seed = *args.seed;
    cfg.setup.train.model_seed = *args.seed;
  }
  if (args.scale > 0) {
    cfg.setup.train.linear_scale = args.scale;
    cfg.setup.generator.linear_scale = args.scale;
  }
  if (!args.out.empty()) cfg.output_dir = args.out;
  cfg.setup.validate();

  const TrainConfig& tc = cfg.setup.train;
  const DatasetIndex index = load_manifest(cfg.manifest, tc.linear_scale, tc.roi_patch_size);
  if (index.count(Split::kTrain) == 0) throw ConfigError("manifest has no train records");

  Trainer trainer(cfg.setup, index, make_feature_extractor(cfg.perceptual));
  fs::create_directories(cfg.output_dir);
  save_run_config(cfg, cfg.output_dir / "config.json");

  const std::int64_t every = std::max<std::int64_t>(1, tc.total_iters / 20);
  trainer.fit(cfg.output_dir, args.resume, [&](const StepLosses& s) {
    if (s.iter % every != 0 && s.iter != tc.total_iters) return;
    std::ostringstream os;
    os << "iter " << s.iter << "/" << tc.total_iters << " lr " << s.lr << " recon " << s.j_recon << " t1 " << s.j_t1
       << " t2 " << s.j_t2 << " adv " << s.j_adv;
    log::info(os.str());
  });
  std::cout << "trained " << trainer.iteration() << " iterations; outputs in " << cfg.output_dir.string() << "\n";
  return kExitOk;
}

// ---- infer -----------------------------------------------------------------

struct InferArgs {
  std::string checkpoint;
  std::string input;
  std::string out;
  int scale = 0;
  std::string compare;
  std::string niqe_model;
  std::string ma_scorer;
};

cv::Mat to_bgr8(const Image& img) {
  cv::Mat mat(img.height, img.width, CV_8UC3);
  for (int r = 0; r < img.height; ++r) {
    auto* row = mat.ptr<cv::Vec3b>(r);
    for (int c = 0; c < img.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        const float v = img.at(r, c, img.channels == 1 ? 0 : 2 - ch);
        row[c][ch] = cv::saturate_cast<std::uint8_t>(std::clamp(v, 0.0f, 1.0f) * 255.0f + 0.5f);
      }
    }
  }
  return mat;
}

cv::Mat captioned_tile(const Image& img, const std::string& title, const std::string& caption) {
  constexpr int kBand = 36;
  const cv::Mat body = to_bgr8(img);
  cv::Mat tile(body.rows + kBand, body.cols, CV_8UC3, cv::Scalar(255, 255, 255));
  body.copyTo(tile(cv::Rect(0, 0, body.cols, body.rows)));
  const double scale = std::clamp(body.cols / 320.0, 0.3, 0.6);
  cv::putText(tile, title, {4, body.rows + 14}, cv::FONT_HERSHEY_SIMPLEX, scale, {0, 0, 0}, 1, cv::LINE_AA);
  cv::putText(tile, caption, {4, body.rows + 31}, cv::FONT_HERSHEY_SIMPLEX, scale, {0, 0, 0}, 1, cv::LINE_AA);
  return tile;
}

std::optional<fs::path> find_reference(const fs::path& dir, const fs::path& input) {
  if (fs::exists(dir / input.filename())) return dir / input.filename();
  for (const auto& ext : kImageExtensions) {
    const fs::path p = dir / (input.stem().string() + ext);
    if (fs::exists(p)) return p;
  }
  return std::nullopt;
}

int cmd_infer(const InferArgs& args) {
  LoadedGenerator model = load_generator(args.checkpoint);
  const int scale = model.spec.linear_scale;
  if (args.scale > 0 && args.scale != scale) {
    throw ConfigError("checkpoint was trained for scale " + std::to_string(scale) + ", --scale is " +
                      std::to_string(args.scale));
  }
  const std::vector<fs::path> inputs = list_images(args.input);
  if (inputs.empty()) throw ConfigError("no images in " + args.input);
  const fs::path out_dir = args.out;
  fs::create_directories(out_dir);

  MetricTools tools;
  if (!args.compare.empty()) {
    MetricOptions opts;
    if (!args.niqe_model.empty()) opts.niqe_model = args.niqe_model;
    if (!args.ma_scorer.empty()) opts.ma_scorer = args.ma_scorer;
    tools = load_metric_tools(opts);
  }
  const char* third_name = tools.ma_scorer ? "PI" : "NIQE";

  std::size_t failures = 0;
  for (const fs::path& input : inputs) {
    try {
      const Image lr = load_image(input);
      const Image sr = generator_forward(model.generator, lr);
      save_image(sr, out_dir / (input.stem().string() + ".png"));
      if (args.compare.empty()) continue;

      const auto ref = find_reference(args.compare, input);
      if (!ref) throw LoadError("no reference image for " + input.filename().string() + " in " + args.compare);
      const Image hr = load_image(*ref);
      if (hr.channels != sr.channels || hr.height > sr.height || hr.width > sr.width) {
        throw ShapeError("reference " + ref->string() + " does not match the SR output");
      }
      auto score = [&](const Image& candidate) {
        const Image c = upscale_to(candidate, 1, hr.height, hr.width, false);
        std::optional<double> third;
        if (tools.niqe_model && hr.height >= tools.niqe_model->patch_size && hr.width >= tools.niqe_model->patch_size) {
          const double q = niqe(c, *tools.niqe_model);
          if (tools.ma_scorer) {
            if (auto ma = (*tools.ma_scorer)(c)) third = perceptual_index(*ma, q);
          } else {
            third = q;
          }
        }
        return std::make_pair(c, metric_caption(psnr(c, hr), ssim(c, hr), third));
      };
      const auto [nearest, nearest_caption] = score(upscale_to(lr, scale, hr.height, hr.width, false));
      const auto [bicubic, bicubic_caption] = score(upscale_to(lr, scale, hr.height, hr.width, true));
      const auto [ours, ours_caption] = score(sr);

      std::vector<cv::Mat> tiles{captioned_tile(nearest, "Nearest", nearest_caption),
                                 captioned_tile(bicubic, "Bicubic", bicubic_caption),
                                 captioned_tile(ours, "SR", ours_caption),
                                 captioned_tile(hr, "HR", "")};
      cv::Mat panel;
      cv::hconcat(tiles, panel);
      const fs::path panel_path = out_dir / "compare" / (input.stem().string() + ".png");
      fs::create_directories(panel_path.parent_path());
      cv::imwrite(panel_path.string(), panel);
      write_text(panel_path.string() + ".txt", std::string("columns: PSNR dB/SSIM/") + third_name + "\n" +
                                                   "Nearest " + nearest_caption + "\n" + "Bicubic " +
                                                   bicubic_caption + "\n" + "SR " + ours_caption + "\n");
    } catch (const std::exception& e) {
      log::warn("skipping " + input.string() + ": " + e.what());
      ++failures;
    }
  }
  std::cout << "wrote " << inputs.size() - failures << " of " << inputs.size() << " images to " << out_dir.string()
            << "\n";
  if (failures == 0) return kExitOk;
  return failures == inputs.size() ? kExitRuntime : kExitPartial;
}

// ---- evaluate --------------------------------------------------------------

struct EvaluateArgs {
  std::string config;
  std::vector<std::string> methods{"nearest", "bicubic"};
  int scale = 0;
  std::string out;
  std::string dataset_label;
};

std::string file_label(const std::string& text) {
  std::string out;
  for (char c : text) out += std::isalnum(static_cast<unsigned char>(c)) || c == '-' ? c : '_';
  return out;
}

int cmd_evaluate(const EvaluateArgs& args) {
  const RunConfig cfg = load_run_config(args.config);
  const int scale = args.scale > 0 ? args.scale : cfg.setup.train.linear_scale;
  if (!is_supported_scale(scale)) throw ConfigError("unsupported scale " + std::to_string(scale));
  std::vector<MethodSpec> methods;
  for (const auto& m : args.methods) methods.push_back(parse_method(m));
  const DatasetIndex index = load_manifest(cfg.manifest, scale, cfg.setup.train.roi_patch_size);
  if (index.count(Split::kTest) == 0) throw ConfigError("no test records");

  const MetricTools tools = load_metric_tools(cfg.metrics);
  const std::string label = args.dataset_label.empty() ? cfg.manifest.stem().string() : args.dataset_label;
  const fs::path out_dir = args.out.empty() ? cfg.output_dir / "eval" : fs::path(args.out);

  std::vector<MetricReport> reports;
  std::size_t failures = 0;
  for (const MethodSpec& method : methods) {
    try {
      MetricReport report = evaluate_model(method, index, scale, label, tools.options());
      const fs::path csv =
          out_dir / (file_label(method.label) + "_x" + std::to_string(report.area_scale) + ".csv");
      write_text(csv, report_csv(report));
      const ImageScores mean = report.aggregate();
      std::cout << method.label << ": PSNR " << mean.psnr_db << " dB, SSIM " << mean.ssim << "  -> " << csv.string()
                << "\n";
      reports.push_back(std::move(report));
    } catch (const std::exception& e) {
      log::error("method " + method.label + " failed: " + e.what());
      ++failures;
    }
  }
  if (!reports.empty()) write_text(out_dir / "report.md", reports_markdown(reports));
  if (failures == 0) return kExitOk;
  return reports.empty() ? kExitRuntime : kExitPartial;
}

// ---- report ----------------------------------------------------------------

struct ReportArgs {
  std::vector<std::string> inputs;
  std::string out;
};

int cmd_report(const ReportArgs& args) {
  std::vector<fs::path> files;
  for (const auto& in : args.inputs) {
    if (fs::is_directory(in)) {
      std::vector<fs::path> found;
      for (const auto& e : fs::directory_iterator(in)) {
        if (e.is_regular_file() && e.path().extension() == ".csv") found.push_back(e.path());
      }
      std::sort(found.begin(), found.end());
      files.insert(files.end(), found.begin(), found.end());
    } else {
      files.emplace_back(in);
    }
  }
  if (files.empty()) throw ConfigError("no report CSV files given");
  std::vector<MetricReport> reports;
  for (const auto& f : files) {
    auto parsed = parse_report_csv(read_text(f));
    reports.insert(reports.end(), parsed.begin(), parsed.end());
  }
  const std::string md = reports_markdown(reports);
  if (args.out.empty()) {
    std::cout << md;
  } else {
    write_text(args.out, md);
  }
  return kExitOk;
}

// ---- niqe-fit --------------------------------------------------------------

struct NiqeFitArgs {
  std::vector<std::string> images;
  std::string out;
  int patch = 96;
  double sharpness = 0.75;
};

int cmd_niqe_fit(const NiqeFitArgs& args) {
  std::vector<Image> corpus;
  for (const auto& p : args.images) {
    if (fs::is_directory(p)) {
      for (const auto& f : list_images(p)) corpus.push_back(load_image(f));
    } else {
      corpus.push_back(load_image(p));
    }
  }
  if (corpus.empty()) throw ConfigError("no pristine images given");
  const NiqeModel model = fit_niqe_model(corpus, args.patch, args.sharpness);
  model.save(args.out);
  std::cout << "fitted NIQE model from " << corpus.size() << " images -> " << args.out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Super-resolution training and evaluation for microscopy images"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Only log errors");

  PrepareArgs prepare;
  auto* prepare_cmd = app.add_subcommand("prepare", "Validate the manifest and write synthesised LR images");
  prepare_cmd->add_option("--config", prepare.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  prepare_cmd->add_option("--scale", prepare.scale, "Linear scale factor (default: from config)");
  prepare_cmd->add_option("--out", prepare.out, "Cache directory (default: $PATHOSR_CACHE/<manifest>)");

  TrainArgs train;
  std::uint64_t seed = 0;
  auto* train_cmd = app.add_subcommand("train", "Train a generator and its critics");
  train_cmd->add_option("--config", train.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  train_cmd->add_flag("--resume", train.resume, "Continue from <out>/latest.ckpt when present");
  auto* seed_opt = train_cmd->add_option("--seed", seed, "Overrides both data and model seeds");
  train_cmd->add_option("--scale", train.scale, "Overrides train.linear_scale");
  train_cmd->add_option("--out", train.out, "Overrides output_dir");

  InferArgs infer;
  auto* infer_cmd = app.add_subcommand("infer", "Super-resolve a directory of images");
  infer_cmd->add_option("--checkpoint", infer.checkpoint, "Trainer checkpoint")->required()->check(CLI::ExistingFile);
  infer_cmd->add_option("--input", infer.input, "Directory of low-resolution images")->required();
  infer_cmd->add_option("--out", infer.out, "Output directory")->required();
  infer_cmd->add_option("--scale", infer.scale, "Expected linear scale; must match the checkpoint");
  infer_cmd->add_option("--compare", infer.compare, "Directory of HR references; writes captioned panels");
  infer_cmd->add_option("--niqe-model", infer.niqe_model, "NIQE model for captions (default: shipped model)");
  infer_cmd->add_option("--ma-scorer", infer.ma_scorer, "Command printing the Ma score of an image path");

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score methods on the test split");
  evaluate_cmd->add_option("--config", evaluate.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--methods", evaluate.methods, "nearest, bicubic, identity or ckpt:<path>[=label]")
      ->delimiter(',');
  evaluate_cmd->add_option("--scale", evaluate.scale, "Linear scale factor (default: from config)");
  evaluate_cmd->add_option("--out", evaluate.out, "Output directory (default: <output_dir>/eval)");
  evaluate_cmd->add_option("--dataset-label", evaluate.dataset_label, "Dataset name in reports");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Merge report CSVs into a Markdown table");
  report_cmd->add_option("inputs", report.inputs, "CSV files or directories")->required();
  report_cmd->add_option("--out", report.out, "Markdown file (default: stdout)");

  NiqeFitArgs niqe_fit;
  auto* niqe_cmd = app.add_subcommand("niqe-fit", "Fit a NIQE pristine model");
  niqe_cmd->add_option("images", niqe_fit.images, "Pristine images or directories")->required();
  niqe_cmd->add_option("--out", niqe_fit.out, "Model file")->required();
  niqe_cmd->add_option("--patch", niqe_fit.patch, "Patch size");
  niqe_cmd->add_option("--sharpness", niqe_fit.sharpness, "Keep patches sharper than this fraction of the maximum");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }
  log::set_level(quiet ? log::Level::kError : verbose ? log::Level::kDebug : log::Level::kInfo);
  if (seed_opt->count() > 0) train.seed = seed;

  try {
    if (*prepare_cmd) return cmd_prepare(prepare);
    if (*train_cmd) return cmd_train(train);
    if (*infer_cmd) return cmd_infer(infer);
    if (*evaluate_cmd) return cmd_evaluate(evaluate);
    if (*report_cmd) return cmd_report(report);
    if (*niqe_cmd) return cmd_niqe_fit(niqe_fit);
  } catch (const ConfigError& e) {
    log::error(e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    log::error(e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
