#include "pathosr/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "pathosr/errors.hpp"
#include "pathosr/generator.hpp"
#include "pathosr/metrics.hpp"
#include "pathosr/resample.hpp"
#include "pathosr/trainer.hpp"

namespace pathosr {

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string opt_field(const std::optional<double>& v) { return v ? fixed(*v, 6) : std::string(); }

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::optional<double> parse_opt(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::stod(s);
}

}  // namespace

MethodSpec parse_method(const std::string& text) {
  if (text == "nearest") return {MethodKind::kNearest, {}, "Nearest"};
  if (text == "bicubic") return {MethodKind::kBicubic, {}, "Bicubic"};
  if (text == "identity") return {MethodKind::kIdentity, {}, "Identity"};
  if (text.rfind("ckpt:", 0) == 0) {
    std::string rest = text.substr(5);
    std::string label;
    if (auto eq = rest.find('='); eq != std::string::npos) {
      label = rest.substr(eq + 1);
      rest = rest.substr(0, eq);
    }
    if (rest.empty()) throw ConfigError("ckpt: method needs a checkpoint path");
    std::filesystem::path p = rest;
    return {MethodKind::kCheckpoint, p, label.empty() ? p.stem().string() : label};
  }
  throw ConfigError("unknown method '" + text + "' (expected nearest, bicubic, identity or ckpt:<path>)");
}

ImageScores MetricReport::aggregate() const {
  ImageScores mean;
  mean.id = "__mean__";
  if (per_image.empty()) return mean;
  double niqe_sum = 0.0, pi_sum = 0.0;
  std::size_t niqe_n = 0, pi_n = 0;
  for (const auto& s : per_image) {
    mean.psnr_db += s.psnr_db;
    mean.ssim += s.ssim;
    if (s.niqe) {
      niqe_sum += *s.niqe;
      ++niqe_n;
    }
    if (s.pi) {
      pi_sum += *s.pi;
      ++pi_n;
    }
  }
  const double n = static_cast<double>(per_image.size());
  mean.psnr_db /= n;
  mean.ssim /= n;
  if (niqe_n > 0) mean.niqe = niqe_sum / static_cast<double>(niqe_n);
  if (pi_n == per_image.size()) mean.pi = pi_sum / n;
  return mean;
}

MetricReport evaluate_model(const MethodSpec& method, const DatasetIndex& dataset, int linear_scale,
                            const std::string& dataset_label, const EvaluationOptions& options) {
  if (!is_supported_scale(linear_scale)) throw ConfigError("unsupported linear scale " + std::to_string(linear_scale));
  const DatasetIndex test = dataset.subset(Split::kTest);
  if (test.records.empty()) throw ConfigError("no test records");

  std::optional<LoadedGenerator> model;
  if (method.kind == MethodKind::kCheckpoint) {
    model = load_generator(method.checkpoint);
    if (model->spec.linear_scale != linear_scale) {
      throw ConfigError("checkpoint " + method.checkpoint.string() + " was trained for scale " +
                        std::to_string(model->spec.linear_scale) + ", requested " + std::to_string(linear_scale));
    }
  }

  MetricReport report;
  report.method = method.label;
  report.dataset = dataset_label;
  report.area_scale = linear_scale * linear_scale;
  for (const RecordDescriptor& rec : test.records) {
    const SamplePair sample = load_sample(rec, linear_scale);
    Image sr;
    switch (method.kind) {
      case MethodKind::kIdentity: sr = sample.hr; break;
      case MethodKind::kNearest: sr = upscale_to(sample.lr, linear_scale, sample.hr.height, sample.hr.width, false); break;
      case MethodKind::kBicubic: sr = upscale_to(sample.lr, linear_scale, sample.hr.height, sample.hr.width, true); break;
      case MethodKind::kCheckpoint:
        sr = upscale_to(generator_forward(model->generator, sample.lr), 1, sample.hr.height, sample.hr.width, false);
        break;
    }
    ImageScores s;
    s.id = rec.id;
    s.psnr_db = psnr(sr, sample.hr);
    s.ssim = ssim(sr, sample.hr);
    if (options.niqe_model != nullptr && sr.height >= options.niqe_model->patch_size &&
        sr.width >= options.niqe_model->patch_size) {
      const double q = niqe(sr, *options.niqe_model);
      if (std::isfinite(q)) s.niqe = q;
      if (s.niqe && options.ma_scorer != nullptr) {
        if (auto ma = (*options.ma_scorer)(sr)) s.pi = perceptual_index(*ma, *s.niqe);
      }
    }
    report.per_image.push_back(std::move(s));
  }
  return report;
}

std::string report_csv(const MetricReport& report) {
  std::ostringstream os;
  os << "method,dataset,area_scale,id,psnr_db,ssim,niqe,pi\n";
  auto row = [&](const ImageScores& s) {
    os << report.method << ',' << report.dataset << ',' << report.area_scale << ',' << s.id << ','
       << fixed(s.psnr_db, 6) << ',' << fixed(s.ssim, 6) << ',' << opt_field(s.niqe) << ',' << opt_field(s.pi)
       << '\n';
  };
  for (const auto& s : report.per_image) row(s);
  row(report.aggregate());
  return os.str();
}

std::vector<MetricReport> parse_report_csv(const std::string& text) {
  std::vector<MetricReport> out;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line.rfind("method,", 0) == 0) continue;
    const auto f = split_csv(line);
    if (f.size() != 8) throw ParseError(lineno, "expected 8 report fields");
    if (f[3] == "__mean__") continue;
    if (out.empty() || out.back().method != f[0] || out.back().dataset != f[1] ||
        out.back().area_scale != std::stoi(f[2])) {
      out.push_back({f[0], f[1], std::stoi(f[2]), {}});
    }
    try {
      out.back().per_image.push_back({f[3], std::stod(f[4]), std::stod(f[5]), parse_opt(f[6]), parse_opt(f[7])});
    } catch (const std::exception&) {
      throw ParseError(lineno, "non-numeric metric value");
    }
  }
  return out;
}

std::string reports_markdown(const std::vector<MetricReport>& reports) {
  std::map<std::pair<std::string, int>, std::vector<const MetricReport*>> groups;
  std::vector<std::pair<std::string, int>> order;
  for (const auto& r : reports) {
    auto key = std::make_pair(r.dataset, r.area_scale);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  std::ostringstream os;
  for (const auto& key : order) {
    const auto& cols = groups[key];
    os << "| **" << key.first << "** (" << key.second << "x) |";
    for (const auto* r : cols) os << ' ' << r->method << " |";
    os << "\n|---|";
    for (std::size_t i = 0; i < cols.size(); ++i) os << "---:|";
    os << '\n';
    auto metric_row = [&](const char* name, auto value) {
      os << "| " << name << " |";
      for (const auto* r : cols) os << ' ' << value(r->aggregate()) << " |";
      os << '\n';
    };
    metric_row("PSNR", [](const ImageScores& s) { return fixed(s.psnr_db, 2); });
    metric_row("SSIM", [](const ImageScores& s) { return fixed(s.ssim, 2); });
    metric_row("NIQE", [](const ImageScores& s) { return s.niqe ? fixed(*s.niqe, 2) : std::string("n/a"); });
    metric_row("PI", [](const ImageScores& s) { return s.pi ? fixed(*s.pi, 2) : std::string("n/a"); });
    os << '\n';
  }
  return os.str();
}

std::string metric_caption(double psnr_db, double ssim, std::optional<double> perceptual) {
  return "(" + fixed(psnr_db, 2) + " dB/" + fixed(ssim, 2) + "/" + (perceptual ? fixed(*perceptual, 2) : "n/a") + ")";
}

}  // namespace pathosr
