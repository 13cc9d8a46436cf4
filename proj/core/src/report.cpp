#include "nexrl/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nexrl/container.hpp"
#include "nexrl/version.hpp"

namespace nexrl {

using nlohmann::json;

namespace {

std::ofstream open_text(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

void finish(std::ofstream& out, const std::filesystem::path& path) {
  out.flush();
  if (!out) throw DataError("short write to " + path.string());
}

json summary_json(const MetricsSummary& s) {
  return {{"slices", s.count},       {"identical", s.identical},
          {"psnr_mean", s.psnr_mean}, {"psnr_std", s.psnr_std},
          {"ssim_mean", s.ssim_mean}, {"ssim_std", s.ssim_std}};
}

}  // namespace

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<ReportRow>& rows) {
  std::ofstream out = open_text(path);
  out << "method,slices,psnr_mean,psnr_std,ssim_mean,ssim_std\n";
  char line[256];
  for (const ReportRow& r : rows) {
    std::snprintf(line, sizeof(line), "%s,%zu,%.4f,%.4f,%.5f,%.5f\n",
                  r.method.c_str(), r.summary.count, r.summary.psnr_mean,
                  r.summary.psnr_std, r.summary.ssim_mean, r.summary.ssim_std);
    out << line;
  }
  finish(out, path);
}

void write_metrics_json(const std::filesystem::path& path,
                        const std::vector<ReportRow>& rows,
                        const std::string& context_json) {
  json ctx = json::parse(context_json, nullptr, false);
  if (ctx.is_discarded() || !ctx.is_object())
    throw DataError("metrics context is not a JSON object");
  json doc;
  doc["context"] = std::move(ctx);
  doc["rows"] = json::array();
  for (const ReportRow& r : rows) {
    json row = summary_json(r.summary);
    row["method"] = r.method;
    doc["rows"].push_back(std::move(row));
  }
  std::ofstream out = open_text(path);
  out << doc.dump(2) << "\n";
  finish(out, path);
}

void write_history_csv(const std::filesystem::path& path,
                       const TrainingHistory& history) {
  std::ofstream out = open_text(path);
  out << "epoch,train_loss,val_loss,lr,seconds\n";
  char line[192];
  for (const EpochStats& e : history.epochs) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.9g,%.3f\n", e.epoch,
                  e.train_loss, e.val_loss, e.lr, e.seconds);
    out << line;
  }
  finish(out, path);
}

void write_histogram_csv(const std::filesystem::path& path,
                         const Histogram& hist) {
  std::ofstream out = open_text(path);
  out << "bin_lo,bin_hi,count\n";
  char line[128];
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    std::snprintf(line, sizeof(line), "%.9g,%.9g,%zu\n", hist.edges[b],
                  hist.edges[b + 1], hist.counts[b]);
    out << line;
  }
  finish(out, path);
}

void write_pgm(const std::filesystem::path& path, const Image& img, double lo,
               double hi) {
  if (!(hi > lo)) throw DataError("write_pgm: need hi > lo");
  if (img.size() == 0) throw DataError("write_pgm: empty image");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << img.width() << " " << img.height() << "\n255\n";
  std::vector<unsigned char> row(static_cast<std::size_t>(img.width()));
  const double s = 255.0 / (hi - lo);
  for (int i = 0; i < img.height(); ++i) {
    for (int j = 0; j < img.width(); ++j) {
      const double v = std::clamp((img.at(i, j) - lo) * s, 0.0, 255.0);
      row[static_cast<std::size_t>(j)] =
          static_cast<unsigned char>(std::lround(v));
    }
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size()));
  }
  out.flush();
  if (!out) throw DataError("short write to " + path.string());
}

void write_image_container(const std::filesystem::path& path,
                           const Image& img, const std::string& name,
                           const std::string& meta_json) {
  Container c;
  c.meta_json = meta_json;
  c.blocks.push_back(
      TensorBlock::from_f64(name, {img.height(), img.width()}, img.data()));
  write_container(path, c);
}

void write_run_manifest(const std::filesystem::path& dir,
                        const ManifestInfo& info) {
  json config = json::parse(info.config_json, nullptr, false);
  if (config.is_discarded())
    throw DataError("manifest config is not valid JSON");
  json doc;
  doc["command"] = info.command;
  doc["config"] = std::move(config);
  doc["inputs"] = info.inputs;
  doc["outputs"] = info.outputs;
  doc["seed"] = info.seed;
  doc["version"] = kVersion;
  doc["wall_seconds"] = info.wall_seconds;
  std::ofstream out = open_text(dir / "manifest.json");
  out << doc.dump(2) << "\n";
  finish(out, dir / "manifest.json");
}

}  // namespace nexrl
