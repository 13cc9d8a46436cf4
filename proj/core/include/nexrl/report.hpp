#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "nexrl/image.hpp"
#include "nexrl/metrics.hpp"
#include "nexrl/noise_stats.hpp"
#include "nexrl/trainer.hpp"

namespace nexrl {

struct ReportRow {
  std::string method;
  MetricsSummary summary;
};

/// Columns: method, slices, psnr_mean, psnr_std, ssim_mean, ssim_std.
void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<ReportRow>& rows);

/// Same table as JSON, plus a free-form context object (intensity scale,
/// loss form, seeds) so every number is self-describing.
void write_metrics_json(const std::filesystem::path& path,
                        const std::vector<ReportRow>& rows,
                        const std::string& context_json);

void write_history_csv(const std::filesystem::path& path,
                       const TrainingHistory& history);

void write_histogram_csv(const std::filesystem::path& path,
                         const Histogram& hist);

/// 8-bit binary PGM; values mapped linearly from [lo, hi] and clamped.
/// Visual inspection only — never read back.
void write_pgm(const std::filesystem::path& path, const Image& img, double lo,
               double hi);

void write_image_container(const std::filesystem::path& path,
                           const Image& img, const std::string& name,
                           const std::string& meta_json);

struct ManifestInfo {
  std::string command;
  std::string config_json = "{}";  // effective config, defaults included
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::uint64_t seed = 0;
  double wall_seconds = 0.0;
};

/// Writes <dir>/manifest.json; one manifest per output directory.
void write_run_manifest(const std::filesystem::path& dir,
                        const ManifestInfo& info);

}  // namespace nexrl
