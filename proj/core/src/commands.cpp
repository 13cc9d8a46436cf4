#include "nexrl/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include <nlohmann/json.hpp>

#include "nexrl/container.hpp"
#include "nexrl/noise_stats.hpp"
#include "nexrl/report.hpp"
#include "nexrl/rng.hpp"

namespace nexrl {

using nlohmann::json;
namespace fs = std::filesystem;

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const UsageError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitNumerical;
  } catch (const std::exception& e) {
    // DataError, ShapeError, filesystem and JSON failures: bad input data.
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitData;
  }
}

std::string to_string(LossForm form) {
  return form == LossForm::kProduct ? "product" : "sum";
}

LossForm parse_loss_form(const std::string& s) {
  if (s == "product") return LossForm::kProduct;
  if (s == "sum") return LossForm::kSum;
  throw UsageError("unknown loss form '" + s + "' (product|sum)");
}

namespace {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                         start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_ =
      std::chrono::steady_clock::now();
};

json dataset_config_json(const DatasetConfig& c) {
  return {{"train_volumes", c.train_volumes},
          {"test_volumes", c.test_volumes},
          {"slices_per_volume", c.slices_per_volume},
          {"height", c.height},
          {"width", c.width},
          {"sigma0", c.sigma0},
          {"target_baseline_psnr", c.target_baseline_psnr},
          {"gfactor", c.gfactor},
          {"plane", c.plane},
          {"seed", c.seed}};
}

json train_config_json(const TrainConfig& c) {
  return {{"initial_lr", c.initial_lr},
          {"plateau_factor", c.plateau_factor},
          {"plateau_patience", c.plateau_patience},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"seed", c.seed},
          {"input_mode", to_string(c.input_mode)},
          {"variant", to_string(c.variant)},
          {"extract_width", c.extract_width},
          {"bridge_width", c.bridge_width},
          {"loss_form", to_string(c.loss_form)},
          {"sum_lambda", c.sum_lambda}};
}

json dataset_context_json(const DatasetMeta& m) {
  return {{"split", m.split},
          {"plane", m.plane},
          {"sigma0", m.sigma0},
          {"intensity_scale", m.scale},
          {"gfactor_kind", m.gfactor_kind},
          {"dataset_seed", m.seed}};
}

void print_rows(const std::vector<ReportRow>& rows) {
  std::printf("%-22s %7s  %-18s %s\n", "method", "slices", "PSNR [dB]",
              "SSIM");
  for (const ReportRow& r : rows)
    std::printf("%-22s %7zu  %-18s %s\n", r.method.c_str(), r.summary.count,
                format_mean_std(r.summary.psnr_mean, r.summary.psnr_std, 4)
                    .c_str(),
                format_mean_std(r.summary.ssim_mean, r.summary.ssim_std, 5)
                    .c_str());
}

Dataset load_split(const std::string& path) {
  if (path.empty()) throw UsageError("dataset path is required");
  return load_dataset(path);
}

DatasetPair load_pair(const std::string& dir) {
  if (dir.empty()) throw UsageError("dataset directory is required");
  DatasetPair pair;
  pair.train = load_dataset(fs::path(dir) / "train.nxd");
  pair.test = load_dataset(fs::path(dir) / "test.nxd");
  if (pair.train.meta.height != pair.test.meta.height ||
      pair.train.meta.width != pair.test.meta.width)
    throw DataError("train and test splits have mixed image sizes");
  return pair;
}

NetworkParams load_model(const std::string& path) {
  if (path.empty()) throw UsageError("checkpoint path is required");
  return load_checkpoint(path).params;
}

/// Complex planes (re, im) of acquisition `which` (0 or 1) of a sample.
ComplexImage acquisition_of(const SliceSample& s, int which) {
  return ComplexImage(plane_to_image(s.input, 0, 2 * which),
                      plane_to_image(s.input, 0, 2 * which + 1));
}

}  // namespace

int cmd_simulate(const SimulateOptions& opt) {
  const Stopwatch watch;
  const DatasetPair pair = build_dataset(opt.dataset);
  const fs::path out(opt.out_dir);
  fs::create_directories(out);
  save_dataset(out / "train.nxd", pair.train);
  save_dataset(out / "test.nxd", pair.test);

  const EvalResult baseline = evaluate_baseline(pair.test);
  std::printf("train: %zu slices (%d volumes x %d), %dx%d\n",
              pair.train.samples.size(), pair.train.meta.volumes,
              pair.train.meta.slices_per_volume, pair.train.meta.height,
              pair.train.meta.width);
  std::printf("test:  %zu slices (%d volumes x %d)\n",
              pair.test.samples.size(), pair.test.meta.volumes,
              pair.test.meta.slices_per_volume);
  std::printf("sigma0: %.6g  intensity scale: %.6g\n", pair.train.meta.sigma0,
              pair.train.meta.scale);
  std::printf("2NEX-avg baseline on test: PSNR %s dB, SSIM %s\n",
              format_mean_std(baseline.summary.psnr_mean,
                              baseline.summary.psnr_std, 4)
                  .c_str(),
              format_mean_std(baseline.summary.ssim_mean,
                              baseline.summary.ssim_std, 5)
                  .c_str());

  ManifestInfo info;
  info.command = "simulate";
  info.config_json = dataset_config_json(opt.dataset).dump();
  info.outputs = {(out / "train.nxd").string(), (out / "test.nxd").string()};
  info.seed = opt.dataset.seed;
  info.wall_seconds = watch.seconds();
  write_run_manifest(out, info);
  return kExitOk;
}

int cmd_train(const TrainOptions& opt) {
  const Stopwatch watch;
  const DatasetPair pair = load_pair(opt.dataset_dir);
  const fs::path out(opt.out_dir);
  fs::create_directories(out);

  TrainConfig cfg = opt.config;
  if (cfg.checkpoint_dir.empty()) cfg.checkpoint_dir = out.string();
  const TrainResult result = train(cfg, pair.train, pair.test, opt.resume);

  write_history_csv(out / "history.csv", result.history);
  std::printf("trained %d epochs; best validation loss %.6g at epoch %d\n",
              result.history.epochs.empty()
                  ? 0
                  : result.history.epochs.back().epoch,
              result.history.best_val_loss, result.history.best_epoch);

  ManifestInfo info;
  info.command = "train";
  info.config_json = train_config_json(cfg).dump();
  info.inputs = {(fs::path(opt.dataset_dir) / "train.nxd").string(),
                 (fs::path(opt.dataset_dir) / "test.nxd").string()};
  if (!opt.resume.empty()) info.inputs.push_back(opt.resume);
  info.outputs = {(fs::path(cfg.checkpoint_dir) / "best.nxd").string(),
                  (fs::path(cfg.checkpoint_dir) / "last.nxd").string(),
                  (out / "history.csv").string()};
  info.seed = cfg.seed;
  info.wall_seconds = watch.seconds();
  write_run_manifest(out, info);
  return kExitOk;
}

int cmd_denoise(const DenoiseOptions& opt) {
  const Stopwatch watch;
  const NetworkParams params = load_model(opt.checkpoint);
  const Dataset set = load_split(opt.dataset);
  if (set.samples.empty()) throw DataError("dataset has no slices");
  if (opt.batch_size < 1) throw UsageError("batch size must be >= 1");
  const fs::path out(opt.out_dir);
  fs::create_directories(out);

  const int n = static_cast<int>(set.samples.size());
  const int h = set.meta.height, w = set.meta.width;
  Tensor magnitudes(n, 1, h, w);
  for (int start = 0; start < n; start += opt.batch_size) {
    const int stop = std::min(n, start + opt.batch_size);
    Tensor inputs(stop - start, 4, h, w);
    for (int i = start; i < stop; ++i)
      std::copy(set.samples[static_cast<std::size_t>(i)].input.begin(),
                set.samples[static_cast<std::size_t>(i)].input.end(),
                inputs.plane(i - start, 0));
    const Tensor batch_in = params.config.input_mode == InputMode::kSingle
                                ? channel_mean_pair(inputs)
                                : inputs;
    const DenoiseResult res = denoise_slice(params, batch_in);
    for (int i = start; i < stop; ++i)
      std::copy_n(res.output_magnitude.plane(i - start, 0),
                  magnitudes.plane_size(), magnitudes.plane(i, 0));
  }

  json meta = dataset_context_json(set.meta);
  meta["format"] = "denoised";
  meta["checkpoint"] = opt.checkpoint;
  Container c;
  c.meta_json = meta.dump();
  c.blocks.push_back(TensorBlock::from_f32("magnitude", {n, 1, h, w},
                                           magnitudes.data()));
  write_container(out / "denoised.nxd", c);

  std::vector<std::string> outputs = {(out / "denoised.nxd").string()};
  if (opt.export_pgm) {
    for (int i = 0; i < n; ++i) {
      const SliceSample& s = set.samples[static_cast<std::size_t>(i)];
      Image img(h, w);
      const float* src = magnitudes.plane(i, 0);
      for (std::size_t t = 0; t < img.size(); ++t)
        img.data()[t] = static_cast<double>(src[t]);
      char name[64];
      std::snprintf(name, sizeof(name), "slice-v%03d-s%03d.pgm", s.volume,
                    s.slice);
      write_pgm(out / name, img, 0.0, 255.0);
      outputs.push_back((out / name).string());
    }
  }
  std::printf("denoised %d slices -> %s\n", n,
              (out / "denoised.nxd").string().c_str());

  ManifestInfo info;
  info.command = "denoise";
  info.config_json =
      json{{"checkpoint", opt.checkpoint},
           {"dataset", opt.dataset},
           {"batch_size", opt.batch_size},
           {"export_pgm", opt.export_pgm}}
          .dump();
  info.inputs = {opt.checkpoint, opt.dataset};
  info.outputs = std::move(outputs);
  info.seed = set.meta.seed;
  info.wall_seconds = watch.seconds();
  write_run_manifest(out, info);
  return kExitOk;
}

int cmd_evaluate(const EvaluateOptions& opt) {
  const Stopwatch watch;
  const NetworkParams params = load_model(opt.checkpoint);
  const Dataset set = load_split(opt.dataset);
  const fs::path out(opt.out_dir);
  fs::create_directories(out);

  const EvalResult baseline = evaluate_baseline(set);
  const EvalResult model = evaluate_model(params, set, {}, opt.batch_size);
  const std::vector<ReportRow> rows = {{"2NEX-avg", baseline.summary},
                                       {"Model", model.summary}};
  print_rows(rows);

  json context = dataset_context_json(set.meta);
  context["checkpoint"] = opt.checkpoint;
  context["input_mode"] = to_string(params.config.input_mode);
  context["variant"] = to_string(params.config.variant);
  write_metrics_csv(out / "metrics.csv", rows);
  write_metrics_json(out / "metrics.json", rows, context.dump());

  ManifestInfo info;
  info.command = "evaluate";
  info.config_json = json{{"checkpoint", opt.checkpoint},
                          {"dataset", opt.dataset},
                          {"batch_size", opt.batch_size}}
                         .dump();
  info.inputs = {opt.checkpoint, opt.dataset};
  info.outputs = {(out / "metrics.csv").string(),
                  (out / "metrics.json").string()};
  info.seed = set.meta.seed;
  info.wall_seconds = watch.seconds();
  write_run_manifest(out, info);
  return kExitOk;
}

int cmd_ablate(const AblateOptions& opt) {
  const Stopwatch watch;
  const DatasetPair pair = load_pair(opt.dataset_dir);
  const fs::path out(opt.out_dir);
  fs::create_directories(out);

  const AblationReport report =
      run_ablation(opt.base, pair.train, pair.test, opt.seeds);

  auto to_rows = [](const std::vector<AblationRow>& in) {
    std::vector<ReportRow> rows;
    for (const AblationRow& r : in) rows.push_back({r.label, r.summary});
    return rows;
  };
  const std::vector<ReportRow> variant_rows = to_rows(report.variant_rows);
  const std::vector<ReportRow> input_rows = to_rows(report.input_rows);
  const std::vector<ReportRow> per_seed = to_rows(report.per_seed);

  std::printf("bridge-variant comparison (pooled over %zu seeds):\n",
              opt.seeds.size());
  print_rows(variant_rows);
  std::printf("\ninput-mode comparison:\n");
  print_rows(input_rows);

  write_metrics_csv(out / "variants.csv", variant_rows);
  write_metrics_csv(out / "inputs.csv", input_rows);
  write_metrics_csv(out / "per_seed.csv", per_seed);
  json context = train_config_json(opt.base);
  context["seeds"] = opt.seeds;
  context["intensity_scale"] = pair.test.meta.scale;
  json doc;
  doc["variants"] = json::array();
  for (const ReportRow& r : variant_rows)
    doc["variants"].push_back({{"method", r.method},
                               {"psnr_mean", r.summary.psnr_mean},
                               {"psnr_std", r.summary.psnr_std},
                               {"ssim_mean", r.summary.ssim_mean},
                               {"ssim_std", r.summary.ssim_std}});
  context["sections"] = std::move(doc);
  write_metrics_json(out / "metrics.json", input_rows, context.dump());

  ManifestInfo info;
  info.command = "ablate";
  info.config_json = context.dump();
  info.inputs = {(fs::path(opt.dataset_dir) / "train.nxd").string(),
                 (fs::path(opt.dataset_dir) / "test.nxd").string()};
  info.outputs = {(out / "variants.csv").string(),
                  (out / "inputs.csv").string(),
                  (out / "per_seed.csv").string(),
                  (out / "metrics.json").string()};
  info.seed = opt.seeds.front();
  info.wall_seconds = watch.seconds();
  write_run_manifest(out, info);
  return kExitOk;
}

int cmd_noise_stats(const NoiseStatsOptions& opt) {
  const Stopwatch watch;
  const Dataset set = load_split(opt.dataset);
  if (opt.bins < 1) throw UsageError("bins must be >= 1");

  const SliceSample* chosen = nullptr;
  for (const SliceSample& s : set.samples)
    if (s.volume == opt.volume && s.slice == opt.slice) chosen = &s;
  if (!chosen)
    throw DataError("dataset has no slice (volume " +
                    std::to_string(opt.volume) + ", slice " +
                    std::to_string(opt.slice) + ")");

  const fs::path out(opt.out_dir);
  fs::create_directories(out);

  // Panel data from the chosen slice's acquisition pair.
  const ComplexImage a = acquisition_of(*chosen, 0);
  const ComplexImage b = acquisition_of(*chosen, 1);
  const Image signal_mag = magnitude_image(signal_strengthened_map(a, b));
  const Image noise_mag = magnitude_image(noise_map(a, b));

  std::vector<double> mags(noise_mag.begin(), noise_mag.end());
  const double sigma_hat = fit_rayleigh(mags);
  const NoiseStats predicted = rayleigh_moments(sigma_hat);
  const Histogram mag_hist = histogram(mags, opt.bins);

  std::vector<double> squared(mags.size());
  std::transform(mags.begin(), mags.end(), squared.begin(),
                 [](double x) { return x * x; });
  const Chi2Fit chi2 = chi2_overlay(squared);
  const Histogram sq_hist = histogram(squared, opt.bins);

  const Image variance = local_variance_map(noise_mag, 3);

  // Pooled over the whole split: sharper variance field and a goodness-of-fit
  // number that is stable against single-slice fluctuations.
  std::vector<Image> variance_maps;
  std::vector<double> pooled_mags;
  for (const SliceSample& s : set.samples) {
    const Image nm = magnitude_image(
        noise_map(acquisition_of(s, 0), acquisition_of(s, 1)));
    variance_maps.push_back(local_variance_map(nm, 3));
    pooled_mags.insert(pooled_mags.end(), nm.begin(), nm.end());
  }
  const Image pooled_variance = mean_image(variance_maps);
  Image gfactor_sq = set.gfactor;
  for (double& g : gfactor_sq) g *= g;
  // Correlation with gfactor^2 is undefined for a constant gfactor.
  const auto [g_lo, g_hi] =
      std::minmax_element(gfactor_sq.begin(), gfactor_sq.end());
  const bool gfactor_varies = *g_hi > *g_lo;
  const double pearson_r =
      gfactor_varies ? pearson_correlation(pooled_variance, gfactor_sq) : 0.0;
  const double pooled_sigma_hat = fit_rayleigh(pooled_mags);
  const double rayleigh_chi2 =
      rayleigh_chi2_statistic(pooled_mags, pooled_sigma_hat, opt.bins);

  write_histogram_csv(out / "noise_magnitude_hist.csv", mag_hist);
  write_histogram_csv(out / "noise_squared_hist.csv", sq_hist);
  const double signal_peak =
      *std::max_element(signal_mag.begin(), signal_mag.end());
  write_pgm(out / "signal_magnitude.pgm", signal_mag, 0.0,
            signal_peak > 0 ? signal_peak : 1.0);
  const double noise_peak = *std::max_element(noise_mag.begin(),
                                              noise_mag.end());
  write_pgm(out / "noise_magnitude.pgm", noise_mag, 0.0,
            noise_peak > 0 ? noise_peak : 1.0);
  const double var_peak =
      *std::max_element(pooled_variance.begin(), pooled_variance.end());
  write_pgm(out / "variance_map.pgm", pooled_variance, 0.0,
            var_peak > 0 ? var_peak : 1.0);
  write_image_container(out / "variance_map.nxd", pooled_variance,
                        "pooled_local_variance",
                        dataset_context_json(set.meta).dump());

  const double expected_sigma =
      std::sqrt(2.0) * set.meta.sigma0 * set.meta.scale;
  json stats = dataset_context_json(set.meta);
  stats["volume"] = opt.volume;
  stats["slice"] = opt.slice;
  stats["sigma_hat"] = sigma_hat;
  stats["sigma_expected_uniform_gfactor"] = expected_sigma;
  stats["rayleigh_mu"] = predicted.mu_r;
  stats["rayleigh_var"] = predicted.sigma_r2;
  stats["chi2_scale"] = chi2.scale;
  stats["chi2_noncentrality"] = chi2.noncentrality;
  stats["pooled_sigma_hat"] = pooled_sigma_hat;
  if (gfactor_varies) {
    stats["pooled_variance_gfactor2_pearson_r"] = pearson_r;
  } else {
    stats["pooled_variance_gfactor2_pearson_r"] = nullptr;
  }
  stats["pooled_rayleigh_chi2"] = rayleigh_chi2;
  {
    std::ofstream js(out / "stats.json", std::ios::trunc);
    if (!js) throw DataError("cannot write " + (out / "stats.json").string());
    js << stats.dump(2) << "\n";
  }

  std::printf("noise-map Rayleigh fit: sigma_hat %.6g (uniform-g expectation "
              "%.6g)\n",
              sigma_hat, expected_sigma);
  if (gfactor_varies) {
    std::printf("pooled local variance vs gfactor^2: Pearson r = %.4f\n",
                pearson_r);
  } else {
    std::printf("pooled local variance vs gfactor^2: n/a (constant gfactor)\n");
  }
  std::printf("pooled Rayleigh goodness-of-fit chi2 = %.6g\n", rayleigh_chi2);

  ManifestInfo info;
  info.command = "noise-stats";
  info.config_json = json{{"dataset", opt.dataset},
                          {"volume", opt.volume},
                          {"slice", opt.slice},
                          {"bins", opt.bins}}
                         .dump();
  info.inputs = {opt.dataset};
  info.outputs = {(out / "noise_magnitude_hist.csv").string(),
                  (out / "noise_squared_hist.csv").string(),
                  (out / "signal_magnitude.pgm").string(),
                  (out / "noise_magnitude.pgm").string(),
                  (out / "variance_map.pgm").string(),
                  (out / "variance_map.nxd").string(),
                  (out / "stats.json").string()};
  info.seed = set.meta.seed;
  info.wall_seconds = watch.seconds();
  write_run_manifest(out, info);
  return kExitOk;
}

}  // namespace nexrl
