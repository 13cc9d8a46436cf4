#include "nexrl/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <numeric>

#include <nlohmann/json.hpp>

#include "nexrl/container.hpp"
#include "nexrl/optimizer.hpp"
#include "nexrl/rng.hpp"

namespace nexrl {

using nlohmann::json;
using ForwardTrace = ForwardTraceT<float>;

namespace {

// Shared by training loss, evaluation, and the baseline so that an untrained
// network scores bit-identically to the 2NEX average.
constexpr float kMagnitudeEps = 1e-12f;

void require_nonempty(const Dataset& set, const char* which) {
  if (set.samples.empty())
    throw DataError(std::string(which) + " dataset is empty");
}

/// Stacks the selected samples' 4-channel inputs; single mode then collapses
/// the pair to its complex average, exactly as the dual network's skip does.
Tensor gather_inputs(const Dataset& set, const std::vector<int>& idx,
                     InputMode mode) {
  const Tensor& first = set.samples[static_cast<std::size_t>(idx[0])].input;
  Tensor out(static_cast<int>(idx.size()), 4, first.height(), first.width());
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Tensor& in = set.samples[static_cast<std::size_t>(idx[b])].input;
    require_same_shape(in, first, "gather_inputs");
    std::copy(in.begin(), in.end(), out.plane(static_cast<int>(b), 0));
  }
  if (mode == InputMode::kSingle) return channel_mean_pair(out);
  return out;
}

Image tensor_plane(const Tensor& t, int n, int c) {
  Image out(t.height(), t.width());
  const float* src = t.plane(n, c);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<double>(src[i]);
  return out;
}

/// Per-sample combined loss of |output| against the stored target magnitude.
/// When grad_mag is non-null it receives the unscaled per-sample gradients.
std::vector<double> magnitude_losses(const Tensor& mag,
                                     const Dataset& set,
                                     const std::vector<int>& idx,
                                     const LossConfig& cfg, Tensor* grad_mag) {
  std::vector<double> losses(idx.size(), 0.0);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const Image pred = tensor_plane(mag, static_cast<int>(b), 0);
    const Image ref = magnitude_plane(
        set.samples[static_cast<std::size_t>(idx[b])].target, 0);
    losses[b] = combined_loss(pred, ref, cfg);
    if (grad_mag) {
      const Image g = combined_loss_grad(pred, ref, cfg);
      float* dst = grad_mag->plane(static_cast<int>(b), 0);
      for (std::size_t i = 0; i < g.size(); ++i)
        dst[i] = static_cast<float>(g.data()[i]);
    }
  }
  return losses;
}

std::vector<std::vector<int>> make_batches(const std::vector<int>& order,
                                           int batch_size) {
  std::vector<std::vector<int>> batches;
  for (std::size_t start = 0; start < order.size();
       start += static_cast<std::size_t>(batch_size)) {
    const std::size_t stop =
        std::min(order.size(), start + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return batches;
}

double mean_eval_loss(const NetworkParams& params, const Dataset& set,
                      const LossConfig& cfg, int batch_size) {
  std::vector<int> order(set.samples.size());
  std::iota(order.begin(), order.end(), 0);
  double sum = 0.0;
  for (const std::vector<int>& idx : make_batches(order, batch_size)) {
    const Tensor inputs = gather_inputs(set, idx, params.config.input_mode);
    const ForwardTrace trace = forward_eval(params, inputs);
    const Tensor mag = magnitude(trace.output, kMagnitudeEps);
    for (double l : magnitude_losses(mag, set, idx, cfg, nullptr)) sum += l;
  }
  return sum / static_cast<double>(set.samples.size());
}

json scheduler_json(const PlateauScheduler& s) {
  return {{"lr", s.lr()},
          {"best", s.best()},
          {"has_best", s.has_best()},
          {"stale", s.stale_epochs()}};
}

json history_json(const TrainingHistory& h) {
  json rows = json::array();
  for (const EpochStats& e : h.epochs)
    rows.push_back({e.epoch, e.train_loss, e.val_loss, e.lr, e.seconds});
  return rows;
}

TrainingHistory history_from_json(const json& rows) {
  TrainingHistory h;
  for (const json& r : rows) {
    EpochStats e;
    e.epoch = r.at(0).get<int>();
    e.train_loss = r.at(1).get<double>();
    e.val_loss = r.at(2).get<double>();
    e.lr = r.at(3).get<double>();
    e.seconds = r.at(4).get<double>();
    h.epochs.push_back(e);
  }
  return h;
}

}  // namespace

TrainResult train(const TrainConfig& config, const Dataset& train_set,
                  const Dataset& val_set, const std::string& resume_from) {
  if (config.batch_size < 1) throw DataError("batch_size must be >= 1");
  if (config.epochs < 0) throw DataError("epochs must be >= 0");
  require_nonempty(train_set, "training");
  require_nonempty(val_set, "validation");

  NetworkConfig nc;
  nc.input_mode = config.input_mode;
  nc.variant = config.variant;
  nc.extract_width = config.extract_width;
  nc.bridge_width = config.bridge_width;

  LossConfig loss_cfg;
  loss_cfg.form = config.loss_form;
  loss_cfg.sum_lambda = config.sum_lambda;

  const std::filesystem::path dir = config.checkpoint_dir;
  if (!config.checkpoint_dir.empty())
    std::filesystem::create_directories(dir);

  NetworkParams params;
  AdamState adam;
  PlateauScheduler sched(config.initial_lr, config.plateau_factor,
                         config.plateau_patience);
  TrainingHistory history;
  NetworkParams best_params;
  bool has_best = false;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  int start_epoch = 0;

  if (!resume_from.empty()) {
    Checkpoint ck = load_checkpoint(resume_from);
    if (ck.params.config.input_mode != nc.input_mode ||
        ck.params.config.variant != nc.variant ||
        ck.params.config.extract_width != nc.extract_width ||
        ck.params.config.bridge_width != nc.bridge_width)
      throw DataError("resume checkpoint was written for a different model");
    params = std::move(ck.params);
    adam = ck.adam ? std::move(*ck.adam) : AdamState::init(params);
    const json extra = json::parse(ck.extra_json);
    start_epoch = extra.at("epoch").get<int>();
    const json& js = extra.at("scheduler");
    sched.restore(js.at("lr").get<double>(), js.at("best").get<double>(),
                  js.at("has_best").get<bool>(), js.at("stale").get<int>());
    history = history_from_json(extra.at("history"));
    const json& jb = extra.at("best");
    has_best = jb.at("has").get<bool>();
    best_epoch = jb.at("epoch").get<int>();
    best_val = jb.at("val_loss").get<double>();
    const std::filesystem::path best_path =
        std::filesystem::path(resume_from).parent_path() / "best.nxd";
    best_params = std::filesystem::exists(best_path)
                      ? load_checkpoint(best_path).params
                      : params;
  } else {
    params = build_network<float>(nc, substream(config.seed, "init"));
    adam = AdamState::init(params);
    best_params = params;
  }

  const int n = static_cast<int>(train_set.samples.size());
  for (int epoch = start_epoch + 1; epoch <= config.epochs; ++epoch) {
    const double lr = sched.lr();
    const auto t0 = std::chrono::steady_clock::now();

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng shuffle_rng(substream(config.seed, "shuffle",
                              static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());

    double loss_sum = 0.0;
    int batch_index = 0;
    for (const std::vector<int>& idx : make_batches(order, config.batch_size)) {
      const Tensor inputs = gather_inputs(train_set, idx, config.input_mode);
      ForwardTrace trace = forward(params, inputs, Mode::kTrain);
      const Tensor mag = magnitude(trace.output, kMagnitudeEps);

      Tensor grad_mag(static_cast<int>(idx.size()), 1, mag.height(),
                      mag.width());
      const std::vector<double> losses =
          magnitude_losses(mag, train_set, idx, loss_cfg, &grad_mag);
      double batch_sum = 0.0;
      for (double l : losses) batch_sum += l;
      if (!std::isfinite(batch_sum))
        throw NumericalError("non-finite training loss at epoch " +
                             std::to_string(epoch) + ", batch " +
                             std::to_string(batch_index));
      loss_sum += batch_sum;

      // Batch loss is the mean over its samples.
      const float inv_b = 1.0f / static_cast<float>(idx.size());
      for (float& g : grad_mag) g *= inv_b;
      const Tensor grad_output =
          magnitude_backward(grad_mag, trace.output, kMagnitudeEps);
      NetworkGrads grads = backward(params, trace, grad_output);
      adam_step(params, grads, adam, lr);
      ++batch_index;
    }

    const double train_loss = loss_sum / static_cast<double>(n);
    const double val_loss =
        mean_eval_loss(params, val_set, loss_cfg, config.batch_size);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    history.epochs.push_back({epoch, train_loss, val_loss, lr, seconds});

    if (!has_best || val_loss < best_val) {
      has_best = true;
      best_val = val_loss;
      best_epoch = epoch;
      best_params = params;
      if (!config.checkpoint_dir.empty()) {
        Checkpoint best_ck;
        best_ck.params = best_params;
        best_ck.extra_json =
            json{{"epoch", epoch}, {"val_loss", val_loss}}.dump();
        save_checkpoint(dir / "best.nxd", best_ck);
      }
    }

    sched.observe(train_loss);

    if (!config.checkpoint_dir.empty()) {
      Checkpoint last;
      last.params = params;
      last.adam = adam;
      json extra;
      extra["epoch"] = epoch;
      extra["scheduler"] = scheduler_json(sched);
      extra["best"] = {{"has", has_best},
                       {"epoch", best_epoch},
                       {"val_loss", best_val}};
      extra["history"] = history_json(history);
      extra["train_seed"] = config.seed;
      last.extra_json = extra.dump();
      save_checkpoint(dir / "last.nxd", last);
    }

    if (config.verbose)
      std::printf("epoch %d/%d  train %.6g  val %.6g  lr %.3g  (%.1fs)\n",
                  epoch, config.epochs, train_loss, val_loss, lr, seconds);
  }

  // Zero-epoch runs still leave a usable checkpoint pair behind.
  if (!config.checkpoint_dir.empty() &&
      !std::filesystem::exists(dir / "last.nxd")) {
    Checkpoint init_ck;
    init_ck.params = params;
    init_ck.adam = adam;
    json extra;
    extra["epoch"] = start_epoch;
    extra["scheduler"] = scheduler_json(sched);
    extra["best"] = {{"has", has_best},
                     {"epoch", best_epoch},
                     {"val_loss", has_best ? best_val : 0.0}};
    extra["history"] = history_json(history);
    extra["train_seed"] = config.seed;
    init_ck.extra_json = extra.dump();
    save_checkpoint(dir / "last.nxd", init_ck);
    init_ck.adam.reset();
    save_checkpoint(dir / "best.nxd", init_ck);
  }

  history.best_epoch = best_epoch;
  history.best_val_loss = has_best ? best_val : 0.0;

  TrainResult result;
  result.params = std::move(params);
  result.best_params = std::move(best_params);
  result.history = std::move(history);
  return result;
}

EvalResult evaluate_baseline(const Dataset& set, const SsimConfig& cfg) {
  require_nonempty(set, "evaluation");
  EvalResult r;
  for (const SliceSample& s : set.samples) {
    const Tensor avg = channel_mean_pair(s.input);
    const Tensor mag = magnitude(avg, kMagnitudeEps);
    r.records.push_back(
        evaluate_pair(tensor_plane(mag, 0, 0), magnitude_plane(s.target, 0),
                      cfg));
  }
  r.summary = aggregate(r.records);
  return r;
}

namespace {

EvalResult evaluate_against(const NetworkParams& params, const Dataset& set,
                            const SsimConfig& cfg, int batch_size,
                            bool against_clean) {
  require_nonempty(set, "evaluation");
  if (batch_size < 1) throw DataError("batch_size must be >= 1");
  EvalResult r;
  std::vector<int> order(set.samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (const std::vector<int>& idx : make_batches(order, batch_size)) {
    const Tensor inputs = gather_inputs(set, idx, params.config.input_mode);
    const ForwardTrace trace = forward_eval(params, inputs);
    const Tensor mag = magnitude(trace.output, kMagnitudeEps);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const SliceSample& s = set.samples[static_cast<std::size_t>(idx[b])];
      const Image ref =
          magnitude_plane(against_clean ? s.clean : s.target, 0);
      r.records.push_back(
          evaluate_pair(tensor_plane(mag, static_cast<int>(b), 0), ref, cfg));
    }
  }
  r.summary = aggregate(r.records);
  return r;
}

}  // namespace

EvalResult evaluate_model(const NetworkParams& params, const Dataset& set,
                          const SsimConfig& cfg, int batch_size) {
  return evaluate_against(params, set, cfg, batch_size, false);
}

EvalResult evaluate_model_vs_clean(const NetworkParams& params,
                                   const Dataset& set, const SsimConfig& cfg,
                                   int batch_size) {
  return evaluate_against(params, set, cfg, batch_size, true);
}

AblationReport run_ablation(const TrainConfig& base, const Dataset& train_set,
                            const Dataset& test_set,
                            const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw DataError("ablation needs at least one seed");

  struct Arm {
    const char* label;
    InputMode mode;
    Variant variant;
  };
  const Arm arms[] = {{"Model", InputMode::kDual, Variant::kFull},
                      {"Model-Tra", InputMode::kDual, Variant::kTra},
                      {"Model-Res", InputMode::kDual, Variant::kRes},
                      {"Model-Single", InputMode::kSingle, Variant::kFull}};

  const SsimConfig ssim_cfg;
  AblationReport report;
  std::vector<std::vector<MetricsRecord>> pooled(std::size(arms));

  for (std::uint64_t seed : seeds) {
    for (std::size_t a = 0; a < std::size(arms); ++a) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      cfg.input_mode = arms[a].mode;
      cfg.variant = arms[a].variant;
      if (!base.checkpoint_dir.empty())
        cfg.checkpoint_dir = base.checkpoint_dir + "/" +
                             std::string(arms[a].label) + "-seed" +
                             std::to_string(seed);
      const TrainResult run = train(cfg, train_set, test_set);
      const EvalResult eval =
          evaluate_model(run.best_params, test_set, ssim_cfg, base.batch_size);
      pooled[a].insert(pooled[a].end(), eval.records.begin(),
                       eval.records.end());
      report.per_seed.push_back({std::string(arms[a].label) + " seed=" +
                                     std::to_string(seed),
                                 eval.summary});
    }
  }

  for (std::size_t a = 0; a < 3; ++a)
    report.variant_rows.push_back({arms[a].label, aggregate(pooled[a])});

  const EvalResult baseline = evaluate_baseline(test_set, ssim_cfg);
  report.input_rows.push_back({"2NEX-avg", baseline.summary});
  report.input_rows.push_back({"Model-Dual", aggregate(pooled[0])});
  report.input_rows.push_back({"Model-Single", aggregate(pooled[3])});
  return report;
}

}  // namespace nexrl
