// Command-line front end: simulate / train / denoise / evaluate / ablate /
// noise-stats. Every flag mirrors a config key one-to-one; --config loads the
// same keys from a JSON file and explicit flags win. The effective config is
// echoed into each run's manifest, so a manifest can be replayed as --config.

#include <cstdint>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "nexrl/commands.hpp"
#include "nexrl/version.hpp"

namespace {

using nlohmann::json;

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw nexrl::UsageError("cannot read config file " + path);
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw nexrl::UsageError(path + ": not a JSON object");
  return j;
}

/// Applies config-file values to every bound variable whose flag was not
/// given on the command line.
class ConfigMerge {
 public:
  template <typename T>
  void bind(CLI::Option* opt, std::string key, T* var) {
    actions_.push_back([opt, key = std::move(key), var](const json& j) {
      if (opt->count() == 0 && j.contains(key)) *var = j.at(key).get<T>();
    });
  }

  void apply(const json& j) const {
    for (const auto& action : actions_) action(j);
  }

 private:
  std::vector<std::function<void(const json&)>> actions_;
};

struct TrainVars {
  nexrl::TrainConfig cfg;
  std::string input_mode = "dual";
  std::string variant = "full";
  std::string loss_form = "product";
};

/// Training flags shared by `train` and `ablate`.
void add_train_options(CLI::App* sub, TrainVars& v, ConfigMerge& merge) {
  merge.bind(sub->add_option("--lr", v.cfg.initial_lr, "Initial learning rate"),
             "initial_lr", &v.cfg.initial_lr);
  merge.bind(sub->add_option("--plateau-factor", v.cfg.plateau_factor,
                             "LR decay factor on plateau"),
             "plateau_factor", &v.cfg.plateau_factor);
  merge.bind(sub->add_option("--plateau-patience", v.cfg.plateau_patience,
                             "Non-improving epochs before an LR drop"),
             "plateau_patience", &v.cfg.plateau_patience);
  merge.bind(sub->add_option("--batch-size", v.cfg.batch_size, "Batch size"),
             "batch_size", &v.cfg.batch_size);
  merge.bind(sub->add_option("--epochs", v.cfg.epochs, "Training epochs"),
             "epochs", &v.cfg.epochs);
  merge.bind(sub->add_option("--seed", v.cfg.seed, "Master random seed"),
             "seed", &v.cfg.seed);
  merge.bind(sub->add_option("--input", v.input_mode,
                             "Input mode: dual|single"),
             "input_mode", &v.input_mode);
  merge.bind(sub->add_option("--variant", v.variant,
                             "Bridge variant: full|tra|res"),
             "variant", &v.variant);
  merge.bind(sub->add_option("--extract-width", v.cfg.extract_width,
                             "Feature-extraction channels"),
             "extract_width", &v.cfg.extract_width);
  merge.bind(sub->add_option("--bridge-width", v.cfg.bridge_width,
                             "Bridge/assembly channels"),
             "bridge_width", &v.cfg.bridge_width);
  merge.bind(sub->add_option("--loss", v.loss_form,
                             "Loss form: product|sum"),
             "loss_form", &v.loss_form);
  merge.bind(sub->add_option("--sum-lambda", v.cfg.sum_lambda,
                             "SSIM weight in the sum loss form"),
             "sum_lambda", &v.cfg.sum_lambda);
}

nexrl::TrainConfig resolve_train_config(const TrainVars& v) {
  nexrl::TrainConfig cfg = v.cfg;
  cfg.input_mode = nexrl::parse_input_mode(v.input_mode);
  cfg.variant = nexrl::parse_variant(v.variant);
  cfg.loss_form = nexrl::parse_loss_form(v.loss_form);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-acquisition residual-learning MR image denoising"};
  app.set_version_flag("--version", nexrl::kVersion);
  app.require_subcommand(1);

  std::function<int()> action;

  // ---- simulate ----
  auto sim = std::make_shared<nexrl::SimulateOptions>();
  auto sim_merge = std::make_shared<ConfigMerge>();
  auto sim_config = std::make_shared<std::string>();
  {
    CLI::App* sub = app.add_subcommand(
        "simulate", "Generate a synthetic 2-NEX/8-NEX dataset");
    sub->add_option("--config", *sim_config, "JSON config file");
    ConfigMerge& m = *sim_merge;
    nexrl::DatasetConfig& d = sim->dataset;
    m.bind(sub->add_option("--train-volumes", d.train_volumes,
                           "Training volumes"),
           "train_volumes", &d.train_volumes);
    m.bind(sub->add_option("--test-volumes", d.test_volumes, "Test volumes"),
           "test_volumes", &d.test_volumes);
    m.bind(sub->add_option("--slices", d.slices_per_volume,
                           "Slices per volume"),
           "slices_per_volume", &d.slices_per_volume);
    m.bind(sub->add_option("--height", d.height, "Slice height"), "height",
           &d.height);
    m.bind(sub->add_option("--width", d.width, "Slice width"), "width",
           &d.width);
    m.bind(sub->add_option("--sigma0", d.sigma0,
                           "Per-acquisition noise std (<= 0: calibrate)"),
           "sigma0", &d.sigma0);
    m.bind(sub->add_option("--target-psnr", d.target_baseline_psnr,
                           "Calibration target for the 2NEX-avg PSNR"),
           "target_baseline_psnr", &d.target_baseline_psnr);
    m.bind(sub->add_option("--gfactor", d.gfactor,
                           "Noise map shape: bump|constant"),
           "gfactor", &d.gfactor);
    m.bind(sub->add_option("--plane", d.plane, "Dataset family tag"), "plane",
           &d.plane);
    m.bind(sub->add_option("--seed", d.seed, "Master random seed"), "seed",
           &d.seed);
    m.bind(sub->add_option("--out", sim->out_dir, "Output directory"),
           "out_dir", &sim->out_dir);
    sub->callback([&action, sim, sim_merge, sim_config] {
      action = [sim, sim_merge, sim_config] {
        sim_merge->apply(load_config_file(*sim_config));
        return nexrl::cmd_simulate(*sim);
      };
    });
  }

  // ---- train ----
  auto train_vars = std::make_shared<TrainVars>();
  auto train_opt = std::make_shared<nexrl::TrainOptions>();
  auto train_merge = std::make_shared<ConfigMerge>();
  auto train_config = std::make_shared<std::string>();
  {
    CLI::App* sub =
        app.add_subcommand("train", "Train a denoising model on a dataset");
    sub->add_option("--config", *train_config, "JSON config file");
    ConfigMerge& m = *train_merge;
    add_train_options(sub, *train_vars, m);
    m.bind(sub->add_option("--dataset", train_opt->dataset_dir,
                           "Directory with train.nxd/test.nxd"),
           "dataset_dir", &train_opt->dataset_dir);
    m.bind(sub->add_option("--out", train_opt->out_dir, "Run directory"),
           "out_dir", &train_opt->out_dir);
    m.bind(sub->add_option("--resume", train_opt->resume,
                           "last.nxd checkpoint to resume from"),
           "resume", &train_opt->resume);
    m.bind(sub->add_option("--checkpoint-dir",
                           train_vars->cfg.checkpoint_dir,
                           "Checkpoint directory (default: run directory)"),
           "checkpoint_dir", &train_vars->cfg.checkpoint_dir);
    sub->add_flag("--verbose", train_vars->cfg.verbose,
                  "Print one line per epoch");
    sub->callback([&action, train_vars, train_opt, train_merge, train_config] {
      action = [train_vars, train_opt, train_merge, train_config] {
        train_merge->apply(load_config_file(*train_config));
        train_opt->config = resolve_train_config(*train_vars);
        return nexrl::cmd_train(*train_opt);
      };
    });
  }

  // ---- denoise ----
  auto den = std::make_shared<nexrl::DenoiseOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "denoise", "Denoise every slice of a dataset container");
    sub->add_option("--checkpoint", den->checkpoint, "Model checkpoint")
        ->required();
    sub->add_option("--dataset", den->dataset, "Dataset container (.nxd)")
        ->required();
    sub->add_option("--out", den->out_dir, "Output directory");
    sub->add_option("--batch-size", den->batch_size, "Evaluation batch size");
    sub->add_flag("--pgm", den->export_pgm, "Also export 8-bit PGM images");
    sub->callback([&action, den] {
      action = [den] { return nexrl::cmd_denoise(*den); };
    });
  }

  // ---- evaluate ----
  auto eva = std::make_shared<nexrl::EvaluateOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "evaluate", "PSNR/SSIM of a model and the 2NEX-avg baseline");
    sub->add_option("--checkpoint", eva->checkpoint, "Model checkpoint")
        ->required();
    sub->add_option("--dataset", eva->dataset, "Dataset container (.nxd)")
        ->required();
    sub->add_option("--out", eva->out_dir, "Output directory");
    sub->add_option("--batch-size", eva->batch_size, "Evaluation batch size");
    sub->callback([&action, eva] {
      action = [eva] { return nexrl::cmd_evaluate(*eva); };
    });
  }

  // ---- ablate ----
  auto abl_vars = std::make_shared<TrainVars>();
  auto abl = std::make_shared<nexrl::AblateOptions>();
  auto abl_merge = std::make_shared<ConfigMerge>();
  auto abl_config = std::make_shared<std::string>();
  {
    CLI::App* sub = app.add_subcommand(
        "ablate", "Train and compare bridge variants and input modes");
    sub->add_option("--config", *abl_config, "JSON config file");
    ConfigMerge& m = *abl_merge;
    add_train_options(sub, *abl_vars, m);
    m.bind(sub->add_option("--dataset", abl->dataset_dir,
                           "Directory with train.nxd/test.nxd"),
           "dataset_dir", &abl->dataset_dir);
    m.bind(sub->add_option("--out", abl->out_dir, "Output directory"),
           "out_dir", &abl->out_dir);
    m.bind(sub->add_option("--seeds", abl->seeds, "Training seeds"), "seeds",
           &abl->seeds);
    sub->add_flag("--verbose", abl_vars->cfg.verbose,
                  "Print one line per epoch");
    sub->callback([&action, abl_vars, abl, abl_merge, abl_config] {
      action = [abl_vars, abl, abl_merge, abl_config] {
        abl_merge->apply(load_config_file(*abl_config));
        abl->base = resolve_train_config(*abl_vars);
        return nexrl::cmd_ablate(*abl);
      };
    });
  }

  // ---- noise-stats ----
  auto noi = std::make_shared<nexrl::NoiseStatsOptions>();
  {
    CLI::App* sub = app.add_subcommand(
        "noise-stats",
        "Noise-map statistics panels (histograms, fits, variance map)");
    sub->add_option("--dataset", noi->dataset, "Dataset container (.nxd)")
        ->required();
    sub->add_option("--out", noi->out_dir, "Output directory");
    sub->add_option("--volume", noi->volume, "Volume index of the shown slice");
    sub->add_option("--slice", noi->slice, "Slice index of the shown slice");
    sub->add_option("--bins", noi->bins, "Histogram bins");
    sub->callback([&action, noi] {
      action = [noi] { return nexrl::cmd_noise_stats(*noi); };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? nexrl::kExitOk : nexrl::kExitUsage;
  }
  return nexrl::run_guarded(action);
}
