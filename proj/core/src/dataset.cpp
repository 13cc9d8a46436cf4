#include "nexrl/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "nexrl/container.hpp"
#include "nexrl/metrics.hpp"
#include "nexrl/noise_stats.hpp"
#include "nexrl/phantom.hpp"
#include "nexrl/rng.hpp"

namespace nexrl {

using nlohmann::json;

namespace {

constexpr int kAcquisitions = 10;  // 2 for the input pair + 8 for the target
constexpr std::size_t kPairFirst = 0;
constexpr std::size_t kTargetFirst = 2;
constexpr std::size_t kTargetCount = 8;

std::uint64_t phantom_stream(std::uint64_t seed, const std::string& split,
                             std::uint64_t index) {
  return substream(seed, "phantom/" + split, index);
}

std::uint64_t noise_stream(std::uint64_t seed, const std::string& split,
                           std::uint64_t index) {
  return substream(seed, "noise/" + split, index);
}

Image make_gfactor(const std::string& kind, int h, int w) {
  if (kind == "bump") return default_gfactor(h, w);
  if (kind == "constant") return constant_gfactor(h, w);
  throw DataError("unknown gfactor kind '" + kind + "' (bump|constant)");
}

void copy_plane(Tensor& t, int c, const Image& img) {
  float* dst = t.plane(0, c);
  const double* src = img.data();
  for (std::size_t i = 0; i < img.size(); ++i)
    dst[i] = static_cast<float>(src[i]);
}

SliceSample make_sample(int volume, int slice, const ComplexImage& clean,
                        const NexSet& nex) {
  const int h = clean.height(), w = clean.width();
  SliceSample s;
  s.volume = volume;
  s.slice = slice;
  s.input = Tensor(1, 4, h, w);
  copy_plane(s.input, 0, nex.slices[kPairFirst].real);
  copy_plane(s.input, 1, nex.slices[kPairFirst].imag);
  copy_plane(s.input, 2, nex.slices[kPairFirst + 1].real);
  copy_plane(s.input, 3, nex.slices[kPairFirst + 1].imag);

  const ComplexImage target =
      complex_average(nex.slices, kTargetFirst, kTargetCount);
  s.target = Tensor(1, 2, h, w);
  copy_plane(s.target, 0, target.real);
  copy_plane(s.target, 1, target.imag);

  s.clean = Tensor(1, 2, h, w);
  copy_plane(s.clean, 0, clean.real);
  copy_plane(s.clean, 1, clean.imag);
  return s;
}

Dataset build_split(const DatasetConfig& config, const std::string& split,
                    int volumes, double sigma0, const Image& gfactor) {
  Dataset set;
  set.meta.split = split;
  set.meta.plane = config.plane;
  set.meta.volumes = volumes;
  set.meta.slices_per_volume = config.slices_per_volume;
  set.meta.height = config.height;
  set.meta.width = config.width;
  set.meta.sigma0 = sigma0;
  set.meta.gfactor_kind = config.gfactor;
  set.meta.seed = config.seed;
  set.gfactor = gfactor;
  set.samples.reserve(static_cast<std::size_t>(volumes) *
                      config.slices_per_volume);
  for (int v = 0; v < volumes; ++v) {
    for (int s = 0; s < config.slices_per_volume; ++s) {
      const std::uint64_t index =
          static_cast<std::uint64_t>(v) * config.slices_per_volume + s;
      const PhantomSpec spec =
          random_phantom_spec(phantom_stream(config.seed, split, index),
                              config.height, config.width);
      const ComplexImage clean = generate_phantom(spec);
      const NexSet nex =
          acquire_nex(clean, sigma0, gfactor, kAcquisitions,
                      noise_stream(config.seed, split, index));
      set.samples.push_back(make_sample(v, s, clean, nex));
    }
  }
  return set;
}

double max_target_magnitude(const Dataset& set) {
  double peak = 0.0;
  for (const SliceSample& s : set.samples) {
    const std::size_t p = s.target.plane_size();
    const float* re = s.target.plane(0, 0);
    const float* im = s.target.plane(0, 1);
    for (std::size_t t = 0; t < p; ++t)
      peak = std::max(peak, std::hypot(static_cast<double>(re[t]),
                                       static_cast<double>(im[t])));
  }
  return peak;
}

void apply_scale(Dataset& set, double scale) {
  set.meta.scale = scale;
  const float fs = static_cast<float>(scale);
  for (SliceSample& s : set.samples) {
    for (float& v : s.input) v *= fs;
    for (float& v : s.target) v *= fs;
    for (float& v : s.clean) v *= fs;
  }
}

/// Every phantom recipe in the run must come from a distinct seed stream, so
/// no slice (and in particular no test slice) can repeat a training slice.
void audit_disjoint_streams(const DatasetConfig& config) {
  std::unordered_set<std::uint64_t> seen;
  auto check = [&](const std::string& split, int volumes) {
    for (std::uint64_t i = 0;
         i < static_cast<std::uint64_t>(volumes) * config.slices_per_volume;
         ++i)
      if (!seen.insert(phantom_stream(config.seed, split, i)).second)
        throw DataError("phantom seed stream collision between splits");
  };
  check("train", config.train_volumes);
  check("test", config.test_volumes);
}

}  // namespace

double calibrate_sigma0(const DatasetConfig& config, double target_psnr) {
  // Small probe drawn from the head of the training stream: enough slices to
  // stabilize the mean PSNR without paying for the full split per iteration.
  const int probe_volumes = std::min(config.train_volumes, 4);
  const int probe_slices = std::min(config.slices_per_volume, 2);
  std::vector<ComplexImage> cleans;
  std::vector<std::uint64_t> noise_seeds;
  for (int v = 0; v < probe_volumes; ++v) {
    for (int s = 0; s < probe_slices; ++s) {
      const std::uint64_t index =
          static_cast<std::uint64_t>(v) * config.slices_per_volume + s;
      cleans.push_back(generate_phantom(
          random_phantom_spec(phantom_stream(config.seed, "train", index),
                              config.height, config.width)));
      noise_seeds.push_back(noise_stream(config.seed, "train", index));
    }
  }
  const Image gfactor =
      make_gfactor(config.gfactor, config.height, config.width);

  // Mean PSNR of the 2-NEX average against the 8-NEX target, in the [0,255]
  // units the probe itself defines. Noise draws are unit normals scaled by
  // sigma0, so this is strictly decreasing in sigma0.
  auto probe_psnr = [&](double sigma0) {
    std::vector<Image> pair_mags, target_mags;
    double peak = 0.0;
    for (std::size_t t = 0; t < cleans.size(); ++t) {
      const NexSet nex = acquire_nex(cleans[t], sigma0, gfactor, kAcquisitions,
                                     noise_seeds[t]);
      pair_mags.push_back(magnitude_image(
          complex_average(nex.slices, kPairFirst, 2)));
      target_mags.push_back(magnitude_image(
          complex_average(nex.slices, kTargetFirst, kTargetCount)));
      for (double m : target_mags.back()) peak = std::max(peak, m);
    }
    if (peak <= 0) throw DataError("calibration probe has no signal");
    const double scale = 255.0 / peak;
    double sum = 0.0;
    for (std::size_t t = 0; t < pair_mags.size(); ++t) {
      Image a = pair_mags[t], b = target_mags[t];
      for (double& v : a) v *= scale;
      for (double& v : b) v *= scale;
      const auto p = psnr(a, b);
      if (!p) throw DataError("calibration probe produced identical images");
      sum += *p;
    }
    return sum / static_cast<double>(pair_mags.size());
  };

  double lo = 1e-4, hi = 0.8;
  if (probe_psnr(lo) < target_psnr || probe_psnr(hi) > target_psnr)
    throw DataError("calibration target PSNR outside the reachable range");
  for (int it = 0; it < 40; ++it) {
    const double mid = std::sqrt(lo * hi);
    (probe_psnr(mid) > target_psnr ? lo : hi) = mid;
  }
  return std::sqrt(lo * hi);
}

DatasetPair build_dataset(const DatasetConfig& config) {
  if (config.train_volumes < 1 || config.test_volumes < 1 ||
      config.slices_per_volume < 1)
    throw DataError("dataset needs at least one volume and slice per split");
  audit_disjoint_streams(config);

  const double sigma0 =
      config.sigma0 > 0 ? config.sigma0
                        : calibrate_sigma0(config, config.target_baseline_psnr);
  const Image gfactor =
      make_gfactor(config.gfactor, config.height, config.width);

  DatasetPair pair;
  pair.train =
      build_split(config, "train", config.train_volumes, sigma0, gfactor);
  pair.test = build_split(config, "test", config.test_volumes, sigma0, gfactor);

  const double peak = max_target_magnitude(pair.train);
  if (peak <= 0) throw DataError("training split has no signal");
  const double scale = 255.0 / peak;
  apply_scale(pair.train, scale);
  apply_scale(pair.test, scale);
  return pair;
}

void save_dataset(const std::filesystem::path& path, const Dataset& set) {
  const int n = static_cast<int>(set.samples.size());
  const int h = set.meta.height, w = set.meta.width;
  Tensor inputs(n, 4, h, w), targets(n, 2, h, w), cleans(n, 2, h, w);
  json volume_index = json::array(), slice_index = json::array();
  for (int i = 0; i < n; ++i) {
    const SliceSample& s = set.samples[static_cast<std::size_t>(i)];
    std::copy(s.input.begin(), s.input.end(), inputs.plane(i, 0));
    std::copy(s.target.begin(), s.target.end(), targets.plane(i, 0));
    std::copy(s.clean.begin(), s.clean.end(), cleans.plane(i, 0));
    volume_index.push_back(s.volume);
    slice_index.push_back(s.slice);
  }

  json meta;
  meta["format"] = "dataset";
  meta["split"] = set.meta.split;
  meta["plane"] = set.meta.plane;
  meta["volumes"] = set.meta.volumes;
  meta["slices_per_volume"] = set.meta.slices_per_volume;
  meta["height"] = h;
  meta["width"] = w;
  meta["sigma0"] = set.meta.sigma0;
  meta["scale"] = set.meta.scale;
  meta["gfactor_kind"] = set.meta.gfactor_kind;
  meta["seed"] = set.meta.seed;
  meta["volume_index"] = std::move(volume_index);
  meta["slice_index"] = std::move(slice_index);

  Container c;
  c.meta_json = meta.dump();
  c.blocks.push_back(
      TensorBlock::from_f32("input", {n, 4, h, w}, inputs.data()));
  c.blocks.push_back(
      TensorBlock::from_f32("target", {n, 2, h, w}, targets.data()));
  c.blocks.push_back(
      TensorBlock::from_f32("clean", {n, 2, h, w}, cleans.data()));
  c.blocks.push_back(TensorBlock::from_f64(
      "gfactor", {set.gfactor.height(), set.gfactor.width()},
      set.gfactor.data()));
  write_container(path, c);
}

Dataset load_dataset(const std::filesystem::path& path) {
  const Container c = read_container(path);
  json meta = json::parse(c.meta_json, nullptr, false);
  if (meta.is_discarded() || meta.value("format", "") != "dataset")
    throw DataError(path.string() + " is not a dataset container");

  Dataset set;
  set.meta.split = meta.at("split").get<std::string>();
  set.meta.plane = meta.at("plane").get<std::string>();
  set.meta.volumes = meta.at("volumes").get<int>();
  set.meta.slices_per_volume = meta.at("slices_per_volume").get<int>();
  set.meta.height = meta.at("height").get<int>();
  set.meta.width = meta.at("width").get<int>();
  set.meta.sigma0 = meta.at("sigma0").get<double>();
  set.meta.scale = meta.at("scale").get<double>();
  set.meta.gfactor_kind = meta.at("gfactor_kind").get<std::string>();
  set.meta.seed = meta.at("seed").get<std::uint64_t>();

  const int h = set.meta.height, w = set.meta.width;
  const TensorBlock& bi = c.require("input");
  const TensorBlock& bt = c.require("target");
  const TensorBlock& bc = c.require("clean");
  if (bi.shape.size() != 4 || bi.shape[1] != 4 || bi.shape[2] != h ||
      bi.shape[3] != w)
    throw DataError(path.string() + ": input block shape mismatch");
  const int n = static_cast<int>(bi.shape[0]);

  const auto& vols = meta.at("volume_index");
  const auto& slcs = meta.at("slice_index");
  if (static_cast<int>(vols.size()) != n || static_cast<int>(slcs.size()) != n)
    throw DataError(path.string() + ": sample index tables are inconsistent");

  Tensor inputs(n, 4, h, w), targets(n, 2, h, w), cleans(n, 2, h, w);
  bi.to_f32(inputs.data(), inputs.size());
  bt.to_f32(targets.data(), targets.size());
  bc.to_f32(cleans.data(), cleans.size());

  set.samples.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    SliceSample& s = set.samples[static_cast<std::size_t>(i)];
    s.volume = vols[static_cast<std::size_t>(i)].get<int>();
    s.slice = slcs[static_cast<std::size_t>(i)].get<int>();
    s.input = Tensor(1, 4, h, w);
    s.target = Tensor(1, 2, h, w);
    s.clean = Tensor(1, 2, h, w);
    std::copy_n(inputs.plane(i, 0), s.input.size(), s.input.data());
    std::copy_n(targets.plane(i, 0), s.target.size(), s.target.data());
    std::copy_n(cleans.plane(i, 0), s.clean.size(), s.clean.data());
  }

  const TensorBlock& bg = c.require("gfactor");
  if (bg.shape.size() != 2)
    throw DataError(path.string() + ": gfactor block shape mismatch");
  set.gfactor = Image(static_cast<int>(bg.shape[0]),
                      static_cast<int>(bg.shape[1]));
  bg.to_f64(set.gfactor.data(), set.gfactor.size());
  return set;
}

Image plane_to_image(const Tensor& t, int n, int c) {
  if (n < 0 || n >= t.batch() || c < 0 || c >= t.channels())
    throw ShapeError("plane_to_image: index out of range for " + t.shape_str());
  Image out(t.height(), t.width());
  const float* src = t.plane(n, c);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = static_cast<double>(src[i]);
  return out;
}

Image magnitude_plane(const Tensor& t, int n) {
  if (t.channels() != 2)
    throw ShapeError("magnitude_plane: expected 2 channels, got " +
                     t.shape_str());
  Image out(t.height(), t.width());
  const float* re = t.plane(n, 0);
  const float* im = t.plane(n, 1);
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = std::hypot(static_cast<double>(re[i]),
                               static_cast<double>(im[i]));
  return out;
}

Image pair_average_magnitude(const Tensor& input, int n) {
  if (input.channels() != 4)
    throw ShapeError("pair_average_magnitude: expected 4 channels, got " +
                     input.shape_str());
  Image out(input.height(), input.width());
  const float* re1 = input.plane(n, 0);
  const float* im1 = input.plane(n, 1);
  const float* re2 = input.plane(n, 2);
  const float* im2 = input.plane(n, 3);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double re = 0.5 * (static_cast<double>(re1[i]) + re2[i]);
    const double im = 0.5 * (static_cast<double>(im1[i]) + im2[i]);
    out.data()[i] = std::hypot(re, im);
  }
  return out;
}

}  // namespace nexrl
