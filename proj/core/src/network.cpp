#include "nexrl/network.hpp"

#include <cmath>

#include "nexrl/rng.hpp"

namespace nexrl {

std::string to_string(InputMode mode) {
  return mode == InputMode::kDual ? "dual" : "single";
}

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kFull: return "full";
    case Variant::kTra: return "tra";
    case Variant::kRes: return "res";
  }
  return "full";
}

InputMode parse_input_mode(const std::string& s) {
  if (s == "dual") return InputMode::kDual;
  if (s == "single") return InputMode::kSingle;
  throw UsageError("unknown input mode '" + s + "' (expected dual|single)");
}

Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::kFull;
  if (s == "tra") return Variant::kTra;
  if (s == "res") return Variant::kRes;
  throw UsageError("unknown variant '" + s + "' (expected full|tra|res)");
}

namespace {

template <typename T>
void he_init(ConvParamsT<T>& conv, Rng& rng) {
  const double stddev =
      std::sqrt(2.0 / (static_cast<double>(conv.in_channels) * kKernelTaps));
  for (T& k : conv.kernels) k = static_cast<T>(rng.normal(0.0, stddev));
  // biases stay 0
}

}  // namespace

template <typename T>
NetworkParamsT<T> build_network(const NetworkConfig& config,
                                std::uint64_t seed) {
  if (config.extract_width < 1 || config.bridge_width < 1)
    throw DataError("build_network: channel widths must be >= 1");

  NetworkParamsT<T> net;
  net.config = config;
  const int in_ch = config.input_channels();
  const int ew = config.extract_width;
  const int bw = config.bridge_width;

  auto add = [&](const std::string& name, int cin, int cout, bool bn,
                 bool relu, bool zero_init) {
    ConvBlockT<T> blk;
    blk.name = name;
    blk.conv = ConvParamsT<T>(cout, cin);
    if (!zero_init) {
      Rng rng(substream(seed, name));
      he_init(blk.conv, rng);
    }
    blk.has_bn = bn;
    if (bn) blk.bn = BatchNormParamsT<T>(cout);
    blk.has_relu = relu;
    net.blocks.push_back(std::move(blk));
  };

  add("extract1", in_ch, ew, true, true, false);
  for (int i = 2; i <= 6; ++i)
    add("extract" + std::to_string(i), ew, ew, true, true, false);

  if (config.variant != Variant::kRes)
    add("transport", ew, bw, true, false, false);  // BN, no ReLU
  if (config.variant != Variant::kTra) {
    add("residual_coarse", ew, 2, false, false, true);  // linear, zero-init
    add("residual_expand", 2, bw, true, true, false);
  }

  const int assembly_in = config.variant == Variant::kFull ? 2 * bw : bw;
  add("assembly1", assembly_in, bw, true, true, false);
  for (int i = 2; i <= 4; ++i)
    add("assembly" + std::to_string(i), bw, bw, true, true, false);
  add("residual_final", bw, 2, false, false, true);  // linear, zero-init
  return net;
}

namespace {

template <typename T>
TensorT<T> apply_block(const ConvBlockT<T>& blk, BatchNormParamsT<T>* bn_mut,
                       const TensorT<T>& x, Mode mode, BlockCacheT<T>* cache) {
  TensorT<T> y = conv2d_forward(x, blk.conv);
  if (cache) cache->x_in = x;
  if (blk.has_bn) {
    if (mode == Mode::kTrain)
      y = batchnorm_forward(y, *bn_mut, Mode::kTrain,
                            cache ? &cache->bn : nullptr);
    else
      y = batchnorm_forward_eval(y, blk.bn);
  }
  if (blk.has_relu) {
    if (cache) cache->pre_act = y;
    y = relu(y);
  }
  return y;
}

template <typename T>
ForwardTraceT<T> forward_impl(const NetworkParamsT<T>& params,
                              NetworkParamsT<T>* mut, const TensorT<T>& input,
                              Mode mode) {
  const NetworkConfig& cfg = params.config;
  if (input.channels() != cfg.input_channels())
    throw ShapeError("forward: input " + input.shape_str() + " has " +
                     std::to_string(input.channels()) +
                     " channels, network expects " +
                     std::to_string(cfg.input_channels()));
  if (input.height() < 1 || input.width() < 1)
    throw ShapeError("forward: empty input " + input.shape_str());

  ForwardTraceT<T> tr;
  tr.mode = mode;
  tr.input = input;
  tr.input_average =
      cfg.input_mode == InputMode::kDual ? channel_mean_pair(input) : input;

  const bool caching = mode == Mode::kTrain;
  if (caching) tr.caches.resize(params.blocks.size());

  auto run = [&](const std::string& name, const TensorT<T>& x) {
    const int idx = params.block_index(name);
    BatchNormParamsT<T>* bn =
        mut ? &mut->blocks[static_cast<std::size_t>(idx)].bn : nullptr;
    return apply_block(params.blocks[static_cast<std::size_t>(idx)], bn, x,
                       mode,
                       caching ? &tr.caches[static_cast<std::size_t>(idx)]
                               : nullptr);
  };

  TensorT<T> cur = input;
  for (int i = 1; i <= 6; ++i) cur = run("extract" + std::to_string(i), cur);
  tr.features = cur;

  if (cfg.variant != Variant::kRes)
    tr.transport_features = run("transport", tr.features);
  if (cfg.variant != Variant::kTra) {
    tr.coarse_residual = run("residual_coarse", tr.features);
    tr.intermediate = elementwise_add(tr.coarse_residual, tr.input_average);
    tr.residual_features = run("residual_expand", tr.intermediate);
  } else {
    tr.intermediate = tr.input_average;
  }

  TensorT<T> assembly_in;
  switch (cfg.variant) {
    case Variant::kFull:
      assembly_in =
          channel_concat(tr.residual_features, tr.transport_features);
      break;
    case Variant::kTra:
      assembly_in = tr.transport_features;
      break;
    case Variant::kRes:
      assembly_in = tr.residual_features;
      break;
  }
  cur = run("assembly1", assembly_in);
  for (int i = 2; i <= 4; ++i) cur = run("assembly" + std::to_string(i), cur);
  tr.refined_residual = run("residual_final", cur);
  tr.output = elementwise_add(tr.refined_residual, tr.intermediate);
  return tr;
}

template <typename T>
TensorT<T> block_backward(const ConvBlockT<T>& blk,
                          const BlockCacheT<T>& cache, TensorT<T> grad_out,
                          BlockGradsT<T>& grads) {
  if (blk.has_relu) grad_out = relu_backward(grad_out, cache.pre_act);
  if (blk.has_bn) {
    BatchNormGrads<T> bn = batchnorm_backward(grad_out, cache.bn, blk.bn);
    grads.gamma = std::move(bn.gamma);
    grads.beta = std::move(bn.beta);
    grad_out = std::move(bn.x);
  }
  Conv2dGrads<T> cg = conv2d_backward(grad_out, cache.x_in, blk.conv);
  grads.conv = std::move(cg.params);
  return std::move(cg.x);
}

}  // namespace

template <typename T>
ForwardTraceT<T> forward(NetworkParamsT<T>& params, const TensorT<T>& input,
                         Mode mode) {
  return forward_impl(params, mode == Mode::kTrain ? &params : nullptr, input,
                      mode);
}

template <typename T>
ForwardTraceT<T> forward_eval(const NetworkParamsT<T>& params,
                              const TensorT<T>& input) {
  return forward_impl<T>(params, nullptr, input, Mode::kEval);
}

template <typename T>
NetworkGradsT<T> zero_grads_like(const NetworkParamsT<T>& params) {
  NetworkGradsT<T> g;
  g.blocks.resize(params.blocks.size());
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const ConvBlockT<T>& blk = params.blocks[i];
    g.blocks[i].conv =
        ConvParamsT<T>(blk.conv.out_channels, blk.conv.in_channels);
    if (blk.has_bn) {
      g.blocks[i].gamma.assign(static_cast<std::size_t>(blk.bn.channels),
                               T(0));
      g.blocks[i].beta.assign(static_cast<std::size_t>(blk.bn.channels), T(0));
    }
  }
  return g;
}

template <typename T>
NetworkGradsT<T> backward(const NetworkParamsT<T>& params,
                          const ForwardTraceT<T>& trace,
                          const TensorT<T>& grad_output) {
  if (trace.mode != Mode::kTrain)
    throw ShapeError("backward: gradients need a train-mode trace");
  require_same_shape(grad_output, trace.output, "backward");

  const NetworkConfig& cfg = params.config;
  NetworkGradsT<T> grads = zero_grads_like(params);

  auto back = [&](const std::string& name, const TensorT<T>& g) {
    const std::size_t idx =
        static_cast<std::size_t>(params.block_index(name));
    return block_backward(params.blocks[idx], trace.caches[idx], g,
                          grads.blocks[idx]);
  };

  // output = refined_residual + intermediate
  TensorT<T> grad_intermediate = grad_output;
  TensorT<T> cur = back("residual_final", grad_output);
  for (int i = 4; i >= 1; --i) cur = back("assembly" + std::to_string(i), cur);

  TensorT<T> grad_expanded, grad_transport;
  switch (cfg.variant) {
    case Variant::kFull: {
      auto split = channel_concat_backward(cur, cfg.bridge_width,
                                           cfg.bridge_width);
      grad_expanded = std::move(split.first);
      grad_transport = std::move(split.second);
      break;
    }
    case Variant::kTra:
      grad_transport = std::move(cur);
      break;
    case Variant::kRes:
      grad_expanded = std::move(cur);
      break;
  }

  TensorT<T> grad_features;
  if (cfg.variant != Variant::kRes)
    grad_features = back("transport", grad_transport);

  TensorT<T> grad_avg;
  if (cfg.variant != Variant::kTra) {
    // intermediate also feeds the residual-expansion branch
    accumulate(grad_intermediate, back("residual_expand", grad_expanded));
    // intermediate = coarse_residual + input_average
    TensorT<T> gf = back("residual_coarse", grad_intermediate);
    if (grad_features.size() == 0)
      grad_features = std::move(gf);
    else
      accumulate(grad_features, gf);
    grad_avg = grad_intermediate;
  } else {
    grad_avg = grad_intermediate;
  }

  cur = grad_features;
  for (int i = 6; i >= 1; --i) cur = back("extract" + std::to_string(i), cur);
  grads.input = std::move(cur);

  // skip-connection path into the raw input
  if (cfg.input_mode == InputMode::kDual)
    accumulate(grads.input, channel_mean_pair_backward(grad_avg));
  else
    accumulate(grads.input, grad_avg);
  return grads;
}

template <typename T>
std::vector<ParamRef<T>> param_refs(NetworkParamsT<T>& params) {
  std::vector<ParamRef<T>> refs;
  for (ConvBlockT<T>& blk : params.blocks) {
    refs.push_back(
        {blk.name + "/kernels", blk.conv.kernels.data(),
         blk.conv.kernels.size()});
    refs.push_back({blk.name + "/bias", blk.conv.bias.data(),
                    blk.conv.bias.size()});
    if (blk.has_bn) {
      refs.push_back(
          {blk.name + "/gamma", blk.bn.gamma.data(), blk.bn.gamma.size()});
      refs.push_back(
          {blk.name + "/beta", blk.bn.beta.data(), blk.bn.beta.size()});
    }
  }
  return refs;
}

template <typename T>
std::vector<ParamRef<T>> grad_refs(NetworkGradsT<T>& grads,
                                   const NetworkParamsT<T>& params) {
  if (grads.blocks.size() != params.blocks.size())
    throw ShapeError("grad_refs: gradient/parameter block count mismatch");
  std::vector<ParamRef<T>> refs;
  for (std::size_t i = 0; i < params.blocks.size(); ++i) {
    const ConvBlockT<T>& blk = params.blocks[i];
    BlockGradsT<T>& g = grads.blocks[i];
    refs.push_back({blk.name + "/kernels", g.conv.kernels.data(),
                    g.conv.kernels.size()});
    refs.push_back({blk.name + "/bias", g.conv.bias.data(),
                    g.conv.bias.size()});
    if (blk.has_bn) {
      refs.push_back({blk.name + "/gamma", g.gamma.data(), g.gamma.size()});
      refs.push_back({blk.name + "/beta", g.beta.data(), g.beta.size()});
    }
  }
  return refs;
}

template <typename T>
std::size_t count_parameters(const NetworkParamsT<T>& params) {
  std::size_t n = 0;
  for (const ConvBlockT<T>& blk : params.blocks) {
    n += blk.conv.kernels.size() + blk.conv.bias.size();
    if (blk.has_bn) n += blk.bn.gamma.size() + blk.bn.beta.size();
  }
  return n;
}

template <typename T>
std::vector<LayerAuditRow> audit_layers(const NetworkParamsT<T>& params) {
  std::vector<LayerAuditRow> rows;
  for (const ConvBlockT<T>& blk : params.blocks) {
    LayerAuditRow r;
    r.name = blk.name;
    r.in_channels = blk.conv.in_channels;
    r.out_channels = blk.conv.out_channels;
    const std::size_t per_pair =
        blk.conv.kernels.size() /
        (static_cast<std::size_t>(blk.conv.in_channels) *
         blk.conv.out_channels);
    r.kernel_extent = static_cast<int>(std::lround(
        std::sqrt(static_cast<double>(per_pair))));
    r.batch_norm = blk.has_bn;
    r.relu = blk.has_relu;
    rows.push_back(std::move(r));
  }
  return rows;
}

DenoiseResult denoise_slice(const NetworkParams& params, const Tensor& input) {
  ForwardTraceT<float> tr = forward_eval(params, input);
  DenoiseResult out;
  out.output_magnitude = magnitude(tr.output, 1e-12f);
  out.output_complex = std::move(tr.output);
  return out;
}

#define NEXRL_INSTANTIATE_NETWORK(T)                                        \
  template NetworkParamsT<T> build_network<T>(const NetworkConfig&,         \
                                              std::uint64_t);               \
  template ForwardTraceT<T> forward<T>(NetworkParamsT<T>&,                  \
                                       const TensorT<T>&, Mode);            \
  template ForwardTraceT<T> forward_eval<T>(const NetworkParamsT<T>&,       \
                                            const TensorT<T>&);             \
  template NetworkGradsT<T> backward<T>(const NetworkParamsT<T>&,           \
                                        const ForwardTraceT<T>&,            \
                                        const TensorT<T>&);                 \
  template NetworkGradsT<T> zero_grads_like<T>(const NetworkParamsT<T>&);   \
  template std::vector<ParamRef<T>> param_refs<T>(NetworkParamsT<T>&);      \
  template std::vector<ParamRef<T>> grad_refs<T>(NetworkGradsT<T>&,         \
                                                 const NetworkParamsT<T>&); \
  template std::size_t count_parameters<T>(const NetworkParamsT<T>&);       \
  template std::vector<LayerAuditRow> audit_layers<T>(                      \
      const NetworkParamsT<T>&);

NEXRL_INSTANTIATE_NETWORK(float)
NEXRL_INSTANTIATE_NETWORK(double)

#undef NEXRL_INSTANTIATE_NETWORK

}  // namespace nexrl
