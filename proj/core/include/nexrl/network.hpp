#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nexrl/layers.hpp"

namespace nexrl {

/// Dual mode feeds both acquisitions (4 channels: Re1, Im1, Re2, Im2);
/// single mode feeds their complex average (2 channels).
enum class InputMode { kDual, kSingle };

/// kFull keeps both bridge branches; kTra keeps only the transporting branch
/// (the coarse residual path is removed and the first skip target becomes the
/// input average itself); kRes keeps only the residual branch.
enum class Variant { kFull, kTra, kRes };

std::string to_string(InputMode mode);
std::string to_string(Variant variant);
InputMode parse_input_mode(const std::string& s);
Variant parse_variant(const std::string& s);

struct NetworkConfig {
  InputMode input_mode = InputMode::kDual;
  Variant variant = Variant::kFull;
  int extract_width = 128;  // feature-extraction channels
  int bridge_width = 64;    // bridge and assembly channels

  int input_channels() const {
    return input_mode == InputMode::kDual ? 4 : 2;
  }
};

/// One convolution layer with its optional batch norm and activation.
template <typename T>
struct ConvBlockT {
  std::string name;
  ConvParamsT<T> conv;
  bool has_bn = false;
  BatchNormParamsT<T> bn;
  bool has_relu = false;
};

template <typename T>
struct NetworkParamsT {
  NetworkConfig config;
  std::vector<ConvBlockT<T>> blocks;  // forward order

  int block_index(const std::string& name) const {
    for (std::size_t i = 0; i < blocks.size(); ++i)
      if (blocks[i].name == name) return static_cast<int>(i);
    return -1;
  }
  const ConvBlockT<T>& block(const std::string& name) const {
    const int i = block_index(name);
    if (i < 0) throw DataError("network has no block named " + name);
    return blocks[static_cast<std::size_t>(i)];
  }
  ConvBlockT<T>& block(const std::string& name) {
    const int i = block_index(name);
    if (i < 0) throw DataError("network has no block named " + name);
    return blocks[static_cast<std::size_t>(i)];
  }
};

using NetworkParams = NetworkParamsT<float>;

template <typename T>
struct BlockCacheT {
  TensorT<T> x_in;         // convolution input
  BatchNormCache<T> bn;    // filled when the block has BN (train mode)
  TensorT<T> pre_act;      // tensor entering the ReLU (when present)
};

/// All intermediates of one pass. The two residual-sum identities
/// intermediate = coarse_residual + input_average and
/// output = refined_residual + intermediate hold in every trace.
template <typename T>
struct ForwardTraceT {
  Mode mode = Mode::kEval;
  TensorT<T> input;
  TensorT<T> input_average;      // 2-channel complex average of the pair
  TensorT<T> features;           // feature-extraction output
  TensorT<T> coarse_residual;    // first-stage residual (empty in tra)
  TensorT<T> intermediate;       // first-stage result
  TensorT<T> residual_features;  // expanded residual features (empty in tra)
  TensorT<T> transport_features; // transporting-branch features (empty in res)
  TensorT<T> refined_residual;   // second-stage residual
  TensorT<T> output;             // final 2-channel complex estimate
  std::vector<BlockCacheT<T>> caches;  // parallel to params.blocks
};

template <typename T>
struct BlockGradsT {
  ConvParamsT<T> conv;
  std::vector<T> gamma;  // empty when the block has no BN
  std::vector<T> beta;
};

template <typename T>
struct NetworkGradsT {
  std::vector<BlockGradsT<T>> blocks;  // parallel to params.blocks
  TensorT<T> input;                    // gradient w.r.t. the network input
};

using NetworkGrads = NetworkGradsT<float>;

/// He-scaled Gaussian kernels, zero biases, BN gamma=1/beta=0. The two
/// residual-producing convolutions are zero-initialized, so a fresh network
/// computes exactly the average of its inputs.
template <typename T>
NetworkParamsT<T> build_network(const NetworkConfig& config,
                                std::uint64_t seed);

/// Train mode updates BN running statistics (hence non-const params) and
/// fills the caches needed by backward.
template <typename T>
ForwardTraceT<T> forward(NetworkParamsT<T>& params, const TensorT<T>& input,
                         Mode mode);

/// Eval mode: pure function of (params, input); no caches.
template <typename T>
ForwardTraceT<T> forward_eval(const NetworkParamsT<T>& params,
                              const TensorT<T>& input);

/// Gradients for every parameter and for the input. Accumulates correctly
/// across the two skip connections; rejects eval-mode traces.
template <typename T>
NetworkGradsT<T> backward(const NetworkParamsT<T>& params,
                          const ForwardTraceT<T>& trace,
                          const TensorT<T>& grad_output);

template <typename T>
NetworkGradsT<T> zero_grads_like(const NetworkParamsT<T>& params);

/// Named view of one parameter array, for optimizers, serialization, and
/// finite-difference sweeps. Order is fixed: per block, kernels, bias, then
/// gamma and beta when BN is present.
template <typename T>
struct ParamRef {
  std::string path;  // e.g. "extract1/kernels"
  T* data = nullptr;
  std::size_t size = 0;
};

template <typename T>
std::vector<ParamRef<T>> param_refs(NetworkParamsT<T>& params);

/// Same order as param_refs over the matching gradient structure.
template <typename T>
std::vector<ParamRef<T>> grad_refs(NetworkGradsT<T>& grads,
                                   const NetworkParamsT<T>& params);

template <typename T>
std::size_t count_parameters(const NetworkParamsT<T>& params);

struct LayerAuditRow {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  int kernel_extent = 0;
  bool batch_norm = false;
  bool relu = false;
};

template <typename T>
std::vector<LayerAuditRow> audit_layers(const NetworkParamsT<T>& params);

struct DenoiseResult {
  Tensor output_complex;    // [N,2,H,W]
  Tensor output_magnitude;  // [N,1,H,W]
};

/// Eval-mode denoising of a batch of inputs; deterministic, batch-invariant.
DenoiseResult denoise_slice(const NetworkParams& params, const Tensor& input);

}  // namespace nexrl
