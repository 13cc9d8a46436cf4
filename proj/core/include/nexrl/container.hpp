#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "nexrl/network.hpp"
#include "nexrl/optimizer.hpp"

namespace nexrl {

/// One named tensor inside a container file. dtype is "f32" or "f64"; bytes
/// hold the little-endian row-major payload.
struct TensorBlock {
  std::string name;
  std::string dtype;
  std::vector<std::int64_t> shape;
  std::vector<std::uint8_t> bytes;

  std::int64_t element_count() const;

  static TensorBlock from_f32(std::string name, std::vector<std::int64_t> shape,
                              const float* data);
  static TensorBlock from_f64(std::string name, std::vector<std::int64_t> shape,
                              const double* data);
  void to_f32(float* out, std::size_t count) const;
  void to_f64(double* out, std::size_t count) const;
};

/// On-disk layout: magic "NXD1" | u64 little-endian header length | JSON
/// header (block table + free-form metadata) | concatenated payloads.
/// Write -> read round-trips are bit-exact.
struct Container {
  std::string meta_json = "{}";  // free-form JSON object
  std::vector<TensorBlock> blocks;

  const TensorBlock* find(const std::string& name) const;
  const TensorBlock& require(const std::string& name) const;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

/// Model checkpoint: config + every parameter and BN running-stat array,
/// optionally the optimizer state and training-progress metadata.
struct Checkpoint {
  NetworkParams params;
  std::optional<AdamState> adam;
  std::string extra_json = "{}";  // scheduler state, epoch counters, etc.
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace nexrl
