#include "nexrl/container.hpp"

#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace nexrl {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'N', 'X', 'D', '1'};

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw DataError("container: unsupported dtype '" + dtype + "'");
}

json parse_object(const std::string& text, const char* what) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object())
    throw DataError(std::string(what) + ": not a JSON object");
  return j;
}

}  // namespace

std::int64_t TensorBlock::element_count() const {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw DataError("container: negative extent in " + name);
    n *= d;
  }
  return n;
}

TensorBlock TensorBlock::from_f32(std::string name,
                                  std::vector<std::int64_t> shape,
                                  const float* data) {
  TensorBlock b;
  b.name = std::move(name);
  b.dtype = "f32";
  b.shape = std::move(shape);
  b.bytes.resize(static_cast<std::size_t>(b.element_count()) * 4);
  std::memcpy(b.bytes.data(), data, b.bytes.size());
  return b;
}

TensorBlock TensorBlock::from_f64(std::string name,
                                  std::vector<std::int64_t> shape,
                                  const double* data) {
  TensorBlock b;
  b.name = std::move(name);
  b.dtype = "f64";
  b.shape = std::move(shape);
  b.bytes.resize(static_cast<std::size_t>(b.element_count()) * 8);
  std::memcpy(b.bytes.data(), data, b.bytes.size());
  return b;
}

void TensorBlock::to_f32(float* out, std::size_t count) const {
  if (dtype != "f32" || count != static_cast<std::size_t>(element_count()))
    throw DataError("container: block " + name + " is not f32[" +
                    std::to_string(count) + "]");
  std::memcpy(out, bytes.data(), count * 4);
}

void TensorBlock::to_f64(double* out, std::size_t count) const {
  if (dtype != "f64" || count != static_cast<std::size_t>(element_count()))
    throw DataError("container: block " + name + " is not f64[" +
                    std::to_string(count) + "]");
  std::memcpy(out, bytes.data(), count * 8);
}

const TensorBlock* Container::find(const std::string& name) const {
  for (const TensorBlock& b : blocks)
    if (b.name == name) return &b;
  return nullptr;
}

const TensorBlock& Container::require(const std::string& name) const {
  const TensorBlock* b = find(name);
  if (!b) throw DataError("container: missing block '" + name + "'");
  return *b;
}

void write_container(const std::filesystem::path& path, const Container& c) {
  json header;
  header["version"] = 1;
  header["meta"] = parse_object(c.meta_json, "container meta");
  json blocks = json::array();
  std::uint64_t offset = 0;
  for (const TensorBlock& b : c.blocks) {
    const std::size_t expect =
        static_cast<std::size_t>(b.element_count()) * dtype_size(b.dtype);
    if (b.bytes.size() != expect)
      throw DataError("container: block " + b.name + " payload is " +
                      std::to_string(b.bytes.size()) + " bytes, expected " +
                      std::to_string(expect));
    blocks.push_back({{"name", b.name},
                      {"dtype", b.dtype},
                      {"shape", b.shape},
                      {"offset", offset},
                      {"bytes", b.bytes.size()}});
    offset += b.bytes.size();
  }
  header["blocks"] = std::move(blocks);
  const std::string htext = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(kMagic, 4);
  // Header length as unsigned 64-bit little-endian (matches x86 layout).
  const std::uint64_t hlen = htext.size();
  out.write(reinterpret_cast<const char*>(&hlen), 8);
  out.write(htext.data(), static_cast<std::streamsize>(htext.size()));
  for (const TensorBlock& b : c.blocks)
    out.write(reinterpret_cast<const char*>(b.bytes.data()),
              static_cast<std::streamsize>(b.bytes.size()));
  out.flush();
  if (!out) throw DataError("short write to " + path.string());
}

Container read_container(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());

  char magic[4];
  std::uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError(path.string() + " is not a tensor container");
  std::string htext(hlen, '\0');
  in.read(htext.data(), static_cast<std::streamsize>(hlen));
  if (!in) throw DataError(path.string() + ": truncated header");

  json header = json::parse(htext, nullptr, false);
  if (header.is_discarded() || !header.is_object() ||
      !header.contains("blocks"))
    throw DataError(path.string() + ": malformed container header");

  Container c;
  c.meta_json = header.value("meta", json::object()).dump();
  const std::streampos payload_start = in.tellg();
  for (const json& jb : header["blocks"]) {
    TensorBlock b;
    b.name = jb.at("name").get<std::string>();
    b.dtype = jb.at("dtype").get<std::string>();
    b.shape = jb.at("shape").get<std::vector<std::int64_t>>();
    const std::uint64_t offset = jb.at("offset").get<std::uint64_t>();
    const std::uint64_t nbytes = jb.at("bytes").get<std::uint64_t>();
    const std::size_t expect =
        static_cast<std::size_t>(b.element_count()) * dtype_size(b.dtype);
    if (nbytes != expect)
      throw DataError(path.string() + ": block " + b.name +
                      " length does not match its shape");
    b.bytes.resize(nbytes);
    in.seekg(payload_start + static_cast<std::streamoff>(offset));
    in.read(reinterpret_cast<char*>(b.bytes.data()),
            static_cast<std::streamsize>(nbytes));
    if (!in) throw DataError(path.string() + ": truncated block " + b.name);
    c.blocks.push_back(std::move(b));
  }
  return c;
}

namespace {

void push_vec(Container& c, const std::string& name,
              const std::vector<float>& v) {
  c.blocks.push_back(TensorBlock::from_f32(
      name, {static_cast<std::int64_t>(v.size())}, v.data()));
}

void load_vec(const Container& c, const std::string& name,
              std::vector<float>& v) {
  c.require(name).to_f32(v.data(), v.size());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  Container c;
  json meta;
  meta["format"] = "checkpoint";
  meta["config"] = {{"input_mode", to_string(ck.params.config.input_mode)},
                    {"variant", to_string(ck.params.config.variant)},
                    {"extract_width", ck.params.config.extract_width},
                    {"bridge_width", ck.params.config.bridge_width}};
  meta["extra"] = parse_object(ck.extra_json, "checkpoint extra");

  for (const ConvBlockT<float>& blk : ck.params.blocks) {
    c.blocks.push_back(TensorBlock::from_f32(
        blk.name + "/kernels",
        {blk.conv.out_channels, blk.conv.in_channels, kKernelExtent,
         kKernelExtent},
        blk.conv.kernels.data()));
    push_vec(c, blk.name + "/bias", blk.conv.bias);
    if (blk.has_bn) {
      push_vec(c, blk.name + "/gamma", blk.bn.gamma);
      push_vec(c, blk.name + "/beta", blk.bn.beta);
      push_vec(c, blk.name + "/running_mean", blk.bn.running_mean);
      push_vec(c, blk.name + "/running_var", blk.bn.running_var);
    }
  }

  if (ck.adam) {
    meta["adam"] = {{"step", ck.adam->step},
                    {"beta1", ck.adam->config.beta1},
                    {"beta2", ck.adam->config.beta2},
                    {"epsilon", ck.adam->config.epsilon}};
    for (std::size_t i = 0; i < ck.adam->m.size(); ++i) {
      push_vec(c, "adam/m/" + std::to_string(i), ck.adam->m[i]);
      push_vec(c, "adam/v/" + std::to_string(i), ck.adam->v[i]);
    }
  }

  c.meta_json = meta.dump();
  write_container(path, c);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const Container c = read_container(path);
  json meta = parse_object(c.meta_json, "checkpoint meta");
  if (meta.value("format", "") != "checkpoint")
    throw DataError(path.string() + " is not a checkpoint container");

  NetworkConfig config;
  const json& jc = meta.at("config");
  config.input_mode = parse_input_mode(jc.at("input_mode").get<std::string>());
  config.variant = parse_variant(jc.at("variant").get<std::string>());
  config.extract_width = jc.at("extract_width").get<int>();
  config.bridge_width = jc.at("bridge_width").get<int>();

  Checkpoint ck;
  ck.params = build_network<float>(config, 0);
  ck.extra_json = meta.value("extra", json::object()).dump();

  for (ConvBlockT<float>& blk : ck.params.blocks) {
    c.require(blk.name + "/kernels")
        .to_f32(blk.conv.kernels.data(), blk.conv.kernels.size());
    load_vec(c, blk.name + "/bias", blk.conv.bias);
    if (blk.has_bn) {
      load_vec(c, blk.name + "/gamma", blk.bn.gamma);
      load_vec(c, blk.name + "/beta", blk.bn.beta);
      load_vec(c, blk.name + "/running_mean", blk.bn.running_mean);
      load_vec(c, blk.name + "/running_var", blk.bn.running_var);
    }
  }

  if (meta.contains("adam")) {
    AdamState st = AdamState::init(ck.params);
    const json& ja = meta["adam"];
    st.step = ja.at("step").get<std::int64_t>();
    st.config.beta1 = ja.at("beta1").get<double>();
    st.config.beta2 = ja.at("beta2").get<double>();
    st.config.epsilon = ja.at("epsilon").get<double>();
    for (std::size_t i = 0; i < st.m.size(); ++i) {
      load_vec(c, "adam/m/" + std::to_string(i), st.m[i]);
      load_vec(c, "adam/v/" + std::to_string(i), st.v[i]);
    }
    ck.adam = std::move(st);
  }
  return ck;
}

}  // namespace nexrl
