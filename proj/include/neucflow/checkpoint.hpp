#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "neucflow/model.hpp"
#include "neucflow/optim.hpp"

namespace neucflow {

// On-disk model snapshot: 8-byte magic, u64 little-endian manifest length, a
// JSON manifest (names, shapes, dtypes, optimizer scalars, rng state,
// progress), then the raw little-endian f32 tensor payloads in manifest
// order. Round-trips are bit-exact; truncation or shape drift fails the load
// with no partial model.

inline constexpr char kCheckpointMagic[8] = {'N', 'C', 'F', 'C', 'K', 'P', 'T', '1'};

struct CheckpointMeta {
  ModelDims dims;
  uint64_t rng_state = 0;
  int64_t next_epoch = 0;
  int64_t batches_done = 0;  // within next_epoch
  std::string config_echo;
};

struct Checkpoint {
  ParamStore<float> params;
  AdamState<float> opt;
  CheckpointMeta meta;
};

namespace detail {

inline void write_u64(std::ostream& os, uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), 8);
}

inline uint64_t read_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  if (!is) fail("checkpoint", "truncated header");
  uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
  return v;
}

inline void write_f32_blob(std::ostream& os, const TensorT<float>& t) {
  os.write(reinterpret_cast<const char*>(t.data.data()),
           static_cast<std::streamsize>(t.data.size() * sizeof(float)));
}

inline void read_f32_blob(std::istream& is, TensorT<float>& t) {
  is.read(reinterpret_cast<char*>(t.data.data()),
          static_cast<std::streamsize>(t.data.size() * sizeof(float)));
  if (!is) fail("checkpoint", "truncated tensor payload");
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                            const AdamState<float>& opt, const CheckpointMeta& meta) {
  nlohmann::json manifest;
  manifest["format"] = "neucflow-checkpoint";
  manifest["version"] = 1;
  manifest["dims"] = {{"n_entities", meta.dims.n_entities},
                      {"n_relations", meta.dims.n_relations},
                      {"n_dims", meta.dims.n_dims},
                      {"n_dims_att", meta.dims.n_dims_att}};
  manifest["adam"] = {{"lr", opt.lr},         {"beta1", opt.beta1}, {"beta2", opt.beta2},
                      {"eps", opt.eps},       {"clipnorm", opt.clipnorm},
                      {"step", opt.step}};
  manifest["rng_state"] = std::to_string(meta.rng_state);
  manifest["progress"] = {{"next_epoch", meta.next_epoch}, {"batches_done", meta.batches_done}};
  manifest["config"] = meta.config_echo;
  nlohmann::json tensors = nlohmann::json::array();
  for (size_t i = 0; i < params.size(); ++i)
    tensors.push_back({{"name", params.names[i]}, {"shape", params.values[i].shape}, {"dtype", "f32"}});
  manifest["tensors"] = tensors;

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) detail::fail("save_checkpoint", "cannot open " + path);
  os.write(kCheckpointMagic, 8);
  std::string mtext = manifest.dump();
  detail::write_u64(os, mtext.size());
  os.write(mtext.data(), static_cast<std::streamsize>(mtext.size()));
  for (const auto& t : params.values) detail::write_f32_blob(os, t);
  for (const auto& t : opt.m) detail::write_f32_blob(os, t);
  for (const auto& t : opt.v) detail::write_f32_blob(os, t);
  os.flush();
  if (!os) detail::fail("save_checkpoint", "write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) detail::fail_missing("load_checkpoint", path);
  char magic[8];
  is.read(magic, 8);
  if (!is || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    detail::fail("load_checkpoint", path + ": not a checkpoint file");
  uint64_t mlen = detail::read_u64(is);
  std::string mtext(mlen, '\0');
  is.read(mtext.data(), static_cast<std::streamsize>(mlen));
  if (!is) detail::fail("load_checkpoint", path + ": truncated manifest");
  nlohmann::json manifest = nlohmann::json::parse(mtext, nullptr, /*allow_exceptions=*/false);
  if (manifest.is_discarded()) detail::fail("load_checkpoint", path + ": bad manifest JSON");
  if (manifest.value("format", "") != std::string("neucflow-checkpoint") || manifest.value("version", 0) != 1)
    detail::fail("load_checkpoint", path + ": unsupported format/version");

  Checkpoint ck;
  ck.meta.dims.n_entities = manifest["dims"]["n_entities"].get<int64_t>();
  ck.meta.dims.n_relations = manifest["dims"]["n_relations"].get<int64_t>();
  ck.meta.dims.n_dims = manifest["dims"]["n_dims"].get<int64_t>();
  ck.meta.dims.n_dims_att = manifest["dims"]["n_dims_att"].get<int64_t>();
  ck.meta.rng_state = std::stoull(manifest["rng_state"].get<std::string>());
  ck.meta.next_epoch = manifest["progress"]["next_epoch"].get<int64_t>();
  ck.meta.batches_done = manifest["progress"]["batches_done"].get<int64_t>();
  ck.meta.config_echo = manifest.value("config", "");

  for (const auto& entry : manifest["tensors"]) {
    std::string name = entry["name"].get<std::string>();
    std::vector<int64_t> shape = entry["shape"].get<std::vector<int64_t>>();
    if (entry["dtype"].get<std::string>() != "f32")
      detail::fail("load_checkpoint", path + ": unsupported dtype for " + name);
    ck.params.add(name, TensorT<float>::zeros(shape));
  }
  for (auto& t : ck.params.values) detail::read_f32_blob(is, t);
  ck.opt.lr = manifest["adam"]["lr"].get<double>();
  ck.opt.beta1 = manifest["adam"]["beta1"].get<double>();
  ck.opt.beta2 = manifest["adam"]["beta2"].get<double>();
  ck.opt.eps = manifest["adam"]["eps"].get<double>();
  ck.opt.clipnorm = manifest["adam"]["clipnorm"].get<double>();
  ck.opt.step = manifest["adam"]["step"].get<int64_t>();
  for (const auto& t : ck.params.values) {
    ck.opt.m.push_back(TensorT<float>::zeros(t.shape));
    ck.opt.v.push_back(TensorT<float>::zeros(t.shape));
  }
  for (auto& t : ck.opt.m) detail::read_f32_blob(is, t);
  for (auto& t : ck.opt.v) detail::read_f32_blob(is, t);
  char extra;
  if (is.read(&extra, 1)) detail::fail("load_checkpoint", path + ": trailing bytes");
  return ck;
}

}  // namespace neucflow
