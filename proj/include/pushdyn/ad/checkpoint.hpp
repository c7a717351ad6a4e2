#pragma once

#include <fstream>
#include <sstream>

#include "pushdyn/ad/nn.hpp"
#include "pushdyn/binio.hpp"

namespace pushdyn::ad {

/// Serialized model: named f32 parameter records plus a JSON config blob
/// (architecture, normalization statistics, lineage), guarded by a trailing
/// content hash.
struct Checkpoint {
  std::string config_json;
  ParamTree<float> params;

  std::string serialize() const {
    std::ostringstream os(std::ios::binary);
    BinWriter w{os};
    w.array("PDCK", 4);
    w.pod(static_cast<std::uint32_t>(1));
    w.str(config_json);
    w.pod(static_cast<std::uint32_t>(params.params.size()));
    for (const auto& [name, p] : params.params) {
      w.str(name);
      w.pod(static_cast<std::uint32_t>(p.value.shape.size()));
      for (int d : p.value.shape) w.pod(static_cast<std::uint32_t>(d));
      w.array(p.value.data.data(), static_cast<std::size_t>(p.value.numel()));
    }
    std::string payload = os.str();
    const std::uint64_t h = fnv1a64(payload.data(), payload.size());
    std::ostringstream os2(std::ios::binary);
    BinWriter w2{os2};
    os2.write(payload.data(), static_cast<std::streamsize>(payload.size()));
    w2.pod(h);
    return os2.str();
  }

  std::uint64_t content_hash() const {
    const std::string payload = serialize();
    // the trailing 8 bytes are the hash itself
    std::uint64_t h;
    std::memcpy(&h, payload.data() + payload.size() - 8, 8);
    return h;
  }

  void save(const std::string& path) const { write_text_file(path, serialize()); }

  static Checkpoint deserialize(const std::string& blob) {
    if (blob.size() < 12) throw std::runtime_error("checkpoint: truncated");
    std::uint64_t stored;
    std::memcpy(&stored, blob.data() + blob.size() - 8, 8);
    if (fnv1a64(blob.data(), blob.size() - 8) != stored)
      throw std::runtime_error("checkpoint: content hash mismatch");
    std::istringstream is(blob.substr(0, blob.size() - 8), std::ios::binary);
    BinReader r{is};
    char magic[4];
    r.array(magic, 4);
    if (std::string(magic, 4) != "PDCK") throw std::runtime_error("checkpoint: bad magic");
    const auto version = r.pod<std::uint32_t>();
    if (version != 1) throw std::runtime_error("checkpoint: unsupported version");
    Checkpoint ck;
    ck.config_json = r.str();
    const auto n = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n; ++i) {
      const std::string name = r.str();
      const auto ndim = r.pod<std::uint32_t>();
      std::vector<int> shape(ndim);
      for (auto& d : shape) d = static_cast<int>(r.pod<std::uint32_t>());
      Tensor<float> v(shape);
      r.array(v.data.data(), static_cast<std::size_t>(v.numel()));
      ck.params.create(name, std::move(v));
    }
    return ck;
  }

  static Checkpoint load(const std::string& path) {
    return deserialize(read_text_file(path));
  }
};

}  // namespace pushdyn::ad
