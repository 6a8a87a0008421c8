#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "rgt/io/binary.hpp"
#include "rgt/nn/tensor.hpp"

namespace rgt::nn {

// Checkpoint container, all integers little-endian:
//
//   "RGTCKPT\0"            8-byte magic
//   u32 version            (1)
//   u32 len, bytes         architecture fingerprint (canonical JSON text)
//   u32 len, bytes         metadata (JSON text)
//   u32 blob count
//   per blob: u32 len, name bytes, u32 rows, u32 cols, f64[rows*cols]
//
// Parameters are stored as f64 regardless of the model's scalar type, so a
// float model round-trips exactly.
inline constexpr char kCheckpointMagic[8] = {'R', 'G', 'T', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Blob {
  std::string name;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<double> data;
};

struct Checkpoint {
  std::string fingerprint;
  nlohmann::json meta = nlohmann::json::object();
  std::vector<Blob> blobs;

  const Blob* find(const std::string& name) const {
    for (const Blob& b : blobs)
      if (b.name == name) return &b;
    return nullptr;
  }
};


inline std::string encode_checkpoint(const Checkpoint& ck) {
  using namespace io;
  std::string out(kCheckpointMagic, sizeof(kCheckpointMagic));
  put<std::uint32_t>(out, kCheckpointVersion);
  put_string(out, ck.fingerprint);
  put_string(out, ck.meta.dump());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.blobs.size()));
  for (const Blob& b : ck.blobs) {
    put_string(out, b.name);
    put<std::uint32_t>(out, b.rows);
    put<std::uint32_t>(out, b.cols);
    for (double v : b.data) put<double>(out, v);
  }
  return out;
}

inline Checkpoint decode_checkpoint(const std::string& data) {
  using namespace io;
  if (data.size() < sizeof(kCheckpointMagic) || std::memcmp(data.data(), kCheckpointMagic, 8) != 0)
    throw ParseError(0, "not a checkpoint file");
  Reader r(data, "checkpoint");
  r.skip(sizeof(kCheckpointMagic));
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw ParseError(8, "unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  ck.fingerprint = r.get_string();
  const std::size_t meta_at = r.position();
  try {
    ck.meta = nlohmann::json::parse(r.get_string());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(meta_at, std::string("bad checkpoint metadata: ") + e.what());
  }
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    Blob b;
    b.name = r.get_string();
    b.rows = r.get<std::uint32_t>();
    b.cols = r.get<std::uint32_t>();
    const std::uint64_t n = static_cast<std::uint64_t>(b.rows) * b.cols;
    r.need(n * sizeof(double));
    b.data.resize(n);
    for (auto& v : b.data) v = r.get<double>();
    ck.blobs.push_back(std::move(b));
  }
  return ck;
}

inline void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
  const std::string bytes = encode_checkpoint(ck);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  const std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(data);
}

template <class T>
void append_blobs(Checkpoint& ck, const ParamList<T>& params, const std::string& prefix = "") {
  for (const auto& p : params) {
    Blob b{prefix + p.name, static_cast<std::uint32_t>(p.rows), static_cast<std::uint32_t>(p.cols), {}};
    b.data.assign(p.value, p.value + p.size());
    ck.blobs.push_back(std::move(b));
  }
}

// Copies named blobs into the parameters. The fingerprint must match exactly.
template <class T>
void restore_params(const Checkpoint& ck, const ParamList<T>& params, const std::string& expected_fingerprint) {
  if (ck.fingerprint != expected_fingerprint)
    throw FingerprintError("checkpoint architecture '" + ck.fingerprint + "' does not match '" +
                           expected_fingerprint + "'");
  for (const auto& p : params) {
    const Blob* b = ck.find(p.name);
    if (b == nullptr) throw FingerprintError("checkpoint lacks parameter '" + p.name + "'");
    if (b->rows != p.rows || b->cols != p.cols)
      throw FingerprintError("checkpoint parameter '" + p.name + "' has shape " + std::to_string(b->rows) + "x" +
                             std::to_string(b->cols));
    for (Index i = 0; i < p.size(); ++i) p.value[i] = static_cast<T>(b->data[static_cast<std::size_t>(i)]);
  }
}

}  // namespace rgt::nn
