#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "distag/tensor.hpp"

namespace distag {

enum class DType { f64, f32, i32 };

std::string_view dtype_name(DType dtype);
DType parse_dtype(std::string_view name);

struct NamedTensor {
  std::string name;
  Tensor tensor;
  DType dtype = DType::f64;
};

// Named-tensor container used for checkpoints and logit shards: a directory
// holding manifest.json (metadata, tensor table with dtype/shape/offset) and
// tensors.bin (little-endian raw data). The blob's SHA-256 is stored in the
// manifest and verified on read.
struct Archive {
  nlohmann::json meta;
  std::vector<NamedTensor> tensors;
  std::string checksum;  // hex SHA-256 of tensors.bin

  const Tensor& get(std::string_view name) const;
  bool contains(std::string_view name) const;
};

inline constexpr std::string_view kArchiveManifest = "manifest.json";
inline constexpr std::string_view kArchiveBlob = "tensors.bin";

// Returns the blob checksum.
std::string write_archive(const std::filesystem::path& dir, const nlohmann::json& meta,
                          std::span<const NamedTensor> tensors);
Archive read_archive(const std::filesystem::path& dir);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace distag
