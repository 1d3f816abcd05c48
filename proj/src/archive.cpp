#include "distag/archive.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <openssl/evp.h>

#include "distag/errors.hpp"

namespace distag {

std::string_view dtype_name(DType dtype) {
  switch (dtype) {
    case DType::f64: return "f64";
    case DType::f32: return "f32";
    case DType::i32: return "i32";
  }
  return "?";
}

DType parse_dtype(std::string_view name) {
  if (name == "f64") return DType::f64;
  if (name == "f32") return DType::f32;
  if (name == "i32") return DType::i32;
  throw DataError("unknown dtype '" + std::string(name) + "'");
}

namespace {

std::size_t dtype_bytes(DType d) { return d == DType::f64 ? 8 : 4; }

template <typename U>
void put_le(std::vector<std::uint8_t>& out, U bits) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

template <typename U>
U get_le(const std::uint8_t* p) {
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= static_cast<U>(p[i]) << (8 * i);
  return bits;
}

void encode(std::vector<std::uint8_t>& out, const NamedTensor& t) {
  for (double v : t.tensor.values()) {
    switch (t.dtype) {
      case DType::f64: put_le(out, std::bit_cast<std::uint64_t>(v)); break;
      case DType::f32: put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v))); break;
      case DType::i32: {
        if (v != std::nearbyint(v) || std::abs(v) > 2147483647.0) {
          throw InvalidArgument("tensor '" + t.name + "' holds non-integer value for i32");
        }
        put_le(out, static_cast<std::uint32_t>(static_cast<std::int32_t>(v)));
        break;
      }
    }
  }
}

double decode(const std::uint8_t* p, DType d) {
  switch (d) {
    case DType::f64: return std::bit_cast<double>(get_le<std::uint64_t>(p));
    case DType::f32: return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(p)));
    case DType::i32: return static_cast<double>(static_cast<std::int32_t>(get_le<std::uint32_t>(p)));
  }
  return 0.0;
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_bytes(path)); }

const Tensor& Archive::get(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.tensor;
  }
  throw DataError("archive has no tensor '" + std::string(name) + "'");
}

bool Archive::contains(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

std::string write_archive(const std::filesystem::path& dir, const nlohmann::json& meta,
                          std::span<const NamedTensor> tensors) {
  std::filesystem::create_directories(dir);
  std::vector<std::uint8_t> blob;
  nlohmann::json table = nlohmann::json::array();
  for (const auto& t : tensors) {
    const std::size_t offset = blob.size();
    encode(blob, t);
    table.push_back({{"name", t.name},
                     {"dtype", dtype_name(t.dtype)},
                     {"shape", t.tensor.shape()},
                     {"offset", offset},
                     {"nbytes", blob.size() - offset}});
  }
  const std::string checksum = sha256_hex(blob);
  nlohmann::json manifest = {{"format", "distag-tensors/1"},
                             {"meta", meta},
                             {"tensors", table},
                             {"data_file", kArchiveBlob},
                             {"data_sha256", checksum}};
  {
    std::ofstream out(dir / kArchiveBlob, std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / kArchiveBlob).string());
    out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size()));
  }
  std::ofstream out(dir / kArchiveManifest, std::ios::binary);
  if (!out) throw DataError("cannot write " + (dir / kArchiveManifest).string());
  out << manifest.dump(2) << '\n';
  return checksum;
}

Archive read_archive(const std::filesystem::path& dir) {
  nlohmann::json manifest;
  {
    std::ifstream in(dir / kArchiveManifest);
    if (!in) throw DataError("no " + std::string(kArchiveManifest) + " in " + dir.string());
    try {
      in >> manifest;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(dir.string() + ": bad manifest: " + e.what());
    }
  }
  Archive archive;
  try {
    archive.meta = manifest.at("meta");
    const auto blob = read_bytes(dir / manifest.at("data_file").get<std::string>());
    archive.checksum = sha256_hex(blob);
    if (archive.checksum != manifest.at("data_sha256").get<std::string>()) {
      throw DataError(dir.string() + ": tensor data checksum mismatch");
    }
    for (const auto& entry : manifest.at("tensors")) {
      NamedTensor t;
      t.name = entry.at("name").get<std::string>();
      t.dtype = parse_dtype(entry.at("dtype").get<std::string>());
      Shape shape = entry.at("shape").get<Shape>();
      const auto offset = entry.at("offset").get<std::size_t>();
      const auto nbytes = entry.at("nbytes").get<std::size_t>();
      const std::size_t count = shape_size(shape);
      const std::size_t width = dtype_bytes(t.dtype);
      if (nbytes != count * width || offset + nbytes > blob.size()) {
        throw DataError(dir.string() + ": tensor '" + t.name + "' extent is inconsistent");
      }
      std::vector<double> data(count);
      for (std::size_t i = 0; i < count; ++i) data[i] = decode(blob.data() + offset + i * width, t.dtype);
      t.tensor = Tensor(std::move(shape), std::move(data));
      archive.tensors.push_back(std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(dir.string() + ": bad manifest: " + e.what());
  }
  return archive;
}

}  // namespace distag
