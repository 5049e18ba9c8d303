#pragma once

// Dense f32 tensors (rank 1 or 2) and the .spsf interchange format.
//
// .spsf layout, all integers little-endian:
//   offset 0   magic "SPS1" (53 50 53 31)
//   offset 4   u8 dtype code (0 = f32)
//   offset 5   u8 ndim (1 or 2)
//   offset 6   6 zero bytes
//   offset 16  ndim x u64 dims
//   then       row-major f32 payload
// The header is 16 + 8 * ndim bytes, so the payload offset follows from ndim.

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <new>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sps/error.hpp"

namespace sps {

enum class DType : std::uint8_t { F32 = 0 };

inline constexpr std::array<std::uint8_t, 4> kTensorMagic = {0x53, 0x50, 0x53, 0x31};
inline constexpr std::size_t kTensorFixedHeaderBytes = 16;

inline constexpr std::size_t tensor_header_bytes(std::size_t ndim) {
  return kTensorFixedHeaderBytes + 8 * ndim;
}

class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<std::uint64_t> shape, std::vector<float> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_.empty() || shape_.size() > 2) {
      throw ShapeError("tensor rank must be 1 or 2, got " + std::to_string(shape_.size()));
    }
    std::uint64_t n = 1;
    for (auto d : shape_) {
      if (d == 0) throw ShapeError("tensor dimensions must be >= 1");
      n *= d;
    }
    if (n != data_.size()) {
      throw ShapeError("tensor shape implies " + std::to_string(n) + " elements, buffer holds " +
                       std::to_string(data_.size()));
    }
  }

  static Tensor vector(std::vector<float> values) {
    const auto n = static_cast<std::uint64_t>(values.size());
    return Tensor({n}, std::move(values));
  }

  static Tensor matrix(std::uint64_t rows, std::uint64_t cols, std::vector<float> values) {
    return Tensor({rows, cols}, std::move(values));
  }

  /// Builds a [rows.size() x D] matrix from row vectors of equal length.
  static Tensor from_rows(const std::vector<std::vector<float>>& rows) {
    if (rows.empty()) throw EmptySequenceError("cannot build a matrix from zero rows");
    const auto cols = rows.front().size();
    std::vector<float> data;
    data.reserve(rows.size() * cols);
    for (const auto& r : rows) {
      if (r.size() != cols) throw ShapeError("ragged rows");
      data.insert(data.end(), r.begin(), r.end());
    }
    return matrix(rows.size(), cols, std::move(data));
  }

  DType dtype() const noexcept { return DType::F32; }
  std::size_t rank() const noexcept { return shape_.size(); }
  const std::vector<std::uint64_t>& shape() const noexcept { return shape_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t rows() const noexcept { return shape_.empty() ? 0 : shape_[0]; }
  std::size_t cols() const noexcept { return shape_.size() == 2 ? shape_[1] : 1; }

  std::span<const float> data() const noexcept { return data_; }
  std::span<float> data() noexcept { return data_; }

  std::span<const float> row(std::size_t i) const noexcept {
    return std::span<const float>(data_).subspan(i * cols(), cols());
  }

  float operator[](std::size_t i) const noexcept { return data_[i]; }
  float& operator[](std::size_t i) noexcept { return data_[i]; }
  float operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols() + j]; }
  float& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols() + j]; }

  /// Bit-level equality: -0.0f and 0.0f differ.
  friend bool operator==(const Tensor& a, const Tensor& b) noexcept {
    return a.shape_ == b.shape_ && a.data_.size() == b.data_.size() &&
           (a.data_.empty() ||
            std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(float)) == 0);
  }

 private:
  std::vector<std::uint64_t> shape_;
  std::vector<float> data_;
};

namespace detail {

inline void put_u64_le(std::uint8_t* out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(v >> (8 * i));
}

inline std::uint64_t get_u64_le(const std::uint8_t* in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(in[i]) << (8 * i);
  return v;
}

inline std::vector<std::uint8_t> encode_header(const Tensor& t) {
  std::vector<std::uint8_t> h(tensor_header_bytes(t.rank()), 0);
  std::memcpy(h.data(), kTensorMagic.data(), kTensorMagic.size());
  h[4] = static_cast<std::uint8_t>(DType::F32);
  h[5] = static_cast<std::uint8_t>(t.rank());
  for (std::size_t i = 0; i < t.rank(); ++i) put_u64_le(h.data() + 16 + 8 * i, t.shape()[i]);
  return h;
}

// Calls sink(bytes, n) over the little-endian payload in bounded chunks.
template <class Sink>
void for_each_payload_chunk(std::span<const float> data, Sink&& sink) {
  if constexpr (std::endian::native == std::endian::little) {
    sink(reinterpret_cast<const std::uint8_t*>(data.data()), data.size() * sizeof(float));
  } else {
    constexpr std::size_t kChunk = 4096;
    std::vector<std::uint8_t> buf(kChunk * 4);
    for (std::size_t off = 0; off < data.size(); off += kChunk) {
      const auto n = std::min(kChunk, data.size() - off);
      for (std::size_t i = 0; i < n; ++i) {
        const auto bits = std::bit_cast<std::uint32_t>(data[off + i]);
        for (int b = 0; b < 4; ++b) buf[4 * i + b] = static_cast<std::uint8_t>(bits >> (8 * b));
      }
      sink(buf.data(), n * 4);
    }
  }
}

inline void check_finite(std::span<const float> data, const std::string& context) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw DataError(context + ": non-finite element at flat index " + std::to_string(i));
    }
  }
}

}  // namespace detail

inline void write_tensor(const Tensor& t, std::ostream& out, const std::string& context = "<stream>") {
  if (t.empty()) throw ShapeError(context + ": cannot write an empty tensor");
  detail::check_finite(t.data(), context);
  const auto header = detail::encode_header(t);
  out.write(reinterpret_cast<const char*>(header.data()), static_cast<std::streamsize>(header.size()));
  detail::for_each_payload_chunk(t.data(), [&](const std::uint8_t* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n));
  });
  if (!out) throw IoError(context + ": write failed");
}

inline void write_tensor_file(const Tensor& t, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError(path.string() + ": cannot open for writing");
  write_tensor(t, out, path.string());
  out.flush();
  if (!out) throw IoError(path.string() + ": write failed");
}

inline Tensor read_tensor(std::istream& in, const std::string& context = "<stream>") {
  std::array<std::uint8_t, kTensorFixedHeaderBytes> fixed{};
  in.read(reinterpret_cast<char*>(fixed.data()), fixed.size());
  if (in.gcount() < 4 || std::memcmp(fixed.data(), kTensorMagic.data(), 4) != 0) {
    throw FormatError(context + ": bad magic, not an .spsf tensor");
  }
  if (in.gcount() != static_cast<std::streamsize>(fixed.size())) {
    throw FormatError(context + ": truncated header");
  }
  if (fixed[4] != static_cast<std::uint8_t>(DType::F32)) {
    throw FormatError(context + ": unsupported dtype code " + std::to_string(fixed[4]));
  }
  const std::size_t ndim = fixed[5];
  if (ndim != 1 && ndim != 2) {
    throw FormatError(context + ": unsupported ndim " + std::to_string(ndim));
  }
  for (std::size_t i = 6; i < 16; ++i) {
    if (fixed[i] != 0) throw FormatError(context + ": non-zero header padding");
  }
  std::array<std::uint8_t, 16> dims_raw{};
  in.read(reinterpret_cast<char*>(dims_raw.data()), static_cast<std::streamsize>(8 * ndim));
  if (in.gcount() != static_cast<std::streamsize>(8 * ndim)) {
    throw FormatError(context + ": truncated dimension block");
  }
  std::vector<std::uint64_t> shape(ndim);
  std::uint64_t count = 1;
  for (std::size_t i = 0; i < ndim; ++i) {
    shape[i] = detail::get_u64_le(dims_raw.data() + 8 * i);
    if (shape[i] == 0) throw FormatError(context + ": zero-sized dimension");
    if (count > std::numeric_limits<std::uint64_t>::max() / shape[i] / sizeof(float)) {
      throw FormatError(context + ": dimension product overflows");
    }
    count *= shape[i];
  }

  std::vector<float> data;
  try {
    data.resize(count);
  } catch (const std::bad_alloc&) {
    throw DataError(context + ": tensor of " + std::to_string(count) +
                    " elements does not fit in memory");
  } catch (const std::length_error&) {
    throw DataError(context + ": tensor of " + std::to_string(count) +
                    " elements does not fit in memory");
  }
  const auto bytes = static_cast<std::streamsize>(count * sizeof(float));
  in.read(reinterpret_cast<char*>(data.data()), bytes);
  if (in.gcount() != bytes) throw FormatError(context + ": truncated payload");
  if constexpr (std::endian::native != std::endian::little) {
    for (auto& v : data) {
      auto bits = std::bit_cast<std::uint32_t>(v);
      bits = ((bits & 0xFFu) << 24) | ((bits & 0xFF00u) << 8) | ((bits >> 8) & 0xFF00u) | (bits >> 24);
      v = std::bit_cast<float>(bits);
    }
  }
  detail::check_finite(data, context);
  return Tensor(std::move(shape), std::move(data));
}

inline Tensor read_tensor_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for reading");
  return read_tensor(in, path.string());
}

// SHA-256 over an arbitrary byte sequence fed in pieces.
class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    if (ctx_ == nullptr || EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) != 1) {
      throw Error("sha256: digest initialisation failed");
    }
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_, p, n); }

  std::string hex_digest() {
    std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx_, md.data(), &len);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(kHex[md[i] >> 4]);
      out.push_back(kHex[md[i] & 0xF]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

/// "sha256:<hex>" of the tensor's .spsf byte image.
inline std::string fingerprint(const Tensor& t) {
  Sha256 h;
  const auto header = detail::encode_header(t);
  h.update(header.data(), header.size());
  detail::for_each_payload_chunk(t.data(), [&](const std::uint8_t* p, std::size_t n) { h.update(p, n); });
  return "sha256:" + h.hex_digest();
}

inline std::string file_fingerprint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string() + ": cannot open for hashing");
  Sha256 h;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return "sha256:" + h.hex_digest();
}

}  // namespace sps
