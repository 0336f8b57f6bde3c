#pragma once

// ATNT tensor files (little-endian):
//
//   offset  size  field
//   0       4     magic "ATNT"
//   4       4     version, u32 = 1
//   8       1     dtype, u8 (0 = f32, 1 = f64)
//   9       1     ndim, u8 (always 2)
//   10      16    dims, 2 x u64 (rows, cols)
//   26      ...   row-major payload
//
// No padding, no checksum. f32 payloads are widened to f64 on read.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>
#include <vector>

#include "hopfattn/error.hpp"
#include "hopfattn/matrix.hpp"

namespace hopfattn {

static_assert(std::endian::native == std::endian::little,
              "tensor I/O assumes a little-endian host");

inline constexpr std::array<char, 4> kTensorMagic = {'A', 'T', 'N', 'T'};
inline constexpr std::uint32_t kTensorVersion = 1;
inline constexpr std::size_t kTensorHeaderBytes = 26;

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

namespace detail {

template <typename T>
T load_le(const unsigned char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

template <typename T>
void store_le(std::vector<unsigned char>& out, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.insert(out.end(), buf, buf + sizeof(T));
}

}  // namespace detail

/// Parses an in-memory ATNT image. `origin` only labels error messages.
inline Matrix decode_tensor(const std::vector<unsigned char>& bytes,
                            const std::string& origin = "<memory>") {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kTensorMagic.data(), 4) != 0) {
    throw Error(ErrorCode::MagicMismatch, origin + " does not start with \"ATNT\"");
  }
  if (bytes.size() < kTensorHeaderBytes) {
    throw Error(ErrorCode::TruncatedFile, origin + " has an incomplete header");
  }
  const auto version = detail::load_le<std::uint32_t>(bytes.data() + 4);
  if (version != kTensorVersion) {
    throw Error(ErrorCode::UnsupportedDtype,
                origin + " has unsupported version " + std::to_string(version));
  }
  const std::uint8_t dtype = bytes[8];
  const std::uint8_t ndim = bytes[9];
  if (dtype != static_cast<std::uint8_t>(Dtype::F32) &&
      dtype != static_cast<std::uint8_t>(Dtype::F64)) {
    throw Error(ErrorCode::UnsupportedDtype,
                origin + " has dtype code " + std::to_string(dtype));
  }
  if (ndim != 2) {
    throw Error(ErrorCode::UnsupportedDtype,
                origin + " has ndim " + std::to_string(ndim) + ", only 2 is supported");
  }
  const auto rows = detail::load_le<std::uint64_t>(bytes.data() + 10);
  const auto cols = detail::load_le<std::uint64_t>(bytes.data() + 18);
  const std::size_t width = dtype == 0 ? 4 : 8;

  // Guard the multiplication before trusting the header.
  const std::size_t available = bytes.size() - kTensorHeaderBytes;
  if (cols != 0 && rows > available / width / cols) {
    throw Error(ErrorCode::TruncatedFile,
                origin + " header claims " + std::to_string(rows) + "x" +
                    std::to_string(cols) + " but payload holds " +
                    std::to_string(available / width) + " values");
  }
  const std::size_t count = static_cast<std::size_t>(rows * cols);
  if (available != count * width) {
    throw Error(ErrorCode::TruncatedFile,
                origin + " payload holds " + std::to_string(available / width) +
                    " values, header claims " + std::to_string(count));
  }

  std::vector<double> data(count);
  const unsigned char* p = bytes.data() + kTensorHeaderBytes;
  for (std::size_t i = 0; i < count; ++i) {
    const double v = dtype == 0 ? static_cast<double>(detail::load_le<float>(p + 4 * i))
                                : detail::load_le<double>(p + 8 * i);
    if (!std::isfinite(v)) {
      throw Error(ErrorCode::NonFiniteEntry,
                  origin + " entry " + std::to_string(i) + " is not finite");
    }
    data[i] = v;
  }
  return Matrix(static_cast<std::size_t>(rows), static_cast<std::size_t>(cols),
                std::move(data));
}

inline std::vector<unsigned char> encode_tensor(const Matrix& m, Dtype dtype = Dtype::F64) {
  std::vector<unsigned char> out;
  const std::size_t width = dtype == Dtype::F32 ? 4 : 8;
  out.reserve(kTensorHeaderBytes + m.size() * width);
  out.insert(out.end(), kTensorMagic.begin(), kTensorMagic.end());
  detail::store_le<std::uint32_t>(out, kTensorVersion);
  out.push_back(static_cast<unsigned char>(dtype));
  out.push_back(2);
  detail::store_le<std::uint64_t>(out, m.rows());
  detail::store_le<std::uint64_t>(out, m.cols());
  for (double v : m.data()) {
    if (dtype == Dtype::F32) {
      detail::store_le<float>(out, static_cast<float>(v));
    } else {
      detail::store_le<double>(out, v);
    }
  }
  return out;
}

inline Matrix read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::IoFailure, "cannot open " + path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_tensor(bytes, path.string());
}

inline void write_tensor(const Matrix& m, const std::filesystem::path& path,
                         Dtype dtype = Dtype::F64) {
  const auto bytes = encode_tensor(m, dtype);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::IoFailure, "cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::IoFailure, "short write to " + path.string());
  }
}

}  // namespace hopfattn
