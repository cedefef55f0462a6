// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "scio/error.hpp"

namespace scio {

// Tensor container, little-endian:
//
//   magic    8 bytes  "SCIOTNSR"
//   version  u8       1
//   dtype    u8       0 = float32, 1 = float64
//   ndim     u8       1..8
//   dims     ndim x u32
//   payload  product(dims) values, row-major
//
// Files may hold several containers back to back.

inline constexpr std::array<char, 8> kTensorMagic{'S', 'C', 'I', 'O', 'T', 'N', 'S', 'R'};
inline constexpr std::uint8_t kTensorVersion = 1;
inline constexpr std::uint8_t kMaxTensorRank = 8;

template <typename T>
struct TensorRecord {
    static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>);
    std::vector<std::uint32_t> dims;
    std::vector<T> values;

    std::uint64_t element_count() const noexcept {
        std::uint64_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    friend bool operator==(const TensorRecord&, const TensorRecord&) = default;
};

template <typename T>
constexpr std::uint8_t dtype_code() {
    return std::is_same_v<T, float> ? 0 : 1;
}

namespace detail {

template <typename U>
void put_le(std::ostream& out, U v) {
    static_assert(std::is_integral_v<U>);
    std::array<char, sizeof(U)> b{};
    for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF);
    out.write(b.data(), b.size());
}

template <typename U>
bool get_le(std::istream& in, U& v) {
    std::array<unsigned char, sizeof(U)> b{};
    if (!in.read(reinterpret_cast<char*>(b.data()), b.size())) return false;
    std::uint64_t x = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) x |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    v = static_cast<U>(x);
    return true;
}

template <typename T>
using BitsOf = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;

}  // namespace detail

template <typename T>
void write_tensor(std::ostream& out, const TensorRecord<T>& t) {
    if (t.dims.empty() || t.dims.size() > kMaxTensorRank)
        throw Error(ErrorKind::ShapeError, "ndim", "tensor rank must be in 1..8");
    if (t.element_count() != t.values.size())
        throw Error(ErrorKind::ShapeError, "payload length", "value count does not match dims");
    out.write(kTensorMagic.data(), kTensorMagic.size());
    detail::put_le<std::uint8_t>(out, kTensorVersion);
    detail::put_le<std::uint8_t>(out, dtype_code<T>());
    detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.dims.size()));
    for (auto d : t.dims) detail::put_le<std::uint32_t>(out, d);
    for (T v : t.values) detail::put_le(out, std::bit_cast<detail::BitsOf<T>>(v));
    if (!out) throw Error(ErrorKind::IoError, "write", "failed writing tensor");
}

/// Reads one container. `remaining` (bytes left in the source, if known)
/// lets a dims/payload disagreement be reported before allocating.
template <typename T>
TensorRecord<T> read_tensor(std::istream& in, std::optional<std::uint64_t> remaining = std::nullopt) {
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kTensorMagic)
        throw Error(ErrorKind::FormatError, "magic", "not a tensor container");
    std::uint8_t version = 0, dtype = 0, ndim = 0;
    if (!detail::get_le(in, version)) throw Error(ErrorKind::FormatError, "version", "truncated header");
    if (version != kTensorVersion)
        throw Error(ErrorKind::FormatError, "version", "unsupported version " + std::to_string(version));
    if (!detail::get_le(in, dtype)) throw Error(ErrorKind::FormatError, "dtype", "truncated header");
    if (dtype != dtype_code<T>())
        throw Error(ErrorKind::FormatError, "dtype", "unexpected dtype " + std::to_string(dtype));
    if (!detail::get_le(in, ndim)) throw Error(ErrorKind::FormatError, "ndim", "truncated header");
    if (ndim == 0 || ndim > kMaxTensorRank)
        throw Error(ErrorKind::FormatError, "ndim", "rank " + std::to_string(ndim) + " outside 1..8");
    TensorRecord<T> t;
    t.dims.resize(ndim);
    for (auto& d : t.dims)
        if (!detail::get_le(in, d)) throw Error(ErrorKind::FormatError, "dims", "truncated dims");
    // product of up to eight u32 can overflow u64; saturate instead
    std::uint64_t count = 1;
    for (auto d : t.dims) {
        if (d != 0 && count > std::numeric_limits<std::uint64_t>::max() / sizeof(T) / d) {
            count = std::numeric_limits<std::uint64_t>::max() / sizeof(T);
            break;
        }
        count *= d;
    }
    const std::uint64_t header = 8 + 3 + 4ULL * ndim;
    if (remaining && (*remaining < header || count * sizeof(T) > *remaining - header))
        throw Error(ErrorKind::FormatError, "payload length", "payload shorter than dims imply");
    t.values.resize(static_cast<std::size_t>(count));
    for (auto& v : t.values) {
        detail::BitsOf<T> bits{};
        if (!detail::get_le(in, bits)) throw Error(ErrorKind::FormatError, "payload length", "truncated payload");
        v = std::bit_cast<T>(bits);
    }
    return t;
}

template <typename T>
void write_tensors(const std::filesystem::path& path, std::span<const TensorRecord<T>> tensors) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "open", "cannot write " + path.string());
    for (const auto& t : tensors) write_tensor(out, t);
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write", "failed writing " + path.string());
}

template <typename T>
void write_tensor(const std::filesystem::path& path, const TensorRecord<T>& t) {
    write_tensors<T>(path, std::span<const TensorRecord<T>>(&t, 1));
}

template <typename T>
std::vector<TensorRecord<T>> read_tensors(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "open", "cannot read " + path.string());
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorKind::IoError, "stat", path.string());
    std::vector<TensorRecord<T>> out;
    std::uint64_t consumed = 0;
    while (consumed < size) {
        out.push_back(read_tensor<T>(in, size - consumed));
        consumed = static_cast<std::uint64_t>(in.tellg());
    }
    return out;
}

/// Reads a file that must contain exactly one container.
template <typename T>
TensorRecord<T> read_tensor(const std::filesystem::path& path) {
    auto all = read_tensors<T>(path);
    if (all.size() != 1) throw Error(ErrorKind::FormatError, "payload length", "file holds trailing data");
    return std::move(all.front());
}

}  // namespace scio
