// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "scio/error.hpp"
#include "scio/nnet.hpp"
#include "scio/tensor_io.hpp"

namespace scio {

// Checkpoint layout:
//
//   magic     8 bytes "SCIOCKPT"
//   version   u8      1
//   layers    u32     L
//   L x { in u32, out u32, activation u8 }
//   adam      step u64, lr f64, beta1 f64, beta2 f64, eps f64
//   L x { weight, bias, m.weight, m.bias, v.weight, v.bias }  tensor containers

inline constexpr std::array<char, 8> kCheckpointMagic{'S', 'C', 'I', 'O', 'C', 'K', 'P', 'T'};
inline constexpr std::uint8_t kCheckpointVersion = 1;

template <typename T>
struct Checkpoint {
    ConvNetParams<T> params;
    AdamState<T> adam;
};

namespace detail {

inline void put_f64(std::ostream& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

inline double get_f64(std::istream& in, const char* field) {
    std::uint64_t bits = 0;
    if (!get_le(in, bits)) throw Error(ErrorKind::FormatError, field, "truncated checkpoint");
    return std::bit_cast<double>(bits);
}

template <typename T>
TensorRecord<T> record(std::vector<std::uint32_t> dims, const std::vector<T>& v) {
    return {std::move(dims), v};
}

template <typename T>
void read_into(std::istream& in, std::uint64_t remaining, std::vector<T>& dst, std::size_t expected) {
    auto t = read_tensor<T>(in, remaining);
    if (t.values.size() != expected) throw Error(ErrorKind::FormatError, "tensor", "layer tensor has wrong size");
    dst = std::move(t.values);
}

}  // namespace detail

template <typename T>
void write_checkpoint(std::ostream& out, const ConvNetParams<T>& p, const AdamState<T>& s) {
    p.validate();
    out.write(kCheckpointMagic.data(), kCheckpointMagic.size());
    detail::put_le<std::uint8_t>(out, kCheckpointVersion);
    detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(p.layers.size()));
    for (const auto& l : p.layers) {
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.in_channels));
        detail::put_le<std::uint32_t>(out, static_cast<std::uint32_t>(l.out_channels));
        detail::put_le<std::uint8_t>(out, static_cast<std::uint8_t>(l.activation));
    }
    detail::put_le<std::uint64_t>(out, s.step);
    detail::put_f64(out, s.lr);
    detail::put_f64(out, s.beta1);
    detail::put_f64(out, s.beta2);
    detail::put_f64(out, s.eps);
    const bool has_moments = s.m.layers.size() == p.layers.size() && s.v.layers.size() == p.layers.size();
    const auto zeros = ParamGrads<T>::zeros_like(p);
    const auto& m = has_moments ? s.m : zeros;
    const auto& v = has_moments ? s.v : zeros;
    for (std::size_t i = 0; i < p.layers.size(); ++i) {
        const auto& l = p.layers[i];
        const std::vector<std::uint32_t> wd{static_cast<std::uint32_t>(l.out_channels),
                                            static_cast<std::uint32_t>(l.in_channels), kKernel, kKernel};
        const std::vector<std::uint32_t> bd{static_cast<std::uint32_t>(l.out_channels)};
        write_tensor(out, detail::record(wd, l.weight));
        write_tensor(out, detail::record(bd, l.bias));
        write_tensor(out, detail::record(wd, m.layers[i].weight));
        write_tensor(out, detail::record(bd, m.layers[i].bias));
        write_tensor(out, detail::record(wd, v.layers[i].weight));
        write_tensor(out, detail::record(bd, v.layers[i].bias));
    }
}

template <typename T>
Checkpoint<T> read_checkpoint(std::istream& in, std::uint64_t size) {
    auto remaining = [&] { return size - static_cast<std::uint64_t>(in.tellg()); };
    std::array<char, 8> magic{};
    if (!in.read(magic.data(), magic.size()) || magic != kCheckpointMagic)
        throw Error(ErrorKind::FormatError, "magic", "not a checkpoint");
    std::uint8_t version = 0;
    if (!detail::get_le(in, version)) throw Error(ErrorKind::FormatError, "version", "truncated checkpoint");
    if (version != kCheckpointVersion)
        throw Error(ErrorKind::FormatError, "version", "unsupported checkpoint version " + std::to_string(version));
    std::uint32_t n = 0;
    if (!detail::get_le(in, n)) throw Error(ErrorKind::FormatError, "architecture", "truncated checkpoint");
    if (n == 0 || n > 1024) throw Error(ErrorKind::FormatError, "architecture", "implausible layer count");
    Checkpoint<T> ck;
    for (std::uint32_t i = 0; i < n; ++i) {
        std::uint32_t ic = 0, oc = 0;
        std::uint8_t act = 0;
        if (!detail::get_le(in, ic) || !detail::get_le(in, oc) || !detail::get_le(in, act))
            throw Error(ErrorKind::FormatError, "architecture", "truncated checkpoint");
        if (act > 1 || ic == 0 || oc == 0 || ic > 65536 || oc > 65536)
            throw Error(ErrorKind::FormatError, "architecture", "invalid layer descriptor");
        ConvLayer<T> l{static_cast<int>(ic), static_cast<int>(oc), static_cast<Activation>(act), {}, {}};
        ck.params.layers.push_back(std::move(l));
    }
    std::uint64_t step = 0;
    if (!detail::get_le(in, step)) throw Error(ErrorKind::FormatError, "adam", "truncated checkpoint");
    ck.adam.step = step;
    ck.adam.lr = detail::get_f64(in, "adam");
    ck.adam.beta1 = detail::get_f64(in, "adam");
    ck.adam.beta2 = detail::get_f64(in, "adam");
    ck.adam.eps = detail::get_f64(in, "adam");
    ck.adam.m = ParamGrads<T>::zeros_like(ck.params);
    ck.adam.v = ParamGrads<T>::zeros_like(ck.params);
    for (std::size_t i = 0; i < n; ++i) {
        auto& l = ck.params.layers[i];
        const std::size_t wn = static_cast<std::size_t>(l.out_channels) * l.fan_in();
        const auto bn = static_cast<std::size_t>(l.out_channels);
        detail::read_into(in, remaining(), l.weight, wn);
        detail::read_into(in, remaining(), l.bias, bn);
        detail::read_into(in, remaining(), ck.adam.m.layers[i].weight, wn);
        detail::read_into(in, remaining(), ck.adam.m.layers[i].bias, bn);
        detail::read_into(in, remaining(), ck.adam.v.layers[i].weight, wn);
        detail::read_into(in, remaining(), ck.adam.v.layers[i].bias, bn);
    }
    if (remaining() != 0) throw Error(ErrorKind::FormatError, "trailing", "unexpected bytes after checkpoint");
    ck.params.validate();
    return ck;
}

template <typename T>
void save_checkpoint(const ConvNetParams<T>& p, const AdamState<T>& s, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "open", "cannot write " + path.string());
    write_checkpoint(out, p, s);
    out.flush();
    if (!out) throw Error(ErrorKind::IoError, "write", "failed writing " + path.string());
}

template <typename T = float>
Checkpoint<T> load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorKind::IoError, "open", "cannot read " + path.string());
    std::error_code ec;
    const auto size = std::filesystem::file_size(path, ec);
    if (ec) throw Error(ErrorKind::IoError, "stat", path.string());
    return read_checkpoint<T>(in, size);
}

}  // namespace scio
