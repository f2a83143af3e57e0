#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "pifield/math.hpp"

namespace pifield {

// Minimal binary tensor container, little-endian throughout:
//   magic "PIFT" | u8 version=1 | u8 dtype (1=f32, 2=f64) | u32 ndim |
//   u32 dims[ndim] | payload
struct TensorFile {
    std::uint8_t dtype = 2; // 1 = f32, 2 = f64
    std::vector<std::uint32_t> dims;
    std::vector<double> data; // held as f64 in memory regardless of dtype

    std::size_t element_count() const {
        return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                               [](std::size_t a, std::uint32_t d) { return a * d; });
    }
};

namespace detail {

template <class T>
void write_le(std::ostream& os, T v) {
    // Host is little-endian on every supported target; memcpy keeps this UB-free.
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(buf, sizeof(T));
}

template <class T>
T read_le(std::istream& is) {
    char buf[sizeof(T)];
    is.read(buf, sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

} // namespace detail

inline void save_tensor(const std::string& path, const TensorFile& t) {
    if (t.data.size() != t.element_count())
        throw Error("tensor payload size mismatch writing " + path);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("cannot open for write: " + path);
    os.write("PIFT", 4);
    detail::write_le<std::uint8_t>(os, 1);
    detail::write_le<std::uint8_t>(os, t.dtype);
    detail::write_le<std::uint32_t>(os, std::uint32_t(t.dims.size()));
    for (auto d : t.dims) detail::write_le<std::uint32_t>(os, d);
    if (t.dtype == 1) {
        for (double v : t.data) detail::write_le<float>(os, float(v));
    } else if (t.dtype == 2) {
        for (double v : t.data) detail::write_le<double>(os, v);
    } else {
        throw Error("unknown tensor dtype writing " + path);
    }
    if (!os) throw Error("write failed: " + path);
}

inline TensorFile load_tensor(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("cannot open: " + path);
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, "PIFT", 4) != 0) throw Error("bad tensor magic in " + path);
    auto version = detail::read_le<std::uint8_t>(is);
    if (version != 1) throw Error("unsupported tensor version in " + path);
    TensorFile t;
    t.dtype = detail::read_le<std::uint8_t>(is);
    if (t.dtype != 1 && t.dtype != 2) throw Error("unknown tensor dtype in " + path);
    auto ndim = detail::read_le<std::uint32_t>(is);
    if (ndim > 8) throw Error("implausible tensor rank in " + path);
    t.dims.resize(ndim);
    for (auto& d : t.dims) d = detail::read_le<std::uint32_t>(is);
    std::size_t n = t.element_count();
    t.data.resize(n);
    if (t.dtype == 1) {
        for (auto& v : t.data) v = detail::read_le<float>(is);
    } else {
        for (auto& v : t.data) v = detail::read_le<double>(is);
    }
    if (!is) throw Error("truncated tensor payload in " + path);
    return t;
}

} // namespace pifield
