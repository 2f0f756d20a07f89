// SPDX-License-Identifier: Apache-2.0
//
// Little-endian binary stream helpers shared by the dataset and model file
// formats.

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace psic::io {

template <typename T>
void write_le(std::ostream& out, T v) {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    auto u = static_cast<std::make_unsigned_t<T>>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<unsigned char>(u >> (8 * i));
    out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }

inline void write_bytes(std::ostream& out, const void* p, std::size_t n) {
    out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_le(out, static_cast<std::uint32_t>(s.size()));
    write_bytes(out, s.data(), s.size());
}

inline void write_f64_array(std::ostream& out, const std::vector<double>& v) {
    for (double x : v) write_f64(out, x);
}

[[noreturn]] inline void short_read(const std::string& what) {
    throw std::runtime_error("unexpected end of file while reading " + what);
}

template <typename T>
T read_le(std::istream& in, const char* what = "integer") {
    static_assert(std::is_integral_v<T>);
    unsigned char buf[sizeof(T)];
    if (!in.read(reinterpret_cast<char*>(buf), sizeof(T))) short_read(what);
    std::make_unsigned_t<T> u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<std::make_unsigned_t<T>>(buf[i]) << (8 * i);
    return static_cast<T>(u);
}

inline double read_f64(std::istream& in, const char* what = "double") {
    return std::bit_cast<double>(read_le<std::uint64_t>(in, what));
}

inline std::string read_string(std::istream& in, const char* what = "string") {
    const auto n = read_le<std::uint32_t>(in, what);
    std::string s(n, '\0');
    if (n && !in.read(s.data(), n)) short_read(what);
    return s;
}

inline void read_f64_array(std::istream& in, std::vector<double>& v, const char* what = "array") {
    for (double& x : v) x = read_f64(in, what);
}

inline void expect_magic(std::istream& in, const std::string& magic, const std::string& path) {
    std::string got(magic.size(), '\0');
    if (!in.read(got.data(), static_cast<std::streamsize>(magic.size())) || got != magic)
        throw std::runtime_error(path + ": bad magic (expected " + magic + ")");
}

}  // namespace psic::io
