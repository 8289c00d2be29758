#pragma once

#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "coastcast/errors.hpp"

// Little-endian binary primitives for the CTEN / CCKP file formats.

namespace coastcast::detail {

template <typename T>
void write_le(std::ostream& out, T value) {
    static_assert(std::is_integral_v<T>);
    unsigned char bytes[sizeof(T)];
    using U = std::make_unsigned_t<T>;
    U u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) bytes[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xFF);
    out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
    if (!out) throw IoError("binary write failed");
}

template <typename T>
T read_le(std::istream& in, const char* what) {
    static_assert(std::is_integral_v<T>);
    unsigned char bytes[sizeof(T)];
    in.read(reinterpret_cast<char*>(bytes), sizeof(T));
    if (!in) throw FormatError(std::string("truncated file while reading ") + what);
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(bytes[i]) << (8 * i);
    return static_cast<T>(u);
}

inline void write_f32(std::ostream& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_le<std::uint32_t>(out, bits);
}

inline float read_f32(std::istream& in, const char* what) {
    const std::uint32_t bits = read_le<std::uint32_t>(in, what);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

inline void write_f32_block(std::ostream& out, const float* data, std::size_t n) {
    // f32 payloads are raw little-endian words; bulk-copy on LE hosts
    for (std::size_t i = 0; i < n; ++i) write_f32(out, data[i]);
}

inline void read_f32_block(std::istream& in, float* data, std::size_t n, const char* what) {
    for (std::size_t i = 0; i < n; ++i) data[i] = read_f32(in, what);
}

inline void write_string(std::ostream& out, const std::string& s) {
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
    if (!out) throw IoError("binary write failed");
}

inline std::string read_string(std::istream& in, const char* what, std::size_t max_len = 1u << 28) {
    const std::uint32_t len = read_le<std::uint32_t>(in, what);
    if (len > max_len) throw FormatError(std::string("unreasonable string length in ") + what);
    std::string s(len, '\0');
    in.read(s.data(), static_cast<std::streamsize>(len));
    if (!in) throw FormatError(std::string("truncated file while reading ") + what);
    return s;
}

inline void expect_magic(std::istream& in, const char magic[4], const char* what) {
    char buf[4];
    in.read(buf, 4);
    if (!in) throw FormatError(std::string("truncated file while reading ") + what + " magic");
    if (std::memcmp(buf, magic, 4) != 0) {
        throw FormatError(std::string("bad magic for ") + what + " file");
    }
}

}  // namespace coastcast::detail
