#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "rost/error.hpp"

namespace rost {

// Binary float vector: 4-byte magic "RF64", u32 version, then little-endian
// IEEE-754 doubles.
inline constexpr std::array<char, 4> kFloat64Magic{'R', 'F', '6', '4'};
inline constexpr std::uint32_t kFloat64Version = 1;

namespace detail {

inline void put_u64_le(std::ostream& os, std::uint64_t x) {
    char buf[8];
    for (int i = 0; i < 8; ++i) buf[i] = static_cast<char>((x >> (8 * i)) & 0xff);
    os.write(buf, 8);
}

inline std::uint64_t get_u64_le(const unsigned char* p) {
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return x;
}

}  // namespace detail

inline void write_float64_file(const std::string& path, std::span<const double> values) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), "io-error", "cannot open " + path);
    os.write(kFloat64Magic.data(), 4);
    const std::uint32_t v = kFloat64Version;
    const char ver[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                         static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(ver, 4);
    for (double x : values) detail::put_u64_le(os, std::bit_cast<std::uint64_t>(x));
    require(static_cast<bool>(os), "io-error", "write failed for " + path);
}

inline std::vector<double> read_float64_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "io-error", "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    require(bytes.size() >= 8 && std::memcmp(bytes.data(), kFloat64Magic.data(), 4) == 0, "bad-format",
            path + " is not a float64 vector file");
    const std::uint32_t ver = bytes[4] | (bytes[5] << 8) | (bytes[6] << 16) | (static_cast<std::uint32_t>(bytes[7]) << 24);
    require(ver == kFloat64Version, "bad-format", "unsupported version " + std::to_string(ver));
    require((bytes.size() - 8) % 8 == 0, "bad-format", "truncated payload in " + path);
    std::vector<double> out((bytes.size() - 8) / 8);
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::bit_cast<double>(detail::get_u64_le(bytes.data() + 8 + 8 * i));
    return out;
}

}  // namespace rost
