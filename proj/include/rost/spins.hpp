#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rost/error.hpp"

namespace rost {

using Spin = std::int8_t;
using SpinConfig = std::vector<Spin>;

// Configurations of up to 64 spins are numbered by a bit mask: bit x set
// means sigma_x = -1. Configuration 0 is all +1.
inline SpinConfig config_from_bits(std::uint64_t bits, std::size_t n) {
    SpinConfig s(n);
    for (std::size_t x = 0; x < n; ++x) s[x] = ((bits >> x) & 1u) ? Spin{-1} : Spin{1};
    return s;
}

inline std::uint64_t bits_from_config(std::span<const Spin> s) {
    require(s.size() <= 64, "too-many-spins", "bit packing supports at most 64 spins");
    std::uint64_t b = 0;
    for (std::size_t x = 0; x < s.size(); ++x)
        if (s[x] < 0) b |= std::uint64_t{1} << x;
    return b;
}

inline SpinConfig flipped(std::span<const Spin> s) {
    SpinConfig out(s.begin(), s.end());
    for (auto& x : out) x = static_cast<Spin>(-x);
    return out;
}

}  // namespace rost
