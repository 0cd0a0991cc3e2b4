#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "rost/error.hpp"
#include "rost/gibbs/model.hpp"
#include "rost/random.hpp"
#include "rost/spins.hpp"

namespace rost {

inline constexpr std::size_t kEnumerationCapBits = 24;

inline void require_enumerable(std::size_t vertices) {
    require(vertices <= kEnumerationCapBits, "enumeration-too-large",
            "2^" + std::to_string(vertices) + " configurations exceed the 2^24 cap");
}

namespace detail {

// Visits every configuration in Gray-code order as visit(bits, log_weight).
// The log weight is updated incrementally and recomputed from scratch every
// 1024 steps to bound round-off drift.
template <class Visit>
void gray_enumerate(const PairModel& m, Visit&& visit) {
    const std::size_t n = m.vertex_count();
    require_enumerable(n);
    SpinConfig s(n, Spin{1});
    double lw = m.log_weight(s);
    std::uint64_t bits = 0;
    visit(bits, lw);
    const std::uint64_t total = std::uint64_t{1} << n;
    for (std::uint64_t i = 1; i < total; ++i) {
        const auto x = static_cast<Vertex>(std::countr_zero(i));
        lw -= 2.0 * s[x] * m.local_field(x, s.data());
        s[x] = static_cast<Spin>(-s[x]);
        bits ^= std::uint64_t{1} << x;
        if ((i & 1023u) == 0) lw = m.log_weight(s);
        visit(bits, lw);
    }
}

inline double max_log_weight(const PairModel& m) {
    double mx = -std::numeric_limits<double>::infinity();
    gray_enumerate(m, [&](std::uint64_t, double lw) { mx = std::max(mx, lw); });
    return mx;
}

}  // namespace detail

// Exact Gibbs measure over all 2^V configurations, indexed by bit mask.
struct GibbsTable {
    double beta = 0.0;
    std::size_t vertices = 0;
    std::vector<double> probs;
    double log_z = 0.0;

    double prob(std::span<const Spin> s) const { return probs[bits_from_config(s)]; }
};

// Streaming log-sum-exp: a first pass finds the largest log weight, the
// second sums exp(lw - max).
inline double log_partition(const PairModel& m) {
    const double mx = detail::max_log_weight(m);
    double z = 0.0;
    detail::gray_enumerate(m, [&](std::uint64_t, double lw) { z += std::exp(lw - mx); });
    return mx + std::log(z);
}

inline GibbsTable exact_gibbs(const PairModel& m, double beta) {
    GibbsTable t;
    t.beta = beta;
    t.vertices = m.vertex_count();
    const double mx = detail::max_log_weight(m);
    t.probs.assign(std::size_t{1} << t.vertices, 0.0);
    detail::gray_enumerate(m, [&](std::uint64_t bits, double lw) { t.probs[bits] = std::exp(lw - mx); });
    // Pair models are flip-even; copying each weight to the complement makes
    // the table flip-symmetric bit for bit despite incremental round-off.
    const std::uint64_t all = t.probs.size() - 1, top = t.probs.size() >> 1;
    double z = 0.0;
    for (std::uint64_t c = 0; c < t.probs.size(); ++c)
        if (!(c & top)) {
            t.probs[c ^ all] = t.probs[c];
            z += 2.0 * t.probs[c];
        }
    for (auto& p : t.probs) p /= z;
    t.log_z = mx + std::log(z);
    return t;
}

inline GibbsTable exact_gibbs(const Lattice& lat, const CouplingField& J, double beta) {
    require_enumerable(lat.vertex_count());
    return exact_gibbs(ea_model(lat, J, beta), beta);
}

inline GibbsTable exact_gibbs_sk(const CouplingField& J, std::size_t n, double beta) {
    require_enumerable(n);
    return exact_gibbs(sk_model(J, n, beta), beta);
}

// Marginal law of the spins on `sites` (at most 24 of them); entry a is the
// probability of the sub-configuration whose bit i is set iff spin sites[i]
// is -1.
struct Marginal {
    std::vector<Vertex> sites;
    std::vector<double> probs;
    double log_z = 0.0;
};

inline Marginal exact_marginal(const PairModel& m, std::span<const Vertex> sites) {
    require(sites.size() <= kEnumerationCapBits, "enumeration-too-large", "marginal over too many sites");
    std::vector<std::uint64_t> bit_of(m.vertex_count(), 0);
    for (std::size_t i = 0; i < sites.size(); ++i) {
        require(sites[i] < m.vertex_count(), "geometry-mismatch", "marginal site out of range");
        bit_of[sites[i]] = std::uint64_t{1} << i;
    }
    Marginal out{std::vector<Vertex>(sites.begin(), sites.end()),
                 std::vector<double>(std::size_t{1} << sites.size(), 0.0), 0.0};
    const double mx = detail::max_log_weight(m);
    double z = 0.0;
    // Sub-index follows the Gray walk: flipping vertex x toggles bit_of[x].
    std::uint64_t prev = 0, sub = 0;
    detail::gray_enumerate(m, [&](std::uint64_t bits, double lw) {
        const std::uint64_t changed = bits ^ prev;
        if (changed) sub ^= bit_of[std::countr_zero(changed)];
        prev = bits;
        const double w = std::exp(lw - mx);
        out.probs[sub] += w;
        z += w;
    });
    for (auto& p : out.probs) p /= z;
    out.log_z = mx + std::log(z);
    return out;
}

inline Marginal marginal_of(const GibbsTable& t, std::span<const Vertex> sites) {
    require(sites.size() <= kEnumerationCapBits, "enumeration-too-large", "marginal over too many sites");
    Marginal out{std::vector<Vertex>(sites.begin(), sites.end()),
                 std::vector<double>(std::size_t{1} << sites.size(), 0.0), t.log_z};
    for (std::uint64_t c = 0; c < t.probs.size(); ++c) {
        std::uint64_t sub = 0;
        for (std::size_t i = 0; i < sites.size(); ++i) sub |= ((c >> sites[i]) & 1u) << i;
        out.probs[sub] += t.probs[c];
    }
    return out;
}

// <observable> under the table.
template <class Fn>
double table_expectation(const GibbsTable& t, Fn&& observable) {
    double acc = 0.0;
    for (std::uint64_t c = 0; c < t.probs.size(); ++c)
        if (t.probs[c] != 0.0) acc += t.probs[c] * observable(c);
    return acc;
}

inline double mean_log_weight(const GibbsTable& t, const PairModel& m) {
    return table_expectation(t, [&](std::uint64_t c) { return m.log_weight(config_from_bits(c, t.vertices)); });
}

// Inverse-CDF draws from the table.
class ExactSampler {
public:
    explicit ExactSampler(const GibbsTable& t) : vertices_(t.vertices), cdf_(t.probs.size()) {
        double acc = 0.0;
        for (std::size_t i = 0; i < t.probs.size(); ++i) cdf_[i] = (acc += t.probs[i]);
    }

    std::uint64_t draw_bits(Rng& rng) const {
        const double u = rng.uniform() * cdf_.back();
        auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
        if (it == cdf_.end()) --it;
        return static_cast<std::uint64_t>(it - cdf_.begin());
    }

    SpinConfig draw(Rng& rng) const { return config_from_bits(draw_bits(rng), vertices_); }

private:
    std::size_t vertices_;
    std::vector<double> cdf_;
};

}  // namespace rost
