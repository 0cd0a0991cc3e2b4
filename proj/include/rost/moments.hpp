#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include "rost/error.hpp"
#include "rost/gibbs/exact.hpp"
#include "rost/lattice.hpp"
#include "rost/monomial.hpp"

namespace rost {

// Overlap "sites" over the spins of a Marginal: an edge site is the mask of
// its two endpoints, a spin site the mask of one spin. The overlap of two
// replicas is the average over sites of prod_{x in site} s_x s'_x.
using SiteMasks = std::vector<std::uint32_t>;

inline SiteMasks edge_sites(const Lattice& lat, std::span<const EdgeIndex> edges, std::span<const Vertex> marginal_sites) {
    std::vector<long> rank(lat.vertex_count(), -1);
    for (std::size_t i = 0; i < marginal_sites.size(); ++i) rank[marginal_sites[i]] = static_cast<long>(i);
    SiteMasks out;
    out.reserve(edges.size());
    for (EdgeIndex e : edges) {
        const Edge& ed = lat.edge(e);
        require(rank[ed.a] >= 0 && rank[ed.b] >= 0, "geometry-mismatch", "edge endpoint outside the marginal");
        out.push_back((1u << rank[ed.a]) | (1u << rank[ed.b]));
    }
    return out;
}

inline SiteMasks spin_sites(std::size_t n) {
    SiteMasks out(n);
    for (std::size_t x = 0; x < n; ++x) out[x] = 1u << x;
    return out;
}

// All correlations <prod_{x in S} s_x> of a law over 2^k sub-configurations,
// by an in-place Walsh–Hadamard transform.
class CorrelationTable {
public:
    explicit CorrelationTable(std::vector<double> probs) : c_(std::move(probs)) {
        require(std::has_single_bit(c_.size()), "bad-marginal", "law size must be a power of two");
        for (std::size_t h = 1; h < c_.size(); h <<= 1)
            for (std::size_t i = 0; i < c_.size(); i += 2 * h)
                for (std::size_t j = i; j < i + h; ++j) {
                    const double x = c_[j], y = c_[j + h];
                    c_[j] = x + y;
                    c_[j + h] = x - y;
                }
    }

    double operator[](std::uint32_t mask) const { return c_[mask]; }
    std::size_t size() const noexcept { return c_.size(); }

private:
    std::vector<double> c_;
};

namespace detail {

struct SlotPlan {
    std::vector<std::size_t> first;   // replica i of each slot
    std::vector<std::size_t> second;  // replica j of each slot
};

inline SlotPlan slot_plan(const Monomial& f) {
    SlotPlan p;
    for (const auto& fac : f.factors())
        for (unsigned k = 0; k < fac.power; ++k) {
            p.first.push_back(fac.i);
            p.second.push_back(fac.j);
        }
    return p;
}

}  // namespace detail

// Exact E[prod_{i<j} q_ij^{n_ij}] under the product of s copies of the law
// behind `corr`. Expanding each overlap into its site average gives
// |sites|^{-T} sum over site tuples of prod_r <s_{S_r}>, where S_r is the
// XOR of the sites assigned to factors touching replica r.
inline double exact_moment(const CorrelationTable& corr, const SiteMasks& sites, const Monomial& f) {
    require(!sites.empty(), "empty-window", "no overlap sites");
    const auto plan = detail::slot_plan(f);
    const std::size_t T = plan.first.size();
    if (T == 0) return 1.0;
    const std::size_t s = f.replicas();
    const std::size_t m = sites.size();
    std::vector<std::uint32_t> mask(s, 0);
    std::vector<std::size_t> choice(T, 0);
    double total = 0.0;
    // Depth-first odometer; masks are updated incrementally.
    std::size_t depth = 0;
    for (;;) {
        if (depth == T) {
            double prod = 1.0;
            for (std::size_t r = 0; r < s; ++r) prod *= corr[mask[r]];
            total += prod;
            // backtrack
            for (;;) {
                if (depth == 0) return total / std::pow(static_cast<double>(m), static_cast<double>(T));
                --depth;
                mask[plan.first[depth]] ^= sites[choice[depth]];
                mask[plan.second[depth]] ^= sites[choice[depth]];
                if (++choice[depth] < m) break;
                choice[depth] = 0;
            }
        }
        mask[plan.first[depth]] ^= sites[choice[depth]];
        mask[plan.second[depth]] ^= sites[choice[depth]];
        ++depth;
    }
}

// The term of the expansion where the T factor slots sit on distinct sites:
// slots of q12 take sites 0..n12-1, then q13, and so on.
inline double distinct_site_term(const CorrelationTable& corr, const SiteMasks& sites, const Monomial& f) {
    const auto plan = detail::slot_plan(f);
    if (plan.first.empty()) return 1.0;
    require(plan.first.size() <= sites.size(), "bad-monomial", "more factors than distinct sites");
    std::vector<std::uint32_t> mask(f.replicas(), 0);
    for (std::size_t t = 0; t < plan.first.size(); ++t) {
        mask[plan.first[t]] ^= sites[t];
        mask[plan.second[t]] ^= sites[t];
    }
    double prod = 1.0;
    for (auto mk : mask) prod *= corr[mk];
    return prod;
}

// Exact law of the two-replica overlap q12 on its grid: entry k is
// P(q12 = 2k/m - 1), k = 0..m. Empty when the number of distinct site
// patterns exceeds `max_patterns`.
inline std::vector<double> exact_pair_overlap_law(std::span<const double> marginal, const SiteMasks& sites,
                                                  std::size_t max_patterns = 4096) {
    require(sites.size() <= 64, "too-many-sites", "pattern packing supports 64 sites");
    std::map<std::uint64_t, double> patterns;
    for (std::uint32_t a = 0; a < marginal.size(); ++a) {
        if (marginal[a] == 0.0) continue;
        std::uint64_t p = 0;
        for (std::size_t k = 0; k < sites.size(); ++k)
            if (std::popcount(a & sites[k]) & 1) p |= std::uint64_t{1} << k;
        patterns[p] += marginal[a];
    }
    if (patterns.size() > max_patterns) return {};
    std::vector<std::pair<std::uint64_t, double>> pv(patterns.begin(), patterns.end());
    std::vector<double> law(sites.size() + 1, 0.0);
    for (const auto& [pa, wa] : pv)
        for (const auto& [pb, wb] : pv) law[static_cast<std::size_t>(std::popcount(pa ^ pb))] += wa * wb;
    std::reverse(law.begin(), law.end());
    return law;
}

// Reweights a marginal by exp(log_tilt(a)) and renormalizes. A constant
// tilt returns the input unchanged, bit for bit.
template <class Fn>
std::vector<double> tilt_marginal(std::span<const double> probs, Fn&& log_tilt) {
    std::vector<double> lt(probs.size());
    double mx = -std::numeric_limits<double>::infinity();
    bool constant = true;
    for (std::uint32_t a = 0; a < probs.size(); ++a) {
        lt[a] = log_tilt(a);
        constant = constant && lt[a] == lt[0];
        if (probs[a] > 0.0) mx = std::max(mx, lt[a]);
    }
    if (constant) return {probs.begin(), probs.end()};
    std::vector<double> out(probs.size());
    double z = 0.0;
    for (std::uint32_t a = 0; a < probs.size(); ++a) {
        out[a] = probs[a] * std::exp(lt[a] - mx);
        z += out[a];
    }
    for (auto& p : out) p /= z;
    return out;
}

}  // namespace rost
