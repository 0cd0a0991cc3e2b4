#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "rost/disorder.hpp"
#include "rost/error.hpp"
#include "rost/lattice.hpp"
#include "rost/spins.hpp"

namespace rost {

// EA energy H = -sum_{edges} J_xy s_x s_y.
inline double ea_energy(const Lattice& lat, const CouplingField& J, std::span<const Spin> s) {
    require(J.values.size() == lat.edge_count() && J.geometry == CouplingGeometry::of(lat),
            "geometry-mismatch", "couplings do not live on this lattice");
    require(s.size() == lat.vertex_count(), "geometry-mismatch", "spin configuration length");
    double h = 0.0;
    for (std::size_t e = 0; e < lat.edge_count(); ++e) {
        const Edge& ed = lat.edges()[e];
        h -= J.values[e] * s[ed.a] * s[ed.b];
    }
    return h;
}

// SK energy H = -(1/sqrt N) sum_{x<y} J_xy s_x s_y.
inline double sk_energy(const CouplingField& J, std::span<const Spin> s, std::size_t n) {
    require(s.size() == n, "size-mismatch", "spin configuration length differs from N");
    require(J.values.size() == n * (n - 1) / 2, "size-mismatch", "SK couplings need N(N-1)/2 entries");
    double h = 0.0;
    std::size_t k = 0;
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = x + 1; y < n; ++y) h -= J.values[k++] * s[x] * s[y];
    return h / std::sqrt(static_cast<double>(n));
}

struct Bond {
    Vertex a = 0;
    Vertex b = 0;
    double weight = 0.0;  // contributes weight * s_a * s_b to the log Boltzmann weight
};

// Ising pair model with log Boltzmann weight sum_b weight_b s_a s_b, i.e.
// -beta H with the inverse temperature folded into the bond weights.
class PairModel {
public:
    PairModel(std::size_t vertices, std::vector<Bond> bonds) : n_(vertices), bonds_(std::move(bonds)) {
        offsets_.assign(n_ + 1, 0);
        for (const Bond& b : bonds_) {
            require(b.a < n_ && b.b < n_ && b.a != b.b, "bad-bond", "bond endpoints out of range");
            ++offsets_[b.a + 1];
            ++offsets_[b.b + 1];
        }
        for (std::size_t v = 0; v < n_; ++v) offsets_[v + 1] += offsets_[v];
        nbr_.resize(offsets_[n_]);
        w_.resize(offsets_[n_]);
        std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
        for (const Bond& b : bonds_) {
            nbr_[fill[b.a]] = b.b;
            w_[fill[b.a]++] = b.weight;
            nbr_[fill[b.b]] = b.a;
            w_[fill[b.b]++] = b.weight;
        }
    }

    std::size_t vertex_count() const noexcept { return n_; }
    const std::vector<Bond>& bonds() const noexcept { return bonds_; }

    double log_weight(std::span<const Spin> s) const {
        double lw = 0.0;
        for (const Bond& b : bonds_) lw += b.weight * s[b.a] * s[b.b];
        return lw;
    }

    // sum_y w_xy s_y
    double local_field(Vertex x, const Spin* s) const noexcept {
        double h = 0.0;
        for (std::size_t k = offsets_[x]; k < offsets_[x + 1]; ++k) h += w_[k] * s[nbr_[k]];
        return h;
    }

    std::span<const std::size_t> offsets() const noexcept { return offsets_; }
    std::span<const Vertex> neighbor_list() const noexcept { return nbr_; }
    std::span<const double> neighbor_weights() const noexcept { return w_; }

private:
    std::size_t n_;
    std::vector<Bond> bonds_;
    std::vector<std::size_t> offsets_;
    std::vector<Vertex> nbr_;
    std::vector<double> w_;
};

inline PairModel ea_model(const Lattice& lat, const CouplingField& J, double beta) {
    require(J.values.size() == lat.edge_count() && J.geometry == CouplingGeometry::of(lat),
            "geometry-mismatch", "couplings do not live on this lattice");
    std::vector<Bond> bonds;
    bonds.reserve(lat.edge_count());
    for (std::size_t e = 0; e < lat.edge_count(); ++e)
        bonds.push_back({lat.edges()[e].a, lat.edges()[e].b, beta * J.values[e]});
    return PairModel(lat.vertex_count(), std::move(bonds));
}

// Inverse temperatures per edge class of a window split
// H = H_W + H_{Lambda,W} + V_{boundary}.
struct SplitTemperatures {
    double interior = 1.0;  // edges of W*
    double boundary = 1.0;  // edges with one endpoint in W
    double exterior = 1.0;  // edges outside W
};

inline PairModel ea_model_split(const Lattice& lat, const CouplingField& J, const WindowEdges& we,
                                const SplitTemperatures& t) {
    require(J.values.size() == lat.edge_count(), "geometry-mismatch", "couplings do not live on this lattice");
    std::vector<double> beta(lat.edge_count(), t.exterior);
    for (EdgeIndex e : we.interior) beta[e] = t.interior;
    for (EdgeIndex e : we.boundary) beta[e] = t.boundary;
    std::vector<Bond> bonds;
    bonds.reserve(lat.edge_count());
    for (std::size_t e = 0; e < lat.edge_count(); ++e)
        bonds.push_back({lat.edges()[e].a, lat.edges()[e].b, beta[e] * J.values[e]});
    return PairModel(lat.vertex_count(), std::move(bonds));
}

inline PairModel sk_model(const CouplingField& J, std::size_t n, double beta) {
    require(J.values.size() == n * (n - 1) / 2, "size-mismatch", "SK couplings need N(N-1)/2 entries");
    const double scale = beta / std::sqrt(static_cast<double>(n));
    std::vector<Bond> bonds;
    bonds.reserve(J.values.size());
    std::size_t k = 0;
    for (std::size_t x = 0; x < n; ++x)
        for (std::size_t y = x + 1; y < n; ++y)
            bonds.push_back({static_cast<Vertex>(x), static_cast<Vertex>(y), scale * J.values[k++]});
    return PairModel(n, std::move(bonds));
}

// Sub-model on `keep` (ascending vertex list) with only the bonds whose
// endpoints are both kept; vertices are renumbered by their rank in `keep`.
inline PairModel induced_model(const PairModel& m, std::span<const Vertex> keep) {
    std::vector<long> rank(m.vertex_count(), -1);
    for (std::size_t i = 0; i < keep.size(); ++i) rank[keep[i]] = static_cast<long>(i);
    std::vector<Bond> bonds;
    for (const Bond& b : m.bonds())
        if (rank[b.a] >= 0 && rank[b.b] >= 0)
            bonds.push_back({static_cast<Vertex>(rank[b.a]), static_cast<Vertex>(rank[b.b]), b.weight});
    return PairModel(keep.size(), std::move(bonds));
}

}  // namespace rost
