#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "rost/error.hpp"
#include "rost/float_io.hpp"
#include "rost/lattice.hpp"
#include "rost/random.hpp"

namespace rost {

enum class DistributionKind { gaussian, uniform, rademacher };

// Symmetric coupling law nu. `scale` is the standard deviation (gaussian)
// or the half-width (uniform); rademacher is always +-1.
struct Distribution {
    DistributionKind kind = DistributionKind::gaussian;
    double scale = 1.0;

    bool continuous() const noexcept { return kind != DistributionKind::rademacher; }
    friend bool operator==(const Distribution&, const Distribution&) = default;
};

inline std::string to_string(DistributionKind k) {
    switch (k) {
        case DistributionKind::gaussian: return "gaussian";
        case DistributionKind::uniform: return "uniform";
        case DistributionKind::rademacher: return "rademacher";
    }
    return "?";
}

inline DistributionKind distribution_kind_from_string(const std::string& s) {
    if (s == "gaussian") return DistributionKind::gaussian;
    if (s == "uniform") return DistributionKind::uniform;
    if (s == "rademacher") return DistributionKind::rademacher;
    throw Error("bad-distribution", "unknown distribution '" + s + "'");
}

inline void validate(const Distribution& d) {
    if (d.kind == DistributionKind::rademacher) return;
    require(std::isfinite(d.scale) && d.scale > 0.0, "bad-distribution-parameter",
            to_string(d.kind) + " scale must be positive, got " + std::to_string(d.scale));
}

template <class Engine>
double draw(const Distribution& d, Engine& rng) {
    switch (d.kind) {
        case DistributionKind::gaussian: return std::normal_distribution<double>(0.0, d.scale)(rng);
        case DistributionKind::uniform: return d.scale * (2.0 * rng.uniform() - 1.0);
        case DistributionKind::rademacher: return (rng() >> 63) ? 1.0 : -1.0;
    }
    return 0.0;
}

// Which system a coupling vector belongs to: an EA torus (d, sides) or an SK
// system of n spins (d == 0).
struct CouplingGeometry {
    int d = 0;
    std::vector<int> sides;
    std::size_t sk_n = 0;

    static CouplingGeometry of(const Lattice& lat) { return {lat.dimension(), lat.sides(), 0}; }
    static CouplingGeometry sk(std::size_t n) { return {0, {}, n}; }

    std::size_t expected_size() const {
        if (d == 0) return sk_n * (sk_n - 1) / 2;
        std::size_t v = 1;
        for (int L : sides) v *= static_cast<std::size_t>(L);
        return v * static_cast<std::size_t>(d);
    }
    friend bool operator==(const CouplingGeometry&, const CouplingGeometry&) = default;
};

// One coupling per edge in canonical edge order (EA), or the upper triangle
// J_xy, x < y, row by row (SK). The 1/sqrt(N) factor of the SK model is not
// stored here.
struct CouplingField {
    std::vector<double> values;
    Distribution distribution;
    std::uint64_t seed = 0;
    CouplingGeometry geometry;

    std::size_t size() const noexcept { return values.size(); }
};

inline std::size_t sk_pair_index(std::size_t n, std::size_t x, std::size_t y) {
    // x < y
    return x * n - x * (x + 1) / 2 + (y - x - 1);
}

inline CouplingField sample_couplings(const Lattice& lat, const Distribution& dist, std::uint64_t seed) {
    validate(dist);
    Rng rng(seed);
    CouplingField f{std::vector<double>(lat.edge_count()), dist, seed, CouplingGeometry::of(lat)};
    for (auto& x : f.values) x = draw(dist, rng);
    return f;
}

inline CouplingField sample_sk_couplings(std::size_t n, const Distribution& dist, std::uint64_t seed) {
    validate(dist);
    require(n >= 2, "bad-size", "SK model needs at least two spins");
    Rng rng(seed);
    CouplingField f{std::vector<double>(n * (n - 1) / 2), dist, seed, CouplingGeometry::sk(n)};
    for (auto& x : f.values) x = draw(dist, rng);
    return f;
}

// Couplings keyed by the edge's position on Z^d: the edge leaving the site
// with coordinates c in direction k gets a draw seeded by (seed, c, k).
// Nested tori anchored at the origin then share every coupling that does not
// cross the periodic seam, which is what volume sweeps need.
inline CouplingField sample_couplings_keyed(const Lattice& lat, const Distribution& dist, std::uint64_t seed) {
    validate(dist);
    CouplingField f{std::vector<double>(lat.edge_count()), dist, seed, CouplingGeometry::of(lat)};
    for (std::size_t v = 0; v < lat.vertex_count(); ++v) {
        const auto c = lat.coordinates(static_cast<Vertex>(v));
        for (int k = 0; k < lat.dimension(); ++k) {
            std::uint64_t key = static_cast<std::uint64_t>(k);
            for (int x : c) key = splitmix64(key * 0x100000001b3ULL + static_cast<std::uint64_t>(x));
            Rng rng(seed, "edge", key);
            f.values[lat.forward_edge(static_cast<Vertex>(v), k)] = draw(dist, rng);
        }
    }
    return f;
}

// Deterministic local change Delta on the interior edges W* of a window.
struct Perturbation {
    Window window;
    std::vector<double> deltas;  // one per interior edge, in window_edges order
};

inline Perturbation zero_perturbation(const Lattice& lat, const Window& win) {
    return Perturbation{win, std::vector<double>(window_edges(lat, win).interior.size(), 0.0)};
}

inline CouplingField perturb_couplings(const CouplingField& J, const Lattice& lat, const Perturbation& p) {
    require(J.geometry == CouplingGeometry::of(lat) && J.values.size() == lat.edge_count(),
            "geometry-mismatch", "coupling field does not live on this lattice");
    const auto we = window_edges(lat, p.window);
    require(p.deltas.size() == we.interior.size(), "geometry-mismatch",
            "perturbation needs one value per interior window edge");
    CouplingField out = J;
    for (std::size_t i = 0; i < we.interior.size(); ++i) {
        require(std::isfinite(p.deltas[i]), "non-finite", "perturbation values must be finite");
        out.values[we.interior[i]] += p.deltas[i];
    }
    return out;
}

inline nlohmann::json coupling_sidecar(const CouplingField& J) {
    nlohmann::json g;
    if (J.geometry.d == 0)
        g = {{"model", "sk"}, {"n", J.geometry.sk_n}};
    else
        g = {{"model", "ea"}, {"d", J.geometry.d}, {"sides", J.geometry.sides}};
    return {{"distribution", to_string(J.distribution.kind)},
            {"scale", J.distribution.scale},
            {"seed", J.seed},
            {"count", J.values.size()},
            {"geometry", g}};
}

// Writes `<stem>.f64` and the `<stem>.json` sidecar.
inline void save_couplings(const CouplingField& J, const std::string& stem) {
    write_float64_file(stem + ".f64", J.values);
    std::ofstream os(stem + ".json", std::ios::trunc);
    require(static_cast<bool>(os), "io-error", "cannot open " + stem + ".json");
    os << coupling_sidecar(J).dump(2) << '\n';
}

inline CouplingField load_couplings(const std::string& stem) {
    CouplingField J;
    J.values = read_float64_file(stem + ".f64");
    std::ifstream is(stem + ".json");
    require(static_cast<bool>(is), "io-error", "missing sidecar " + stem + ".json");
    const auto meta = nlohmann::json::parse(is);
    J.distribution = {distribution_kind_from_string(meta.at("distribution")), meta.at("scale").get<double>()};
    J.seed = meta.at("seed").get<std::uint64_t>();
    const auto& g = meta.at("geometry");
    if (g.at("model") == "sk")
        J.geometry = CouplingGeometry::sk(g.at("n").get<std::size_t>());
    else
        J.geometry = {g.at("d").get<int>(), g.at("sides").get<std::vector<int>>(), 0};
    require(J.values.size() == meta.at("count").get<std::size_t>() &&
                J.values.size() == J.geometry.expected_size(),
            "bad-format", "coupling count does not match sidecar geometry");
    return J;
}

}  // namespace rost
