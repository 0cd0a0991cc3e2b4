#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rost/error.hpp"

namespace rost {

using Vertex = std::uint32_t;
using EdgeIndex = std::uint32_t;

struct Edge {
    Vertex a = 0;  // smaller endpoint
    Vertex b = 0;
    int direction = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
};

// Periodic d-dimensional torus. Vertex index is the mixed-radix number of its
// coordinates with coordinate 0 varying fastest. Edges are ordered
// lexicographically by (smaller endpoint, direction, larger endpoint).
class Lattice {
public:
    Lattice(int dimension, std::vector<int> sides) : d_(dimension), sides_(std::move(sides)) {
        require(d_ >= 1 && d_ <= 3, "bad-dimension", "dimension must be 1, 2 or 3");
        require(static_cast<int>(sides_.size()) == d_, "bad-dimension",
                "need one side length per dimension");
        for (int L : sides_)
            require(L >= 3, "degenerate-torus",
                    "side " + std::to_string(L) + " < 3 would create duplicate edges");
        strides_.resize(d_);
        std::size_t v = 1;
        for (int k = 0; k < d_; ++k) {
            strides_[k] = v;
            v *= static_cast<std::size_t>(sides_[k]);
        }
        vertices_ = v;
        build_edges();
    }

    int dimension() const noexcept { return d_; }
    const std::vector<int>& sides() const noexcept { return sides_; }
    std::size_t vertex_count() const noexcept { return vertices_; }
    std::size_t edge_count() const noexcept { return edges_.size(); }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    const Edge& edge(EdgeIndex e) const { return edges_[e]; }

    // Edge leaving v in the positive `direction`.
    EdgeIndex forward_edge(Vertex v, int direction) const {
        return forward_[static_cast<std::size_t>(v) * d_ + direction];
    }

    std::vector<int> coordinates(Vertex v) const {
        std::vector<int> c(d_);
        for (int k = 0; k < d_; ++k) {
            c[k] = static_cast<int>(v % sides_[k]);
            v /= sides_[k];
        }
        return c;
    }

    Vertex vertex_at(std::span<const long> coords) const {
        std::size_t v = 0;
        for (int k = 0; k < d_; ++k) v += static_cast<std::size_t>(wrap(coords[k], k)) * strides_[k];
        return static_cast<Vertex>(v);
    }

    Vertex shifted(Vertex v, int direction, long step) const {
        auto c = coordinates(v);
        std::vector<long> lc(c.begin(), c.end());
        lc[direction] += step;
        return vertex_at(lc);
    }

    // Neighbors of v, two per direction.
    std::vector<Vertex> neighbors(Vertex v) const {
        std::vector<Vertex> out;
        out.reserve(2 * d_);
        for (int k = 0; k < d_; ++k) {
            out.push_back(shifted(v, k, 1));
            out.push_back(shifted(v, k, -1));
        }
        return out;
    }

    int wrap(long x, int k) const {
        const long L = sides_[k];
        long r = x % L;
        return static_cast<int>(r < 0 ? r + L : r);
    }

    friend bool operator==(const Lattice& l, const Lattice& r) {
        return l.d_ == r.d_ && l.sides_ == r.sides_;
    }

private:
    // A wrap edge can share its smaller endpoint and direction with an
    // ordinary edge (rings of length 3), so the larger endpoint breaks ties.
    static bool edge_less(const Edge& x, const Edge& y) {
        if (x.a != y.a) return x.a < y.a;
        if (x.direction != y.direction) return x.direction < y.direction;
        return x.b < y.b;
    }

    void build_edges() {
        edges_.clear();
        edges_.reserve(vertices_ * d_);
        for (std::size_t v = 0; v < vertices_; ++v)
            for (int k = 0; k < d_; ++k) {
                const Vertex u = shifted(static_cast<Vertex>(v), k, 1);
                const auto vv = static_cast<Vertex>(v);
                edges_.push_back(Edge{std::min(vv, u), std::max(vv, u), k});
            }
        std::sort(edges_.begin(), edges_.end(), edge_less);
        forward_.assign(vertices_ * d_, 0);
        for (std::size_t v = 0; v < vertices_; ++v)
            for (int k = 0; k < d_; ++k) {
                const auto vv = static_cast<Vertex>(v);
                const Vertex u = shifted(vv, k, 1);
                const Edge key{std::min(vv, u), std::max(vv, u), k};
                auto it = std::lower_bound(edges_.begin(), edges_.end(), key, edge_less);
                forward_[v * d_ + k] = static_cast<EdgeIndex>(it - edges_.begin());
            }
    }

    int d_;
    std::vector<int> sides_;
    std::vector<std::size_t> strides_;
    std::size_t vertices_ = 0;
    std::vector<Edge> edges_;
    std::vector<EdgeIndex> forward_;
};

inline Lattice build_lattice(int d, std::vector<int> sides) { return Lattice(d, std::move(sides)); }

inline void to_json(nlohmann::json& j, const Lattice& lat) {
    j = nlohmann::json{{"d", lat.dimension()}, {"sides", lat.sides()}};
}

inline Lattice lattice_from_json(const nlohmann::json& j) {
    return Lattice(j.at("d").get<int>(), j.at("sides").get<std::vector<int>>());
}

// Axis-aligned box of sites, anchored at a vertex; wraps around the torus.
struct Window {
    std::vector<int> anchor;
    std::vector<int> sides;
};

inline Window full_window(const Lattice& lat) {
    return Window{std::vector<int>(lat.dimension(), 0), lat.sides()};
}

inline void to_json(nlohmann::json& j, const Window& w) {
    j = nlohmann::json{{"anchor", w.anchor}, {"sides", w.sides}};
}

struct WindowEdges {
    std::vector<EdgeIndex> interior;  // both endpoints inside
    std::vector<EdgeIndex> boundary;  // exactly one endpoint inside
    std::vector<Vertex> vertices;     // sites inside, ascending
};

inline bool window_contains(const Lattice& lat, const Window& win, Vertex v) {
    const auto c = lat.coordinates(v);
    for (int k = 0; k < lat.dimension(); ++k)
        if (lat.wrap(static_cast<long>(c[k]) - win.anchor[k], k) >= win.sides[k]) return false;
    return true;
}

inline void validate_window(const Lattice& lat, const Window& win) {
    require(static_cast<int>(win.sides.size()) == lat.dimension() &&
                static_cast<int>(win.anchor.size()) == lat.dimension(),
            "geometry-mismatch", "window dimension differs from lattice dimension");
    for (int k = 0; k < lat.dimension(); ++k) {
        require(win.sides[k] <= lat.sides()[k], "window-too-large",
                "window side " + std::to_string(win.sides[k]) + " exceeds lattice side " +
                    std::to_string(lat.sides()[k]));
        require(win.sides[k] >= 1, "empty-window", "window sides must be positive");
    }
}

inline WindowEdges window_edges(const Lattice& lat, const Window& win) {
    validate_window(lat, win);
    WindowEdges out;
    std::vector<char> inside(lat.vertex_count(), 0);
    for (std::size_t v = 0; v < lat.vertex_count(); ++v)
        if (window_contains(lat, win, static_cast<Vertex>(v))) {
            inside[v] = 1;
            out.vertices.push_back(static_cast<Vertex>(v));
        }
    for (std::size_t e = 0; e < lat.edge_count(); ++e) {
        const Edge& ed = lat.edge(static_cast<EdgeIndex>(e));
        const int n = inside[ed.a] + inside[ed.b];
        if (n == 2) out.interior.push_back(static_cast<EdgeIndex>(e));
        if (n == 1) out.boundary.push_back(static_cast<EdgeIndex>(e));
    }
    require(!out.interior.empty(), "empty-window", "window has no interior edges");
    return out;
}

// Translation T_a acting on vertex-indexed data: out[T_a v] = x[v].
template <class T>
std::vector<T> translate_vertices(const Lattice& lat, std::span<const T> x, std::span<const long> a) {
    require(x.size() == lat.vertex_count(), "geometry-mismatch", "vertex data length");
    require(static_cast<int>(a.size()) == lat.dimension(), "geometry-mismatch", "shift dimension");
    std::vector<T> out(x.size());
    std::vector<long> c(lat.dimension());
    for (std::size_t v = 0; v < x.size(); ++v) {
        const auto cv = lat.coordinates(static_cast<Vertex>(v));
        for (int k = 0; k < lat.dimension(); ++k) c[k] = cv[k] + a[k];
        out[lat.vertex_at(c)] = x[v];
    }
    return out;
}

// Translation acting on edge-indexed data: the edge (v, v + e_k) maps to
// (T_a v, T_a v + e_k).
template <class T>
std::vector<T> translate_edges(const Lattice& lat, std::span<const T> x, std::span<const long> a) {
    require(x.size() == lat.edge_count(), "geometry-mismatch", "edge data length");
    require(static_cast<int>(a.size()) == lat.dimension(), "geometry-mismatch", "shift dimension");
    std::vector<T> out(x.size());
    std::vector<long> c(lat.dimension());
    for (std::size_t v = 0; v < lat.vertex_count(); ++v) {
        const auto cv = lat.coordinates(static_cast<Vertex>(v));
        for (int k = 0; k < lat.dimension(); ++k) c[k] = cv[k] + a[k];
        const Vertex tv = lat.vertex_at(c);
        for (int k = 0; k < lat.dimension(); ++k)
            out[lat.forward_edge(tv, k)] = x[lat.forward_edge(static_cast<Vertex>(v), k)];
    }
    return out;
}

}  // namespace rost
