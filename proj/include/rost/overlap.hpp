#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rost/error.hpp"
#include "rost/executor.hpp"
#include "rost/float_io.hpp"
#include "rost/gibbs/ensemble.hpp"
#include "rost/lattice.hpp"
#include "rost/monomial.hpp"
#include "rost/random.hpp"
#include "rost/spins.hpp"

namespace rost {

// R^W(s, s') = (1/|W*|) sum_{xy in W*} s_x s_y s'_x s'_y
inline double edge_overlap(std::span<const Spin> s, std::span<const Spin> t, const Lattice& lat,
                           std::span<const EdgeIndex> edges) {
    require(!edges.empty(), "empty-window", "edge overlap over an empty edge set");
    require(s.size() == lat.vertex_count() && t.size() == lat.vertex_count(), "geometry-mismatch",
            "configurations do not live on this lattice");
    long acc = 0;
    for (EdgeIndex e : edges) {
        const Edge& ed = lat.edge(e);
        acc += s[ed.a] * s[ed.b] * t[ed.a] * t[ed.b];
    }
    return static_cast<double>(acc) / static_cast<double>(edges.size());
}

// R^N(s, s') = (1/N) sum_x s_x s'_x
inline double spin_overlap(std::span<const Spin> s, std::span<const Spin> t) {
    require(s.size() == t.size() && !s.empty(), "size-mismatch", "spin overlap needs equal, non-empty lengths");
    long acc = 0;
    for (std::size_t x = 0; x < s.size(); ++x) acc += s[x] * t[x];
    return static_cast<double>(acc) / static_cast<double>(s.size());
}

struct OverlapMatrix {
    Eigen::MatrixXd q;
    std::string window_id;
    std::string source_id;

    std::size_t size() const noexcept { return static_cast<std::size_t>(q.rows()); }
    double operator()(std::size_t i, std::size_t j) const { return q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)); }
};

inline std::string window_id(const Window& w) {
    std::ostringstream os;
    os << "box@";
    for (std::size_t k = 0; k < w.anchor.size(); ++k) os << (k ? "," : "") << w.anchor[k];
    os << ":";
    for (std::size_t k = 0; k < w.sides.size(); ++k) os << (k ? "x" : "") << w.sides[k];
    return os.str();
}

namespace detail {

// Dot products of +-1 feature rows, divided by the row length; diagonal 1.
inline Eigen::MatrixXd feature_gram(const std::vector<std::vector<Spin>>& rows, const Executor& exec) {
    const std::size_t s = rows.size();
    const std::size_t m = rows.empty() ? 0 : rows.front().size();
    Eigen::MatrixXd q = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s));
    exec.for_each(s, [&](std::size_t i) {
        for (std::size_t j = i + 1; j < s; ++j) {
            long acc = 0;
            for (std::size_t k = 0; k < m; ++k) acc += rows[i][k] * rows[j][k];
            q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = static_cast<double>(acc) / static_cast<double>(m);
        }
    });
    for (std::size_t i = 0; i < s; ++i)
        for (std::size_t j = 0; j < i; ++j)
            q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = q(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i));
    return q;
}

}  // namespace detail

// Windowed edge-overlap matrix of an EA replica ensemble.
inline OverlapMatrix overlap_matrix(const ReplicaEnsemble& ens, const Lattice& lat, const Window& win,
                                    const Executor& exec = Executor{}) {
    require(ens.size() >= 2, "too-few-replicas", "an overlap matrix needs s >= 2");
    require(ens.vertices == lat.vertex_count(), "geometry-mismatch", "ensemble does not live on this lattice");
    const auto we = window_edges(lat, win);
    std::vector<std::vector<Spin>> rows(ens.size(), std::vector<Spin>(we.interior.size()));
    for (std::size_t i = 0; i < ens.size(); ++i)
        for (std::size_t k = 0; k < we.interior.size(); ++k) {
            const Edge& ed = lat.edge(we.interior[k]);
            rows[i][k] = static_cast<Spin>(ens.replicas[i][ed.a] * ens.replicas[i][ed.b]);
        }
    return {detail::feature_gram(rows, exec), window_id(win), ens.coupling_id};
}

// Spin-overlap matrix of an SK replica ensemble.
inline OverlapMatrix overlap_matrix_sk(const ReplicaEnsemble& ens, const Executor& exec = Executor{}) {
    require(ens.size() >= 2, "too-few-replicas", "an overlap matrix needs s >= 2");
    return {detail::feature_gram(ens.replicas, exec), "spins:" + std::to_string(ens.vertices), ens.coupling_id};
}

inline double min_eigenvalue(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Ratio estimator over distinct replica tuples,
// sum F * prod w / sum prod w. All ordered tuples are used when there are
// at most `cap` of them, otherwise `cap` uniformly drawn ones.
struct WeightedMoment {
    double estimate = 0.0;
    std::size_t tuples = 0;
    bool sampled = false;
};

inline WeightedMoment weighted_overlap_moment(const OverlapMatrix& m, std::span<const double> weights,
                                              const Monomial& f, Rng& rng, std::size_t cap = 1000000) {
    const std::size_t R = m.size();
    const std::size_t s = f.replicas();
    require(weights.size() == R, "bad-weights", "one weight per replica");
    require(R >= s, "too-few-replicas", "fewer replicas than the monomial needs");
    double count = 1.0;
    for (std::size_t k = 0; k < s; ++k) count *= static_cast<double>(R - k);
    std::vector<std::size_t> idx(s);
    double num = 0.0, den = 0.0;
    auto add = [&] {
        double w = 1.0;
        for (auto i : idx) w *= weights[i];
        if (w == 0.0) return;
        num += w * f.evaluate(m, idx);
        den += w;
    };
    WeightedMoment out;
    if (count <= static_cast<double>(cap)) {
        // odometer over ordered tuples of distinct indices
        std::vector<std::size_t> c(s, 0);
        for (;;) {
            bool distinct = true;
            for (std::size_t a = 0; a < s && distinct; ++a)
                for (std::size_t b = a + 1; b < s; ++b)
                    if (c[a] == c[b]) {
                        distinct = false;
                        break;
                    }
            if (distinct) {
                idx = c;
                add();
                ++out.tuples;
            }
            std::size_t k = 0;
            while (k < s && ++c[k] == R) c[k++] = 0;
            if (k == s) break;
        }
    } else {
        out.sampled = true;
        for (std::size_t t = 0; t < cap; ++t) {
            for (std::size_t a = 0; a < s; ++a) {
                bool fresh;
                do {
                    idx[a] = static_cast<std::size_t>(rng.below(R));
                    fresh = std::find(idx.begin(), idx.begin() + static_cast<long>(a), idx[a]) == idx.begin() + static_cast<long>(a);
                } while (!fresh);
            }
            add();
            ++out.tuples;
        }
    }
    require(den > 0.0, "bad-weights", "all tuple weights vanish");
    out.estimate = num / den;
    return out;
}

inline void save_overlap_csv(const OverlapMatrix& m, const std::string& path) {
    std::ofstream os(path, std::ios::trunc);
    require(static_cast<bool>(os), "io-error", "cannot open " + path);
    os << std::setprecision(17);
    for (Eigen::Index i = 0; i < m.q.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.q.cols(); ++j) os << (j ? "," : "") << m.q(i, j);
        os << '\n';
    }
}

inline Eigen::MatrixXd load_matrix_csv(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), "io-error", "cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    const auto s = static_cast<Eigen::Index>(rows.size());
    Eigen::MatrixXd a(s, s);
    for (Eigen::Index i = 0; i < s; ++i) {
        require(static_cast<Eigen::Index>(rows[i].size()) == s, "bad-format", "matrix CSV must be square");
        for (Eigen::Index j = 0; j < s; ++j) a(i, j) = rows[i][j];
    }
    return a;
}

inline void save_overlap_binary(const OverlapMatrix& m, const std::string& path) {
    std::vector<double> v(static_cast<std::size_t>(m.q.size()));
    for (Eigen::Index i = 0; i < m.q.rows(); ++i)
        for (Eigen::Index j = 0; j < m.q.cols(); ++j) v[static_cast<std::size_t>(i * m.q.cols() + j)] = m.q(i, j);
    write_float64_file(path, v);
}

inline Eigen::MatrixXd load_overlap_binary(const std::string& path) {
    const auto v = read_float64_file(path);
    const auto s = static_cast<Eigen::Index>(std::llround(std::sqrt(static_cast<double>(v.size()))));
    require(static_cast<std::size_t>(s * s) == v.size(), "bad-format", "payload is not a square matrix");
    Eigen::MatrixXd a(s, s);
    for (Eigen::Index i = 0; i < s; ++i)
        for (Eigen::Index j = 0; j < s; ++j) a(i, j) = v[static_cast<std::size_t>(i * s + j)];
    return a;
}

}  // namespace rost
