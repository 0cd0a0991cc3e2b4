#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rost/error.hpp"
#include "rost/random.hpp"

namespace rost {

// Discrete sampling measure: weighted vectors in the unit ball.
struct SamplingAtoms {
    struct Atom {
        double weight = 0.0;
        std::vector<double> v;
    };
    std::size_t dim = 0;
    std::vector<Atom> atoms;

    Eigen::MatrixXd vectors() const {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(atoms.size()), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < atoms.size(); ++i)
            for (std::size_t k = 0; k < dim; ++k)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = atoms[i].v[k];
        return m;
    }
    Eigen::MatrixXd gram() const {
        const auto v = vectors();
        return v * v.transpose();
    }
    std::vector<double> weights() const {
        std::vector<double> w;
        for (const auto& a : atoms) w.push_back(a.weight);
        return w;
    }
};

inline void validate(const SamplingAtoms& mu) {
    require(!mu.atoms.empty(), "empty-measure", "sampling measure has no atoms");
    double total = 0.0;
    for (const auto& a : mu.atoms) {
        require(a.weight >= 0.0 && std::isfinite(a.weight), "bad-weights", "atom weights must be >= 0");
        require(a.v.size() == mu.dim, "bad-dimension", "atom vector length differs from dim");
        double n2 = 0.0;
        for (double x : a.v) n2 += x * x;
        require(std::sqrt(n2) <= 1.0 + 1e-9, "outside-unit-ball", "atom vector norm exceeds 1");
        total += a.weight;
    }
    require(std::abs(total - 1.0) <= 1e-12, "bad-weights", "atom weights must sum to 1");
}

inline nlohmann::json to_json(const SamplingAtoms& mu) {
    nlohmann::json atoms = nlohmann::json::array();
    for (const auto& a : mu.atoms) atoms.push_back({{"w", a.weight}, {"v", a.v}});
    return {{"dim", mu.dim}, {"atoms", atoms}};
}

inline SamplingAtoms sampling_atoms_from_json(const nlohmann::json& j) {
    SamplingAtoms mu;
    mu.dim = j.at("dim").get<std::size_t>();
    for (const auto& a : j.at("atoms")) mu.atoms.push_back({a.at("w").get<double>(), a.at("v").get<std::vector<double>>()});
    validate(mu);
    return mu;
}

struct GramFactorization {
    Eigen::MatrixXd vectors;      // row i is v_i, coordinates in the eigenbasis (largest first)
    Eigen::VectorXd eigenvalues;  // descending, before clipping
    double min_eigenvalue = 0.0;
};

// Factor a symmetric PSD matrix as A = V V^T via its eigendecomposition.
// Eigenvalues in [-tol * max, 0) are clipped to 0; anything lower is an error.
inline GramFactorization gram_factorize(const Eigen::MatrixXd& a, double tol = 1e-8) {
    require(a.rows() == a.cols() && a.rows() > 0, "bad-matrix", "Gram factorization needs a square matrix");
    require((a - a.transpose()).cwiseAbs().maxCoeff() <= 1e-12 * std::max(1.0, a.cwiseAbs().maxCoeff()),
            "not-symmetric", "matrix is not symmetric");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
    require(es.info() == Eigen::Success, "eigen-failure", "eigendecomposition did not converge");
    const Eigen::Index n = a.rows();
    // Eigen returns ascending order.
    Eigen::VectorXd lam = es.eigenvalues().reverse();
    Eigen::MatrixXd u = es.eigenvectors().rowwise().reverse();
    const double lmax = std::max(lam(0), 0.0);
    const double lmin = lam(n - 1);
    if (lmin < -tol * std::max(lmax, 1e-300)) {
        std::ostringstream os;
        os << "eigenvalue " << lmin << " below -" << tol << " * " << lmax;
        throw Error("not-psd", os.str());
    }
    // Eigenvalues at round-off level carry no direction; keep only the rest.
    const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * lmax;
    Eigen::Index k = 0;
    while (k < n && lam(k) > floor) ++k;
    GramFactorization g;
    g.eigenvalues = lam;
    g.min_eigenvalue = lmin;
    g.vectors = u.leftCols(k) * lam.head(k).cwiseSqrt().asDiagonal();
    return g;
}

struct RankReport {
    std::size_t rank = 0;
    std::vector<double> spectrum;  // descending
};

inline RankReport effective_rank(const Eigen::MatrixXd& a, double tol = 1e-8) {
    require(a.rows() == a.cols() && a.rows() > 0, "bad-matrix", "rank needs a square matrix");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    RankReport r;
    const Eigen::VectorXd lam = es.eigenvalues().reverse();
    r.spectrum.assign(lam.data(), lam.data() + lam.size());
    const double lmax = std::max(lam(0), 0.0);
    for (double l : r.spectrum)
        if (l > tol * lmax) ++r.rank;
    return r;
}

struct CongruenceResult {
    std::vector<std::vector<std::size_t>> classes;  // ascending members, ordered by first member
    std::vector<double> weights;                    // summed weight per class
    Eigen::MatrixXd collapsed;                      // overlap matrix among class representatives
    SamplingAtoms atoms;
};

// Groups "pure states" whose overlap rows agree entrywise within tol, sums
// their weights, and factorizes the collapsed overlap matrix.
inline CongruenceResult congruence_collapse(const std::vector<double>& w, const Eigen::MatrixXd& a, double tol = 1e-9) {
    const std::size_t n = w.size();
    require(a.rows() == static_cast<Eigen::Index>(n) && a.cols() == static_cast<Eigen::Index>(n), "bad-matrix",
            "weights and overlap matrix sizes differ");
    double total = 0.0;
    for (double x : w) {
        require(x >= 0.0 && std::isfinite(x), "bad-weights", "weights must be a probability vector");
        total += x;
    }
    require(std::abs(total - 1.0) <= 1e-12, "bad-weights", "weights must sum to 1");

    std::vector<std::vector<char>> rel(n, std::vector<char>(n, 0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            rel[i][j] = (a.row(static_cast<Eigen::Index>(i)) - a.row(static_cast<Eigen::Index>(j))).cwiseAbs().maxCoeff() <= tol;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (!rel[i][j]) continue;
            for (std::size_t k = 0; k < n; ++k)
                if (rel[j][k] && !rel[i][k])
                    throw Error("ambiguous-congruence", "rows " + std::to_string(i) + "~" + std::to_string(j) + "~" +
                                                            std::to_string(k) + " but not " + std::to_string(i) + "~" +
                                                            std::to_string(k) + "; tighten tol");
        }

    CongruenceResult r;
    std::vector<char> taken(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        std::vector<std::size_t> cls;
        double wsum = 0.0;
        for (std::size_t j = i; j < n; ++j)
            if (rel[i][j]) {
                cls.push_back(j);
                taken[j] = 1;
                wsum += w[j];
            }
        r.classes.push_back(std::move(cls));
        r.weights.push_back(wsum);
    }
    const auto c = static_cast<Eigen::Index>(r.classes.size());
    r.collapsed.resize(c, c);
    for (Eigen::Index i = 0; i < c; ++i)
        for (Eigen::Index j = 0; j < c; ++j)
            r.collapsed(i, j) = a(static_cast<Eigen::Index>(r.classes[static_cast<std::size_t>(i)].front()),
                                  static_cast<Eigen::Index>(r.classes[static_cast<std::size_t>(j)].front()));
    const auto g = gram_factorize(r.collapsed);
    r.atoms.dim = static_cast<std::size_t>(g.vectors.cols());
    for (Eigen::Index i = 0; i < c; ++i) {
        std::vector<double> v(r.atoms.dim);
        for (std::size_t k = 0; k < r.atoms.dim; ++k) v[k] = g.vectors(i, static_cast<Eigen::Index>(k));
        r.atoms.atoms.push_back({r.weights[static_cast<std::size_t>(i)], std::move(v)});
    }
    return r;
}

struct ExchangeabilityOptions {
    std::size_t permutations = 199;
    bool identity_only = false;  // degenerate relabeling set {id}
    std::size_t min_samples = 50;
};

struct ExchangeabilityReport {
    double statistic = 0.0;
    double p_value = 1.0;
    std::size_t samples = 0;
    std::size_t permutations = 0;
};

namespace detail {

// Spread of the per-pair first and second moments across replica pairs.
inline double exchangeability_statistic(const std::vector<Eigen::MatrixXd>& mats,
                                        const std::vector<std::vector<std::size_t>>& perms) {
    const auto s = static_cast<std::size_t>(mats.front().rows());
    const std::size_t pairs = s * (s - 1) / 2;
    std::vector<double> m1(pairs, 0.0), m2(pairs, 0.0);
    for (std::size_t k = 0; k < mats.size(); ++k) {
        const auto& p = perms[k];
        std::size_t idx = 0;
        for (std::size_t i = 0; i < s; ++i)
            for (std::size_t j = i + 1; j < s; ++j, ++idx) {
                const double q = mats[k](static_cast<Eigen::Index>(p[i]), static_cast<Eigen::Index>(p[j]));
                m1[idx] += q;
                m2[idx] += q * q;
            }
    }
    const double n = static_cast<double>(mats.size());
    double g1 = 0.0, g2 = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) {
        m1[i] /= n;
        m2[i] /= n;
        g1 += m1[i];
        g2 += m2[i];
    }
    g1 /= static_cast<double>(pairs);
    g2 /= static_cast<double>(pairs);
    double t = 0.0;
    for (std::size_t i = 0; i < pairs; ++i) t += (m1[i] - g1) * (m1[i] - g1) + (m2[i] - g2) * (m2[i] - g2);
    return t;
}

}  // namespace detail

// Randomization test of weak exchangeability: each sample matrix is
// relabeled by an independent uniform permutation of its replicas. Ties are
// broken with an independent uniform so the p-value is exactly uniform under
// the null.
inline ExchangeabilityReport exchangeability_test(const std::vector<Eigen::MatrixXd>& samples,
                                                  const ExchangeabilityOptions& opt, Rng& rng) {
    require(samples.size() >= opt.min_samples, "too-few-samples",
            "need at least " + std::to_string(opt.min_samples) + " overlap matrices");
    const auto s = static_cast<std::size_t>(samples.front().rows());
    require(s >= 2, "too-few-replicas", "need s >= 2");
    for (const auto& m : samples)
        require(m.rows() == static_cast<Eigen::Index>(s) && m.cols() == static_cast<Eigen::Index>(s), "bad-matrix",
                "all samples must be s x s");
    std::vector<std::size_t> id(s);
    std::iota(id.begin(), id.end(), std::size_t{0});
    std::vector<std::vector<std::size_t>> perms(samples.size(), id);
    ExchangeabilityReport r;
    r.samples = samples.size();
    r.statistic = detail::exchangeability_statistic(samples, perms);
    if (opt.identity_only) {
        r.p_value = 1.0;
        r.permutations = 1;
        return r;
    }
    std::size_t greater = 0, ties = 0;
    for (std::size_t b = 0; b < opt.permutations; ++b) {
        for (auto& p : perms) {
            p = id;
            for (std::size_t i = s - 1; i > 0; --i) std::swap(p[i], p[static_cast<std::size_t>(rng.below(i + 1))]);
        }
        const double t = detail::exchangeability_statistic(samples, perms);
        if (t > r.statistic) ++greater;
        else if (t == r.statistic) ++ties;
    }
    // The observed labeling is one of the P+1 equally likely members.
    r.permutations = opt.permutations;
    r.p_value = (static_cast<double>(greater) + rng.uniform() * static_cast<double>(ties + 1)) /
                static_cast<double>(opt.permutations + 1);
    return r;
}

}  // namespace rost
