#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rost/artifacts.hpp"
#include "rost/disorder.hpp"
#include "rost/error.hpp"
#include "rost/executor.hpp"
#include "rost/gibbs/ensemble.hpp"
#include "rost/gibbs/exact.hpp"
#include "rost/gibbs/model.hpp"
#include "rost/lattice.hpp"
#include "rost/moments.hpp"
#include "rost/monomial.hpp"
#include "rost/overlap.hpp"
#include "rost/random.hpp"
#include "rost/report.hpp"
#include "rost/rost_analysis.hpp"
#include "rost/stats.hpp"

namespace rost {

inline constexpr const char* kDiscreteCouplingsFlag = "assumption-violated: discrete couplings";

inline std::vector<Monomial> moments_up_to(std::size_t s) {
    std::vector<Monomial> out;
    for (auto& m : standard_moments(s))
        if (m.replicas() <= s) out.push_back(std::move(m));
    return out;
}

inline std::string volume_label(const std::vector<int>& sides) {
    std::string out = "L=";
    for (std::size_t k = 0; k < sides.size(); ++k) out += (k ? "x" : "") + std::to_string(sides[k]);
    return out;
}

namespace detail {

// log of prod over edges of exp(scale * c_e * s_a s_b) for one marginal
// sub-configuration, with each edge given by the mask of its two endpoints.
inline double edge_energy(std::uint32_t sub, const SiteMasks& masks, std::span<const double> c, double scale) {
    double acc = 0.0;
    for (std::size_t e = 0; e < masks.size(); ++e) acc += (std::popcount(sub & masks[e]) & 1) ? -c[e] : c[e];
    return scale * acc;
}

inline std::vector<Vertex> merged_sites(std::vector<Vertex> a, const std::vector<Vertex>& b) {
    a.insert(a.end(), b.begin(), b.end());
    std::sort(a.begin(), a.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    return a;
}

inline std::vector<double> moments_of(std::span<const double> law, const SiteMasks& sites,
                                      const std::vector<Monomial>& fs) {
    const CorrelationTable corr(std::vector<double>(law.begin(), law.end()));
    std::vector<double> out;
    for (const auto& f : fs) out.push_back(exact_moment(corr, sites, f));
    return out;
}

}  // namespace detail

// Exact check of G_{J+Delta} = G_J tilted per replica by exp(beta H_{W,Delta}).
// Adds one row per moment to `r` and returns the largest |difference|.
inline double covariance_rows(Report& r, const std::string& group, const Lattice& lat, const CouplingField& J,
                              double beta, const Window& win, const Perturbation& delta, std::size_t s,
                              const VerdictRule& rule) {
    require_enumerable(lat.vertex_count());
    const auto obs = window_edges(lat, win);
    const auto pert = window_edges(lat, delta.window);
    const auto sites = detail::merged_sites(obs.vertices, pert.vertices);
    const auto overlap_sites = edge_sites(lat, obs.interior, sites);
    const auto pert_masks = edge_sites(lat, pert.interior, sites);
    const auto fs = moments_up_to(s);

    const auto shifted = exact_marginal(ea_model(lat, perturb_couplings(J, lat, delta), beta), sites);
    const auto base = exact_marginal(ea_model(lat, J, beta), sites);
    const auto tilted = tilt_marginal(base.probs, [&](std::uint32_t a) {
        return detail::edge_energy(a, pert_masks, delta.deltas, beta);
    });
    const auto lhs = detail::moments_of(shifted.probs, overlap_sites, fs);
    const auto rhs = detail::moments_of(tilted, overlap_sites, fs);
    double worst = 0.0;
    for (std::size_t k = 0; k < fs.size(); ++k) {
        const double d = lhs[k] - rhs[k];
        worst = std::max(worst, std::abs(d));
        r.compare(group, fs[k].id(), lhs[k], 0.0, rhs[k], 0.0, d, 0.0, rule);
    }
    return worst;
}

inline Report covariance_identity_check(const Lattice& lat, const CouplingField& J, double beta, const Window& win,
                                        const Perturbation& delta, std::size_t s = 3, const VerdictRule& rule = {}) {
    Report r;
    r.test = "covariance";
    r.parameters = {{"lattice", lat}, {"beta", beta}, {"window", win}, {"s", s}, {"deltas", delta.deltas},
                    {"coupling_seed", J.seed}};
    if (!J.distribution.continuous()) r.flag(kDiscreteCouplingsFlag);
    const double worst = covariance_rows(r, "beta=" + detail::csv_number(beta), lat, J, beta, win, delta, s, rule);
    r.checks.push_back({"max-difference", worst <= rule.exact_tol, true, worst, rule.exact_tol, "", true});
    r.finalize();
    return r;
}

// Random single- and multi-edge perturbations over a beta list. Perturbation
// k touches one edge when k is even and a random subset otherwise; values are
// standard normal times 2.
inline Report covariance_identity_suite(const Lattice& lat, const Window& win, const Distribution& dist,
                                        const std::vector<double>& betas, std::size_t perturbations,
                                        std::uint64_t seed, std::size_t s = 3, const Executor& exec = Executor{},
                                        const VerdictRule& rule = {}, Artifacts* out = nullptr) {
    require(!betas.empty(), "bad-beta", "need at least one inverse temperature");
    const auto J = sample_couplings(lat, dist, derive_seed(seed, "disorder", 0));
    if (out) out->couplings.push_back({"couplings", {J}});
    const std::size_t m = window_edges(lat, win).interior.size();
    std::vector<Perturbation> deltas;
    for (std::size_t k = 0; k < perturbations; ++k) {
        Rng rng(seed, "perturbation", k);
        std::normal_distribution<double> normal;
        Perturbation p = zero_perturbation(lat, win);
        if (k % 2 == 0) {
            p.deltas[static_cast<std::size_t>(rng.below(m))] = 2.0 * normal(rng);
        } else {
            for (auto& d : p.deltas)
                if (rng.uniform() < 0.5) d = 2.0 * normal(rng);
            p.deltas[static_cast<std::size_t>(rng.below(m))] = 2.0 * normal(rng);
        }
        deltas.push_back(std::move(p));
    }
    const auto parts = exec.map(betas.size() * deltas.size(), [&](std::size_t t) {
        Report part;
        const double beta = betas[t / deltas.size()];
        const std::size_t k = t % deltas.size();
        covariance_rows(part, "beta=" + detail::csv_number(beta) + " delta#" + std::to_string(k), lat, J, beta, win,
                        deltas[k], s, rule);
        return part;
    });
    Report r;
    r.test = "covariance";
    r.parameters = {{"lattice", lat}, {"window", win}, {"betas", betas}, {"perturbations", perturbations},
                    {"s", s},         {"seed", seed}};
    if (!dist.continuous()) r.flag(kDiscreteCouplingsFlag);
    double worst = 0.0;
    for (const auto& p : parts)
        for (const auto& st : p.statistics) {
            worst = std::max(worst, std::abs(st.diff));
            r.statistics.push_back(st);
        }
    r.checks.push_back({"max-difference", worst <= rule.exact_tol, true, worst, rule.exact_tol, "", true});
    r.finalize();
    return r;
}

struct LocalStabilityOptions {
    int d = 1;
    std::vector<std::vector<int>> volumes;
    Window window;
    std::vector<double> deltas;  // J' on the window's interior edges
    Distribution dist;
    double beta = 0.7;
    std::size_t draws = 100;
    std::size_t s = 2;               // replicas per moment
    std::size_t ensemble_size = 64;  // sampled route only
    SamplerConfig sampler;           // exact: per-draw enumeration
    std::uint64_t seed = 0;
    VerdictRule rule;
    std::size_t max_tuples = 1000000;
};

// J-averaged overlap moments under G_J tilted by prod_i exp(beta H'_W(s^i))
// against the untilted ones, per volume, with the trend of the E[q12]
// discrepancy from the first to the last volume.
inline Report local_stability_test(const LocalStabilityOptions& o, const Executor& exec = Executor{},
                                   Artifacts* artifacts = nullptr) {
    require(!o.volumes.empty(), "bad-volumes", "need at least one volume");
    require(o.draws >= 2, "bad-draw-count", "need at least two disorder draws");
    validate(o.sampler);
    const auto fs = moments_up_to(o.s);
    const bool null_perturbation =
        std::all_of(o.deltas.begin(), o.deltas.end(), [](double x) { return x == 0.0; });
    const bool enumerate = o.sampler.kind == SamplerKind::exact;
    if (!enumerate) require(o.ensemble_size >= o.s, "too-few-replicas", "ensemble smaller than s");

    Report r;
    r.test = "local-stability";
    r.parameters = {{"d", o.d},           {"volumes", o.volumes},     {"window", o.window},
                    {"deltas", o.deltas}, {"beta", o.beta},           {"draws", o.draws},
                    {"s", o.s},           {"sampler", to_string(o.sampler.kind)},
                    {"seed", o.seed},     {"ensemble_size", enumerate ? 0 : o.ensemble_size}};
    if (!o.dist.continuous()) r.flag(kDiscreteCouplingsFlag);

    std::vector<stats::Accumulator> q12_diff(o.volumes.size());
    double min_ess = std::numeric_limits<double>::infinity();
    for (std::size_t vi = 0; vi < o.volumes.size(); ++vi) {
        const Lattice lat(o.d, o.volumes[vi]);
        const auto we = window_edges(lat, o.window);
        require(o.deltas.size() == we.interior.size(), "geometry-mismatch",
                "J' needs one value per interior window edge");
        const auto masks = edge_sites(lat, we.interior, we.vertices);
        const std::uint64_t vseed = derive_seed(o.seed, "volume", vi);

        struct Draw {
            std::vector<double> tilted, plain;
            double ess = 0.0;
            CouplingField J;
            std::optional<ReplicaEnsemble> ens;
            std::optional<OverlapMatrix> matrix;
        };
        const auto draws = exec.map(o.draws, [&](std::size_t i) {
            const auto J = sample_couplings(lat, o.dist, derive_seed(vseed, "disorder", i));
            Draw out;
            if (artifacts) out.J = J;
            if (enumerate) {
                const auto base = exact_marginal(ea_model(lat, J, o.beta), we.vertices);
                const auto tilted = tilt_marginal(base.probs, [&](std::uint32_t a) {
                    return detail::edge_energy(a, masks, o.deltas, o.beta);
                });
                out.plain = detail::moments_of(base.probs, masks, fs);
                out.tilted = detail::moments_of(tilted, masks, fs);
                out.ess = static_cast<double>(o.ensemble_size);
                return out;
            }
            const auto ens = sample_replicas(ea_model(lat, J, 1.0), o.beta, o.ensemble_size, o.sampler,
                                             derive_seed(vseed, "ensemble", i));
            std::vector<double> lw(ens.size());
            for (std::size_t k = 0; k < ens.size(); ++k) {
                double h = 0.0;
                for (std::size_t e = 0; e < we.interior.size(); ++e) {
                    const Edge& ed = lat.edge(we.interior[e]);
                    h += o.deltas[e] * ens.replicas[k][ed.a] * ens.replicas[k][ed.b];
                }
                lw[k] = o.beta * h;
            }
            const double mx = *std::max_element(lw.begin(), lw.end());
            std::vector<double> w(ens.size()), ones(ens.size(), 1.0);
            for (std::size_t k = 0; k < ens.size(); ++k) w[k] = std::exp(lw[k] - mx);
            out.ess = stats::effective_sample_size(w);
            const auto m = overlap_matrix(ens, lat, o.window);
            if (artifacts) {
                out.ens = ens;
                out.matrix = m;
            }
            for (const auto& f : fs) {
                Rng a(vseed, "tuples", i), b(vseed, "tuples", i);
                out.tilted.push_back(weighted_overlap_moment(m, w, f, a, o.max_tuples).estimate);
                out.plain.push_back(weighted_overlap_moment(m, ones, f, b, o.max_tuples).estimate);
            }
            return out;
        });

        const std::string group = volume_label(o.volumes[vi]);
        if (artifacts) {
            Artifacts::CouplingSet set{group, {}};
            for (std::size_t i = 0; i < draws.size(); ++i) {
                set.fields.push_back(draws[i].J);
                if (draws[i].ens) artifacts->ensembles.emplace_back(group + "/" + draw_name(i), *draws[i].ens);
                if (draws[i].matrix) artifacts->matrices.emplace_back(group + "/" + draw_name(i), *draws[i].matrix);
            }
            artifacts->couplings.push_back(std::move(set));
        }
        for (std::size_t k = 0; k < fs.size(); ++k) {
            stats::Accumulator t, p, d;
            for (const auto& x : draws) {
                t.add(x.tilted[k]);
                p.add(x.plain[k]);
                d.add(x.tilted[k] - x.plain[k]);
            }
            r.compare(group, fs[k].id(), t.mean(), t.stderr_mean(), p.mean(), p.stderr_mean(), d.mean(),
                      d.stderr_mean(), o.rule, null_perturbation);
            if (k == 0) q12_diff[vi] = d;
        }
        if (!enumerate)
            for (const auto& x : draws) min_ess = std::min(min_ess, x.ess);
    }

    if (!enumerate) {
        r.min_ess = min_ess;
        const double R = static_cast<double>(o.ensemble_size);
        if (min_ess < 0.02 * R)
            r.flag("fail: weights-degenerate");
        else if (min_ess < 0.1 * R)
            r.flag("warning: low effective sample size");
    }
    if (o.volumes.size() >= 2) {
        const auto& a = q12_diff.front();
        const auto& b = q12_diff.back();
        const double drop = std::abs(a.mean()) - std::abs(b.mean());
        const double se = stats::combined_se(a.stderr_mean(), b.stderr_mean());
        r.checks.push_back({"discrepancy-decreasing", drop > 2.0 * se, !null_perturbation, drop, 2.0 * se,
                            "|D(first)| - |D(last)| for q12 against 2 combined standard errors"});
    }
    r.finalize();
    return r;
}

// F for the stochastic-stability test: a monomial in the overlaps or the
// indicator 1{q12 = 1}.
class OverlapFunction {
public:
    static OverlapFunction parse(const std::string& text) {
        OverlapFunction f;
        if (text == "1{q12=1}") {
            f.indicator_ = true;
            f.m_ = Monomial(2, {});
        } else {
            f.m_ = Monomial::parse(text);
        }
        return f;
    }

    std::size_t replicas() const noexcept { return indicator_ ? 2 : m_.replicas(); }
    std::string id() const { return indicator_ ? "1{q12=1}" : m_.id(); }

    // E[F] for replicas drawn i.i.d. from atoms with weights w and Gram g.
    double expectation(const Eigen::MatrixXd& g, std::span<const double> w) const {
        const auto k = static_cast<std::size_t>(g.rows());
        if (indicator_) {
            double acc = 0.0;
            for (std::size_t a = 0; a < k; ++a)
                for (std::size_t b = 0; b < k; ++b)
                    if (std::abs(g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) - 1.0) <= 1e-12)
                        acc += w[a] * w[b];
            return acc;
        }
        const std::size_t s = m_.replicas();
        std::vector<std::size_t> idx(s, 0);
        auto q = [&](std::size_t a, std::size_t b) { return g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)); };
        double acc = 0.0;
        for (;;) {
            double p = 1.0;
            for (auto i : idx) p *= w[i];
            if (p != 0.0) acc += p * m_.evaluate(q, idx);
            std::size_t r = 0;
            while (r < s && ++idx[r] == k) idx[r++] = 0;
            if (r == s) break;
        }
        return acc;
    }

private:
    bool indicator_ = false;
    Monomial m_;
};

// w_i exp(t_i) / sum_j w_j exp(t_j), shifted by max t for range safety.
inline std::vector<double> tilted_weights(std::span<const double> w, std::span<const double> t) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < w.size(); ++i)
        if (w[i] > 0.0) mx = std::max(mx, t[i]);
    std::vector<double> out(w.size());
    double z = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        out[i] = w[i] * std::exp(t[i] - mx);
        z += out[i];
    }
    for (auto& x : out) x /= z;
    return out;
}

struct StochasticStabilityOptions {
    double lambda = 1.0;
    std::string function = "q12^2";
    std::size_t draws = 100000;
    std::uint64_t seed = 0;
    std::size_t chunk = 65536;  // draws per task
    VerdictRule rule;
};

// Tilting the sampling measure by exp(lambda l(v) - lambda^2 |v|^2 / 2) with a
// Gaussian field of covariance v_i . v_j, averaged over field draws.
inline Report stochastic_stability_test(const SamplingAtoms& mu, const StochasticStabilityOptions& o,
                                        const Executor& exec = Executor{}) {
    validate(mu);
    require(o.lambda >= 0.0 && std::isfinite(o.lambda), "bad-lambda", "lambda must be >= 0");
    require(o.draws >= 2, "bad-draw-count", "need at least two field draws");
    const auto f = OverlapFunction::parse(o.function);
    const auto w = mu.weights();
    const auto k = static_cast<Eigen::Index>(w.size());
    require(static_cast<double>(std::pow(static_cast<double>(k), static_cast<double>(f.replicas()))) <= 1e7,
            "too-many-tuples", "atom count too large for exact tuple sums");
    const Eigen::MatrixXd g = mu.gram();
    Eigen::LLT<Eigen::MatrixXd> llt(g + 1e-12 * Eigen::MatrixXd::Identity(k, k));
    require(llt.info() == Eigen::Success, "field-covariance-singular",
            "Cholesky of the field covariance failed after regularization");
    const Eigen::MatrixXd chol = llt.matrixL();

    const auto plain_w = tilted_weights(w, std::vector<double>(w.size(), 0.0));
    const double plain = f.expectation(g, plain_w);

    struct Part {
        stats::Accumulator tilted, diff;
        double worst_norm = 0.0;
    };
    const std::size_t tasks = (o.draws + o.chunk - 1) / o.chunk;
    const auto parts = exec.map(tasks, [&](std::size_t t) {
        Rng rng(o.seed, "field", t);
        std::normal_distribution<double> normal;
        Part p;
        Eigen::VectorXd z(k);
        std::vector<double> tilt(w.size());
        const std::size_t end = std::min(o.draws, (t + 1) * o.chunk);
        for (std::size_t n = t * o.chunk; n < end; ++n) {
            for (Eigen::Index i = 0; i < k; ++i) z(i) = normal(rng);
            const Eigen::VectorXd l = chol * z;
            for (Eigen::Index i = 0; i < k; ++i)
                tilt[static_cast<std::size_t>(i)] = o.lambda * l(i) - 0.5 * o.lambda * o.lambda * g(i, i);
            const auto wt = tilted_weights(w, tilt);
            double sum = 0.0;
            for (double x : wt) sum += x;
            p.worst_norm = std::max(p.worst_norm, std::abs(sum - 1.0));
            const double e = f.expectation(g, wt);
            p.tilted.add(e);
            p.diff.add(e - plain);
        }
        return p;
    });
    Part all;
    for (const auto& p : parts) {
        all.tilted.merge(p.tilted);
        all.diff.merge(p.diff);
        all.worst_norm = std::max(all.worst_norm, p.worst_norm);
    }

    Report r;
    r.test = "stochastic-stability";
    r.parameters = {{"lambda", o.lambda}, {"function", f.id()}, {"draws", o.draws}, {"seed", o.seed},
                    {"atoms", to_json(mu)}};
    r.compare("lambda=" + detail::csv_number(o.lambda), f.id(), all.tilted.mean(), all.tilted.stderr_mean(), plain,
              0.0, all.diff.mean(), all.diff.stderr_mean(), o.rule);
    r.checks.push_back({"tilt-normalization", all.worst_norm <= 1e-12, true, all.worst_norm, 1e-12,
                        "largest |sum of tilted weights - 1|", true});
    r.finalize();
    return r;
}

struct BetaShiftOptions {
    Window window;
    Distribution dist;
    double beta = 0.5;
    double lambda = 0.5;
    std::size_t draws = 2000;
    std::size_t s = 2;
    std::uint64_t seed = 0;
    VerdictRule rule;
};

inline double shifted_beta(double beta, double lambda, std::size_t window_edges_count) {
    return std::sqrt(beta * beta + lambda * lambda / static_cast<double>(window_edges_count));
}

// Side (a): window edges at beta_W(lambda), everything else at beta. Side
// (b): Gibbs at beta tilted by exp((lambda / sqrt|W*|) H_{W,J'}), with J' an
// independent copy of the couplings. Both sides share the draw of J, so the
// per-draw differences are paired.
inline Report beta_shift_identity_test(const Lattice& lat, const BetaShiftOptions& o,
                                       const Executor& exec = Executor{}, Artifacts* artifacts = nullptr) {
    if (o.dist.kind != DistributionKind::gaussian)
        throw Error("assumption-violated", "requires gaussian ν");
    require(o.draws >= 2, "bad-draw-count", "need at least two disorder draws");
    require(o.lambda >= 0.0 && std::isfinite(o.lambda), "bad-lambda", "lambda must be >= 0");
    require_enumerable(lat.vertex_count());
    const auto we = window_edges(lat, o.window);
    const auto masks = edge_sites(lat, we.interior, we.vertices);
    const std::size_t n = we.interior.size();
    const double beta_w = shifted_beta(o.beta, o.lambda, n);
    const double field_scale = o.lambda / std::sqrt(static_cast<double>(n));
    const auto fs = moments_up_to(o.s);

    struct Draw {
        std::vector<double> a, b, law_a, law_b;
        CouplingField J, Jp;
    };
    const auto draws = exec.map(o.draws, [&](std::size_t i) {
        const auto J = sample_couplings(lat, o.dist, derive_seed(o.seed, "disorder", i));
        const auto Jp = sample_couplings(lat, o.dist, derive_seed(o.seed, "field", i));
        std::vector<double> jw(n);
        for (std::size_t e = 0; e < n; ++e) jw[e] = Jp.values[we.interior[e]];
        const auto side_a = exact_marginal(ea_model_split(lat, J, we, {beta_w, o.beta, o.beta}), we.vertices);
        const auto base = exact_marginal(ea_model(lat, J, o.beta), we.vertices);
        const auto side_b = tilt_marginal(base.probs, [&](std::uint32_t a) {
            return detail::edge_energy(a, masks, jw, field_scale);
        });
        Draw d{detail::moments_of(side_a.probs, masks, fs), detail::moments_of(side_b, masks, fs),
               exact_pair_overlap_law(side_a.probs, masks), exact_pair_overlap_law(side_b, masks), {}, {}};
        if (artifacts) {
            d.J = J;
            d.Jp = Jp;
        }
        return d;
    });
    if (artifacts) {
        Artifacts::CouplingSet a{"couplings", {}}, b{"field-couplings", {}};
        for (const auto& x : draws) {
            a.fields.push_back(x.J);
            b.fields.push_back(x.Jp);
        }
        artifacts->couplings.push_back(std::move(a));
        artifacts->couplings.push_back(std::move(b));
    }

    Report r;
    r.test = "beta-shift";
    r.parameters = {{"lattice", lat},        {"window", o.window}, {"beta", o.beta}, {"lambda", o.lambda},
                    {"beta_w", beta_w},      {"draws", o.draws},   {"s", o.s},       {"seed", o.seed}};
    const std::string group = "lambda=" + detail::csv_number(o.lambda);
    for (std::size_t k = 0; k < fs.size(); ++k) {
        stats::Accumulator a, b, d;
        for (const auto& x : draws) {
            a.add(x.a[k]);
            b.add(x.b[k]);
            d.add(x.a[k] - x.b[k]);
        }
        r.compare(group, fs[k].id(), a.mean(), a.stderr_mean(), b.mean(), b.stderr_mean(), d.mean(), d.stderr_mean(),
                  o.rule);
    }
    if (!draws.front().law_a.empty()) {
        std::vector<double> la(draws.front().law_a.size(), 0.0), lb(la.size(), 0.0);
        for (const auto& x : draws)
            for (std::size_t k = 0; k < la.size(); ++k) {
                la[k] += x.law_a[k] / static_cast<double>(draws.size());
                lb[k] += x.law_b[k] / static_cast<double>(draws.size());
            }
        r.measure(group, "ks(q12)", stats::ks_discrete(la, lb), 0.0);
    }
    r.finalize();
    return r;
}

}  // namespace rost
