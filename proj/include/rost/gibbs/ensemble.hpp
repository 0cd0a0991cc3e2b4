#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rost/error.hpp"
#include "rost/float_io.hpp"
#include "rost/executor.hpp"
#include "rost/gibbs/exact.hpp"
#include "rost/gibbs/mcmc.hpp"
#include "rost/gibbs/model.hpp"
#include "rost/random.hpp"
#include "rost/stats.hpp"

namespace rost {

enum class SamplerKind { exact, metropolis, parallel_tempering };

inline std::string to_string(SamplerKind k) {
    switch (k) {
        case SamplerKind::exact: return "exact";
        case SamplerKind::metropolis: return "metropolis";
        case SamplerKind::parallel_tempering: return "parallel-tempering";
    }
    return "?";
}

inline SamplerKind sampler_kind_from_string(const std::string& s) {
    if (s == "exact") return SamplerKind::exact;
    if (s == "metropolis") return SamplerKind::metropolis;
    if (s == "parallel-tempering") return SamplerKind::parallel_tempering;
    throw Error("bad-sampler-config", "unknown sampler '" + s + "'");
}

struct SamplerConfig {
    SamplerKind kind = SamplerKind::exact;
    std::size_t pilot_sweeps = 2000;
    std::size_t max_sweeps = 200000;  // burn-in budget per chain
    double window_c = 6.0;            // Sokal window constant
    double pt_beta_min = 0.1;
    std::size_t pt_max_rungs = 32;
    std::size_t pt_tuning_sweeps = 400;
};

inline void validate(const SamplerConfig& c) {
    require(c.pilot_sweeps >= 64, "bad-sampler-config", "pilot needs at least 64 sweeps");
    require(c.max_sweeps >= c.pilot_sweeps, "bad-sampler-config", "max_sweeps below pilot_sweeps");
    require(c.window_c > 0.0, "bad-sampler-config", "window constant must be positive");
    require(c.pt_beta_min > 0.0, "bad-sampler-config", "pt_beta_min must be positive");
    require(c.pt_max_rungs >= 2, "bad-sampler-config", "need at least two rungs");
}

struct SamplerDiagnostics {
    double tau_int = 0.0;               // largest chain estimate, in sweeps
    std::size_t burn_in_sweeps = 0;     // largest chain burn-in
    std::vector<double> swap_acceptance;  // parallel tempering, averaged over runs
    std::vector<double> ladder;
};

// s replicas drawn independently given J, with optional importance weights.
struct ReplicaEnsemble {
    std::vector<SpinConfig> replicas;
    std::vector<double> weights;
    SamplerKind sampler = SamplerKind::exact;
    SamplerDiagnostics diagnostics;
    double beta = 0.0;
    std::string coupling_id;
    std::size_t vertices = 0;

    std::size_t size() const noexcept { return replicas.size(); }
    double effective_sample_size() const { return stats::effective_sample_size(weights); }
};

inline void validate(const ReplicaEnsemble& e) {
    require(!e.replicas.empty(), "empty-ensemble", "ensemble has no replicas");
    require(e.weights.size() == e.replicas.size(), "bad-weights", "one weight per replica");
    bool any = false;
    for (double w : e.weights) {
        require(std::isfinite(w) && w >= 0.0, "bad-weights", "weights must be finite and non-negative");
        any = any || w > 0.0;
    }
    require(any, "bad-weights", "weights are all zero");
    for (const auto& r : e.replicas)
        require(r.size() == e.vertices, "geometry-mismatch", "replicas live on different lattices");
}

inline PairModel scaled_model(const PairModel& m, double beta) {
    std::vector<Bond> bonds = m.bonds();
    for (auto& b : bonds) b.weight *= beta;
    return PairModel(m.vertex_count(), std::move(bonds));
}

namespace detail {

struct ChainResult {
    SpinConfig spins;
    double tau = 0.0;
    std::size_t burn_in = 0;
    std::vector<double> acceptance;
    std::vector<double> ladder;
};

// Burn-in from the second half of a pilot series: 20 integrated
// autocorrelation times, at least the pilot itself. Returns 0 when the
// estimate is not yet reliable and the pilot may still grow.
inline std::size_t required_burn_in(const std::vector<double>& series, const SamplerConfig& cfg, double& tau_out) {
    const std::vector<double> tail(series.begin() + static_cast<long>(series.size() / 2), series.end());
    const auto ac = integrated_autocorrelation(tail, cfg.window_c);
    tau_out = ac.tau;
    const auto need = static_cast<std::size_t>(std::ceil(20.0 * ac.tau));
    const bool can_grow = 2 * series.size() <= cfg.max_sweeps;
    if (!ac.reliable && can_grow) return 0;
    if (!ac.reliable || need > cfg.max_sweeps)
        throw Error("mcmc-not-converged",
                    "tau_int estimate " + std::to_string(ac.tau) + " sweeps (window " + std::to_string(ac.window) +
                        ", reliable=" + (ac.reliable ? "yes" : "no") + ") needs 20*tau burn-in beyond the budget of " +
                        std::to_string(cfg.max_sweeps));
    return std::max(need, series.size());
}

// Runs `step` and records `observe` until the pilot gives a reliable
// autocorrelation estimate (doubling it as needed), then burns in.
template <class Step, class Observe>
std::size_t adaptive_burn_in(const SamplerConfig& cfg, double& tau, Step&& step, Observe&& observe) {
    std::vector<double> series;
    series.reserve(cfg.pilot_sweeps);
    std::size_t target = cfg.pilot_sweeps;
    for (;;) {
        while (series.size() < target) {
            step();
            series.push_back(observe());
        }
        const std::size_t burn = required_burn_in(series, cfg, tau);
        if (burn > 0) {
            for (std::size_t i = series.size(); i < burn; ++i) step();
            return burn;
        }
        target *= 2;
    }
}

inline ChainResult metropolis_chain(const PairModel& unit, double beta, const SamplerConfig& cfg, Rng rng) {
    MetropolisChain chain(unit, beta, rng);
    ChainResult r;
    r.burn_in = adaptive_burn_in(cfg, r.tau, [&] { chain.sweep(); }, [&] { return chain.log_weight(); });
    r.spins = chain.spins();
    return r;
}

inline std::vector<double> tune_ladder(const PairModel& unit, double beta, const SamplerConfig& cfg, Rng& rng) {
    std::vector<double> ladder;
    for (std::size_t rungs = 2; rungs <= cfg.pt_max_rungs; ++rungs) {
        ladder = ParallelTempering::geometric_ladder(cfg.pt_beta_min, beta, rungs);
        if (ladder.size() == 1) return ladder;
        ParallelTempering pt(unit, ladder, Rng(rng()));
        for (std::size_t i = 0; i < cfg.pt_tuning_sweeps; ++i) pt.step();
        const auto acc = pt.swap_acceptance();
        if (*std::min_element(acc.begin(), acc.end()) >= 0.2) return ladder;
    }
    return ladder;
}

inline ChainResult tempering_chain(const PairModel& unit, double beta, const SamplerConfig& cfg, Rng rng) {
    ChainResult r;
    r.ladder = tune_ladder(unit, beta, cfg, rng);
    ParallelTempering pt(unit, r.ladder, Rng(rng()));
    r.burn_in = adaptive_burn_in(cfg, r.tau, [&] { pt.step(); }, [&] { return pt.target().log_weight(); });
    r.acceptance = pt.swap_acceptance();
    r.spins = pt.target().spins();
    return r;
}

}  // namespace detail

// Draws s replicas from the Gibbs measure of `unit` (bond weights at
// inverse temperature 1) at inverse temperature beta. MCMC replicas come
// from independent chains, one sample each after a burn-in of at least 20
// integrated autocorrelation times. Replica i uses the stream
// (seed, "replica", i), so the result does not depend on the thread count.
inline ReplicaEnsemble sample_replicas(const PairModel& unit, double beta, std::size_t s, const SamplerConfig& cfg,
                                       std::uint64_t seed, const Executor& exec = Executor{},
                                       std::string coupling_id = {}) {
    validate(cfg);
    require(s >= 1, "bad-replica-count", "need at least one replica");
    ReplicaEnsemble e;
    e.sampler = cfg.kind;
    e.beta = beta;
    e.coupling_id = std::move(coupling_id);
    e.vertices = unit.vertex_count();
    e.weights.assign(s, 1.0);

    if (cfg.kind == SamplerKind::exact) {
        require_enumerable(unit.vertex_count());
        const ExactSampler sampler(exact_gibbs(scaled_model(unit, beta), beta));
        e.replicas = exec.map(s, [&](std::size_t i) {
            Rng rng(seed, "replica", i);
            return sampler.draw(rng);
        });
        return e;
    }

    const auto chains = exec.map(s, [&](std::size_t i) {
        Rng rng(seed, "replica", i);
        return cfg.kind == SamplerKind::metropolis ? detail::metropolis_chain(unit, beta, cfg, rng)
                                                   : detail::tempering_chain(unit, beta, cfg, rng);
    });
    for (const auto& c : chains) {
        e.replicas.push_back(c.spins);
        e.diagnostics.tau_int = std::max(e.diagnostics.tau_int, c.tau);
        e.diagnostics.burn_in_sweeps = std::max(e.diagnostics.burn_in_sweeps, c.burn_in);
        if (e.diagnostics.swap_acceptance.size() < c.acceptance.size()) {
            e.diagnostics.swap_acceptance.resize(c.acceptance.size(), 0.0);
            e.diagnostics.ladder = c.ladder;
        }
    }
    if (cfg.kind == SamplerKind::parallel_tempering) {
        // Rung counts can differ between independent tunings; average pairs
        // present in the longest ladder only.
        std::vector<double> counts(e.diagnostics.swap_acceptance.size(), 0.0);
        for (const auto& c : chains)
            if (c.acceptance.size() == e.diagnostics.swap_acceptance.size())
                for (std::size_t k = 0; k < c.acceptance.size(); ++k) {
                    e.diagnostics.swap_acceptance[k] += c.acceptance[k];
                    counts[k] += 1.0;
                }
        for (std::size_t k = 0; k < counts.size(); ++k)
            if (counts[k] > 0) e.diagnostics.swap_acceptance[k] /= counts[k];
    }
    return e;
}

inline ReplicaEnsemble sample_replicas(const Lattice& lat, const CouplingField& J, double beta, std::size_t s,
                                       const SamplerConfig& cfg, std::uint64_t seed,
                                       const Executor& exec = Executor{}) {
    return sample_replicas(ea_model(lat, J, 1.0), beta, s, cfg, seed, exec, "seed:" + std::to_string(J.seed));
}

// Ensemble file: magic "RENS", u32 version, u64 header length, JSON header,
// zero padding to a multiple of 8 bytes, then one row per replica of
// ceil(V/64) little-endian u64 words (bit x set means spin x is -1).
inline constexpr std::uint32_t kEnsembleVersion = 1;

inline nlohmann::json ensemble_header(const ReplicaEnsemble& e) {
    return {{"beta", e.beta},
            {"s", e.size()},
            {"vertices", e.vertices},
            {"sampler", to_string(e.sampler)},
            {"weights", e.weights},
            {"coupling_id", e.coupling_id},
            {"diagnostics",
             {{"tau_int", e.diagnostics.tau_int},
              {"burn_in_sweeps", e.diagnostics.burn_in_sweeps},
              {"swap_acceptance", e.diagnostics.swap_acceptance},
              {"ladder", e.diagnostics.ladder}}}};
}

inline void save_ensemble(const ReplicaEnsemble& e, const std::string& path) {
    validate(e);
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(os), "io-error", "cannot open " + path);
    const std::string header = ensemble_header(e).dump();
    os.write("RENS", 4);
    const char version[4] = {static_cast<char>(kEnsembleVersion), 0, 0, 0};
    os.write(version, 4);
    detail::put_u64_le(os, header.size());
    os.write(header.data(), static_cast<std::streamsize>(header.size()));
    const std::size_t pad = (8 - (header.size() % 8)) % 8;
    const char zeros[8] = {};
    os.write(zeros, static_cast<std::streamsize>(pad));
    const std::size_t words = (e.vertices + 63) / 64;
    for (const auto& r : e.replicas)
        for (std::size_t w = 0; w < words; ++w) {
            std::uint64_t word = 0;
            for (std::size_t b = 0; b < 64 && 64 * w + b < e.vertices; ++b)
                if (r[64 * w + b] < 0) word |= std::uint64_t{1} << b;
            detail::put_u64_le(os, word);
        }
    require(static_cast<bool>(os), "io-error", "write failed for " + path);
}

inline ReplicaEnsemble load_ensemble(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    require(static_cast<bool>(is), "io-error", "cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    require(bytes.size() >= 16 && std::memcmp(bytes.data(), "RENS", 4) == 0, "bad-format",
            path + " is not an ensemble file");
    require(bytes[4] == kEnsembleVersion && bytes[5] == 0, "bad-format", "unsupported ensemble version");
    const std::uint64_t hlen = detail::get_u64_le(bytes.data() + 8);
    require(16 + hlen <= bytes.size(), "bad-format", "truncated header");
    const auto h = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<long>(hlen));
    ReplicaEnsemble e;
    e.beta = h.at("beta").get<double>();
    e.vertices = h.at("vertices").get<std::size_t>();
    e.sampler = sampler_kind_from_string(h.at("sampler").get<std::string>());
    e.weights = h.at("weights").get<std::vector<double>>();
    e.coupling_id = h.at("coupling_id").get<std::string>();
    const auto& d = h.at("diagnostics");
    e.diagnostics.tau_int = d.at("tau_int").get<double>();
    e.diagnostics.burn_in_sweeps = d.at("burn_in_sweeps").get<std::size_t>();
    e.diagnostics.swap_acceptance = d.at("swap_acceptance").get<std::vector<double>>();
    e.diagnostics.ladder = d.at("ladder").get<std::vector<double>>();
    const std::size_t s = h.at("s").get<std::size_t>();
    const std::size_t words = (e.vertices + 63) / 64;
    std::size_t off = 16 + hlen + (8 - (hlen % 8)) % 8;
    require(off + s * words * 8 == bytes.size(), "bad-format", "payload size does not match header");
    for (std::size_t i = 0; i < s; ++i) {
        SpinConfig r(e.vertices);
        for (std::size_t w = 0; w < words; ++w, off += 8) {
            const std::uint64_t word = detail::get_u64_le(bytes.data() + off);
            for (std::size_t b = 0; b < 64 && 64 * w + b < e.vertices; ++b)
                r[64 * w + b] = ((word >> b) & 1u) ? Spin{-1} : Spin{1};
        }
        e.replicas.push_back(std::move(r));
    }
    validate(e);
    return e;
}

}  // namespace rost
