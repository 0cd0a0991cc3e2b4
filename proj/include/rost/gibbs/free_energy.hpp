#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rost/disorder.hpp"
#include "rost/executor.hpp"
#include "rost/gibbs/exact.hpp"
#include "rost/gibbs/model.hpp"
#include "rost/lattice.hpp"
#include "rost/random.hpp"
#include "rost/stats.hpp"

namespace rost {

struct FreeEnergyResult {
    double f_lambda_w = 0.0;  // disorder average of the window free energy in its environment
    double f_lambda_w_se = 0.0;
    double f_w = 0.0;  // disorder average of the stand-alone window free energy
    double f_w_se = 0.0;
    double gap = 0.0;  // mean of f_{Lambda,W} - f_W per draw
    double gap_se = 0.0;
    double bound = 0.0;  // (beta_W^2 / 2) |dW| / |W|
    std::size_t sites = 0;
    std::size_t boundary_edges = 0;
    std::size_t draws = 0;
    bool lower_holds = false;  // gap >= -n_se * se
    bool upper_holds = false;  // gap <= bound + n_se * se
};

struct WindowFreeEnergySample {
    double f_lambda_w = 0.0;
    double f_w = 0.0;
};

// One disorder realization. Window edges and boundary edges carry beta_w,
// the rest of the torus carries beta. The environment partition function
// over the complement spins uses only complement edges at beta.
inline WindowFreeEnergySample window_free_energy_sample(const Lattice& lat, const WindowEdges& we,
                                                        const CouplingField& J, double beta, double beta_w) {
    require_enumerable(lat.vertex_count());
    const double sites = static_cast<double>(we.vertices.size());
    const auto full = ea_model_split(lat, J, we, {beta_w, beta_w, beta});

    std::vector<char> inside(lat.vertex_count(), 0);
    for (Vertex v : we.vertices) inside[v] = 1;
    std::vector<Vertex> outside;
    for (std::size_t v = 0; v < lat.vertex_count(); ++v)
        if (!inside[v]) outside.push_back(static_cast<Vertex>(v));

    const double log_z = log_partition(full);
    const double log_env = outside.empty() ? 0.0 : log_partition(induced_model(full, outside));
    const double log_w = log_partition(induced_model(full, we.vertices));
    return {(log_z - log_env) / sites, log_w / sites};
}

// Disorder-averaged windowed free energies and the boundary estimate
// 0 <= f_{Lambda,W} - f_W <= (beta_W^2/2) |dW|/|W|, checked within n_se
// standard errors. Draw i uses couplings seeded by (seed, "disorder", i).
inline FreeEnergyResult window_free_energy(const Lattice& lat, const Window& win, const Distribution& dist,
                                           double beta, double beta_w, std::size_t draws, std::uint64_t seed,
                                           const Executor& exec = Executor{}, double n_se = 3.0) {
    require(dist.kind == DistributionKind::gaussian, "bound-requires-gaussian",
            "the boundary estimate integrates Gaussian boundary couplings");
    require(draws >= 2, "bad-draw-count", "need at least two disorder draws");
    require_enumerable(lat.vertex_count());
    const auto we = window_edges(lat, win);
    const auto samples = exec.map(draws, [&](std::size_t i) {
        const auto J = sample_couplings(lat, dist, derive_seed(seed, "disorder", i));
        return window_free_energy_sample(lat, we, J, beta, beta_w);
    });
    stats::Accumulator a, b, g;
    for (const auto& s : samples) {
        a.add(s.f_lambda_w);
        b.add(s.f_w);
        g.add(s.f_lambda_w - s.f_w);
    }
    FreeEnergyResult r;
    r.f_lambda_w = a.mean();
    r.f_lambda_w_se = a.stderr_mean();
    r.f_w = b.mean();
    r.f_w_se = b.stderr_mean();
    r.gap = g.mean();
    r.gap_se = g.stderr_mean();
    r.sites = we.vertices.size();
    r.boundary_edges = we.boundary.size();
    r.bound = 0.5 * beta_w * beta_w * static_cast<double>(r.boundary_edges) / static_cast<double>(r.sites);
    r.draws = draws;
    r.lower_holds = r.gap >= -n_se * r.gap_se;
    r.upper_holds = r.gap <= r.bound + n_se * r.gap_se;
    return r;
}

}  // namespace rost
