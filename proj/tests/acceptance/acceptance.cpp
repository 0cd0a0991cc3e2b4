// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rost/gibbs/ensemble.hpp"
#include "rost/gibbs/free_energy.hpp"
#include "rost/gibbs/mcmc.hpp"
#include "rost/harness/run.hpp"
#include "rost/metastate.hpp"
#include "rost/overlap.hpp"
#include "rost/rost_analysis.hpp"
#include "rost/stability.hpp"

using namespace rost;
namespace h = rost::harness;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
    std::string fingerprint;  // serialized reports, compared across thread counts
};

struct Criterion {
    int id;
    std::string name;
    double limit_seconds;
    std::function<Outcome(const Executor&)> run;
    bool threaded = true;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string num(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", x);
    return buf;
}

const Statistic* find_row(const Report& r, const std::string& moment) {
    for (const auto& s : r.statistics)
        if (s.moment == moment && s.reference) return &s;
    return nullptr;
}

const Check* find_check(const Report& r, const std::string& name) {
    for (const auto& c : r.checks)
        if (c.name == name) return &c;
    return nullptr;
}

double max_abs_diff(const Report& r) {
    double m = 0.0;
    for (const auto& s : r.statistics)
        if (s.reference) m = std::max(m, std::abs(s.diff));
    return m;
}

Outcome covariance(const Executor& exec) {
    h::RunConfig c;
    c.experiment = "covariance";
    c.d = 2;
    c.sides = {3, 3};
    c.betas = {0.3, 0.8, 1.5};
    c.perturbations = 20;
    c.seed = 1;
    const auto r = h::execute(c, exec).report;
    const double worst = max_abs_diff(r);
    return {worst <= 1e-10, "max difference " + num(worst) + " over " + std::to_string(r.statistics.size()) +
                                " rows (tol 1e-10)",
            to_json(r).dump()};
}

Outcome gram_round_trip(const Executor&) {
    std::mt19937_64 rng(2024);
    std::normal_distribution<double> normal;
    double worst = 0.0;
    int rank_misses = 0, deficient = 0;
    for (int t = 0; t < 100; ++t) {
        const int n = 2 + t % 31;
        // Every other matrix is built from vectors in a smaller space.
        const int r = t % 2 ? std::max(1, n / 3) : n;
        deficient += r < n;
        Eigen::MatrixXd v(n, r);
        for (int i = 0; i < n; ++i) {
            for (int k = 0; k < r; ++k) v(i, k) = normal(rng);
            v.row(i).normalize();
        }
        const Eigen::MatrixXd a = v * v.transpose();
        const auto g = gram_factorize(a);
        worst = std::max(worst, (g.vectors * g.vectors.transpose() - a).cwiseAbs().maxCoeff());
        rank_misses += effective_rank(a).rank != static_cast<std::size_t>(r);
    }
    return {worst <= 1e-8 && rank_misses == 0,
            "max reconstruction error " + num(worst) + " (tol 1e-8), rank mismatches " + std::to_string(rank_misses) +
                " of 100 (" + std::to_string(deficient) + " rank-deficient)",
            ""};
}

Outcome beta_shift(const Executor& exec) {
    h::RunConfig c;
    c.experiment = "beta-shift";
    c.sides = {8};
    c.window_sides = {5};
    c.beta = 0.5;
    c.lambda = 0.5;
    c.draws = 2000;
    c.seed = 1;
    const auto r = h::execute(c, exec).report;
    const auto* q1 = find_row(r, "q12");
    const auto* q2 = find_row(r, "q12^2");
    if (!q1 || !q2) return {false, "missing q12 rows", to_json(r).dump()};
    const double z1 = std::abs(q1->diff) / q1->diff_se, z2 = std::abs(q2->diff) / q2->diff_se;
    return {z1 <= 3.0 && z2 <= 3.0, "q12 at " + num(z1) + " SE, q12^2 at " + num(z2) + " SE (limit 3)",
            to_json(r).dump()};
}

Outcome stochastic_controls(const Executor& exec) {
    SamplingAtoms corpus;
    corpus.dim = 3;
    corpus.atoms = {{0.2, {1.0, 0.0, 0.0}}, {0.3, {0.6, 0.8, 0.0}}, {0.5, {0.0, 0.6, 0.6}}};
    SamplingAtoms single;
    single.dim = 2;
    single.atoms = {{1.0, {0.6, 0.8}}};
    SamplingAtoms two;
    two.dim = 2;
    two.atoms = {{0.5, {1.0, 0.0}}, {0.5, {0.0, 1.0}}};

    StochasticStabilityOptions o;
    o.seed = 1;
    o.draws = 100000;
    o.lambda = 0.0;
    const auto zero = stochastic_stability_test(corpus, o, exec);
    o.lambda = 1.0;
    const auto one = stochastic_stability_test(single, o, exec);
    o.function = "1{q12=1}";
    o.draws = 1000000;
    const auto neg = stochastic_stability_test(two, o, exec);
    const auto& s = neg.statistics.front();
    const double z = s.diff / s.diff_se;
    const double d0 = max_abs_diff(zero), d1 = max_abs_diff(one);
    return {d0 == 0.0 && d1 == 0.0 && z >= 5.0,
            "lambda=0 diff " + num(d0) + ", single atom diff " + num(d1) + ", two atoms diff " + num(s.diff) + " at " +
                num(z) + " SE (need >= 5)",
            to_json(zero).dump() + to_json(one).dump() + to_json(neg).dump()};
}

Outcome local_stability(const Executor& exec) {
    h::RunConfig c;
    c.experiment = "local-stability";
    c.d = 1;
    c.volumes = {{8}, {12}, {16}, {20}};
    c.window_sides = {3};
    c.beta = 0.7;
    c.deltas = {1.0, 0.0};
    c.draws = 4000;
    c.seed = 1;
    const auto r = h::execute(c, exec).report;
    c.deltas = {0.0, 0.0};
    const auto control = h::execute(c, exec).report;
    const auto* trend = find_check(r, "discrepancy-decreasing");
    std::string per;
    for (const auto& s : r.statistics)
        if (s.moment == "q12") per += (per.empty() ? "" : ", ") + s.group + " " + num(s.diff);
    const double ctrl = max_abs_diff(control);
    const bool ok = trend && trend->pass && ctrl == 0.0;
    return {ok,
            "q12 discrepancy " + per + "; drop " + num(trend ? trend->value : 0.0) + " vs 2 SE " +
                num(trend ? trend->threshold : 0.0) + "; control diff " + num(ctrl),
            to_json(r).dump() + to_json(control).dump()};
}

Outcome sk_equivalence(const Executor& exec) {
    h::RunConfig c;
    c.experiment = "sk-equivalence";
    c.sizes = {4, 8, 12, 16};
    c.beta = 0.8;
    c.function = "q12^2";
    c.draws = 2000;
    c.seed = 1;
    const auto r = h::execute(c, exec).report;
    const auto* slope = find_check(r, "slope-in-band");
    return {slope && slope->pass, "slope " + num(slope ? slope->value : NAN) + " (band [-1.5, -0.6])",
            to_json(r).dump()};
}

Outcome free_energy(const Executor& exec) {
    h::RunConfig c;
    c.experiment = "free-energy";
    c.sides = {8};
    c.window_sides = {4};
    c.beta = 0.5;
    c.beta_w = 0.5;
    c.draws = 2000;
    c.seed = 1;
    const auto r = h::execute(c, exec).report;
    const auto* lo = find_check(r, "gap-non-negative");
    const auto* hi = find_check(r, "gap-below-bound");

    const Lattice lat(1, {8});
    const auto we = window_edges(lat, Window{{0}, {4}});
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto x = window_free_energy_sample(lat, we, sample_couplings(lat, {}, s), 0.5, 0.0);
        worst = std::max({worst, std::abs(x.f_lambda_w - std::log(2.0)), std::abs(x.f_w - std::log(2.0))});
    }
    const bool ok = lo && hi && lo->pass && hi->pass && worst <= 1e-14;
    return {ok,
            "gap " + num(lo ? lo->value : NAN) + " within [" + num(lo ? lo->threshold : NAN) + ", " +
                num(hi ? hi->threshold : NAN) + "]; beta_W=0 max |f - log 2| " + num(worst) + " (tol 1e-14)",
            to_json(r).dump()};
}

Outcome exchangeability_and_psd(const Executor& exec) {
    const Lattice ring(1, {6});
    const auto p = exec.map(200, [&](std::size_t seed) {
        std::vector<Eigen::MatrixXd> mats;
        for (std::size_t k = 0; k < 50; ++k) {
            const auto J = sample_couplings(ring, {}, derive_seed(seed, "disorder", k));
            const auto ens = sample_replicas(ring, J, 1.0, 4, SamplerConfig{}, derive_seed(seed, "ensemble", k));
            mats.push_back(overlap_matrix(ens, ring, Window{{0}, {4}}).q);
        }
        Rng rng(seed, "permutation", 0);
        return exchangeability_test(mats, {}, rng).p_value;
    });
    const double ks = stats::ks_uniform(p), crit = stats::ks_one_sample_critical(p.size(), 0.01);

    const Lattice small(2, {4, 4}), large(2, {8, 8});
    SamplerConfig metro;
    metro.kind = SamplerKind::metropolis;
    metro.pilot_sweeps = 256;
    const auto mins = exec.map(30, [&](std::size_t i) {
        const double beta = 0.5 + 0.5 * static_cast<double>(i % 3);
        const bool mcmc = i >= 20;
        const auto& lat = mcmc ? large : small;
        const auto J = sample_couplings(lat, {}, derive_seed(7, "disorder", i));
        const auto ens = sample_replicas(lat, J, beta, 64, mcmc ? metro : SamplerConfig{}, derive_seed(7, "ensemble", i));
        double m = min_eigenvalue(overlap_matrix(ens, lat, full_window(lat)).q);
        m = std::min(m, min_eigenvalue(overlap_matrix(ens, lat, Window{{1, 1}, {3, 3}}).q));
        return m;
    });
    const double worst = *std::min_element(mins.begin(), mins.end());
    std::string fp;
    for (double x : p) fp += std::to_string(x) + ",";
    for (double x : mins) fp += std::to_string(x) + ",";
    return {ks < crit && worst >= -1e-10,
            "KS " + num(ks) + " vs 1% critical " + num(crit) + " over 200 seeds; min eigenvalue " + num(worst) +
                " over 60 matrices (floor -1e-10)",
            fp};
}

Outcome performance(const Executor&) {
    const Lattice small(2, {4, 4});
    auto t0 = std::chrono::steady_clock::now();
    const auto J = sample_couplings(small, {}, 1);
    const auto ens = sample_replicas(small, J, 1.0, 64, SamplerConfig{}, 1);
    const auto m = overlap_matrix(ens, small, full_window(small));
    const double exact_s = seconds_since(t0);

    const Lattice big(2, {16, 16});
    const auto model = ea_model(big, sample_couplings(big, {}, 2), 1.0);
    MetropolisChain chain(model, 1.0, Rng(3));
    t0 = std::chrono::steady_clock::now();
    chain.run(1000000);
    const double mcmc_s = seconds_since(t0);
    return {exact_s < 1.0 && mcmc_s < 60.0 && m.q.rows() == 64,
            "4x4 exact + 64-replica matrix " + num(exact_s) + " s (limit 1); 1e6 sweeps on 16x16 " + num(mcmc_s) +
                " s (limit 60)",
            ""};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "covariance identity", 10, covariance},
        {2, "gram factorization round trip", 5, gram_round_trip, false},
        {3, "beta-shift identity", 60, beta_shift},
        {4, "stochastic-stability controls", 30, stochastic_controls},
        {5, "local-stability trend", 600, local_stability},
        {6, "sk equivalence decay", 600, sk_equivalence},
        {7, "free-energy boundary bound", 60, free_energy},
        {8, "exchangeability and psd", 60, exchangeability_and_psd},
        {9, "performance floor", 120, performance, false},
    };

    int failures = 0;
    auto line = [&](int id, const std::string& name, bool pass, const std::string& detail) {
        std::printf("criterion %2d %-32s %s  %s\n", id, name.c_str(), pass ? "PASS" : "FAIL", detail.c_str());
        std::fflush(stdout);
        failures += !pass;
    };

    std::vector<std::string> fingerprints;
    const Executor serial(1);
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run(serial);
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what(), ""};
        }
        const double s = seconds_since(t0);
        const bool in_time = s < c.limit_seconds;
        line(c.id, c.name, o.pass && in_time,
             o.detail + "; " + num(s) + " s (limit " + num(c.limit_seconds) + ")");
        fingerprints.push_back(o.fingerprint);
    }

    const Executor wide(8);
    std::string mismatched;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        if (!criteria[i].threaded) continue;
        std::string fp;
        try {
            fp = criteria[i].run(wide).fingerprint;
        } catch (const std::exception& e) {
            fp = std::string("error: ") + e.what();
        }
        if (fp != fingerprints[i]) mismatched += (mismatched.empty() ? "" : ",") + std::to_string(criteria[i].id);
    }
    line(10, "reproducibility across threads", mismatched.empty(),
         mismatched.empty() ? "criteria 1 and 3-8 byte-identical at 1 and 8 threads"
                            : "reports differ for criteria " + mismatched);

    std::printf("%d of 10 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
