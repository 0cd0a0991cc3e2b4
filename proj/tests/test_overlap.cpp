#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>

#include "rost/disorder.hpp"
#include "rost/gibbs/ensemble.hpp"
#include "rost/overlap.hpp"
#include "rost/rost_analysis.hpp"
#include "rost/stats.hpp"
#include "test_util.hpp"

using namespace rost;
using rost::testing::error_code;

namespace {

ReplicaEnsemble exact_ensemble(const Lattice& lat, const CouplingField& J, double beta, std::size_t s,
                               std::uint64_t seed) {
    return sample_replicas(lat, J, beta, s, SamplerConfig{}, seed);
}

}  // namespace

TEST(EdgeOverlap, IdenticalAndFlipped) {
    const Lattice lat(2, {3, 4});
    const auto edges = window_edges(lat, full_window(lat)).interior;
    const auto s = config_from_bits(0b101100111010, 12);
    EXPECT_EQ(edge_overlap(s, s, lat, edges), 1.0);
    EXPECT_EQ(edge_overlap(s, flipped(s), lat, edges), 1.0);
}

TEST(EdgeOverlap, RingHandValue) {
    const Lattice lat(1, {4});
    const auto edges = window_edges(lat, full_window(lat)).interior;
    EXPECT_EQ(edge_overlap(SpinConfig{1, 1, 1, 1}, SpinConfig{1, -1, 1, -1}, lat, edges), -1.0);
    EXPECT_EQ(error_code([&] { edge_overlap(SpinConfig{1, 1, 1, 1}, SpinConfig{1, 1, 1, 1}, lat, {}); }),
              "empty-window");
}

TEST(SpinOverlap, HandValues) {
    const SpinConfig s{1, 1, -1, -1};
    EXPECT_EQ(spin_overlap(s, s), 1.0);
    EXPECT_EQ(spin_overlap(s, flipped(s)), -1.0);
    EXPECT_EQ(spin_overlap(s, SpinConfig{1, -1, 1, -1}), 0.0);
    EXPECT_EQ(error_code([&] { spin_overlap(s, SpinConfig{1, 1}); }), "size-mismatch");
}

TEST(OverlapMatrix, IdenticalReplicasGiveOnes) {
    const Lattice lat(1, {6});
    ReplicaEnsemble e;
    e.vertices = 6;
    e.replicas.assign(5, config_from_bits(0b010011, 6));
    e.weights.assign(5, 1.0);
    const auto m = overlap_matrix(e, lat, Window{{1}, {4}});
    EXPECT_TRUE(m.q.isApprox(Eigen::MatrixXd::Ones(5, 5), 0.0));
    EXPECT_EQ(m.window_id, "box@1:4");
    EXPECT_EQ(error_code([&] {
                  e.replicas.resize(1);
                  e.weights.resize(1);
                  overlap_matrix(e, lat, Window{{1}, {4}});
              }),
              "too-few-replicas");
}

TEST(OverlapMatrix, InfiniteTemperatureMoments) {
    // At beta = 0 the 32 edge products of a 4x4 torus are not independent
    // coins, but q12 is still centered with variance 1/|W*|: the products of
    // distinct edges are uncorrelated under the uniform measure.
    const Lattice lat(2, {4, 4});
    const auto J = sample_couplings(lat, {}, 1);
    const auto table_sampler = ExactSampler(exact_gibbs(lat, J, 0.0));
    const auto edges = window_edges(lat, full_window(lat)).interior;
    stats::Accumulator q, q2;
    Rng rng(7);
    for (int rep = 0; rep < 10000; ++rep) {
        const auto a = table_sampler.draw(rng), b = table_sampler.draw(rng);
        const double x = edge_overlap(a, b, lat, edges);
        q.add(x);
        q2.add(x * x);
    }
    EXPECT_LT(std::abs(q.mean()), 4.0 * q.stderr_mean());
    EXPECT_LT(std::abs(q2.mean() - 1.0 / 32.0), 4.0 * q2.stderr_mean());
}

TEST(OverlapMatrix, InvariantsOnRealReplicas) {
    const Lattice lat(2, {4, 4});
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto J = sample_couplings(lat, {}, seed);
        const auto ens = exact_ensemble(lat, J, 1.0, 64, seed);
        for (const Window& w : {full_window(lat), Window{{1, 2}, {3, 2}}}) {
            const auto m = overlap_matrix(ens, lat, w);
            EXPECT_TRUE(m.q.isApprox(m.q.transpose(), 0.0));
            for (Eigen::Index i = 0; i < m.q.rows(); ++i) EXPECT_EQ(m.q(i, i), 1.0);
            EXPECT_LE(m.q.cwiseAbs().maxCoeff(), 1.0);
            EXPECT_GE(min_eigenvalue(m.q), -1e-10);
        }
        EXPECT_GE(min_eigenvalue(overlap_matrix_sk(ens).q), -1e-10);
    }
}

TEST(OverlapMatrix, WindowNestingIsAdditive) {
    const Lattice lat(2, {5, 5});
    Rng rng(4);
    const Window inner{{1, 1}, {2, 3}}, outer{{0, 0}, {4, 4}};
    const auto wi = window_edges(lat, inner).interior;
    const auto wo = window_edges(lat, outer).interior;
    std::vector<EdgeIndex> rest;
    std::set_difference(wo.begin(), wo.end(), wi.begin(), wi.end(), std::back_inserter(rest));
    ASSERT_EQ(rest.size() + wi.size(), wo.size());
    for (int rep = 0; rep < 20; ++rep) {
        const auto a = config_from_bits(rng.below(std::uint64_t{1} << 25), 25);
        const auto b = config_from_bits(rng.below(std::uint64_t{1} << 25), 25);
        const double lhs = edge_overlap(a, b, lat, wo) * static_cast<double>(wo.size());
        const double rhs = edge_overlap(a, b, lat, wi) * static_cast<double>(wi.size()) +
                           edge_overlap(a, b, lat, rest) * static_cast<double>(rest.size());
        EXPECT_EQ(lhs, rhs);
    }
}

TEST(OverlapMatrix, WeightedMomentWithUnitWeights) {
    const Lattice lat(1, {8});
    const auto ens = exact_ensemble(lat, sample_couplings(lat, {}, 3), 0.8, 12, 2);
    const auto m = overlap_matrix(ens, lat, Window{{0}, {5}});
    Rng rng(1);
    const auto f = Monomial::pair_power(2);
    const auto w = weighted_overlap_moment(m, std::vector<double>(12, 1.0), f, rng);
    double acc = 0.0;
    for (std::size_t i = 0; i < 12; ++i)
        for (std::size_t j = 0; j < 12; ++j)
            if (i != j) acc += m(i, j) * m(i, j);
    EXPECT_NEAR(w.estimate, acc / 132.0, 1e-15);
    EXPECT_EQ(w.tuples, 132u);
    EXPECT_FALSE(w.sampled);

    // Zero weight drops a replica entirely.
    std::vector<double> drop(12, 1.0);
    drop[0] = 0.0;
    double acc2 = 0.0;
    for (std::size_t i = 1; i < 12; ++i)
        for (std::size_t j = 1; j < 12; ++j)
            if (i != j) acc2 += m(i, j) * m(i, j);
    EXPECT_NEAR(weighted_overlap_moment(m, drop, f, rng).estimate, acc2 / 110.0, 1e-15);
    EXPECT_TRUE(weighted_overlap_moment(m, std::vector<double>(12, 1.0), f, rng, 10).sampled);
}

TEST(OverlapMatrix, FileRoundTrips) {
    const Lattice lat(2, {3, 3});
    const auto ens = exact_ensemble(lat, sample_couplings(lat, {}, 4), 0.5, 6, 9);
    const auto m = overlap_matrix(ens, lat, full_window(lat));
    const auto dir = std::filesystem::temp_directory_path();
    save_overlap_csv(m, (dir / "rost_q.csv").string());
    save_overlap_binary(m, (dir / "rost_q.f64").string());
    EXPECT_EQ(load_matrix_csv((dir / "rost_q.csv").string()), m.q);
    EXPECT_EQ(load_overlap_binary((dir / "rost_q.f64").string()), m.q);
}

namespace {

std::vector<Eigen::MatrixXd> exchangeable_samples(std::uint64_t seed, std::size_t count) {
    const Lattice lat(1, {6});
    std::vector<Eigen::MatrixXd> out;
    for (std::size_t k = 0; k < count; ++k) {
        const auto J = sample_couplings(lat, {}, derive_seed(seed, "disorder", k));
        out.push_back(overlap_matrix(exact_ensemble(lat, J, 1.0, 4, derive_seed(seed, "ensemble", k)), lat,
                                     Window{{0}, {4}})
                          .q);
    }
    return out;
}

}  // namespace

TEST(Exchangeability, UniformPValuesUnderTheNull) {
    std::vector<double> p;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        Rng rng(seed, "permutation", 0);
        p.push_back(exchangeability_test(exchangeable_samples(seed, 50), {}, rng).p_value);
    }
    EXPECT_LT(stats::ks_uniform(p), stats::ks_one_sample_critical(p.size(), 0.01));
}

TEST(Exchangeability, GroundStateReplicaIsDetected) {
    const Lattice lat(1, {6});
    std::vector<double> p;
    for (std::uint64_t seed = 0; seed < 21; ++seed) {
        std::vector<Eigen::MatrixXd> mats;
        for (std::size_t k = 0; k < 50; ++k) {
            const auto J = sample_couplings(lat, {}, derive_seed(seed, "disorder", k));
            auto ens = exact_ensemble(lat, J, 0.5, 4, derive_seed(seed, "ensemble", k));
            const auto t = exact_gibbs(lat, J, 1.0);
            ens.replicas[0] = config_from_bits(
                static_cast<std::uint64_t>(std::max_element(t.probs.begin(), t.probs.end()) - t.probs.begin()), 6);
            mats.push_back(overlap_matrix(ens, lat, full_window(lat)).q);
        }
        Rng rng(seed, "permutation", 0);
        p.push_back(exchangeability_test(mats, {}, rng).p_value);
    }
    std::nth_element(p.begin(), p.begin() + 10, p.end());
    EXPECT_LT(p[10], 0.01);
}

TEST(Exchangeability, IdentityOnlyAndTooFew) {
    Rng rng(1);
    ExchangeabilityOptions opt;
    opt.identity_only = true;
    EXPECT_EQ(exchangeability_test(exchangeable_samples(3, 50), opt, rng).p_value, 1.0);
    EXPECT_EQ(error_code([&] { exchangeability_test(exchangeable_samples(3, 49), {}, rng); }), "too-few-samples");
}
