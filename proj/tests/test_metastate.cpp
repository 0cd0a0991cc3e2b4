#include <gtest/gtest.h>

#include <cmath>

#include "rost/metastate.hpp"
#include "test_util.hpp"

using namespace rost;
using rost::testing::error_code;

namespace {

const Check* find_check(const Report& r, const std::string& prefix) {
    for (const auto& c : r.checks)
        if (c.name.rfind(prefix, 0) == 0) return &c;
    return nullptr;
}

bool has_flag(const Report& r, const std::string& f) {
    return std::find(r.flags.begin(), r.flags.end(), f) != r.flags.end();
}

SweepOptions ring_sweep(double beta) {
    SweepOptions o;
    o.d = 1;
    o.volumes = {{8}, {12}, {16}, {20}};
    o.window = Window{{0}, {3}};
    o.beta = beta;
    o.seed = 2;
    return o;
}

}  // namespace

TEST(MetastateSweep, InfiniteTemperatureIsCentered) {
    auto o = ring_sweep(0.0);
    o.sampler.kind = SamplerKind::metropolis;
    o.sampler.pilot_sweeps = 64;
    o.volumes = {{8}, {12}};
    o.ensemble_size = 200;
    const auto r = metastate_sweep(o);
    for (const auto& s : r.statistics)
        if (s.moment == "q12") EXPECT_LE(std::abs(s.estimate), 4.0 * s.estimate_se) << s.group;
}

TEST(MetastateSweep, SingleVolume) {
    auto o = ring_sweep(0.7);
    o.volumes = {{10}};
    const auto r = metastate_sweep(o);
    EXPECT_TRUE(r.checks.empty());
    for (const auto& s : r.statistics) EXPECT_EQ(s.group, "L=10");
    EXPECT_EQ(r.verdict, "exact-pass");
}

TEST(MetastateSweep, RingGapShrinks) {
    const auto r = metastate_sweep(ring_sweep(0.7));
    double first = 0.0, last = 0.0;
    for (const auto& s : r.statistics) {
        if (s.moment != "gap(q12)") continue;
        if (s.group == "L=8->12") first = std::abs(s.estimate);
        if (s.group == "L=16->20") last = std::abs(s.estimate);
    }
    EXPECT_GT(first, 100.0 * last);
    ASSERT_NE(find_check(r, "gap-shrinking"), nullptr);
    EXPECT_TRUE(find_check(r, "gap-shrinking")->pass);
    EXPECT_TRUE(find_check(r, "gap-not-growing")->pass);
}

TEST(MetastateSweep, WindowMustFitEveryVolume) {
    auto o = ring_sweep(0.7);
    o.window = Window{{0}, {9}};
    EXPECT_EQ(error_code([&] { metastate_sweep(o); }), "window-too-large");
}

namespace {

JIndependenceOptions ring_dispersion(double beta, std::size_t draws) {
    JIndependenceOptions o;
    o.d = 1;
    o.volumes = {{8}, {16}};
    o.window = Window{{0}, {3}};
    o.beta = beta;
    o.draws = draws;
    o.ensemble_size = 64;
    o.seed = 1;
    return o;
}

}  // namespace

TEST(JIndependence, NullBandAtInfiniteTemperature) {
    const auto r = j_independence_test(ring_dispersion(0.0, 200));
    const auto* c = find_check(r, "null-band L=8");
    ASSERT_NE(c, nullptr);
    EXPECT_TRUE(c->judged);
    EXPECT_TRUE(c->pass);
    EXPECT_TRUE(find_check(r, "null-band L=16")->pass);
    EXPECT_FALSE(find_check(r, "dispersion-decreasing")->judged);
}

TEST(JIndependence, SinglePairIsFlagged) {
    auto o = ring_dispersion(0.7, 20);
    o.ensemble_size = 2;
    EXPECT_TRUE(has_flag(j_independence_test(o), "insufficient-replication"));
}

TEST(JIndependence, RingDispersionAlreadyConverged) {
    // The window law on a ring is already volume-independent at L = 8 to
    // within far less than the between-J spread, so the dispersion cannot
    // drop measurably from L = 8 to L = 16.
    const auto r = j_independence_test(ring_dispersion(0.7, 300));
    const auto* c = find_check(r, "dispersion-decreasing");
    ASSERT_NE(c, nullptr);
    EXPECT_TRUE(c->judged);
    EXPECT_FALSE(c->pass);
    EXPECT_LT(std::abs(c->value), 2.0 * c->threshold);
}

TEST(SkEquivalence, EmptyProductIsExact) {
    SkEquivalenceOptions o;
    o.sizes = {4, 6};
    o.function = "1";
    o.draws = 10;
    const auto r = sk_equivalence_test(o);
    for (const auto& s : r.statistics) EXPECT_EQ(s.diff, 0.0);
    EXPECT_EQ(r.verdict, "exact-pass");
}

TEST(SkEquivalence, OddFunctionIsSymmetricZero) {
    SkEquivalenceOptions o;
    o.sizes = {4};
    o.function = "q12";
    o.draws = 2000;
    const auto r = sk_equivalence_test(o);
    EXPECT_TRUE(has_flag(r, "symmetric-zero"));
    EXPECT_EQ(find_check(r, "slope-in-band"), nullptr);
    for (const auto& s : r.statistics)
        if (s.reference) {
            EXPECT_LE(std::abs(s.estimate), 1e-15);
            EXPECT_LE(std::abs(*s.reference), 1e-15);
        }
}

TEST(SkEquivalence, SquaredOverlapExpansion) {
    // R^N squared splits into the diagonal 1/N and the pair correlations,
    // computed here by direct enumeration of the SK table.
    for (std::size_t n : {4u, 7u}) {
        const auto J = sample_sk_couplings(n, {}, 9);
        const auto t = exact_gibbs_sk(J, n, 0.8);
        std::vector<double> c(n * n, 0.0);
        for (std::size_t cfg = 0; cfg < t.probs.size(); ++cfg)
            for (std::size_t x = 0; x < n; ++x)
                for (std::size_t y = 0; y < n; ++y)
                    c[x * n + y] += t.probs[cfg] * (((cfg >> x) ^ (cfg >> y)) & 1 ? -1.0 : 1.0);
        double off = 0.0;
        for (std::size_t x = 0; x < n; ++x)
            for (std::size_t y = 0; y < n; ++y)
                if (x != y) off += c[x * n + y] * c[x * n + y];
        const double nn = static_cast<double>(n);
        const CorrelationTable corr(t.probs);
        const auto f = Monomial::parse("q12^2");
        EXPECT_NEAR(exact_moment(corr, spin_sites(n), f), 1.0 / nn + off / (nn * nn), 1e-12);
        EXPECT_NEAR(distinct_site_term(corr, spin_sites(n), f), c[1] * c[1], 1e-12);
    }
}

TEST(SkEquivalence, SlopeInBand) {
    SkEquivalenceOptions o;
    o.sizes = {4, 8, 12, 16};
    o.draws = 100;
    const auto r = sk_equivalence_test(o);
    const auto* c = find_check(r, "slope-in-band");
    ASSERT_NE(c, nullptr);
    EXPECT_TRUE(c->pass) << c->value;
    EXPECT_EQ(r.verdict, "statistical-pass");
}

TEST(SkEquivalence, ThreadCountDoesNotChangeResults) {
    SkEquivalenceOptions o;
    o.sizes = {6, 8};
    o.draws = 40;
    const auto a = to_json(sk_equivalence_test(o, Executor(1)));
    const auto b = to_json(sk_equivalence_test(o, Executor(4)));
    EXPECT_EQ(a.dump(), b.dump());
}
