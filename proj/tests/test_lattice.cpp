#include <gtest/gtest.h>

#include <map>
#include <set>

#include "rost/error.hpp"
#include "rost/lattice.hpp"
#include "rost/overlap.hpp"
#include "rost/random.hpp"
#include "rost/spins.hpp"
#include "test_util.hpp"

using namespace rost;
using rost::testing::error_code;

namespace {

SpinConfig random_config(std::size_t n, Rng& rng) {
    SpinConfig s(n);
    for (auto& x : s) x = (rng() >> 63) ? Spin{-1} : Spin{1};
    return s;
}

}  // namespace

TEST(Lattice, RingOfFour) {
    const Lattice lat(1, {4});
    EXPECT_EQ(lat.vertex_count(), 4u);
    ASSERT_EQ(lat.edge_count(), 4u);
    std::set<std::pair<Vertex, Vertex>> edges;
    for (const auto& e : lat.edges()) edges.insert({e.a, e.b});
    const std::set<std::pair<Vertex, Vertex>> ring{{0, 1}, {1, 2}, {2, 3}, {0, 3}};
    EXPECT_EQ(edges, ring);
}

TEST(Lattice, ThreeByThreeCounts) {
    const Lattice lat(2, {3, 3});
    EXPECT_EQ(lat.vertex_count(), 9u);
    EXPECT_EQ(lat.edge_count(), 18u);
}

TEST(Lattice, SideTwoIsDegenerate) {
    EXPECT_EQ(error_code([] { Lattice(1, {2}); }), "degenerate-torus");
    EXPECT_EQ(error_code([] { Lattice(2, {3, 2}); }), "degenerate-torus");
    EXPECT_EQ(error_code([] { Lattice(4, {3, 3, 3, 3}); }), "bad-dimension");
}

TEST(Lattice, DegreeIsTwoD) {
    for (const auto& [d, sides] : std::vector<std::pair<int, std::vector<int>>>{{1, {5}}, {2, {3, 4}}, {3, {3, 3, 4}}}) {
        const Lattice lat(d, sides);
        std::vector<int> degree(lat.vertex_count(), 0);
        for (const auto& e : lat.edges()) {
            ++degree[e.a];
            ++degree[e.b];
        }
        for (int k : degree) EXPECT_EQ(k, 2 * d);
        EXPECT_EQ(lat.edge_count(), static_cast<std::size_t>(d) * lat.vertex_count());
    }
}

TEST(Lattice, EdgesAreUniqueAndCanonical) {
    const Lattice lat(3, {3, 4, 5});
    std::set<std::pair<Vertex, Vertex>> seen;
    for (std::size_t i = 0; i < lat.edge_count(); ++i) {
        const auto& e = lat.edge(static_cast<EdgeIndex>(i));
        EXPECT_LT(e.a, e.b);
        EXPECT_TRUE(seen.insert({e.a, e.b}).second);
        if (i > 0) {
            const auto& p = lat.edge(static_cast<EdgeIndex>(i - 1));
            EXPECT_TRUE(p.a < e.a || (p.a == e.a && p.direction <= e.direction));
        }
    }
    const Lattice again(3, {3, 4, 5});
    ASSERT_EQ(again.edge_count(), lat.edge_count());
    for (std::size_t i = 0; i < lat.edge_count(); ++i) {
        EXPECT_EQ(again.edges()[i].a, lat.edges()[i].a);
        EXPECT_EQ(again.edges()[i].b, lat.edges()[i].b);
    }
}

TEST(Lattice, JsonRoundTrip) {
    const Lattice lat(2, {3, 5});
    const nlohmann::json j = lat;
    EXPECT_EQ(j.dump(), R"({"d":2,"sides":[3,5]})");
    EXPECT_TRUE(lattice_from_json(j) == lat);
}

TEST(Window, FullLatticeHasNoBoundary) {
    const Lattice lat(2, {4, 3});
    const auto we = window_edges(lat, full_window(lat));
    EXPECT_EQ(we.interior.size(), lat.edge_count());
    EXPECT_TRUE(we.boundary.empty());
    EXPECT_EQ(we.vertices.size(), lat.vertex_count());
}

TEST(Window, RingOfSixWindowOfThree) {
    const Lattice lat(1, {6});
    const auto we = window_edges(lat, Window{{0}, {3}});
    EXPECT_EQ(we.interior.size(), 2u);
    EXPECT_EQ(we.boundary.size(), 2u);
}

TEST(Window, ThreeByThreeInFiveByFive) {
    const Lattice lat(2, {5, 5});
    const auto we = window_edges(lat, Window{{1, 1}, {3, 3}});
    EXPECT_EQ(we.interior.size(), 12u);
    EXPECT_EQ(we.boundary.size(), 12u);
}

TEST(Window, WrapsAroundTheSeam) {
    const Lattice lat(2, {5, 5});
    const auto a = window_edges(lat, Window{{4, 4}, {3, 3}});
    EXPECT_EQ(a.interior.size(), 12u);
    EXPECT_EQ(a.boundary.size(), 12u);
    EXPECT_EQ(a.vertices.size(), 9u);
}

TEST(Window, Errors) {
    const Lattice lat(1, {6});
    EXPECT_EQ(error_code([&] { window_edges(lat, Window{{0}, {7}}); }), "window-too-large");
    EXPECT_EQ(error_code([&] { window_edges(lat, Window{{0}, {1}}); }), "empty-window");
}

TEST(Translate, ZeroShiftIsIdentity) {
    const Lattice lat(2, {3, 4});
    Rng rng(7);
    const auto s = random_config(lat.vertex_count(), rng);
    const std::vector<long> zero{0, 0};
    EXPECT_EQ(translate_vertices<Spin>(lat, s, zero), s);
}

TEST(Translate, InverseShiftRestores) {
    const Lattice lat(3, {3, 4, 5});
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        const auto s = random_config(lat.vertex_count(), rng);
        std::vector<long> a(3), minus(3);
        for (int k = 0; k < 3; ++k) {
            a[k] = static_cast<long>(rng.below(11)) - 5;
            minus[k] = -a[k];
        }
        const auto t = translate_vertices<Spin>(lat, s, a);
        EXPECT_EQ(translate_vertices<Spin>(lat, t, minus), s);

        std::vector<double> x(lat.edge_count());
        for (auto& v : x) v = rng.uniform();
        EXPECT_EQ(translate_edges<double>(lat, translate_edges<double>(lat, x, a), minus), x);
    }
}

TEST(Translate, EdgeOverlapInvariantOnFullLattice) {
    const Lattice lat(1, {4});
    const auto we = window_edges(lat, full_window(lat));
    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        const auto s = random_config(4, rng);
        const auto t = random_config(4, rng);
        const std::vector<long> a{static_cast<long>(rng.below(4))};
        const double q = edge_overlap(s, t, lat, we.interior);
        EXPECT_EQ(edge_overlap(translate_vertices<Spin>(lat, s, a), translate_vertices<Spin>(lat, t, a), lat,
                               we.interior),
                  q);
    }
}
