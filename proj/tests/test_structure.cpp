#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spikes/structure.hpp"
#include "support.hpp"

#include <algorithm>
#include <numbers>
#include <numeric>

using namespace spikes;
using doctest::Approx;

namespace {

Superpixel superpixel_at(int id, Vec2 c, const HsvHistogram& h)
{
    Superpixel s;
    s.id = id;
    s.center = c;
    s.histogram = h;
    s.pixels = {0};
    return s;
}

HsvHistogram one_bin(std::size_t b)
{
    HsvHistogram h;
    h.bins[b] = 1.0;
    return h;
}

Keypoint kp(double x, double y, double theta = 0.0)
{
    return {{x, y}, theta, 1.0, 1.0};
}

}  // namespace

TEST_CASE("build_spikes examples")
{
    const std::vector<Superpixel> sps{superpixel_at(0, {10, 10}, one_bin(0))};
    const std::vector<Keypoint> kps{kp(12, 10)};
    const auto s = build_spikes(sps, kps, 5.0);
    REQUIRE(s.size() == 1);
    REQUIRE(s[0].links.size() == 1);
    CHECK(s[0].links[0].edge == Vec2{2, 0});
    CHECK(s[0].links[0].keypoint == 0);
    CHECK(s[0].radius == 5.0);
}

TEST_CASE("a keypoint at exactly R is excluded")
{
    const std::vector<Superpixel> sps{superpixel_at(0, {10, 10}, one_bin(0))};
    const std::vector<Keypoint> kps{kp(15, 10), kp(13, 14), kp(14.999, 10)};
    const auto s = build_spikes(sps, kps, 5.0);
    REQUIRE(s[0].links.size() == 1);
    CHECK(s[0].links[0].keypoint == 2);
}

TEST_CASE("a keypoint can belong to several SPiKeS")
{
    const std::vector<Superpixel> sps{superpixel_at(0, {10, 10}, one_bin(0)), superpixel_at(1, {16, 10}, one_bin(0))};
    const std::vector<Keypoint> kps{kp(13, 10)};
    const auto s = build_spikes(sps, kps, 5.0);
    CHECK(s[0].links.size() == 1);
    CHECK(s[1].links.size() == 1);
    CHECK(s[1].links[0].edge == Vec2{-3, 0});
}

TEST_CASE("superpixel-only SPiKeS and bad radius")
{
    const std::vector<Superpixel> sps{superpixel_at(0, {10, 10}, one_bin(0))};
    CHECK(build_spikes(sps, {}, 5.0)[0].links.empty());
    CHECK_THROWS_AS(build_spikes(sps, {}, 0.0), std::invalid_argument);
}

TEST_CASE("attachment matches a brute-force distance check")
{
    std::mt19937 rng(2);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<Superpixel> sps;
        std::vector<Keypoint> kps;
        for (int i = 0; i < 20; ++i)
            sps.push_back(superpixel_at(i, {u(rng), u(rng)}, one_bin(0)));
        for (int i = 0; i < 60; ++i)
            kps.push_back(kp(u(rng), u(rng)));
        const double r = 5.0 + u(rng) / 4.0;
        const auto s = build_spikes(sps, kps, r);
        for (std::size_t i = 0; i < sps.size(); ++i) {
            std::vector<int> want;
            for (std::size_t k = 0; k < kps.size(); ++k)
                if (std::hypot(kps[k].position.x - sps[i].center.x, kps[k].position.y - sps[i].center.y) < r)
                    want.push_back(static_cast<int>(k));
            std::vector<int> got;
            for (const KeypointLink& l : s[i].links) {
                got.push_back(l.keypoint);
                CHECK(l.edge.norm() < r);
            }
            CHECK(got == want);
        }
    }
}

TEST_CASE("reorient_edge examples")
{
    CHECK(reorient_edge({1, 0}, 0.0) == Vec2{1, 0});
    const Vec2 r = reorient_edge({1, 0}, std::numbers::pi / 2);
    CHECK(r.x == Approx(0.0).epsilon(1e-12));
    CHECK(r.y == Approx(-1.0).epsilon(1e-12));

    std::mt19937 rng(4);
    std::uniform_real_distribution<double> u(-50, 50);
    for (int i = 0; i < 1000; ++i) {
        const Vec2 e{u(rng), u(rng)};
        CHECK(std::abs(reorient_edge(e, u(rng)).norm() - e.norm()) <= 1e-9);
    }
}

TEST_CASE("gamma examples")
{
    CHECK(gamma({3, 1}, 0.4, {3, 1}, 0.4, 5.0) == 1.0);
    CHECK(gamma({3, 0}, 0.0, {0, 3}, std::numbers::pi / 2, 7.0) == Approx(1.0).epsilon(1e-12));
    CHECK(gamma({4, 0}, 0.0, {-4, 0}, 0.0, 5.0) == Approx(std::exp(-0.8)).epsilon(1e-12));
    CHECK(gamma({4, 0}, 0.0, {-4, 0}, 0.0, 5.0) == Approx(0.4493).epsilon(1e-4));
}

TEST_CASE("gamma lies in (1/e, 1] for edges inside the radius")
{
    std::mt19937 rng(6);
    std::uniform_real_distribution<double> ang(0, 2 * std::numbers::pi), rad(0.0, 0.999);
    const double R = 10.0;
    for (int i = 0; i < 2000; ++i) {
        const double a1 = ang(rng), a2 = ang(rng);
        const Vec2 e1 = Vec2{std::cos(a1), std::sin(a1)} * (R * rad(rng));
        const Vec2 e2 = Vec2{std::cos(a2), std::sin(a2)} * (R * rad(rng));
        const double g = gamma(e1, ang(rng), e2, ang(rng), R);
        CHECK(g > std::exp(-1.0));
        CHECK(g <= 1.0);
    }
}

TEST_CASE("similarity examples")
{
    const std::vector<Superpixel> sps{superpixel_at(0, {10, 10}, one_bin(3))};
    const auto a = build_spikes(sps, {}, 5.0);
    const KeypointCorrespondence none(0, 0);
    const SimilarityScore z = similarity(a[0], a[0], none, 0.7);
    CHECK(z.total == 1.0);
    CHECK(z.color_part == 1.0);
    CHECK(z.structure_part == 0.0);
    CHECK(z.n_kp_matches == 0);

    // d = 0.8 is past the color gate.
    HsvHistogram h1, h2;
    h1.bins[0] = 1.0;
    const double bc = 1.0 - 0.8 * 0.8;  // sqrt(h1[0] h2[0]) = bc
    h2.bins[0] = bc * bc;
    h2.bins[1] = 1.0 - bc * bc;
    REQUIRE(bhattacharyya(h1, h2) == Approx(0.8).epsilon(1e-12));
    const auto s1 = build_spikes(std::vector{superpixel_at(0, {0, 0}, h1)}, {}, 5.0);
    const auto s2 = build_spikes(std::vector{superpixel_at(0, {0, 0}, h2)}, {}, 5.0);
    const SimilarityScore gated = similarity(s1[0], s2[0], none, 0.7);
    CHECK(gated == SimilarityScore{});

    // d = 0 plus one keypoint match with identical reoriented edges.
    const std::vector<Keypoint> ka{kp(12, 10, 0.3)}, kb{kp(52, 40, 0.3)};
    const auto sa = build_spikes(sps, ka, 5.0);
    const auto sb = build_spikes(std::vector{superpixel_at(0, {50, 40}, one_bin(3))}, kb, 5.0);
    KeypointCorrespondence m(1, 1);
    m.add(0, 0);
    const SimilarityScore two = similarity(sa[0], sb[0], m, 0.7);
    CHECK(two.total == 2.0);
    CHECK(two.color_part == 1.0);
    CHECK(two.structure_part == 1.0);
    CHECK(two.n_kp_matches == 1);
    CHECK(std::exp(-0.7) == Approx(0.4966).epsilon(1e-4));
}

namespace {

struct RandomPair {
    Spikes a, b;
    KeypointCorrespondence m;
};

RandomPair random_pair(std::mt19937& rng)
{
    std::uniform_real_distribution<double> u(-9.0, 9.0), ang(0, 6.28);
    std::vector<Keypoint> ka, kb;
    for (int i = 0; i < 12; ++i)
        ka.push_back(kp(u(rng), u(rng), ang(rng)));
    for (int i = 0; i < 12; ++i)
        kb.push_back(kp(u(rng), u(rng), ang(rng)));
    const HsvHistogram h1 = testing::random_histogram(rng, 3);
    HsvHistogram h2 = h1;
    h2.bins[static_cast<std::size_t>(rng() % kHistogramBins)] += 0.05;
    h2.normalize();
    RandomPair p;
    p.a = build_spikes(std::vector{superpixel_at(0, {0, 0}, h1)}, ka, 10.0)[0];
    p.b = build_spikes(std::vector{superpixel_at(0, {0.5, -0.5}, h2)}, kb, 10.0)[0];
    p.m = KeypointCorrespondence(12, 12);
    std::vector<int> perm(12);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    for (int i = 0; i < 12; ++i)
        if (rng() % 2)
            p.m.add(i, perm[static_cast<std::size_t>(i)]);
    return p;
}

}  // namespace

TEST_CASE("similarity is exactly symmetric")
{
    std::mt19937 rng(13);
    for (int trial = 0; trial < 300; ++trial) {
        const RandomPair p = random_pair(rng);
        const SimilarityScore ab = similarity(p.a, p.b, p.m, 0.7);
        const SimilarityScore ba = similarity(p.b, p.a, p.m.inverse(), 0.7);
        CHECK(ab == ba);
    }
}

TEST_CASE("similarity bounds and monotonicity")
{
    std::mt19937 rng(14);
    for (int trial = 0; trial < 300; ++trial) {
        RandomPair p = random_pair(rng);
        const SimilarityScore z = similarity(p.a, p.b, p.m, 0.7);
        if (z.total == 0.0)
            continue;
        CHECK(z.color_part >= std::exp(-1.0));
        CHECK(z.color_part <= 1.0);
        CHECK(z.total == z.color_part + z.structure_part);
        CHECK(z.structure_part <= z.n_kp_matches);
        CHECK(z.structure_part > z.n_kp_matches * std::exp(-1.0) - 1e-12);

        // Add one more matched keypoint to both structures.
        const int ia = 12, ib = 12;
        KeypointCorrespondence bigger(13, 13);
        for (int i = 0; i < 12; ++i)
            if (p.m.b_of(i) >= 0)
                bigger.add(i, p.m.b_of(i));
        bigger.add(ia, ib);
        p.a.links.push_back({ia, {1, 2}, 0.5});
        p.b.links.push_back({ib, {2, 1}, 0.1});
        const SimilarityScore more = similarity(p.a, p.b, bigger, 0.7);
        CHECK(more.total >= z.total);
        CHECK(more.n_kp_matches == z.n_kp_matches + 1);
    }
}

TEST_CASE("keypoint correspondence")
{
    KeypointCorrespondence m(3, 4);
    m.add(0, 2);
    CHECK(m.b_of(0) == 2);
    CHECK(m.a_of(2) == 0);
    CHECK(m.b_of(1) == -1);
    CHECK(m.b_of(99) == -1);
    CHECK_THROWS_AS(m.add(0, 3), std::invalid_argument);
    CHECK_THROWS_AS(m.add(1, 2), std::invalid_argument);
    CHECK_THROWS_AS(m.add(3, 0), std::out_of_range);
    const KeypointCorrespondence inv = m.inverse();
    CHECK(inv.b_of(2) == 0);
    CHECK(inv.size_a() == 4);
}
