#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spikes/keypoints.hpp"
#include "support.hpp"

#include <numbers>
#include <set>

using namespace spikes;
using doctest::Approx;

namespace {

// 90 degrees clockwise on screen: (x, y) -> (h - 1 - y, x).
Frame rotate90(const Frame& f)
{
    Frame out(f.height(), f.width());
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x)
            out.set(f.height() - 1 - y, x, f.at(x, y));
    return out;
}

Vec2 rotate90_point(Vec2 p, int h)
{
    return {h - p.y, p.x};
}

double angle_gap(double a, double b)
{
    const double d = std::abs(wrap_angle(a - b));
    return std::min(d, 2 * std::numbers::pi - d);
}

// Overlapping random rectangles: plenty of corners.
Frame textured(int w, int h, std::uint32_t seed)
{
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> px(0, w - 1), py(0, h - 1), side(4, 18), level(20, 170);
    Frame f = testing::solid(w, h, {90, 90, 90});
    for (int r = 0; r < w * h / 60; ++r) {
        const int x0 = px(rng), y0 = py(rng), rw = side(rng), rh = side(rng);
        const Rgb c{static_cast<std::uint8_t>(level(rng)), static_cast<std::uint8_t>(level(rng)),
                    static_cast<std::uint8_t>(level(rng))};
        for (int y = y0; y < std::min(h, y0 + rh); ++y)
            for (int x = x0; x < std::min(w, x0 + rw); ++x)
                f.set(x, y, c);
    }
    return f;
}

Descriptor unit(std::size_t axis)
{
    Descriptor d;
    d.values[axis] = 1.0f;
    return d;
}

/// Unit descriptor at Euclidean distance `dist` from unit(0).
Descriptor at_distance(double dist, std::size_t axis)
{
    const double t = 2.0 * std::asin(dist / 2.0);
    Descriptor d;
    d.values[0] = static_cast<float>(std::cos(t));
    d.values[axis] = static_cast<float>(std::sin(t));
    return d;
}

}  // namespace

TEST_CASE("uniform frame has no keypoints")
{
    CHECK(detect(testing::solid(80, 60, {90, 90, 90})).empty());
}

TEST_CASE("a single corner is found in place")
{
    Frame f = testing::solid(100, 100, {0, 0, 0});
    for (int y = 50; y < 100; ++y)
        for (int x = 50; x < 100; ++x)
            f.set(x, y, {255, 255, 255});
    const auto kps = detect(f);
    REQUIRE_FALSE(kps.empty());
    bool near = false;
    for (const Keypoint& k : kps)
        near = near || (k.position - Vec2{50, 50}).norm() <= 3.0;
    CHECK(near);
}

TEST_CASE("detect output is sorted, truncated and well formed")
{
    const Frame f = textured(160, 120, 4);
    DetectorParams p;
    const auto all = detect(f, p);
    REQUIRE(all.size() > 20);
    for (std::size_t i = 1; i < all.size(); ++i)
        CHECK(all[i - 1].response >= all[i].response);
    for (const Keypoint& k : all) {
        CHECK(k.orientation >= 0.0);
        CHECK(k.orientation < 2 * std::numbers::pi);
        CHECK(k.position.x >= 0.0);
        CHECK(k.position.x < 160.0);
    }
    p.max_keypoints = 7;
    const auto few = detect(f, p);
    REQUIRE(few.size() == 7);
    for (std::size_t i = 0; i < few.size(); ++i)
        CHECK(few[i] == all[i]);
}

TEST_CASE("orientations follow a 90 degree rotation")
{
    const Frame f = textured(120, 120, 9);
    const Frame r = rotate90(f);
    const auto a = detect(f);
    const auto b = detect(r);
    int pairs = 0, agree = 0;
    for (const Keypoint& k : a) {
        const Vec2 target = rotate90_point(k.position, f.height());
        for (const Keypoint& m : b)
            if ((m.position - target).norm() <= 1.5) {
                ++pairs;
                if (angle_gap(m.orientation, k.orientation + std::numbers::pi / 2) <= 0.2)
                    ++agree;
                break;
            }
    }
    REQUIRE(pairs >= 10);
    CHECK(agree >= 0.8 * pairs);
}

TEST_CASE("describe is deterministic and normalized")
{
    const Frame f = textured(120, 100, 2);
    const auto kps = detect(f);
    const Description d1 = describe(f, kps);
    const Description d2 = describe(f, kps);
    REQUIRE(d1.descriptors.size() == d1.keypoints.size());
    CHECK(d1.descriptors == d2.descriptors);
    for (const Descriptor& d : d1.descriptors) {
        double s = 0.0;
        for (const float v : d.values)
            s += static_cast<double>(v) * v;
        CHECK(std::sqrt(s) == Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("descriptors tolerate a brightness gain")
{
    const Frame f = textured(120, 100, 3);
    Frame g = f;
    for (std::uint8_t& c : g.data())
        c = static_cast<std::uint8_t>(std::min(255L, std::lround(c * 1.3)));
    const auto kps = detect(f);
    const Description a = describe(f, kps);
    const Description b = describe(g, kps);
    REQUIRE(a.keypoints.size() == b.keypoints.size());
    REQUIRE(a.keypoints.size() > 10);
    for (std::size_t i = 0; i < a.descriptors.size(); ++i)
        CHECK(descriptor_distance(a.descriptors[i], b.descriptors[i]) < 0.1);
}

TEST_CASE("descriptors follow a 90 degree rotation when the orientation does")
{
    const Frame f = textured(120, 120, 6);
    const Frame r = rotate90(f);
    const auto kps = detect(f);
    std::vector<Keypoint> turned;
    for (Keypoint k : kps) {
        k.position = rotate90_point(k.position, f.height());
        k.orientation = wrap_angle(k.orientation + std::numbers::pi / 2);
        turned.push_back(k);
    }
    const Description a = describe(f, kps);
    const Description b = describe(r, turned);
    REQUIRE(a.keypoints.size() == b.keypoints.size());
    REQUIRE(a.keypoints.size() > 10);
    for (std::size_t i = 0; i < a.descriptors.size(); ++i)
        CHECK(descriptor_distance(a.descriptors[i], b.descriptors[i]) < 0.25);
}

TEST_CASE("describe drops and reports border keypoints")
{
    const Frame f = textured(80, 80, 1);
    std::vector<Keypoint> kps{{{40, 40}, 0.0, 1.0, 1.0}, {{2, 40}, 0.0, 1.0, 1.0}, {{40, 79}, 0.0, 1.0, 1.0}};
    const Description d = describe(f, kps);
    CHECK(d.keypoints.size() == 1);
    CHECK(d.dropped == std::vector<std::size_t>{1, 2});
    CHECK(d.keypoints[0] == kps[0]);
}

TEST_CASE("match examples")
{
    const std::vector<Descriptor> one{unit(0)};
    const auto m = match(one, one);
    REQUIRE(m.size() == 1);
    CHECK(m[0].index_a == 0);
    CHECK(m[0].index_b == 0);
    CHECK(m[0].distance == 0.0);

    // 0.2 < 0.75 * 0.3 = 0.225 passes the ratio test.
    const std::vector<Descriptor> b{at_distance(0.2, 1), at_distance(0.3, 2)};
    CHECK(descriptor_distance(one[0], b[0]) == Approx(0.2).epsilon(1e-6));
    CHECK(descriptor_distance(one[0], b[1]) == Approx(0.3).epsilon(1e-6));
    const auto kept = match(one, b);
    REQUIRE(kept.size() == 1);
    CHECK(kept[0].index_b == 0);

    // 0.2 >= 0.75 * 0.25 = 0.1875 does not.
    const std::vector<Descriptor> close{at_distance(0.2, 1), at_distance(0.25, 2)};
    CHECK(match(one, close).empty());

    // Singleton cap.
    const std::vector<Descriptor> far{at_distance(0.8, 3)};
    CHECK(match(one, far).empty());

    CHECK(match({}, one).empty());
    CHECK(match(one, {}).empty());
}

TEST_CASE("match agrees with the brute-force oracle")
{
    std::mt19937 rng(17);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t na = 1 + trial % 10, nb = 1 + (trial * 7) % 10;
        std::vector<Descriptor> a, b;
        for (std::size_t i = 0; i < nb; ++i)
            b.push_back(testing::random_descriptor(rng));
        for (std::size_t i = 0; i < na; ++i) {
            // Mostly noisy copies of b so the ratio test has work to do.
            Descriptor d = b[i % nb];
            std::normal_distribution<float> noise(0.0f, trial % 3 == 0 ? 0.05f : 0.02f);
            double s = 0.0;
            for (float& v : d.values) {
                v = std::abs(v + noise(rng));
                s += static_cast<double>(v) * v;
            }
            for (float& v : d.values)
                v = static_cast<float>(v / std::sqrt(s));
            a.push_back(trial % 4 == 0 ? testing::random_descriptor(rng) : d);
        }
        const auto got = match(a, b);
        const auto want = testing::brute_force_match(a, b, 0.75, 0.7);
        REQUIRE(got == want);

        std::set<int> seen_a, seen_b;
        for (const KeypointMatch& m : got) {
            CHECK(seen_a.insert(m.index_a).second);
            CHECK(seen_b.insert(m.index_b).second);
            for (std::size_t j = 0; j < b.size(); ++j)
                CHECK(descriptor_distance(a[static_cast<std::size_t>(m.index_a)], b[j]) >= m.distance);
        }
    }
}

TEST_CASE("one-to-one pruning keeps the closest claimant")
{
    const std::vector<Descriptor> b{unit(0), unit(5)};
    const std::vector<Descriptor> a{at_distance(0.3, 1), at_distance(0.1, 2)};
    const auto m = match(a, b);
    REQUIRE(m.size() == 1);
    CHECK(m[0].index_a == 1);
    CHECK(m[0].index_b == 0);
}

TEST_CASE("wrap_angle")
{
    CHECK(wrap_angle(0.0) == 0.0);
    CHECK(wrap_angle(-std::numbers::pi / 2) == Approx(1.5 * std::numbers::pi));
    CHECK(wrap_angle(5 * std::numbers::pi) == Approx(std::numbers::pi));
    CHECK(wrap_angle(2 * std::numbers::pi) < 2 * std::numbers::pi);
}
