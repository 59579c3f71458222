#pragma once

#include "spikes/core.hpp"
#include "spikes/keypoints.hpp"
#include "spikes/tracker.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace testing {

using namespace spikes;

inline Frame solid(int w, int h, Rgb c)
{
    Frame f(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            f.set(x, y, c);
    return f;
}

inline Frame random_frame(int w, int h, std::mt19937& rng)
{
    std::uniform_int_distribution<int> d(0, 255);
    Frame f(w, h);
    for (std::uint8_t& c : f.data())
        c = static_cast<std::uint8_t>(d(rng));
    return f;
}

/// Smooth random blobs so SLIC has structure to follow.
inline Frame blobby_frame(int w, int h, std::mt19937& rng, int n_blobs = 12)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Frame f = solid(w, h, {static_cast<std::uint8_t>(u(rng) * 255), static_cast<std::uint8_t>(u(rng) * 255),
                           static_cast<std::uint8_t>(u(rng) * 255)});
    for (int b = 0; b < n_blobs; ++b) {
        const double cx = u(rng) * w, cy = u(rng) * h, r = 5 + u(rng) * w / 4.0;
        const Rgb c{static_cast<std::uint8_t>(u(rng) * 255), static_cast<std::uint8_t>(u(rng) * 255),
                    static_cast<std::uint8_t>(u(rng) * 255)};
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (std::hypot(x + 0.5 - cx, y + 0.5 - cy) < r)
                    f.set(x, y, c);
    }
    return f;
}

inline HsvHistogram random_histogram(std::mt19937& rng, int support = 20)
{
    HsvHistogram h;
    std::uniform_int_distribution<int> bin(0, kHistogramBins - 1);
    std::uniform_real_distribution<double> w(0.0, 1.0);
    for (int i = 0; i < support; ++i)
        h.bins[static_cast<std::size_t>(bin(rng))] += w(rng) + 1e-3;
    h.normalize();
    return h;
}

inline Descriptor random_descriptor(std::mt19937& rng)
{
    std::normal_distribution<float> n(0.0f, 1.0f);
    Descriptor d;
    double s = 0.0;
    for (float& v : d.values) {
        v = std::abs(n(rng));
        s += static_cast<double>(v) * v;
    }
    for (float& v : d.values)
        v = static_cast<float>(v / std::sqrt(s));
    return d;
}

/// Exhaustive ratio test plus one-to-one pruning, written independently of
/// the library: sort all distances per row, then resolve owners by scanning.
inline std::vector<KeypointMatch> brute_force_match(const std::vector<Descriptor>& a, const std::vector<Descriptor>& b,
                                                    double ratio, double cap)
{
    std::vector<KeypointMatch> kept;
    for (std::size_t i = 0; i < a.size() && !b.empty(); ++i) {
        std::vector<std::pair<double, int>> d;
        for (std::size_t j = 0; j < b.size(); ++j)
            d.push_back({descriptor_distance(a[i], b[j]), static_cast<int>(j)});
        std::stable_sort(d.begin(), d.end(), [](auto& x, auto& y) { return x.first < y.first; });
        const bool ok = b.size() == 1 ? d[0].first < cap : d[0].first < ratio * d[1].first;
        if (ok)
            kept.push_back({static_cast<int>(i), d[0].second, d[0].first});
    }
    std::vector<KeypointMatch> out;
    for (const KeypointMatch& m : kept) {
        bool best = true;
        for (const KeypointMatch& o : kept)
            if (o.index_b == m.index_b
                && (o.distance < m.distance || (o.distance == m.distance && o.index_a < m.index_a)))
                best = false;
        if (best)
            out.push_back(m);
    }
    return out;
}

/// Literal three-step greedy matching on a score table.
inline std::vector<MatchPair> brute_force_select(const CandidateTable& t, const MatchGate& g)
{
    std::vector<MatchPair> out;
    if (t.n_query == 0)
        return out;
    // Step 1: nearest neighbour per model part.
    std::vector<int> nn(t.n_model, -1);
    for (std::size_t i = 0; i < t.n_model; ++i) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < t.n_query; ++j)
            best = std::max(best, t.score(i, j).total);
        for (std::size_t j = 0; j < t.n_query && nn[i] < 0; ++j)
            if (t.score(i, j).total == best)
                nn[i] = static_cast<int>(j);
    }
    // Step 2: among parts sharing a query, only the highest score survives.
    for (std::size_t i = 0; i < t.n_model; ++i) {
        const auto j = static_cast<std::size_t>(nn[i]);
        bool survives = true;
        for (std::size_t k = 0; k < t.n_model; ++k) {
            if (k == i || nn[k] != nn[i])
                continue;
            const double zk = t.score(k, j).total, zi = t.score(i, j).total;
            if (zk > zi || (zk == zi && k < i))
                survives = false;
        }
        if (!survives)
            continue;
        // Step 3: score and motion rejection.
        const SimilarityScore& z = t.score(i, j);
        const double thr = z.n_kp_matches == 0 ? std::exp(-g.theta_c) : std::exp(-g.theta_c) + g.lambda1;
        if (z.total <= thr || t.disp(i, j) >= g.motion_limit)
            continue;
        out.push_back({static_cast<int>(i), static_cast<int>(j), z, t.disp(i, j),
                       t.query_centers.empty() ? Vec2{} : t.query_centers[j]});
    }
    return out;
}

/// Random table with deliberate ties, zero scores and keypoint counts.
inline CandidateTable random_table(std::mt19937& rng, std::size_t max_model = 8, std::size_t max_query = 8)
{
    std::uniform_int_distribution<std::size_t> nm(1, max_model), nq(1, max_query);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    CandidateTable t;
    t.n_model = nm(rng);
    t.n_query = nq(rng);
    const double levels[] = {0.0, 0.45, 0.4966, 0.6, 0.9, 1.2, 1.5, 2.2, 3.0};
    for (std::size_t k = 0; k < t.n_model * t.n_query; ++k) {
        SimilarityScore s;
        if (u(rng) < 0.3) {
            s.total = levels[static_cast<std::size_t>(u(rng) * 9)];
        } else if (u(rng) < 0.2) {
            s.total = 0.0;
        } else {
            s.color_part = std::exp(-0.7 * u(rng));
            s.n_kp_matches = static_cast<int>(u(rng) * 4);
            s.structure_part = s.n_kp_matches * (0.4 + 0.6 * u(rng));
            s.total = s.color_part + s.structure_part;
        }
        if (s.total > 0.0 && s.color_part == 0.0) {
            s.color_part = s.total;
            s.n_kp_matches = u(rng) < 0.5 ? 0 : 1;
        }
        t.scores.push_back(s);
        t.displacement.push_back(u(rng) < 0.1 ? 45.0 : u(rng) * 80.0);
    }
    for (std::size_t j = 0; j < t.n_query; ++j)
        t.query_centers.push_back({u(rng) * 300, u(rng) * 200});
    return t;
}

inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto p = std::filesystem::temp_directory_path() / ("spikes_test_" + name);
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

}  // namespace testing
