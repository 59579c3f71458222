#include "spikes/structure.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace spikes {

std::vector<KeypointLink> link_keypoints(Vec2 center, std::span<const Keypoint> keypoints, double radius)
{
    std::vector<KeypointLink> links;
    const double r2 = radius * radius;
    for (std::size_t k = 0; k < keypoints.size(); ++k) {
        const Vec2 e = keypoints[k].position - center;
        // Compare squared first, confirm with the exact norm on the boundary.
        const double d2 = e.squared_norm();
        if (d2 > r2 * (1.0 + 1e-12))
            continue;
        if (e.norm() < radius)
            links.push_back({static_cast<int>(k), e, keypoints[k].orientation});
    }
    return links;
}

std::vector<Spikes> build_spikes(std::span<const Superpixel> superpixels, std::span<const Keypoint> keypoints,
                                 double radius)
{
    if (!(radius > 0.0))
        throw std::invalid_argument("build_spikes: radius must be positive");
    std::vector<Spikes> out;
    out.reserve(superpixels.size());
    for (const Superpixel& sp : superpixels) {
        Spikes s;
        s.superpixel = sp.id;
        s.center = sp.center;
        s.histogram = sp.histogram;
        s.radius = radius;
        s.links = link_keypoints(sp.center, keypoints, radius);
        out.push_back(std::move(s));
    }
    return out;
}

Vec2 reorient_edge(Vec2 e, double orientation)
{
    const double c = std::cos(orientation), s = std::sin(orientation);
    return {c * e.x + s * e.y, -s * e.x + c * e.y};
}

double gamma(Vec2 e_m, double theta_m, Vec2 e_n, double theta_n, double radius)
{
    const Vec2 d = reorient_edge(e_m, theta_m) - reorient_edge(e_n, theta_n);
    return std::exp(-d.norm() / (2.0 * radius));
}

KeypointCorrespondence::KeypointCorrespondence(std::size_t size_a, std::size_t size_b)
    : a_to_b_(size_a, -1), b_to_a_(size_b, -1)
{
}

KeypointCorrespondence::KeypointCorrespondence(std::size_t size_a, std::size_t size_b,
                                               std::span<const KeypointMatch> matches)
    : KeypointCorrespondence(size_a, size_b)
{
    for (const KeypointMatch& m : matches)
        add(m.index_a, m.index_b);
}

void KeypointCorrespondence::add(int a, int b)
{
    if (a < 0 || b < 0 || static_cast<std::size_t>(a) >= a_to_b_.size() || static_cast<std::size_t>(b) >= b_to_a_.size())
        throw std::out_of_range("keypoint correspondence index out of range");
    if (a_to_b_[static_cast<std::size_t>(a)] >= 0 || b_to_a_[static_cast<std::size_t>(b)] >= 0)
        throw std::invalid_argument("keypoint correspondence must be one-to-one");
    a_to_b_[static_cast<std::size_t>(a)] = b;
    b_to_a_[static_cast<std::size_t>(b)] = a;
}

KeypointCorrespondence KeypointCorrespondence::inverse() const
{
    KeypointCorrespondence inv;
    inv.a_to_b_ = b_to_a_;
    inv.b_to_a_ = a_to_b_;
    return inv;
}

SimilarityScore similarity(const Spikes& s_a, const Spikes& s_b, const KeypointCorrespondence& matches,
                           double theta_c)
{
    SimilarityScore z;
    const double d = bhattacharyya(s_a.histogram, s_b.histogram);
    if (d >= theta_c)
        return z;
    z.color_part = std::exp(-d);

    // Normalize by the description diameter of the pair; both sides are built
    // with the same radius in practice.
    const double radius = std::max(s_a.radius, s_b.radius);
    std::vector<double> terms;
    for (const KeypointLink& m : s_a.links) {
        const int target = matches.b_of(m.keypoint);
        if (target < 0)
            continue;
        const auto it = std::lower_bound(s_b.links.begin(), s_b.links.end(), target,
                                         [](const KeypointLink& l, int k) { return l.keypoint < k; });
        if (it == s_b.links.end() || it->keypoint != target)
            continue;
        terms.push_back(gamma(m.edge, m.orientation, it->edge, it->orientation, radius));
    }
    std::sort(terms.begin(), terms.end());
    double zk = 0.0;
    for (const double t : terms)
        zk += t;

    z.structure_part = zk;
    z.n_kp_matches = static_cast<int>(terms.size());
    z.total = z.color_part + z.structure_part;
    return z;
}

}  // namespace spikes
