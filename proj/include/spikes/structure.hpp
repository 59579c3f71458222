#pragma once

#include "spikes/core.hpp"
#include "spikes/keypoints.hpp"
#include "spikes/segmentation.hpp"

#include <span>
#include <vector>

namespace spikes {

/// Edge from the superpixel center to one attached keypoint.
struct KeypointLink {
    int keypoint = 0;          ///< index into the keypoint set the structure was built from
    Vec2 edge;                 ///< keypoint position minus superpixel center
    double orientation = 0.0;  ///< keypoint principal orientation

    bool operator==(const KeypointLink&) const = default;
};

/// Superpixel-keypoints structure: a superpixel plus every keypoint strictly
/// within `radius` of its center. Links are sorted by keypoint index.
struct Spikes {
    int superpixel = -1;
    Vec2 center;
    HsvHistogram histogram;
    std::vector<KeypointLink> links;
    double radius = 0.0;

    bool operator==(const Spikes&) const = default;
};

/// Attach keypoints to the superpixel center if ||x_k - x_s|| < radius.
std::vector<KeypointLink> link_keypoints(Vec2 center, std::span<const Keypoint> keypoints, double radius);

std::vector<Spikes> build_spikes(std::span<const Superpixel> superpixels, std::span<const Keypoint> keypoints,
                                 double radius);

/// Express `e` in the canonical frame of a keypoint with the given orientation.
Vec2 reorient_edge(Vec2 e, double orientation);

/// exp(-||e'_m - e'_n|| / (2R)) with both edges reoriented.
double gamma(Vec2 e_m, double theta_m, Vec2 e_n, double theta_n, double radius);

/// One-to-one keypoint correspondence between an "a" set and a "b" set.
class KeypointCorrespondence {
public:
    KeypointCorrespondence() = default;
    KeypointCorrespondence(std::size_t size_a, std::size_t size_b);
    KeypointCorrespondence(std::size_t size_a, std::size_t size_b, std::span<const KeypointMatch> matches);

    /// Index in b matched to `a`, or -1.
    int b_of(int a) const
    {
        return a >= 0 && static_cast<std::size_t>(a) < a_to_b_.size() ? a_to_b_[static_cast<std::size_t>(a)] : -1;
    }
    int a_of(int b) const
    {
        return b >= 0 && static_cast<std::size_t>(b) < b_to_a_.size() ? b_to_a_[static_cast<std::size_t>(b)] : -1;
    }
    void add(int a, int b);
    KeypointCorrespondence inverse() const;
    std::size_t size_a() const { return a_to_b_.size(); }
    std::size_t size_b() const { return b_to_a_.size(); }

private:
    std::vector<int> a_to_b_;
    std::vector<int> b_to_a_;
};

struct SimilarityScore {
    double total = 0.0;
    double color_part = 0.0;
    double structure_part = 0.0;
    int n_kp_matches = 0;

    bool operator==(const SimilarityScore&) const = default;
};

/// Similarity z between `s_a` (links index set a) and `s_b` (links index set b).
/// Zero when the Bhattacharyya distance reaches `theta_c`; otherwise
/// z_c = exp(-d) plus the gamma-weighted count of matched keypoint pairs.
/// Structure terms are summed in ascending order, which makes the score
/// exactly symmetric under swapping the arguments and inverting the matches.
SimilarityScore similarity(const Spikes& s_a, const Spikes& s_b, const KeypointCorrespondence& matches,
                           double theta_c);

}  // namespace spikes
