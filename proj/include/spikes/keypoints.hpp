#pragma once

#include "spikes/core.hpp"

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace spikes {

struct Keypoint {
    Vec2 position;             ///< continuous pixel coordinates
    double orientation = 0.0;  ///< radians in [0, 2pi), image axes (y down)
    double response = 0.0;
    double scale = 1.0;

    bool operator==(const Keypoint&) const = default;
};

inline constexpr std::size_t kDescriptorSize = 128;

/// L2-normalized gradient-orientation histogram.
struct Descriptor {
    std::array<float, kDescriptorSize> values{};

    bool operator==(const Descriptor&) const = default;
};

double descriptor_distance(const Descriptor& a, const Descriptor& b);

struct KeypointMatch {
    int index_a = 0;
    int index_b = 0;
    double distance = 0.0;

    bool operator==(const KeypointMatch&) const = default;
};

struct DetectorParams {
    int max_keypoints = 2000;
    /// Side of the non-maximum-suppression cells; the tracker sets it to D^s / 2.
    int cell_size = 5;
    /// Keypoints closer than this to the border are not reported. The default
    /// leaves room for the full descriptor window.
    int border = 14;
    double harris_k = 0.04;
    double absolute_threshold = 1e-7;
    double relative_threshold = 0.01;
};

/// Harris corners with blockwise non-maximum suppression, each given the
/// dominant local gradient direction. Sorted by descending response.
std::vector<Keypoint> detect(const Frame& frame, const DetectorParams& params = {});

struct Description {
    std::vector<Keypoint> keypoints;       ///< keypoints that could be described
    std::vector<Descriptor> descriptors;   ///< parallel to `keypoints`
    std::vector<std::size_t> dropped;      ///< input indices too close to the border
};

/// 4x4 cells x 8 orientations sampled on a 16x16 grid rotated to each
/// keypoint's orientation; normalized, clipped at 0.2, renormalized.
Description describe(const Frame& frame, std::span<const Keypoint> keypoints);

/// Smallest distance a keypoint must keep from the border to be described.
double descriptor_margin();

struct MatchParams {
    double ratio = 0.75;
    /// Acceptance cap on the nearest distance when `set_b` has one element.
    double singleton_cap = 0.7;
};

/// Lowe ratio test from every element of `set_a` into `set_b`, then one-to-one
/// pruning keeping the closest match for each element of `set_b`.
/// Output is sorted by `index_a`.
std::vector<KeypointMatch> match(std::span<const Descriptor> set_a, std::span<const Descriptor> set_b,
                                 const MatchParams& params = {});

/// Angle wrapped into [0, 2pi).
double wrap_angle(double a);

}  // namespace spikes
