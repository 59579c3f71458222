#pragma once

#include "spikes/core.hpp"

#include <cstdint>
#include <vector>

namespace spikes {

/// A 4-connected region of the oversegmentation.
struct Superpixel {
    int id = 0;
    Vec2 center;                        ///< centroid of member pixel centers
    std::vector<std::int32_t> pixels;   ///< linear indices y * width + x
    HsvHistogram histogram;
};

struct SegmentationPlan {
    int n_superpixels = 1;
    double diameter = 1.0;  ///< target superpixel diameter D^s in pixels

    bool operator==(const SegmentationPlan&) const = default;
};

/// Plan for a frame of `frame_w` x `frame_h` so that roughly
/// `per_box` superpixels fall inside a `box_w` x `box_h` target:
/// N = max(1, round(per_box * w * h / (box_w * box_h))), D = sqrt(w * h / N).
SegmentationPlan plan_segmentation(int frame_w, int frame_h, double box_w, double box_h,
                                   double per_box = 30.0);

/// Same diameter, superpixel count rescaled to an area of `w` x `h`.
SegmentationPlan plan_for_area(const SegmentationPlan& plan, int w, int h);

struct SlicParams {
    double compactness = 10.0;
    int iterations = 10;
};

struct Segmentation {
    int width = 0;
    int height = 0;
    std::vector<std::int32_t> labels;  ///< superpixel id per pixel, row-major
    std::vector<Superpixel> superpixels;

    std::int32_t label_at(int x, int y) const { return labels[static_cast<std::size_t>(y) * width + x]; }
};

/// SLIC oversegmentation in CIELAB + xy. Deterministic: fixed iteration count,
/// lowest label wins distance ties, orphans merged into the largest neighbour.
Segmentation segment(const Frame& frame, const SegmentationPlan& plan, const SlicParams& params = {});

/// Label map as a binary 16-bit PGM (labels clamped to 65535).
std::vector<std::uint8_t> encode_label_pgm(const Segmentation& seg);

}  // namespace spikes
