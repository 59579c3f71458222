#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spikes {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class EmptyRegion : public Error {
public:
    EmptyRegion() : Error("histogram requested for an empty pixel region") {}
};

// ---------------------------------------------------------------------------
// Geometry
// ---------------------------------------------------------------------------

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2& operator+=(Vec2 o) { x += o.x; y += o.y; return *this; }
    constexpr bool operator==(const Vec2&) const = default;

    double norm() const { return std::hypot(x, y); }
    constexpr double squared_norm() const { return x * x + y * y; }
};

inline constexpr Vec2 operator*(double s, Vec2 v) { return v * s; }

/// Axis-aligned box with real-valued corner. Pixel (i, j) covers
/// [i, i+1) x [j, j+1), so its center sits at (i + 0.5, j + 0.5).
struct BoundingBox {
    double x = 0.0;
    double y = 0.0;
    double w = 0.0;
    double h = 0.0;

    constexpr Vec2 center() const { return {x + w / 2.0, y + h / 2.0}; }
    constexpr double area() const { return w * h; }
    constexpr bool valid() const { return w > 0.0 && h > 0.0; }

    constexpr bool contains(Vec2 p) const {
        return p.x >= x && p.x < x + w && p.y >= y && p.y < y + h;
    }
    /// Pixel-center containment.
    constexpr bool contains_pixel(int px, int py) const {
        return contains({px + 0.5, py + 0.5});
    }

    static constexpr BoundingBox centered(Vec2 c, double w, double h) {
        return {c.x - w / 2.0, c.y - h / 2.0, w, h};
    }
    /// Same center, dimensions multiplied by `factor`.
    constexpr BoundingBox inflated(double factor) const {
        return centered(center(), w * factor, h * factor);
    }

    constexpr bool operator==(const BoundingBox&) const = default;
};

double overlap_ratio(const BoundingBox& a, const BoundingBox& b);

// ---------------------------------------------------------------------------
// Frames
// ---------------------------------------------------------------------------

struct Rgb {
    std::uint8_t r = 0;
    std::uint8_t g = 0;
    std::uint8_t b = 0;
    constexpr bool operator==(const Rgb&) const = default;
};

/// Row-major 8-bit RGB image.
class Frame {
public:
    Frame() = default;
    Frame(int width, int height, int index = 0);
    Frame(int width, int height, std::vector<std::uint8_t> pixels, int index = 0);

    int width() const { return width_; }
    int height() const { return height_; }
    int index() const { return index_; }
    void set_index(int index) { index_ = index; }
    std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
    bool empty() const { return pixels_.empty(); }

    Rgb at(int x, int y) const {
        const std::size_t o = 3 * (static_cast<std::size_t>(y) * width_ + x);
        return {pixels_[o], pixels_[o + 1], pixels_[o + 2]};
    }
    Rgb at(std::size_t linear) const {
        return {pixels_[3 * linear], pixels_[3 * linear + 1], pixels_[3 * linear + 2]};
    }
    void set(int x, int y, Rgb c) {
        const std::size_t o = 3 * (static_cast<std::size_t>(y) * width_ + x);
        pixels_[o] = c.r;
        pixels_[o + 1] = c.g;
        pixels_[o + 2] = c.b;
    }
    bool inside(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

    std::span<const std::uint8_t> data() const { return pixels_; }
    std::span<std::uint8_t> data() { return pixels_; }

    /// Copy of the sub-rectangle [x0, x0+w) x [y0, y0+h); must lie inside the frame.
    Frame crop(int x0, int y0, int w, int h) const;

    bool operator==(const Frame&) const = default;

private:
    int width_ = 0;
    int height_ = 0;
    int index_ = 0;
    std::vector<std::uint8_t> pixels_;
};

// ---------------------------------------------------------------------------
// Color
// ---------------------------------------------------------------------------

struct Hsv {
    double h = 0.0;  ///< degrees in [0, 360)
    double s = 0.0;  ///< [0, 1]
    double v = 0.0;  ///< [0, 1]
};

/// Hexcone HSV. Achromatic inputs get hue 0.
Hsv rgb_to_hsv(std::uint8_t r, std::uint8_t g, std::uint8_t b);

inline constexpr int kHueBins = 6;
inline constexpr int kSatBins = 6;
inline constexpr int kValBins = 6;
inline constexpr int kHistogramBins = kHueBins * kSatBins * kValBins;

/// Normalized 6x6x6 HSV histogram.
struct HsvHistogram {
    std::array<double, kHistogramBins> bins{};

    double sum() const;
    /// Rescale so the bins sum to one. No-op on an all-zero histogram.
    void normalize();
    bool operator==(const HsvHistogram&) const = default;
};

int hsv_bin(const Hsv& c);

/// Histogram of the pixels at the given linear indices (y * width + x).
/// Throws EmptyRegion for an empty region and std::out_of_range for an index
/// outside the frame.
HsvHistogram histogram(const Frame& frame, std::span<const std::int32_t> region);

/// d = sqrt(1 - BC), clamped to [0, 1].
double bhattacharyya(const HsvHistogram& a, const HsvHistogram& b);

}  // namespace spikes
