#include "spikes/core.hpp"

#include <algorithm>
#include <numeric>
#include <string>

namespace spikes {

double overlap_ratio(const BoundingBox& a, const BoundingBox& b)
{
    const double ix = std::max(0.0, std::min(a.x + a.w, b.x + b.w) - std::max(a.x, b.x));
    const double iy = std::max(0.0, std::min(a.y + a.h, b.y + b.h) - std::max(a.y, b.y));
    const double inter = ix * iy;
    if (inter <= 0.0)
        return 0.0;
    const double uni = a.area() + b.area() - inter;
    return std::clamp(inter / uni, 0.0, 1.0);
}

Frame::Frame(int width, int height, int index)
    : Frame(width, height,
            std::vector<std::uint8_t>(
                3 * static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), 0),
            index)
{
}

Frame::Frame(int width, int height, std::vector<std::uint8_t> pixels, int index)
    : width_(width), height_(height), index_(index), pixels_(std::move(pixels))
{
    if (width <= 0 || height <= 0)
        throw std::invalid_argument("frame dimensions must be positive");
    if (pixels_.size() != 3 * static_cast<std::size_t>(width) * height)
        throw std::invalid_argument("frame buffer size " + std::to_string(pixels_.size())
                                    + " does not match " + std::to_string(width) + "x"
                                    + std::to_string(height) + "x3");
}

Frame Frame::crop(int x0, int y0, int w, int h) const
{
    if (x0 < 0 || y0 < 0 || w <= 0 || h <= 0 || x0 + w > width_ || y0 + h > height_)
        throw std::out_of_range("crop rectangle outside frame");
    std::vector<std::uint8_t> out(3 * static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        const auto* src = pixels_.data() + 3 * (static_cast<std::size_t>(y0 + y) * width_ + x0);
        std::copy(src, src + 3 * w, out.data() + 3 * static_cast<std::size_t>(y) * w);
    }
    return Frame(w, h, std::move(out), index_);
}

Hsv rgb_to_hsv(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8)
{
    const double r = r8 / 255.0;
    const double g = g8 / 255.0;
    const double b = b8 / 255.0;
    const double mx = std::max({r, g, b});
    const double mn = std::min({r, g, b});
    const double delta = mx - mn;

    Hsv out;
    out.v = mx;
    out.s = mx > 0.0 ? delta / mx : 0.0;
    if (delta <= 0.0)
        return out;

    double h;
    if (mx == r)
        h = 60.0 * std::fmod((g - b) / delta, 6.0);
    else if (mx == g)
        h = 60.0 * ((b - r) / delta + 2.0);
    else
        h = 60.0 * ((r - g) / delta + 4.0);
    if (h < 0.0)
        h += 360.0;
    if (h >= 360.0)
        h -= 360.0;
    out.h = h;
    return out;
}

int hsv_bin(const Hsv& c)
{
    const int hb = std::clamp(static_cast<int>(std::floor(c.h / 60.0)), 0, kHueBins - 1);
    const int sb = std::clamp(static_cast<int>(std::floor(c.s * kSatBins)), 0, kSatBins - 1);
    const int vb = std::clamp(static_cast<int>(std::floor(c.v * kValBins)), 0, kValBins - 1);
    return hb * kSatBins * kValBins + sb * kValBins + vb;
}

double HsvHistogram::sum() const
{
    return std::accumulate(bins.begin(), bins.end(), 0.0);
}

void HsvHistogram::normalize()
{
    const double s = sum();
    if (s <= 0.0)
        return;
    for (double& b : bins)
        b /= s;
}

namespace {

int bin_of(Rgb c)
{
    return hsv_bin(rgb_to_hsv(c.r, c.g, c.b));
}

}  // namespace

HsvHistogram histogram(const Frame& frame, std::span<const std::int32_t> region)
{
    if (region.empty())
        throw EmptyRegion();
    const auto n = static_cast<std::int64_t>(frame.pixel_count());
    std::array<std::size_t, kHistogramBins> counts{};
    for (const std::int32_t idx : region) {
        if (idx < 0 || idx >= n)
            throw std::out_of_range("pixel index " + std::to_string(idx) + " outside frame");
        ++counts[static_cast<std::size_t>(bin_of(frame.at(static_cast<std::size_t>(idx))))];
    }
    HsvHistogram h;
    const double total = static_cast<double>(region.size());
    for (int b = 0; b < kHistogramBins; ++b)
        h.bins[b] = static_cast<double>(counts[b]) / total;
    return h;
}

double bhattacharyya(const HsvHistogram& a, const HsvHistogram& b)
{
    double bc = 0.0;
    for (int i = 0; i < kHistogramBins; ++i) {
        const double p = a.bins[i] * b.bins[i];
        if (p > 0.0)
            bc += std::sqrt(p);
    }
    return std::clamp(std::sqrt(std::max(0.0, 1.0 - bc)), 0.0, 1.0);
}

}  // namespace spikes
