#include "spikes/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace spikes {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kOrientationBins = 36;
constexpr int kOrientationRadius = 8;
constexpr double kOrientationSigma = 3.0;
constexpr int kWindow = 16;
constexpr int kCells = 4;
constexpr int kCellBins = 8;
constexpr float kClip = 0.2f;

struct Plane {
    int w = 0;
    int h = 0;
    std::vector<float> v;

    float at(int x, int y) const { return v[static_cast<std::size_t>(y) * w + x]; }
    float clamped(int x, int y) const
    {
        return at(std::clamp(x, 0, w - 1), std::clamp(y, 0, h - 1));
    }
    float bilinear(double x, double y) const
    {
        // Sample positions are continuous coordinates; pixel centers at +0.5.
        const double fx = x - 0.5, fy = y - 0.5;
        const int x0 = static_cast<int>(std::floor(fx));
        const int y0 = static_cast<int>(std::floor(fy));
        const auto ax = static_cast<float>(fx - x0);
        const auto ay = static_cast<float>(fy - y0);
        const float a = clamped(x0, y0), b = clamped(x0 + 1, y0);
        const float c = clamped(x0, y0 + 1), d = clamped(x0 + 1, y0 + 1);
        return (a * (1 - ax) + b * ax) * (1 - ay) + (c * (1 - ax) + d * ax) * ay;
    }
};

Plane grayscale(const Frame& f)
{
    Plane p{f.width(), f.height(), std::vector<float>(f.pixel_count())};
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        const Rgb c = f.at(i);
        p.v[i] = (0.299f * c.r + 0.587f * c.g + 0.114f * c.b) / 255.0f;
    }
    return p;
}

std::vector<float> gaussian_kernel(double sigma)
{
    const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<float> k(static_cast<std::size_t>(2 * r + 1));
    double sum = 0.0;
    for (int i = -r; i <= r; ++i) {
        const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
        k[static_cast<std::size_t>(i + r)] = static_cast<float>(v);
        sum += v;
    }
    for (float& v : k)
        v = static_cast<float>(v / sum);
    return k;
}

Plane blur(const Plane& in, double sigma)
{
    const auto k = gaussian_kernel(sigma);
    const int r = static_cast<int>(k.size() / 2);
    Plane tmp{in.w, in.h, std::vector<float>(in.v.size())};
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            float s = 0.0f;
            for (int i = -r; i <= r; ++i)
                s += k[static_cast<std::size_t>(i + r)] * in.clamped(x + i, y);
            tmp.v[static_cast<std::size_t>(y) * in.w + x] = s;
        }
    Plane out{in.w, in.h, std::vector<float>(in.v.size())};
    for (int y = 0; y < in.h; ++y)
        for (int x = 0; x < in.w; ++x) {
            float s = 0.0f;
            for (int i = -r; i <= r; ++i)
                s += k[static_cast<std::size_t>(i + r)] * tmp.clamped(x, y + i);
            out.v[static_cast<std::size_t>(y) * in.w + x] = s;
        }
    return out;
}

struct Gradients {
    Plane gx;
    Plane gy;
};

Gradients gradients(const Plane& img)
{
    Gradients g{{img.w, img.h, std::vector<float>(img.v.size())},
                {img.w, img.h, std::vector<float>(img.v.size())}};
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * img.w + x;
            g.gx.v[i] = 0.5f * (img.clamped(x + 1, y) - img.clamped(x - 1, y));
            g.gy.v[i] = 0.5f * (img.clamped(x, y + 1) - img.clamped(x, y - 1));
        }
    return g;
}

Gradients smoothed_gradients(const Frame& frame)
{
    return gradients(blur(grayscale(frame), 1.0));
}

double dominant_orientation(const Gradients& g, int px, int py)
{
    std::array<double, kOrientationBins> hist{};
    for (int dy = -kOrientationRadius; dy <= kOrientationRadius; ++dy) {
        for (int dx = -kOrientationRadius; dx <= kOrientationRadius; ++dx) {
            const int r2 = dx * dx + dy * dy;
            if (r2 > kOrientationRadius * kOrientationRadius)
                continue;
            const int x = px + dx, y = py + dy;
            if (x < 0 || y < 0 || x >= g.gx.w || y >= g.gx.h)
                continue;
            const double gx = g.gx.at(x, y), gy = g.gy.at(x, y);
            const double mag = std::hypot(gx, gy);
            if (mag <= 0.0)
                continue;
            const double ang = wrap_angle(std::atan2(gy, gx));
            const double wgt = std::exp(-r2 / (2.0 * kOrientationSigma * kOrientationSigma));
            const int bin = std::min(kOrientationBins - 1, static_cast<int>(ang / kTwoPi * kOrientationBins));
            hist[static_cast<std::size_t>(bin)] += wgt * mag;
        }
    }
    for (int pass = 0; pass < 2; ++pass) {
        std::array<double, kOrientationBins> sm{};
        for (int b = 0; b < kOrientationBins; ++b) {
            const int l = (b + kOrientationBins - 1) % kOrientationBins;
            const int r = (b + 1) % kOrientationBins;
            sm[static_cast<std::size_t>(b)] = (hist[static_cast<std::size_t>(l)] + hist[static_cast<std::size_t>(b)]
                                               + hist[static_cast<std::size_t>(r)]) / 3.0;
        }
        hist = sm;
    }
    const auto peak = static_cast<int>(std::max_element(hist.begin(), hist.end()) - hist.begin());
    const double l = hist[static_cast<std::size_t>((peak + kOrientationBins - 1) % kOrientationBins)];
    const double c = hist[static_cast<std::size_t>(peak)];
    const double r = hist[static_cast<std::size_t>((peak + 1) % kOrientationBins)];
    const double denom = l - 2.0 * c + r;
    const double offset = denom != 0.0 ? 0.5 * (l - r) / denom : 0.0;
    return wrap_angle((peak + 0.5 + offset) * kTwoPi / kOrientationBins);
}

}  // namespace

double wrap_angle(double a)
{
    a = std::fmod(a, kTwoPi);
    if (a < 0.0)
        a += kTwoPi;
    if (a >= kTwoPi)
        a = 0.0;
    return a;
}

double descriptor_margin()
{
    // Rotated sample radius + bilinear support + central difference.
    return (kWindow / 2.0 - 0.5) * std::numbers::sqrt2 + 2.0;
}

std::vector<Keypoint> detect(const Frame& frame, const DetectorParams& params)
{
    const Gradients g = smoothed_gradients(frame);
    const int w = frame.width(), h = frame.height();

    Plane ixx{w, h, std::vector<float>(frame.pixel_count())};
    Plane iyy = ixx, ixy = ixx;
    for (std::size_t i = 0; i < ixx.v.size(); ++i) {
        const float gx = g.gx.v[i], gy = g.gy.v[i];
        ixx.v[i] = gx * gx;
        iyy.v[i] = gy * gy;
        ixy.v[i] = gx * gy;
    }
    ixx = blur(ixx, 1.5);
    iyy = blur(iyy, 1.5);
    ixy = blur(ixy, 1.5);

    std::vector<float> resp(frame.pixel_count());
    float max_resp = 0.0f;
    for (std::size_t i = 0; i < resp.size(); ++i) {
        const double a = ixx.v[i], b = iyy.v[i], c = ixy.v[i];
        const double tr = a + b;
        resp[i] = static_cast<float>(a * b - c * c - params.harris_k * tr * tr);
        max_resp = std::max(max_resp, resp[i]);
    }
    const double threshold = std::max(params.absolute_threshold, params.relative_threshold * max_resp);

    const int border = std::max(1, params.border);
    const int cell = std::max(1, params.cell_size);
    auto r_at = [&](int x, int y) { return resp[static_cast<std::size_t>(y) * w + x]; };

    std::vector<Keypoint> out;
    for (int cy = border; cy < h - border; cy += cell) {
        for (int cx = border; cx < w - border; cx += cell) {
            int bx = -1, by = -1;
            float best = -std::numeric_limits<float>::infinity();
            for (int y = cy; y < std::min(cy + cell, h - border); ++y)
                for (int x = cx; x < std::min(cx + cell, w - border); ++x)
                    if (r_at(x, y) > best) {
                        best = r_at(x, y);
                        bx = x;
                        by = y;
                    }
            if (bx < 0 || best <= threshold)
                continue;
            bool is_max = true;
            for (int dy = -1; dy <= 1 && is_max; ++dy)
                for (int dx = -1; dx <= 1; ++dx)
                    if ((dx || dy) && r_at(bx + dx, by + dy) > best) {
                        is_max = false;
                        break;
                    }
            if (!is_max)
                continue;
            Keypoint kp;
            kp.position = {bx + 0.5, by + 0.5};
            kp.response = best;
            kp.orientation = dominant_orientation(g, bx, by);
            out.push_back(kp);
        }
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const Keypoint& a, const Keypoint& b) { return a.response > b.response; });
    if (out.size() > static_cast<std::size_t>(std::max(0, params.max_keypoints)))
        out.resize(static_cast<std::size_t>(std::max(0, params.max_keypoints)));
    return out;
}

Description describe(const Frame& frame, std::span<const Keypoint> keypoints)
{
    Description out;
    if (keypoints.empty())
        return out;
    const Gradients g = smoothed_gradients(frame);
    const double margin = descriptor_margin();
    const double sigma = kWindow / 2.0;
    const double bin_width = kTwoPi / kCellBins;

    for (std::size_t k = 0; k < keypoints.size(); ++k) {
        const Keypoint& kp = keypoints[k];
        const Vec2 p = kp.position;
        if (p.x < margin || p.y < margin || p.x > frame.width() - margin || p.y > frame.height() - margin) {
            out.dropped.push_back(k);
            continue;
        }
        const double cs = std::cos(kp.orientation), sn = std::sin(kp.orientation);
        std::array<double, kDescriptorSize> hist{};

        for (int j = 0; j < kWindow; ++j) {
            for (int i = 0; i < kWindow; ++i) {
                const double u = i - (kWindow / 2.0 - 0.5);
                const double v = j - (kWindow / 2.0 - 0.5);
                const double sx = p.x + u * cs - v * sn;
                const double sy = p.y + u * sn + v * cs;
                const double gx = g.gx.bilinear(sx, sy);
                const double gy = g.gy.bilinear(sx, sy);
                const double mag = std::hypot(gx, gy);
                if (mag <= 0.0)
                    continue;
                const double weight = mag * std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
                const double rel = wrap_angle(std::atan2(gy, gx) - kp.orientation);

                // Trilinear split across neighbouring cells and orientation bins.
                const double cx = (u + kWindow / 2.0) / (kWindow / kCells) - 0.5;
                const double cy = (v + kWindow / 2.0) / (kWindow / kCells) - 0.5;
                const double ob = rel / bin_width;
                const int x0 = static_cast<int>(std::floor(cx));
                const int y0 = static_cast<int>(std::floor(cy));
                const int o0 = static_cast<int>(std::floor(ob));
                const double fx = cx - x0, fy = cy - y0, fo = ob - o0;
                for (int dy = 0; dy <= 1; ++dy) {
                    const int yy = y0 + dy;
                    if (yy < 0 || yy >= kCells)
                        continue;
                    const double wy = dy ? fy : 1.0 - fy;
                    for (int dx = 0; dx <= 1; ++dx) {
                        const int xx = x0 + dx;
                        if (xx < 0 || xx >= kCells)
                            continue;
                        const double wx = dx ? fx : 1.0 - fx;
                        for (int d_o = 0; d_o <= 1; ++d_o) {
                            const int oo = (o0 + d_o) % kCellBins;
                            const double wo = d_o ? fo : 1.0 - fo;
                            hist[static_cast<std::size_t>((yy * kCells + xx) * kCellBins + oo)] += weight * wx * wy * wo;
                        }
                    }
                }
            }
        }

        auto normalize = [](std::array<double, kDescriptorSize>& v) {
            double n2 = 0.0;
            for (double x : v)
                n2 += x * x;
            if (n2 <= 0.0)
                return false;
            const double inv = 1.0 / std::sqrt(n2);
            for (double& x : v)
                x *= inv;
            return true;
        };
        Descriptor d;
        if (normalize(hist)) {
            for (double& x : hist)
                x = std::min(x, static_cast<double>(kClip));
            normalize(hist);
            for (std::size_t b = 0; b < kDescriptorSize; ++b)
                d.values[b] = static_cast<float>(hist[b]);
        } else {
            d.values.fill(static_cast<float>(1.0 / std::sqrt(static_cast<double>(kDescriptorSize))));
        }
        out.keypoints.push_back(kp);
        out.descriptors.push_back(d);
    }
    return out;
}

double descriptor_distance(const Descriptor& a, const Descriptor& b)
{
    float acc[4] = {0.0f, 0.0f, 0.0f, 0.0f};
    for (std::size_t i = 0; i < kDescriptorSize; i += 4)
        for (std::size_t j = 0; j < 4; ++j) {
            const float d = a.values[i + j] - b.values[i + j];
            acc[j] += d * d;
        }
    return std::sqrt(static_cast<double>((acc[0] + acc[1]) + (acc[2] + acc[3])));
}

std::vector<KeypointMatch> match(std::span<const Descriptor> set_a, std::span<const Descriptor> set_b,
                                 const MatchParams& params)
{
    std::vector<KeypointMatch> candidates;
    if (set_a.empty() || set_b.empty())
        return candidates;

    for (std::size_t a = 0; a < set_a.size(); ++a) {
        double d1 = std::numeric_limits<double>::infinity();
        double d2 = std::numeric_limits<double>::infinity();
        int b1 = -1;
        for (std::size_t b = 0; b < set_b.size(); ++b) {
            const double d = descriptor_distance(set_a[a], set_b[b]);
            if (d < d1) {
                d2 = d1;
                d1 = d;
                b1 = static_cast<int>(b);
            } else if (d < d2) {
                d2 = d;
            }
        }
        const bool keep = set_b.size() == 1 ? d1 < params.singleton_cap : d1 < params.ratio * d2;
        if (keep)
            candidates.push_back({static_cast<int>(a), b1, d1});
    }

    std::vector<int> owner(set_b.size(), -1);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        int& o = owner[static_cast<std::size_t>(candidates[c].index_b)];
        if (o < 0 || candidates[c].distance < candidates[static_cast<std::size_t>(o)].distance)
            o = static_cast<int>(c);
    }
    std::vector<KeypointMatch> out;
    for (std::size_t c = 0; c < candidates.size(); ++c)
        if (owner[static_cast<std::size_t>(candidates[c].index_b)] == static_cast<int>(c))
            out.push_back(candidates[c]);
    return out;
}

}  // namespace spikes
