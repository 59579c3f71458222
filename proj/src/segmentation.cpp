#include "spikes/segmentation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

namespace spikes {

SegmentationPlan plan_segmentation(int frame_w, int frame_h, double box_w, double box_h, double per_box)
{
    if (frame_w <= 0 || frame_h <= 0 || box_w <= 0.0 || box_h <= 0.0 || per_box <= 0.0)
        throw std::invalid_argument("plan_segmentation: dimensions must be positive");
    const double area = static_cast<double>(frame_w) * frame_h;
    const double n = std::round(per_box * area / (box_w * box_h));
    SegmentationPlan plan;
    plan.n_superpixels = static_cast<int>(std::clamp(n, 1.0, area));
    plan.diameter = std::sqrt(area / plan.n_superpixels);
    return plan;
}

SegmentationPlan plan_for_area(const SegmentationPlan& plan, int w, int h)
{
    const double area = static_cast<double>(w) * h;
    SegmentationPlan out;
    out.diameter = plan.diameter;
    out.n_superpixels =
        static_cast<int>(std::clamp(std::round(area / (plan.diameter * plan.diameter)), 1.0, area));
    return out;
}

namespace {

struct Lab {
    double l, a, b;
};

double srgb_to_linear(double c)
{
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

const std::array<double, 256>& linear_lut()
{
    static const std::array<double, 256> lut = [] {
        std::array<double, 256> t{};
        for (int i = 0; i < 256; ++i)
            t[i] = srgb_to_linear(i / 255.0);
        return t;
    }();
    return lut;
}

Lab rgb_to_lab(Rgb c)
{
    const auto& lut = linear_lut();
    const double r = lut[c.r], g = lut[c.g], b = lut[c.b];
    const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / 0.950456;
    const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
    const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / 1.088754;
    constexpr double eps = 0.008856;
    auto f = [](double t) { return t > eps ? std::cbrt(t) : 7.787 * t + 16.0 / 116.0; };
    const double fx = f(x), fy = f(y), fz = f(z);
    const double l = y > eps ? 116.0 * fy - 16.0 : 903.3 * y;
    return {l, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

struct Seed {
    double l, a, b, x, y;
};

double lab_dist2(const Lab& p, const Lab& q)
{
    const double dl = p.l - q.l, da = p.a - q.a, db = p.b - q.b;
    return dl * dl + da * da + db * db;
}

std::vector<Seed> grid_seeds(const std::vector<Lab>& lab, int w, int h, double step)
{
    const int nx = std::max(1, static_cast<int>(std::lround(w / step)));
    const int ny = std::max(1, static_cast<int>(std::lround(h / step)));

    auto at = [&](int x, int y) -> const Lab& {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return lab[static_cast<std::size_t>(y) * w + x];
    };
    auto gradient = [&](int x, int y) {
        return lab_dist2(at(x + 1, y), at(x - 1, y)) + lab_dist2(at(x, y + 1), at(x, y - 1));
    };

    std::vector<Seed> seeds;
    seeds.reserve(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int cx = std::min(w - 1, static_cast<int>((i + 0.5) * w / nx));
            const int cy = std::min(h - 1, static_cast<int>((j + 0.5) * h / ny));
            int bx = cx, by = cy;
            double best = std::numeric_limits<double>::infinity();
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    const int x = cx + dx, y = cy + dy;
                    if (x < 0 || y < 0 || x >= w || y >= h)
                        continue;
                    const double g = gradient(x, y);
                    if (g < best) {
                        best = g;
                        bx = x;
                        by = y;
                    }
                }
            }
            const Lab& c = lab[static_cast<std::size_t>(by) * w + bx];
            seeds.push_back({c.l, c.a, c.b, bx + 0.5, by + 0.5});
        }
    }
    return seeds;
}

void assign_and_update(const std::vector<Lab>& lab, int w, double step, double compactness,
                       int iterations, std::vector<Seed>& seeds, std::vector<std::int32_t>& labels)
{
    const std::size_t n = lab.size();
    const double spatial_weight = (compactness * compactness) / (step * step);
    std::vector<double> dist(n);
    labels.assign(n, -1);

    for (int it = 0; it < iterations; ++it) {
        std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
        std::fill(labels.begin(), labels.end(), -1);

        for (std::size_t k = 0; k < seeds.size(); ++k) {
            const Seed& s = seeds[k];
            const int x0 = std::max(0, static_cast<int>(std::floor(s.x - step)));
            const int x1 = std::min(w - 1, static_cast<int>(std::ceil(s.x + step)));
            const int y0 = std::max(0, static_cast<int>(std::floor(s.y - step)));
            const int y1 = std::min(static_cast<int>(n / w) - 1, static_cast<int>(std::ceil(s.y + step)));
            for (int y = y0; y <= y1; ++y) {
                const double dy = y + 0.5 - s.y;
                for (int x = x0; x <= x1; ++x) {
                    const std::size_t p = static_cast<std::size_t>(y) * w + x;
                    const double dx = x + 0.5 - s.x;
                    const Lab& c = lab[p];
                    const double dl = c.l - s.l, da = c.a - s.a, db = c.b - s.b;
                    const double d = dl * dl + da * da + db * db + (dx * dx + dy * dy) * spatial_weight;
                    if (d < dist[p]) {
                        dist[p] = d;
                        labels[p] = static_cast<std::int32_t>(k);
                    }
                }
            }
        }

        // Pixels outside every search window fall back to an exhaustive search.
        for (std::size_t p = 0; p < n; ++p) {
            if (labels[p] >= 0)
                continue;
            const double px = static_cast<double>(p % w) + 0.5;
            const double py = static_cast<double>(p / w) + 0.5;
            for (std::size_t k = 0; k < seeds.size(); ++k) {
                const Seed& s = seeds[k];
                const double dl = lab[p].l - s.l, da = lab[p].a - s.a, db = lab[p].b - s.b;
                const double dx = px - s.x, dy = py - s.y;
                const double d = dl * dl + da * da + db * db + (dx * dx + dy * dy) * spatial_weight;
                if (d < dist[p]) {
                    dist[p] = d;
                    labels[p] = static_cast<std::int32_t>(k);
                }
            }
        }

        std::vector<Seed> acc(seeds.size(), Seed{0, 0, 0, 0, 0});
        std::vector<std::size_t> counts(seeds.size(), 0);
        for (std::size_t p = 0; p < n; ++p) {
            const auto k = static_cast<std::size_t>(labels[p]);
            acc[k].l += lab[p].l;
            acc[k].a += lab[p].a;
            acc[k].b += lab[p].b;
            acc[k].x += static_cast<double>(p % w) + 0.5;
            acc[k].y += static_cast<double>(p / w) + 0.5;
            ++counts[k];
        }
        for (std::size_t k = 0; k < seeds.size(); ++k) {
            if (counts[k] == 0)
                continue;
            const double inv = 1.0 / static_cast<double>(counts[k]);
            seeds[k] = {acc[k].l * inv, acc[k].a * inv, acc[k].b * inv, acc[k].x * inv, acc[k].y * inv};
        }
    }
}

// Splits every label into 4-connected components, keeps the largest component
// of each label and merges the rest (plus anything below `min_size`) into the
// largest adjacent region. Returns consecutive labels in raster order.
std::vector<std::int32_t> enforce_connectivity(const std::vector<std::int32_t>& labels, int w, int h,
                                               std::size_t min_size)
{
    const std::size_t n = labels.size();
    std::vector<std::int32_t> comp(n, -1);
    std::vector<std::vector<std::int32_t>> members;
    std::vector<std::int32_t> comp_label;

    std::vector<std::int32_t> stack;
    for (std::size_t start = 0; start < n; ++start) {
        if (comp[start] >= 0)
            continue;
        const auto id = static_cast<std::int32_t>(members.size());
        const std::int32_t lbl = labels[start];
        members.emplace_back();
        comp_label.push_back(lbl);
        comp[start] = id;
        stack.assign(1, static_cast<std::int32_t>(start));
        while (!stack.empty()) {
            const std::int32_t p = stack.back();
            stack.pop_back();
            members[id].push_back(p);
            const int x = p % w, y = p / w;
            const std::array<std::pair<int, int>, 4> nb{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
            for (auto [nx, ny] : nb) {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h)
                    continue;
                const std::int32_t q = ny * w + nx;
                if (comp[q] < 0 && labels[q] == lbl) {
                    comp[q] = id;
                    stack.push_back(q);
                }
            }
        }
    }

    const std::size_t n_comp = members.size();
    std::vector<std::int32_t> main_of_label;
    for (std::size_t c = 0; c < n_comp; ++c) {
        const auto lbl = static_cast<std::size_t>(comp_label[c]);
        if (lbl >= main_of_label.size())
            main_of_label.resize(lbl + 1, -1);
        const std::int32_t cur = main_of_label[lbl];
        if (cur < 0 || members[c].size() > members[static_cast<std::size_t>(cur)].size())
            main_of_label[lbl] = static_cast<std::int32_t>(c);
    }

    std::vector<std::int32_t> orphans;
    for (std::size_t c = 0; c < n_comp; ++c) {
        const bool is_main = main_of_label[static_cast<std::size_t>(comp_label[c])] == static_cast<std::int32_t>(c);
        if (!is_main || members[c].size() < min_size)
            orphans.push_back(static_cast<std::int32_t>(c));
    }
    std::stable_sort(orphans.begin(), orphans.end(), [&](std::int32_t a, std::int32_t b) {
        return members[static_cast<std::size_t>(a)].size() < members[static_cast<std::size_t>(b)].size();
    });

    // Union-find over components; root[c] == c for live regions.
    std::vector<std::int32_t> root(n_comp);
    std::iota(root.begin(), root.end(), 0);
    auto find = [&](std::int32_t c) {
        while (root[static_cast<std::size_t>(c)] != c) {
            root[static_cast<std::size_t>(c)] = root[static_cast<std::size_t>(root[static_cast<std::size_t>(c)])];
            c = root[static_cast<std::size_t>(c)];
        }
        return c;
    };

    for (const std::int32_t o : orphans) {
        if (find(o) != o)
            continue;
        auto& own = members[static_cast<std::size_t>(o)];
        std::int32_t best = -1;
        std::size_t best_size = 0;
        for (const std::int32_t p : own) {
            const int x = p % w, y = p / w;
            const std::array<std::pair<int, int>, 4> nb{{{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}}};
            for (auto [nx, ny] : nb) {
                if (nx < 0 || ny < 0 || nx >= w || ny >= h)
                    continue;
                const std::int32_t r = find(comp[static_cast<std::size_t>(ny * w + nx)]);
                if (r == o)
                    continue;
                const std::size_t sz = members[static_cast<std::size_t>(r)].size();
                if (best < 0 || sz > best_size || (sz == best_size && r < best)) {
                    best = r;
                    best_size = sz;
                }
            }
        }
        if (best < 0)
            continue;  // isolated: the whole frame is this region
        auto& dst = members[static_cast<std::size_t>(best)];
        dst.insert(dst.end(), own.begin(), own.end());
        own.clear();
        own.shrink_to_fit();
        root[static_cast<std::size_t>(o)] = best;
    }

    std::vector<std::int32_t> relabel(n_comp, -1);
    std::vector<std::int32_t> out(n);
    std::int32_t next = 0;
    for (std::size_t p = 0; p < n; ++p) {
        const auto r = static_cast<std::size_t>(find(comp[p]));
        if (relabel[r] < 0)
            relabel[r] = next++;
        out[p] = relabel[r];
    }
    return out;
}

}  // namespace

Segmentation segment(const Frame& frame, const SegmentationPlan& plan, const SlicParams& params)
{
    const int w = frame.width();
    const int h = frame.height();
    const std::size_t n = frame.pixel_count();
    if (plan.n_superpixels < 1 || static_cast<std::size_t>(plan.n_superpixels) > n)
        throw std::invalid_argument("segment: superpixel count must lie in [1, w*h]");

    std::vector<Lab> lab(n);
    for (std::size_t p = 0; p < n; ++p)
        lab[p] = rgb_to_lab(frame.at(p));

    const double step = std::sqrt(static_cast<double>(n) / plan.n_superpixels);
    std::vector<Seed> seeds = grid_seeds(lab, w, h, step);
    std::vector<std::int32_t> raw;
    assign_and_update(lab, w, step, params.compactness, params.iterations, seeds, raw);

    const auto min_size = std::max<std::size_t>(1, static_cast<std::size_t>(step * step / 4.0));
    Segmentation seg;
    seg.width = w;
    seg.height = h;
    seg.labels = enforce_connectivity(raw, w, h, min_size);

    const auto count = static_cast<std::size_t>(*std::max_element(seg.labels.begin(), seg.labels.end())) + 1;
    seg.superpixels.resize(count);
    for (std::size_t k = 0; k < count; ++k)
        seg.superpixels[k].id = static_cast<int>(k);
    for (std::size_t p = 0; p < n; ++p)
        seg.superpixels[static_cast<std::size_t>(seg.labels[p])].pixels.push_back(static_cast<std::int32_t>(p));
    for (auto& sp : seg.superpixels) {
        double sx = 0.0, sy = 0.0;
        for (const std::int32_t p : sp.pixels) {
            sx += p % w + 0.5;
            sy += p / w + 0.5;
        }
        const double inv = 1.0 / static_cast<double>(sp.pixels.size());
        sp.center = {sx * inv, sy * inv};
        sp.histogram = histogram(frame, sp.pixels);
    }
    return seg;
}

std::vector<std::uint8_t> encode_label_pgm(const Segmentation& seg)
{
    const std::string header =
        "P5\n" + std::to_string(seg.width) + " " + std::to_string(seg.height) + "\n65535\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.reserve(out.size() + 2 * seg.labels.size());
    for (const std::int32_t l : seg.labels) {
        const auto v = static_cast<std::uint16_t>(std::clamp<std::int32_t>(l, 0, 65535));
        out.push_back(static_cast<std::uint8_t>(v >> 8));
        out.push_back(static_cast<std::uint8_t>(v & 0xff));
    }
    return out;
}

}  // namespace spikes
