#include "spikes/synthdata.hpp"

#include "spikes/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <variant>

namespace spikes {

namespace fs = std::filesystem;

std::string_view to_string(ScenarioKind kind)
{
    switch (kind) {
    case ScenarioKind::translate: return "translate";
    case ScenarioKind::deform: return "deform";
    case ScenarioKind::occlude: return "occlude";
    case ScenarioKind::illum: return "illum";
    case ScenarioKind::clutter: return "clutter";
    }
    return "translate";
}

ScenarioKind parse_kind(std::string_view name)
{
    for (const ScenarioKind k : {ScenarioKind::translate, ScenarioKind::deform, ScenarioKind::occlude,
                                 ScenarioKind::illum, ScenarioKind::clutter})
        if (to_string(k) == name)
            return k;
    throw SpecError("unknown scenario kind '" + std::string(name)
                    + "' (expected translate, deform, occlude, illum or clutter)");
}

ScenarioSpec default_scenario(ScenarioKind kind)
{
    ScenarioSpec s;
    s.kind = kind;
    switch (kind) {
    case ScenarioKind::translate:
        break;
    case ScenarioKind::deform:
        s.start_x = 80;
        s.velocity_x = 1.0;
        break;
    case ScenarioKind::occlude:
        s.frames = 40;
        s.start_x = 130;
        s.velocity_x = 0.0;
        break;
    case ScenarioKind::illum:
        s.frames = 50;
        s.start_x = 100;
        s.velocity_x = 1.0;
        break;
    case ScenarioKind::clutter:
        s.start_x = 30;
        s.velocity_x = 2.0;
        break;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Spec text format
// ---------------------------------------------------------------------------

namespace {

using SpecMember = std::variant<int ScenarioSpec::*, double ScenarioSpec::*, bool ScenarioSpec::*,
                                std::uint64_t ScenarioSpec::*>;

struct SpecField {
    std::string_view key;
    SpecMember member;
};

const std::vector<SpecField>& spec_fields()
{
    static const std::vector<SpecField> f{
        {"frames", &ScenarioSpec::frames},
        {"seed", &ScenarioSpec::seed},
        {"width", &ScenarioSpec::width},
        {"height", &ScenarioSpec::height},
        {"target_w", &ScenarioSpec::target_w},
        {"target_h", &ScenarioSpec::target_h},
        {"start_x", &ScenarioSpec::start_x},
        {"start_y", &ScenarioSpec::start_y},
        {"velocity_x", &ScenarioSpec::velocity_x},
        {"velocity_y", &ScenarioSpec::velocity_y},
        {"grain", &ScenarioSpec::grain},
        {"background_grain", &ScenarioSpec::background_grain},
        {"plain_background", &ScenarioSpec::plain_background},
        {"occluder_w", &ScenarioSpec::occluder_w},
        {"occluder_h", &ScenarioSpec::occluder_h},
        {"occluder_x", &ScenarioSpec::occluder_x},
        {"occluder_y", &ScenarioSpec::occluder_y},
        {"occluder_start", &ScenarioSpec::occluder_start},
        {"occluder_speed", &ScenarioSpec::occluder_speed},
        {"gain_start", &ScenarioSpec::gain_start},
        {"gain_end", &ScenarioSpec::gain_end},
        {"shear_amplitude", &ScenarioSpec::shear_amplitude},
        {"shear_period", &ScenarioSpec::shear_period},
        {"clutter_blobs", &ScenarioSpec::clutter_blobs},
    };
    return f;
}

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::string fmt(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Line {
    int number;
    std::string_view key;
    std::string_view value;
};

std::vector<Line> split_lines(std::string_view text)
{
    std::vector<Line> out;
    int n = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++n;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw SpecError("line " + std::to_string(n) + ": expected 'key = value'");
        out.push_back({n, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
    return out;
}

}  // namespace

ScenarioSpec parse_scenario(std::string_view text)
{
    const std::vector<Line> lines = split_lines(text);
    ScenarioSpec spec;
    for (const Line& l : lines)
        if (l.key == "kind")
            spec = default_scenario(parse_kind(l.value));

    for (const Line& l : lines) {
        if (l.key == "kind")
            continue;
        const auto it = std::find_if(spec_fields().begin(), spec_fields().end(),
                                     [&](const SpecField& f) { return f.key == l.key; });
        if (it == spec_fields().end())
            throw SpecError("line " + std::to_string(l.number) + ": unknown key '" + std::string(l.key) + "'");
        std::visit(
            [&](auto ptr) {
                using T = std::remove_cvref_t<decltype(spec.*ptr)>;
                if constexpr (std::is_same_v<T, bool>) {
                    if (l.value == "true" || l.value == "1")
                        spec.*ptr = true;
                    else if (l.value == "false" || l.value == "0")
                        spec.*ptr = false;
                    else
                        throw SpecError("line " + std::to_string(l.number) + ": " + std::string(l.key)
                                        + ": expected true or false");
                } else {
                    T v{};
                    const auto res = std::from_chars(l.value.data(), l.value.data() + l.value.size(), v);
                    if (res.ec != std::errc{} || res.ptr != l.value.data() + l.value.size())
                        throw SpecError("line " + std::to_string(l.number) + ": " + std::string(l.key)
                                        + ": bad value '" + std::string(l.value) + "'");
                    spec.*ptr = v;
                }
            },
            it->member);
    }
    validate(spec);
    return spec;
}

ScenarioSpec load_scenario(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw SpecError("cannot read scenario " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

std::string serialize_scenario(const ScenarioSpec& spec)
{
    std::string out = "kind = " + std::string(to_string(spec.kind)) + "\n";
    for (const SpecField& f : spec_fields()) {
        out += std::string(f.key) + " = ";
        std::visit(
            [&](auto ptr) {
                using T = std::remove_cvref_t<decltype(spec.*ptr)>;
                if constexpr (std::is_same_v<T, bool>)
                    out += spec.*ptr ? "true" : "false";
                else if constexpr (std::is_same_v<T, double>)
                    out += fmt(spec.*ptr);
                else
                    out += std::to_string(spec.*ptr);
            },
            f.member);
        out += '\n';
    }
    return out;
}

// ---------------------------------------------------------------------------
// Geometry of the target over time
// ---------------------------------------------------------------------------

namespace {

int target_x(const ScenarioSpec& s, int t)
{
    return s.start_x + static_cast<int>(std::lround(s.velocity_x * t));
}

int target_y(const ScenarioSpec& s, int t)
{
    return s.start_y + static_cast<int>(std::lround(s.velocity_y * t));
}

double shear_at(const ScenarioSpec& s, int t)
{
    if (s.kind != ScenarioKind::deform)
        return 0.0;
    return s.shear_amplitude * std::sin(2.0 * std::numbers::pi * t / s.shear_period);
}

double gain_at(const ScenarioSpec& s, int t)
{
    if (s.kind != ScenarioKind::illum)
        return 1.0;
    return s.gain_start + (s.gain_end - s.gain_start) * t / std::max(1, s.frames - 1);
}

std::optional<BoundingBox> occluder_at(const ScenarioSpec& s, int t)
{
    if (s.kind != ScenarioKind::occlude)
        return std::nullopt;
    const int x = s.occluder_x + s.occluder_speed * std::max(0, t - s.occluder_start);
    return BoundingBox{static_cast<double>(x), static_cast<double>(s.occluder_y), static_cast<double>(s.occluder_w),
                       static_cast<double>(s.occluder_h)};
}

}  // namespace

void validate(const ScenarioSpec& s)
{
    auto fail = [](const std::string& m) { throw SpecError(m); };
    if (s.frames < 2)
        fail("frames must be at least 2");
    if (s.width < 32 || s.height < 32)
        fail("frame size must be at least 32x32");
    if (s.target_w < 8 || s.target_h < 8)
        fail("target must be at least 8x8");
    if (!(s.grain > 0.0) || !(s.background_grain > 0.0))
        fail("texture grain must be positive");
    if (s.kind == ScenarioKind::occlude && (s.occluder_w <= 0 || s.occluder_h <= 0))
        fail("occluder size must be positive");
    if (!(s.gain_start > 0.0) || !(s.gain_end > 0.0))
        fail("gain must be positive");
    if (!(s.shear_period > 0.0) || !(std::abs(s.shear_amplitude) < 1.0))
        fail("shear needs period > 0 and |amplitude| < 1");
    if (s.clutter_blobs < 0)
        fail("clutter_blobs must be non-negative");

    const double spread = std::abs(s.kind == ScenarioKind::deform ? s.shear_amplitude : 0.0) * s.target_h / 2.0;
    for (int t = 0; t < s.frames; ++t) {
        const int x = target_x(s, t), y = target_y(s, t);
        const bool inside = x - spread >= 0.0 && x + s.target_w + spread <= s.width && y >= 0
                            && y + s.target_h <= s.height;
        if (!inside && (s.kind != ScenarioKind::occlude || t == 0))
            fail("target leaves the frame at frame " + std::to_string(t));
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

namespace {

std::uint64_t mix(std::uint64_t z)
{
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

double lattice(std::uint64_t seed, int layer, std::int64_t ix, std::int64_t iy)
{
    std::uint64_t h = mix(seed ^ (static_cast<std::uint64_t>(layer) << 48));
    h = mix(h ^ static_cast<std::uint64_t>(ix));
    h = mix(h ^ static_cast<std::uint64_t>(iy));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double value_noise(std::uint64_t seed, int layer, double x, double y, double grain)
{
    const double gx = x / grain, gy = y / grain;
    const double fx0 = std::floor(gx), fy0 = std::floor(gy);
    const auto ix = static_cast<std::int64_t>(fx0), iy = static_cast<std::int64_t>(fy0);
    double fx = gx - fx0, fy = gy - fy0;
    fx = fx * fx * (3.0 - 2.0 * fx);
    fy = fy * fy * (3.0 - 2.0 * fy);
    const double a = lattice(seed, layer, ix, iy), b = lattice(seed, layer, ix + 1, iy);
    const double c = lattice(seed, layer, ix, iy + 1), d = lattice(seed, layer, ix + 1, iy + 1);
    return (a * (1 - fx) + b * fx) * (1 - fy) + (c * (1 - fx) + d * fx) * fy;
}

struct Texel {
    double q;    // posterized luminance level in [0, 1]
    double hue;  // smooth secondary field in [0, 1]
};

Texel texel(std::uint64_t seed, int layer, double x, double y, double grain)
{
    const double n = 0.65 * value_noise(seed, layer, x, y, grain) + 0.35 * value_noise(seed, layer + 1, x, y, grain / 2);
    const double q = std::clamp(std::floor(n * 5.0) / 4.0, 0.0, 1.0);
    return {q, value_noise(seed, layer + 2, x, y, grain * 1.5)};
}

// Target: reds and oranges. Every channel stays below 171 so a 1.5 gain never clips.
Rgb target_color(const Texel& t)
{
    return {static_cast<std::uint8_t>(60 + 110 * t.q),
            static_cast<std::uint8_t>(15 + 70 * t.q * (0.5 + t.hue)),
            static_cast<std::uint8_t>(5 + 30 * t.q)};
}

// Background: greens to teals.
Rgb background_color(const Texel& t)
{
    return {static_cast<std::uint8_t>(10 + 30 * t.q),
            static_cast<std::uint8_t>(50 + 110 * t.q),
            static_cast<std::uint8_t>(30 + 120 * t.hue)};
}

// Occluder: purples.
Rgb occluder_color(const Texel& t)
{
    return {static_cast<std::uint8_t>(70 + 90 * t.q),
            static_cast<std::uint8_t>(10 + 30 * t.q * t.hue),
            static_cast<std::uint8_t>(90 + 80 * t.q)};
}

constexpr int kTargetLayer = 0;
constexpr int kBackgroundLayer = 10;
constexpr int kOccluderLayer = 20;
constexpr int kClutterLayer = 30;

struct Blob {
    double cx, cy, r;
};

std::vector<Blob> clutter_blobs(const ScenarioSpec& s)
{
    std::vector<Blob> out;
    if (s.kind != ScenarioKind::clutter)
        return out;
    // Above or below the band swept by the target.
    const double band_lo = std::min(target_y(s, 0), target_y(s, s.frames - 1)) - 8.0;
    const double band_hi = std::max(target_y(s, 0), target_y(s, s.frames - 1)) + s.target_h + 8.0;
    for (int i = 0; i < s.clutter_blobs; ++i) {
        const double r = 10.0 + 6.0 * lattice(s.seed, 99, i, 0);
        const double cx = r + (s.width - 2 * r) * lattice(s.seed, 99, i, 1);
        const double room_top = band_lo - 2 * r, room_bottom = s.height - band_hi - 2 * r;
        double cy;
        if ((i % 2 == 0 && room_top > 0) || room_bottom <= 0)
            cy = r + std::max(0.0, room_top) * lattice(s.seed, 99, i, 2);
        else
            cy = band_hi + r + room_bottom * lattice(s.seed, 99, i, 2);
        out.push_back({cx, cy, r});
    }
    return out;
}

std::uint8_t scale(std::uint8_t c, double gain)
{
    return static_cast<std::uint8_t>(std::min(255L, std::lround(c * gain)));
}

}  // namespace

GeneratedSequence generate(const ScenarioSpec& spec)
{
    validate(spec);
    GeneratedSequence seq;
    seq.spec = spec;
    const int W = spec.width, H = spec.height;

    Frame background(W, H);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x)
            background.set(x, y,
                           spec.plain_background
                               ? Rgb{30, 110, 90}
                               : background_color(texel(spec.seed, kBackgroundLayer, x + 0.5, y + 0.5,
                                                        spec.background_grain)));
    for (const Blob& b : clutter_blobs(spec))
        for (int y = std::max(0, static_cast<int>(b.cy - b.r)); y < std::min(H, static_cast<int>(b.cy + b.r) + 1); ++y)
            for (int x = std::max(0, static_cast<int>(b.cx - b.r)); x < std::min(W, static_cast<int>(b.cx + b.r) + 1);
                 ++x)
                if (Vec2{x + 0.5 - b.cx, y + 0.5 - b.cy}.norm() < b.r)
                    background.set(x, y, target_color(texel(spec.seed, kClutterLayer, x + 0.5, y + 0.5, spec.grain)));

    const double half_h = spec.target_h / 2.0;
    for (int t = 0; t < spec.frames; ++t) {
        Frame f = background;
        f.set_index(t);
        const int tx = target_x(spec, t), ty = target_y(spec, t);
        const double s = shear_at(spec, t);
        const int spread = static_cast<int>(std::ceil(std::abs(s) * half_h)) + 1;

        std::vector<std::int32_t> mask;
        int min_x = W, min_y = H, max_x = -1, max_y = -1;
        for (int py = std::max(0, ty); py < std::min(H, ty + spec.target_h); ++py) {
            const double v = py + 0.5 - ty;
            for (int px = std::max(0, tx - spread); px < std::min(W, tx + spec.target_w + spread); ++px) {
                const double u = px + 0.5 - tx - s * (v - half_h);
                if (u < 0.0 || u >= spec.target_w)
                    continue;
                f.set(px, py, target_color(texel(spec.seed, kTargetLayer, u, v, spec.grain)));
                mask.push_back(py * W + px);
                min_x = std::min(min_x, px);
                max_x = std::max(max_x, px);
                min_y = std::min(min_y, py);
                max_y = std::max(max_y, py);
            }
        }
        if (mask.empty())
            throw SpecError("target not visible at frame " + std::to_string(t));
        seq.groundtruth.push_back({static_cast<double>(min_x), static_cast<double>(min_y),
                                   static_cast<double>(max_x - min_x + 1), static_cast<double>(max_y - min_y + 1)});

        const std::optional<BoundingBox> occ = occluder_at(spec, t);
        std::size_t hidden = 0;
        if (occ) {
            const int ox = static_cast<int>(occ->x), oy = static_cast<int>(occ->y);
            for (int py = std::max(0, oy); py < std::min(H, oy + spec.occluder_h); ++py)
                for (int px = std::max(0, ox); px < std::min(W, ox + spec.occluder_w); ++px)
                    f.set(px, py,
                          occluder_color(texel(spec.seed, kOccluderLayer, px - ox + 0.5, py - oy + 0.5, spec.grain)));
            for (const std::int32_t p : mask)
                if (occ->contains_pixel(p % W, p / W))
                    ++hidden;
        }
        seq.occluders.push_back(occ);
        seq.visibility.push_back(1.0 - static_cast<double>(hidden) / static_cast<double>(mask.size()));

        const double g = gain_at(spec, t);
        if (g != 1.0)
            for (std::uint8_t& c : f.data())
                c = scale(c, g);
        seq.frames.push_back(std::move(f));
    }
    return seq;
}

void write_sequence(const fs::path& dir, const GeneratedSequence& seq)
{
    fs::create_directories(dir);
    std::ofstream gt(dir / "groundtruth_rect.txt");
    std::ofstream manifest(dir / "manifest.txt");
    if (!gt || !manifest)
        throw IoError("cannot write into " + dir.string());

    manifest << "# synthetic sequence\n" << serialize_scenario(seq.spec);
    for (std::size_t t = 0; t < seq.frames.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof(name), "%04zu.png", t + 1);
        write_frame(dir / name, seq.frames[t]);
        const BoundingBox& b = seq.groundtruth[t];
        gt << b.x << ',' << b.y << ',' << b.w << ',' << b.h << '\n';
        if (seq.occluders[t]) {
            const BoundingBox& o = *seq.occluders[t];
            manifest << "occluder " << t + 1 << ' ' << o.x << ' ' << o.y << ' ' << o.w << ' ' << o.h
                     << " visibility " << fmt(seq.visibility[t]) << '\n';
        }
    }
}

}  // namespace spikes
