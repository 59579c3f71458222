#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "spikes/keypoints.hpp"
#include "spikes/synthdata.hpp"
#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

using namespace spikes;

namespace {

double mean_intensity(const Frame& f)
{
    double sum = 0.0;
    for (int y = 0; y < f.height(); ++y)
        for (int x = 0; x < f.width(); ++x) {
            const Rgb c = f.at(x, y);
            sum += c.r + c.g + c.b;
        }
    return sum / (3.0 * f.width() * f.height());
}

std::string slurp(const std::filesystem::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

}  // namespace

TEST_CASE("translate moves 3 px per frame")
{
    const GeneratedSequence seq = generate(default_scenario(ScenarioKind::translate));
    REQUIRE(seq.frames.size() == 60);
    REQUIRE(seq.groundtruth.size() == 60);
    CHECK(seq.groundtruth[0] == BoundingBox{20, 90, 60, 60});
    for (std::size_t t = 1; t < seq.groundtruth.size(); ++t) {
        CHECK(seq.groundtruth[t].x - seq.groundtruth[t - 1].x == 3.0);
        CHECK(seq.groundtruth[t].y == seq.groundtruth[0].y);
        CHECK(seq.visibility[t] == 1.0);
    }
}

TEST_CASE("groundtruth is the bounding box of the target pixels")
{
    for (const ScenarioKind k : {ScenarioKind::translate, ScenarioKind::deform}) {
        ScenarioSpec s = default_scenario(k);
        s.plain_background = true;
        s.frames = 12;
        const GeneratedSequence seq = generate(s);
        const Rgb bg = seq.frames[0].at(0, 0);
        for (std::size_t t = 0; t < seq.frames.size(); t += 3) {
            const Frame& f = seq.frames[t];
            int x0 = f.width(), y0 = f.height(), x1 = -1, y1 = -1;
            for (int y = 0; y < f.height(); ++y)
                for (int x = 0; x < f.width(); ++x)
                    if (f.at(x, y) != bg) {
                        x0 = std::min(x0, x);
                        y0 = std::min(y0, y);
                        x1 = std::max(x1, x);
                        y1 = std::max(y1, y);
                    }
            CHECK(seq.groundtruth[t] == BoundingBox{double(x0), double(y0), double(x1 - x0 + 1), double(y1 - y0 + 1)});
        }
    }
}

TEST_CASE("illumination scales the mean intensity")
{
    const ScenarioSpec lit = default_scenario(ScenarioKind::illum);
    ScenarioSpec flat = lit;
    flat.gain_start = flat.gain_end = 1.0;
    const GeneratedSequence a = generate(lit), b = generate(flat);
    for (int t = 0; t < lit.frames; t += 7) {
        const double g = lit.gain_start + (lit.gain_end - lit.gain_start) * t / (lit.frames - 1);
        const double ratio = mean_intensity(a.frames[t]) / mean_intensity(b.frames[t]);
        CHECK(std::abs(ratio - g) <= 0.02 * g);
    }
    CHECK(a.groundtruth == b.groundtruth);
}

TEST_CASE("the occluder hides the target in the middle frames")
{
    const GeneratedSequence seq = generate(default_scenario(ScenarioKind::occlude));
    for (int f = 12; f <= 18; ++f)
        CHECK(seq.visibility[f - 1] < 0.3);
    CHECK(seq.visibility[0] == 1.0);
    CHECK(seq.visibility.back() == 1.0);
    CHECK(seq.occluders[0].has_value());
}

TEST_CASE("the target carries enough keypoints")
{
    for (const ScenarioKind k : {ScenarioKind::translate, ScenarioKind::deform, ScenarioKind::occlude,
                                 ScenarioKind::illum, ScenarioKind::clutter}) {
        const GeneratedSequence seq = generate(default_scenario(k));
        const BoundingBox box = seq.groundtruth[0];
        const auto kps = describe(seq.frames[0], detect(seq.frames[0])).keypoints;
        int inside = 0;
        for (const Keypoint& kp : kps)
            inside += box.contains(kp.position);
        CHECK_MESSAGE(inside >= 10, to_string(k));
    }
}

TEST_CASE("generation is deterministic")
{
    ScenarioSpec s = default_scenario(ScenarioKind::clutter);
    s.frames = 3;
    const auto a = testing::scratch_dir("synth_det_a");
    const auto b = testing::scratch_dir("synth_det_b");
    write_sequence(a, generate(s));
    write_sequence(b, generate(s));
    for (const char* n : {"0001.png", "0003.png", "groundtruth_rect.txt", "manifest.txt"})
        CHECK(slurp(a / n) == slurp(b / n));
    s.seed = 8;
    const GeneratedSequence other = generate(s);
    CHECK_FALSE(std::ranges::equal(other.frames[0].data(), generate(default_scenario(ScenarioKind::clutter)).frames[0].data()));
}

TEST_CASE("written sequences")
{
    ScenarioSpec s = default_scenario(ScenarioKind::occlude);
    s.frames = 12;
    const auto dir = testing::scratch_dir("synth_write");
    write_sequence(dir, generate(s));
    CHECK(std::filesystem::exists(dir / "0012.png"));
    const std::string gt = slurp(dir / "groundtruth_rect.txt");
    CHECK(std::count(gt.begin(), gt.end(), '\n') == 12);
    CHECK(gt.rfind("130,90,60,60\n", 0) == 0);
    const std::string manifest = slurp(dir / "manifest.txt");
    CHECK(manifest.find("kind = occlude") != std::string::npos);
    CHECK(manifest.find("occluder 1 -51 50 171 140") != std::string::npos);
}

TEST_CASE("scenario parsing")
{
    const ScenarioSpec s = parse_scenario("# demo\nkind = illum\nframes = 12\ngain_end = 2\n");
    CHECK(s.kind == ScenarioKind::illum);
    CHECK(s.frames == 12);
    CHECK(s.gain_end == 2.0);
    CHECK(s.start_x == default_scenario(ScenarioKind::illum).start_x);
    for (const ScenarioKind k : {ScenarioKind::translate, ScenarioKind::deform, ScenarioKind::occlude,
                                 ScenarioKind::illum, ScenarioKind::clutter}) {
        CHECK(parse_kind(to_string(k)) == k);
        CHECK(parse_scenario(serialize_scenario(default_scenario(k))) == default_scenario(k));
    }
}

TEST_CASE("scenario errors")
{
    CHECK_THROWS_AS(parse_kind("spin"), SpecError);
    CHECK_THROWS_AS(parse_scenario("kind = spin\n"), SpecError);
    CHECK_THROWS_AS(parse_scenario("frames = many\n"), SpecError);
    CHECK_THROWS_AS(parse_scenario("colour = red\n"), SpecError);
    ScenarioSpec s;
    s.frames = 0;
    CHECK_THROWS_AS(validate(s), SpecError);
    s = ScenarioSpec{};
    s.target_w = 400;
    CHECK_THROWS_AS(generate(s), SpecError);
    s = ScenarioSpec{};
    s.velocity_x = 10;  // leaves the frame
    CHECK_THROWS_AS(validate(s), SpecError);
    s = ScenarioSpec{};
    s.gain_end = 0;
    CHECK_THROWS_AS(validate(s), SpecError);
    CHECK_THROWS_AS(load_scenario(testing::scratch_dir("synth_missing") / "x.txt"), SpecError);
}
