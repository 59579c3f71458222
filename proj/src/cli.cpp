#include "spikes/cli.hpp"

#include "spikes/config.hpp"
#include "spikes/evaluation.hpp"
#include "spikes/io.hpp"
#include "spikes/synthdata.hpp"
#include "spikes/tracker.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <opencv2/imgproc.hpp>

#include <charconv>
#include <cstring>
#include <fstream>
#include <ostream>

namespace spikes {

namespace fs = std::filesystem;

namespace {

/// Bad flags, configs and specs; mapped to the usage exit code.
class UsageError : public Error {
public:
    using Error::Error;
};

BoundingBox parse_box(const std::string& text)
{
    std::vector<double> v;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto comma = text.find(',', pos);
        if (comma == std::string::npos)
            comma = text.size();
        double d = 0.0;
        const char* b = text.data() + pos;
        const char* e = text.data() + comma;
        const auto res = std::from_chars(b, e, d);
        if (b == e || res.ec != std::errc{} || res.ptr != e)
            throw UsageError("malformed box '" + text + "': expected x,y,w,h");
        v.push_back(d);
        pos = comma + 1;
    }
    if (v.size() != 4 || !(v[2] > 0.0) || !(v[3] > 0.0))
        throw UsageError("malformed box '" + text + "': expected x,y,w,h with positive size");
    return {v[0], v[1], v[2], v[3]};
}

Config load_or_default(const std::string& path, bool search_window)
{
    Config c = path.empty() ? Config{} : load_config(path);
    if (search_window)
        c.search_window = true;
    return c;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << text;
}

std::string num(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

cv::Mat to_bgr(const Frame& f)
{
    cv::Mat rgb(f.height(), f.width(), CV_8UC3, const_cast<std::uint8_t*>(f.data().data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    return bgr;
}

Frame from_bgr(const cv::Mat& bgr, int index)
{
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    std::vector<std::uint8_t> px(rgb.total() * 3);
    std::memcpy(px.data(), rgb.data, px.size());
    return Frame(rgb.cols, rgb.rows, std::move(px), index);
}

cv::Point pt(Vec2 p) { return {static_cast<int>(std::lround(p.x)), static_cast<int>(std::lround(p.y))}; }

Frame draw_outcome(const Frame& frame, const FrameOutcome& o)
{
    cv::Mat img = to_bgr(frame);
    for (const Vote& v : o.votes) {
        cv::line(img, pt(v.source), pt(v.position), {200, 200, 0}, 1, cv::LINE_AA);
        cv::circle(img, pt(v.source), 2, {0, 255, 255}, cv::FILLED);
    }
    const cv::Scalar color = o.occluded ? cv::Scalar(0, 0, 255) : cv::Scalar(0, 255, 0);
    cv::rectangle(img, cv::Rect2d(o.bbox.x, o.bbox.y, o.bbox.w, o.bbox.h), color, 2);
    cv::drawMarker(img, pt(o.center), color, cv::MARKER_CROSS, 8, 1);
    return from_bgr(img, frame.index());
}

std::string frame_name(std::size_t i, const char* ext)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04zu.%s", i + 1, ext);
    return buf;
}

// ---------------------------------------------------------------------------

struct TrackArgs {
    std::string sequence;
    std::string init;
    std::string config;
    std::string output = "track_out";
    bool overlay = false;
    bool snapshots = false;
    bool search_window = false;
};

int cmd_track(const TrackArgs& a, std::ostream& out)
{
    const Config config = load_or_default(a.config, a.search_window);

    std::vector<fs::path> frames = list_frames(a.sequence);
    if (frames.empty())
        frames = list_frames(fs::path(a.sequence) / "img");
    if (frames.empty())
        throw SequenceLoadError(a.sequence + ": no numbered frames");

    BoundingBox init;
    if (!a.init.empty()) {
        init = parse_box(a.init);
    } else {
        const SequenceSpec seq = load_sequence(a.sequence);
        init = seq.groundtruth.front();
    }

    const fs::path dir = a.output;
    fs::create_directories(dir);
    if (a.overlay)
        fs::create_directories(dir / "overlay");
    if (a.snapshots)
        fs::create_directories(dir / "snapshots");

    std::ofstream csv(dir / "boxes.csv");
    if (!csv)
        throw IoError("cannot write " + (dir / "boxes.csv").string());
    csv << "frame,x,y,w,h,occluded,n_matches\n";

    Tracker tracker(config);
    std::size_t n_occluded = 0;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const Frame frame = read_frame(frames[i], static_cast<int>(i));
        const FrameOutcome o = i == 0 ? tracker.init(frame, init) : tracker.track(frame);
        n_occluded += o.occluded ? 1 : 0;
        csv << i + 1 << ',' << num(o.bbox.x) << ',' << num(o.bbox.y) << ',' << num(o.bbox.w) << ','
            << num(o.bbox.h) << ',' << (o.occluded ? 1 : 0) << ',' << o.n_valid_matches << '\n';
        if (a.overlay)
            write_frame(dir / "overlay" / frame_name(i, "png"), draw_outcome(frame, o));
        if (a.snapshots)
            save_model(dir / "snapshots" / frame_name(i, "json"), tracker.model());
    }
    out << "tracked " << frames.size() << " frames (" << n_occluded << " flagged occluded) -> "
        << (dir / "boxes.csv").string() << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
    std::string list;
    std::string config;
    std::string output = "eval_out";
    bool oracle = false;
    bool svg = false;
    bool one_indexed = false;
    bool search_window = false;
    int threads = 1;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err)
{
    OpeOptions opt;
    opt.config = load_or_default(a.config, a.search_window);
    opt.oracle = a.oracle;
    opt.threads = a.threads;
    opt.one_indexed = a.one_indexed;

    const std::vector<fs::path> dirs = read_sequence_list(a.list);
    if (dirs.empty())
        throw UsageError("sequence list " + a.list + " is empty");

    const OpeReport report = run_ope(dirs, opt);
    for (const SequenceResult& r : report.sequences) {
        if (r.ok)
            out << r.name << ": precision@20 " << num(r.curves.precision_at_20) << ", AUC " << num(r.curves.auc)
                << '\n';
        else
            err << r.name << ": " << r.error << '\n';
    }
    if (report.n_failed == report.sequences.size()) {
        err << "no sequence could be evaluated\n";
        return kExitFailure;
    }

    const fs::path dir = a.output;
    fs::create_directories(dir);
    write_text(dir / "curves.csv", curves_csv(report.pooled));
    write_text(dir / "summary.csv", summary_csv(report));
    if (a.svg)
        write_text(dir / "curves.svg", curves_svg(report.pooled, a.oracle ? "oracle" : "SPiKeS"));
    out << "pooled over " << report.pooled.n_frames << " frames: precision@20 " << num(report.pooled.precision_at_20)
        << ", AUC " << num(report.pooled.auc) << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string spec;
    std::string kind;
    std::string output;
};

int cmd_synth(const SynthArgs& a, std::ostream& out)
{
    if (a.spec.empty() && a.kind.empty())
        throw UsageError("synth needs a spec file or --kind");
    ScenarioSpec spec;
    if (!a.spec.empty()) {
        spec = load_scenario(a.spec);
    } else {
        spec = default_scenario(parse_kind(a.kind));
        validate(spec);
    }
    const GeneratedSequence seq = generate(spec);
    write_sequence(a.output, seq);
    out << "wrote " << seq.frames.size() << " frames of '" << to_string(spec.kind) << "' to " << a.output << '\n';
    return kExitOk;
}

// ---------------------------------------------------------------------------

struct InspectArgs {
    std::string frame;
    std::string snapshot;
    std::string box;
    std::string config;
    std::string output;
    bool labels = false;
};

std::string parts_csv(const Model& m)
{
    std::string s = "part,center_x,center_y,vote_x,vote_y,omega,phi,age,n_links\n";
    for (std::size_t i = 0; i < m.parts.size(); ++i) {
        const ModelSpikes& p = m.parts[i];
        const Vec2 c = m.part_position(i);
        s += std::to_string(i) + ',' + num(c.x) + ',' + num(c.y) + ',' + num(p.vote.x) + ',' + num(p.vote.y) + ','
             + num(p.persistence) + ',' + num(p.predictive) + ',' + std::to_string(p.age) + ','
             + std::to_string(p.spikes.links.size()) + '\n';
    }
    return s;
}

int cmd_inspect(const InspectArgs& a, std::ostream& out)
{
    if (a.frame.empty() == a.snapshot.empty())
        throw UsageError("inspect needs exactly one of --frame or --snapshot");
    if (a.output.empty())
        throw UsageError("inspect needs --output");
    const fs::path dst = a.output;

    if (!a.snapshot.empty()) {
        const Model m = load_model(a.snapshot);
        write_text(dst, parts_csv(m));
        out << m.parts.size() << " model parts, " << m.foreground.size() << " foreground and "
            << m.background.size() << " background keypoints -> " << dst.string() << '\n';
        return kExitOk;
    }

    const Config config = load_or_default(a.config, false);
    const Frame frame = read_frame(a.frame);
    const BoundingBox box = a.box.empty()
                                ? BoundingBox::centered({frame.width() / 2.0, frame.height() / 2.0},
                                                        frame.width() / 4.0, frame.height() / 4.0)
                                : parse_box(a.box);
    const SegmentationPlan plan =
        plan_segmentation(frame.width(), frame.height(), box.w, box.h, config.superpixels_per_box);
    Config whole = config;
    whole.search_window = false;
    const Observation obs = observe(frame, plan, box.center(), box.w, box.h, whole);
    const Segmentation& seg = obs.segmentation;

    cv::Mat img = to_bgr(frame);
    for (int y = 0; y < seg.height; ++y)
        for (int x = 0; x < seg.width; ++x) {
            const int l = seg.label_at(x, y);
            if ((x + 1 < seg.width && seg.label_at(x + 1, y) != l) || (y + 1 < seg.height && seg.label_at(x, y + 1) != l))
                img.at<cv::Vec3b>(y, x) = {0, 0, 0};
        }
    for (const Keypoint& k : obs.keypoints) {
        cv::circle(img, pt(k.position), 3, {0, 255, 255}, 1, cv::LINE_AA);
        const Vec2 tip = k.position + Vec2{std::cos(k.orientation), std::sin(k.orientation)} * 6.0;
        cv::line(img, pt(k.position), pt(tip), {0, 255, 255}, 1, cv::LINE_AA);
    }
    cv::rectangle(img, cv::Rect2d(box.x, box.y, box.w, box.h), {0, 255, 0}, 1);
    write_frame(dst, from_bgr(img, 0));

    std::string kcsv = "x,y,orientation,response\n";
    for (const Keypoint& k : obs.keypoints)
        kcsv += num(k.position.x) + ',' + num(k.position.y) + ',' + num(k.orientation) + ',' + num(k.response) + '\n';
    fs::path stem = dst;
    stem.replace_extension();
    write_text(stem.string() + "_keypoints.csv", kcsv);

    std::string jsonl;
    for (const Spikes& s : obs.spikes) {
        nlohmann::json edges = nlohmann::json::array();
        for (const KeypointLink& l : s.links)
            edges.push_back({{"keypoint", l.keypoint}, {"edge", {l.edge.x, l.edge.y}}});
        jsonl += nlohmann::json{{"superpixel", s.superpixel}, {"center", {s.center.x, s.center.y}}, {"edges", edges}}
                     .dump()
                 + '\n';
    }
    write_text(stem.string() + "_spikes.jsonl", jsonl);
    if (a.labels) {
        const std::vector<std::uint8_t> pgm = encode_label_pgm(seg);
        write_text(stem.string() + "_labels.pgm", std::string(pgm.begin(), pgm.end()));
    }
    out << seg.superpixels.size() << " superpixels, " << obs.keypoints.size() << " keypoints -> " << dst.string()
        << '\n';
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"SPiKeS superpixel-keypoint tracker", "spikes"};
    app.require_subcommand(1);

    TrackArgs ta;
    auto* track = app.add_subcommand("track", "track a target through a frame sequence");
    track->add_option("sequence", ta.sequence, "directory of numbered frames")->required();
    track->add_option("--init", ta.init, "initial box x,y,w,h (default: first groundtruth line)");
    track->add_option("--config", ta.config, "tracker configuration file");
    track->add_option("--output", ta.output, "output directory");
    track->add_flag("--overlay", ta.overlay, "write annotated frames");
    track->add_flag("--snapshots", ta.snapshots, "write a model snapshot per frame");
    track->add_flag("--search-window", ta.search_window, "process only a window around the target");

    EvalArgs ea;
    auto* eval = app.add_subcommand("eval", "one-pass evaluation over a list of sequences");
    eval->add_option("list", ea.list, "file with one sequence directory per line")->required();
    eval->add_option("--config", ea.config, "tracker configuration file");
    eval->add_option("--output", ea.output, "output directory");
    eval->add_flag("--oracle", ea.oracle, "echo the groundtruth instead of tracking");
    eval->add_flag("--svg", ea.svg, "also write curves.svg");
    eval->add_flag("--one-indexed", ea.one_indexed, "groundtruth uses a 1-indexed origin");
    eval->add_flag("--search-window", ea.search_window, "process only a window around the target");
    eval->add_option("--threads", ea.threads, "sequences evaluated in parallel")->check(CLI::PositiveNumber);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "render a synthetic sequence");
    synth->add_option("spec", sa.spec, "scenario spec file");
    synth->add_option("--kind", sa.kind, "use the defaults of a scenario kind instead of a spec file");
    synth->add_option("--output", sa.output, "output directory")->required();

    InspectArgs ia;
    auto* inspect = app.add_subcommand("inspect", "diagnostics for a frame or a model snapshot");
    inspect->add_option("--frame", ia.frame, "image to segment and annotate");
    inspect->add_option("--snapshot", ia.snapshot, "model snapshot to dump as CSV");
    inspect->add_option("--box", ia.box, "target box x,y,w,h used to plan the segmentation");
    inspect->add_option("--config", ia.config, "tracker configuration file");
    inspect->add_option("--output", ia.output, "output PNG (frame) or CSV (snapshot)");
    inspect->add_flag("--labels", ia.labels, "also write the label map as 16-bit PGM");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }

    try {
        if (*track)
            return cmd_track(ta, out);
        if (*eval)
            return cmd_eval(ea, out, err);
        if (*synth)
            return cmd_synth(sa, out);
        return cmd_inspect(ia, out);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const SpecError& e) {
        err << "spec error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitFailure;
    }
}

}  // namespace spikes
