#include "spikes/evaluation.hpp"

#include "spikes/io.hpp"
#include "spikes/tracker.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

namespace spikes {

namespace fs = std::filesystem;

double cle(Vec2 predicted, Vec2 groundtruth)
{
    return (predicted - groundtruth).norm();
}

double success_threshold(int k)
{
    return k / 100.0;
}

EvalCurves compute_curves(std::span<const BoundingBox> predicted, std::span<const BoundingBox> groundtruth)
{
    if (predicted.empty() || predicted.size() != groundtruth.size())
        throw std::invalid_argument("compute_curves: need equal, non-empty prediction and groundtruth lists");
    EvalCurves c;
    c.n_frames = predicted.size();
    std::array<std::size_t, kPrecisionSteps> within{};
    std::array<std::size_t, kSuccessSteps> above{};
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        const double e = cle(predicted[i].center(), groundtruth[i].center());
        const double o = overlap_ratio(predicted[i], groundtruth[i]);
        for (int t = 0; t < kPrecisionSteps; ++t)
            if (e <= t)
                ++within[static_cast<std::size_t>(t)];
        for (int k = 0; k < kSuccessSteps; ++k)
            if (o > success_threshold(k))
                ++above[static_cast<std::size_t>(k)];
    }
    const double n = static_cast<double>(predicted.size());
    for (int t = 0; t < kPrecisionSteps; ++t)
        c.precision[static_cast<std::size_t>(t)] = within[static_cast<std::size_t>(t)] / n;
    double sum = 0.0;
    for (int k = 0; k < kSuccessSteps; ++k) {
        c.success[static_cast<std::size_t>(k)] = above[static_cast<std::size_t>(k)] / n;
        sum += c.success[static_cast<std::size_t>(k)];
    }
    c.precision_at_20 = c.precision[20];
    c.auc = sum / kSuccessSteps;
    return c;
}

double perfect_auc()
{
    int bins = 0;
    for (int k = 0; k < kSuccessSteps; ++k)
        if (1.0 > success_threshold(k))
            ++bins;
    return static_cast<double>(bins) / kSuccessSteps;
}

std::vector<BoundingBox> parse_groundtruth(std::string_view text, bool one_indexed)
{
    std::vector<BoundingBox> out;
    int line_no = 0;
    std::istringstream in{std::string(text)};
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        for (char& ch : line)
            if (ch == ',' || ch == '\t' || ch == '\r' || ch == ';')
                ch = ' ';
        std::istringstream fields(line);
        std::vector<double> v;
        std::string tok;
        while (fields >> tok) {
            double d = 0.0;
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), d);
            if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
                throw SequenceLoadError("groundtruth line " + std::to_string(line_no) + ": bad number '" + tok + "'");
            v.push_back(d);
        }
        if (v.empty())
            continue;
        if (v.size() != 4)
            throw SequenceLoadError("groundtruth line " + std::to_string(line_no) + ": expected 4 fields, got "
                                    + std::to_string(v.size()));
        BoundingBox b{v[0], v[1], v[2], v[3]};
        if (one_indexed) {
            b.x -= 1.0;
            b.y -= 1.0;
        }
        if (!b.valid())
            throw SequenceLoadError("groundtruth line " + std::to_string(line_no) + ": non-positive box size");
        out.push_back(b);
    }
    return out;
}

std::vector<fs::path> list_frames(const fs::path& dir)
{
    std::vector<fs::path> frames;
    if (!fs::is_directory(dir))
        return frames;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_regular_file())
            continue;
        std::string ext = entry.path().extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
        if (ext != ".png" && ext != ".jpg" && ext != ".jpeg")
            continue;
        const std::string stem = entry.path().stem().string();
        if (stem.empty() || !std::all_of(stem.begin(), stem.end(), [](unsigned char ch) { return std::isdigit(ch); }))
            continue;
        frames.push_back(entry.path());
    }
    std::sort(frames.begin(), frames.end(), [](const fs::path& a, const fs::path& b) {
        const std::string sa = a.stem().string(), sb = b.stem().string();
        return sa.size() != sb.size() ? sa.size() < sb.size() : sa < sb;
    });
    return frames;
}

SequenceSpec load_sequence(const fs::path& dir, bool one_indexed)
{
    SequenceSpec seq;
    seq.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    if (!fs::is_directory(dir))
        throw SequenceLoadError(dir.string() + ": not a directory");
    seq.frames = list_frames(dir);
    if (seq.frames.empty())
        seq.frames = list_frames(dir / "img");
    if (seq.frames.empty())
        throw SequenceLoadError(dir.string() + ": no numbered frames");

    const fs::path gt_path = dir / "groundtruth_rect.txt";
    std::ifstream in(gt_path);
    if (!in)
        throw SequenceLoadError(dir.string() + ": missing groundtruth_rect.txt");
    std::ostringstream ss;
    ss << in.rdbuf();
    seq.groundtruth = parse_groundtruth(ss.str(), one_indexed);
    if (seq.groundtruth.size() != seq.frames.size())
        throw SequenceLoadError(dir.string() + ": " + std::to_string(seq.frames.size()) + " frames but "
                                + std::to_string(seq.groundtruth.size()) + " groundtruth boxes");
    if (seq.frames.size() < 2)
        throw SequenceLoadError(dir.string() + ": need at least 2 frames");
    return seq;
}

std::vector<fs::path> read_sequence_list(const fs::path& list_file)
{
    std::ifstream in(list_file);
    if (!in)
        throw SequenceLoadError("cannot read sequence list " + list_file.string());
    std::vector<fs::path> out;
    std::string line;
    while (std::getline(in, line)) {
        if (const auto hash = line.find('#'); hash != std::string::npos)
            line.resize(hash);
        const auto b = line.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            continue;
        const auto e = line.find_last_not_of(" \t\r");
        fs::path p = line.substr(b, e - b + 1);
        out.push_back(p.is_relative() ? list_file.parent_path() / p : p);
    }
    return out;
}

SequenceResult track_sequence(const SequenceSpec& seq, const Config& config)
{
    SequenceResult r;
    r.name = seq.name;
    r.groundtruth = seq.groundtruth;
    Tracker tracker(config);
    const Frame first = read_frame(seq.frames.front(), 0);
    r.predicted.push_back(tracker.init(first, seq.groundtruth.front()).bbox);
    r.occluded.push_back(false);
    for (std::size_t i = 1; i < seq.frames.size(); ++i) {
        const FrameOutcome o = tracker.track(read_frame(seq.frames[i], static_cast<int>(i)));
        r.predicted.push_back(o.bbox);
        r.occluded.push_back(o.occluded);
    }
    r.curves = compute_curves(r.predicted, r.groundtruth);
    r.ok = true;
    return r;
}

OpeReport run_ope(std::span<const fs::path> sequence_dirs, const OpeOptions& options)
{
    validate(options.config);
    OpeReport report;
    report.sequences.resize(sequence_dirs.size());

    auto run_one = [&](std::size_t i) {
        SequenceResult& r = report.sequences[i];
        try {
            const SequenceSpec seq = load_sequence(sequence_dirs[i], options.one_indexed);
            if (options.oracle) {
                r.name = seq.name;
                r.groundtruth = seq.groundtruth;
                r.predicted = seq.groundtruth;
                r.occluded.assign(seq.groundtruth.size(), false);
                r.curves = compute_curves(r.predicted, r.groundtruth);
                r.ok = true;
            } else {
                r = track_sequence(seq, options.config);
            }
        } catch (const std::exception& e) {
            r.name = sequence_dirs[i].filename().string();
            r.ok = false;
            r.error = e.what();
        }
    };

    const std::size_t n_threads =
        std::min(static_cast<std::size_t>(std::max(options.threads, 1)), std::max<std::size_t>(sequence_dirs.size(), 1));
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < sequence_dirs.size(); ++i)
            run_one(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::jthread> workers;
        for (std::size_t t = 0; t < n_threads; ++t)
            workers.emplace_back([&] {
                for (std::size_t i = next++; i < sequence_dirs.size(); i = next++)
                    run_one(i);
            });
    }

    std::vector<BoundingBox> all_pred, all_gt;
    for (const SequenceResult& r : report.sequences) {
        if (!r.ok) {
            ++report.n_failed;
            continue;
        }
        all_pred.insert(all_pred.end(), r.predicted.begin(), r.predicted.end());
        all_gt.insert(all_gt.end(), r.groundtruth.begin(), r.groundtruth.end());
    }
    if (!all_pred.empty())
        report.pooled = compute_curves(all_pred, all_gt);
    return report;
}

namespace {

std::string fmt(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string fixed2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", v);
    return buf;
}

}  // namespace

std::string curves_csv(const EvalCurves& curves)
{
    std::string out = "metric,threshold,value\n";
    for (int t = 0; t < kPrecisionSteps; ++t)
        out += "precision," + std::to_string(t) + "," + fmt(curves.precision[static_cast<std::size_t>(t)]) + "\n";
    for (int k = 0; k < kSuccessSteps; ++k)
        out += "success," + fixed2(success_threshold(k)) + "," + fmt(curves.success[static_cast<std::size_t>(k)])
               + "\n";
    return out;
}

std::string summary_csv(const OpeReport& report)
{
    std::string out = "sequence,precision_at_20,auc\n";
    for (const SequenceResult& r : report.sequences)
        if (r.ok)
            out += r.name + "," + fmt(r.curves.precision_at_20) + "," + fmt(r.curves.auc) + "\n";
    if (report.pooled.n_frames > 0)
        out += "ALL," + fmt(report.pooled.precision_at_20) + "," + fmt(report.pooled.auc) + "\n";
    return out;
}

std::string curves_svg(const EvalCurves& curves, std::string_view title)
{
    constexpr double pw = 300, ph = 220, margin = 40;
    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << 2 * (pw + 2 * margin) << "\" height=\""
      << ph + 2 * margin + 20 << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    s << "<text x=\"" << margin << "\" y=\"16\" font-size=\"14\">" << title << "</text>\n";

    auto panel = [&](double ox, const std::string& label, std::span<const double> ys, double x_max,
                     const std::string& score) {
        const double oy = 20 + margin;
        s << "<g transform=\"translate(" << ox << "," << oy << ")\">\n";
        s << "<rect width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#444\"/>\n";
        s << "<text x=\"" << pw / 2 << "\" y=\"" << ph + 28 << "\" text-anchor=\"middle\">" << label << "</text>\n";
        s << "<text x=\"" << pw - 6 << "\" y=\"16\" text-anchor=\"end\">" << score << "</text>\n";
        s << "<polyline fill=\"none\" stroke=\"#c0392b\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i) {
            const double x = pw * (static_cast<double>(i) / (ys.size() - 1));
            const double y = ph * (1.0 - ys[i]);
            s << x << "," << y << " ";
        }
        s << "\"/>\n";
        for (int k = 0; k <= 4; ++k) {
            const double y = ph * (1.0 - k / 4.0);
            s << "<text x=\"-6\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << fixed2(k / 4.0) << "</text>\n";
            const double x = pw * k / 4.0;
            s << "<text x=\"" << x << "\" y=\"" << ph + 14 << "\" text-anchor=\"middle\">"
              << fmt(x_max * k / 4.0) << "</text>\n";
        }
        s << "</g>\n";
    };
    panel(margin, "location error threshold (px)", curves.precision, 50, "P@20 " + fixed2(curves.precision_at_20));
    panel(pw + 3 * margin, "overlap threshold", curves.success, 1, "AUC " + fixed2(curves.auc));
    s << "</svg>\n";
    return s.str();
}

}  // namespace spikes
