#include "spikes/io.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include <json.hpp>

namespace spikes {

using nlohmann::json;

Frame read_frame(const std::filesystem::path& path, int index)
{
    const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
    if (bgr.empty())
        throw IoError("cannot decode image " + path.string());
    cv::Mat rgb;
    cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
    std::vector<std::uint8_t> px(rgb.total() * 3);
    for (int y = 0; y < rgb.rows; ++y)
        std::memcpy(px.data() + static_cast<std::size_t>(y) * rgb.cols * 3, rgb.ptr(y),
                    static_cast<std::size_t>(rgb.cols) * 3);
    return Frame(rgb.cols, rgb.rows, std::move(px), index);
}

void write_frame(const std::filesystem::path& path, const Frame& frame)
{
    cv::Mat rgb(frame.height(), frame.width(), CV_8UC3, const_cast<std::uint8_t*>(frame.data().data()));
    cv::Mat bgr;
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
    if (!cv::imwrite(path.string(), bgr))
        throw IoError("cannot write image " + path.string());
}

namespace {

json to_json(Vec2 v) { return json::array({v.x, v.y}); }
Vec2 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

json to_json(const HsvHistogram& h)
{
    // Sparse: most of the 216 bins are empty.
    json out = json::array();
    for (std::size_t b = 0; b < h.bins.size(); ++b)
        if (h.bins[b] != 0.0)
            out.push_back(json::array({b, h.bins[b]}));
    return out;
}

HsvHistogram histogram_from(const json& j)
{
    HsvHistogram h;
    for (const json& e : j) {
        const auto b = e.at(0).get<std::size_t>();
        if (b >= h.bins.size())
            throw IoError("snapshot histogram bin out of range");
        h.bins[b] = e.at(1).get<double>();
    }
    return h;
}

json to_json(const PoolKeypoint& p)
{
    return {{"position", to_json(p.keypoint.position)},
            {"orientation", p.keypoint.orientation},
            {"response", p.keypoint.response},
            {"scale", p.keypoint.scale},
            {"persistence", p.persistence},
            {"descriptor", p.descriptor.values}};
}

PoolKeypoint pool_keypoint_from(const json& j)
{
    PoolKeypoint p;
    p.keypoint.position = vec_from(j.at("position"));
    p.keypoint.orientation = j.at("orientation").get<double>();
    p.keypoint.response = j.at("response").get<double>();
    p.keypoint.scale = j.at("scale").get<double>();
    p.persistence = j.at("persistence").get<double>();
    p.descriptor.values = j.at("descriptor").get<std::array<float, kDescriptorSize>>();
    return p;
}

json to_json(const ModelSpikes& m)
{
    json links = json::array();
    for (const KeypointLink& l : m.spikes.links)
        links.push_back({{"keypoint", l.keypoint}, {"edge", to_json(l.edge)}, {"orientation", l.orientation}});
    return {{"superpixel", m.spikes.superpixel},
            {"center", to_json(m.spikes.center)},
            {"radius", m.spikes.radius},
            {"histogram", to_json(m.spikes.histogram)},
            {"links", links},
            {"vote", to_json(m.vote)},
            {"omega", m.persistence},
            {"phi", m.predictive},
            {"age", m.age}};
}

ModelSpikes model_spikes_from(const json& j)
{
    ModelSpikes m;
    m.spikes.superpixel = j.at("superpixel").get<int>();
    m.spikes.center = vec_from(j.at("center"));
    m.spikes.radius = j.at("radius").get<double>();
    m.spikes.histogram = histogram_from(j.at("histogram"));
    for (const json& l : j.at("links"))
        m.spikes.links.push_back(
            {l.at("keypoint").get<int>(), vec_from(l.at("edge")), l.at("orientation").get<double>()});
    m.vote = vec_from(j.at("vote"));
    m.persistence = j.at("omega").get<double>();
    m.predictive = j.at("phi").get<double>();
    m.age = j.at("age").get<int>();
    return m;
}

}  // namespace

std::string model_to_json(const Model& model)
{
    json parts = json::array();
    for (const ModelSpikes& m : model.parts)
        parts.push_back(to_json(m));
    json fg = json::array();
    for (const PoolKeypoint& p : model.foreground)
        fg.push_back(to_json(p));
    json bg = json::array();
    for (const PoolKeypoint& p : model.background)
        bg.push_back(to_json(p));

    const json doc = {{"version", kSnapshotVersion},
                      {"frame_index", model.frame_index},
                      {"box_w", model.box_w},
                      {"box_h", model.box_h},
                      {"last_center", to_json(model.last_center)},
                      {"prev_center", to_json(model.prev_center)},
                      {"n_superpixels", model.plan.n_superpixels},
                      {"diameter", model.plan.diameter},
                      {"max_parts", model.max_parts},
                      {"parts", parts},
                      {"foreground", fg},
                      {"background", bg}};
    return doc.dump(1);
}

Model model_from_json(const std::string& text)
{
    try {
        const json doc = json::parse(text);
        const int version = doc.at("version").get<int>();
        if (version != kSnapshotVersion)
            throw IoError("unsupported snapshot version " + std::to_string(version));
        Model m;
        m.frame_index = doc.at("frame_index").get<int>();
        m.box_w = doc.at("box_w").get<double>();
        m.box_h = doc.at("box_h").get<double>();
        m.last_center = vec_from(doc.at("last_center"));
        m.prev_center = vec_from(doc.at("prev_center"));
        m.plan.n_superpixels = doc.at("n_superpixels").get<int>();
        m.plan.diameter = doc.at("diameter").get<double>();
        m.max_parts = doc.at("max_parts").get<std::size_t>();
        for (const json& p : doc.at("parts"))
            m.parts.push_back(model_spikes_from(p));
        for (const json& p : doc.at("foreground"))
            m.foreground.push_back(pool_keypoint_from(p));
        for (const json& p : doc.at("background"))
            m.background.push_back(pool_keypoint_from(p));
        return m;
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed model snapshot: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const Model& model)
{
    std::ofstream out(path);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << model_to_json(model) << '\n';
}

Model load_model(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

}  // namespace spikes
