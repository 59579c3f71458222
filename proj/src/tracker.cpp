#include "spikes/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace spikes {

namespace {

double radius_of(const Model& model, const Config& config)
{
    return config.radius_factor * model.diameter();
}

DetectorParams detector_params(const SegmentationPlan& plan, const Config& config)
{
    DetectorParams dp;
    dp.max_keypoints = config.max_keypoints;
    dp.cell_size = std::max(2, static_cast<int>(std::lround(plan.diameter / 2.0)));
    return dp;
}

/// Keep the `cap` entries with the highest persistence; survivors keep their
/// relative order and ties favour the earlier entry.
template <typename T, typename Weight>
void keep_strongest(std::vector<T>& items, std::size_t cap, Weight weight)
{
    if (items.size() <= cap)
        return;
    std::vector<std::size_t> order(items.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return weight(items[a]) > weight(items[b]); });
    order.resize(cap);
    std::sort(order.begin(), order.end());
    std::vector<T> kept;
    kept.reserve(cap);
    for (const std::size_t i : order)
        kept.push_back(std::move(items[i]));
    items = std::move(kept);
}

HsvHistogram blend(const HsvHistogram& a, const HsvHistogram& b, double alpha)
{
    HsvHistogram out;
    for (std::size_t i = 0; i < out.bins.size(); ++i)
        out.bins[i] = (1.0 - alpha) * a.bins[i] + alpha * b.bins[i];
    out.normalize();
    return out;
}

void blend_keypoint(PoolKeypoint& pk, const Keypoint& obs_kp, Vec2 obs_position, const Descriptor& obs_desc,
                    double alpha)
{
    pk.keypoint.position = pk.keypoint.position * (1.0 - alpha) + obs_position * alpha;
    const double cx = (1.0 - alpha) * std::cos(pk.keypoint.orientation) + alpha * std::cos(obs_kp.orientation);
    const double cy = (1.0 - alpha) * std::sin(pk.keypoint.orientation) + alpha * std::sin(obs_kp.orientation);
    if (cx != 0.0 || cy != 0.0)
        pk.keypoint.orientation = wrap_angle(std::atan2(cy, cx));
    pk.keypoint.response = (1.0 - alpha) * pk.keypoint.response + alpha * obs_kp.response;

    double n2 = 0.0;
    std::array<double, kDescriptorSize> mixed{};
    for (std::size_t b = 0; b < kDescriptorSize; ++b) {
        mixed[b] = (1.0 - alpha) * pk.descriptor.values[b] + alpha * obs_desc.values[b];
        n2 += mixed[b] * mixed[b];
    }
    if (n2 > 0.0) {
        const double inv = 1.0 / std::sqrt(n2);
        for (std::size_t b = 0; b < kDescriptorSize; ++b)
            pk.descriptor.values[b] = static_cast<float>(mixed[b] * inv);
    }
}

bool in_band(const BoundingBox& box, double factor, Vec2 p)
{
    return box.inflated(factor).contains(p) && !box.contains(p);
}

std::vector<Keypoint> pool_positions(const std::vector<PoolKeypoint>& pool)
{
    std::vector<Keypoint> out;
    out.reserve(pool.size());
    for (const PoolKeypoint& pk : pool)
        out.push_back(pk.keypoint);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Observation
// ---------------------------------------------------------------------------

int Observation::label_at(Vec2 p) const
{
    const int x = static_cast<int>(std::floor(p.x)) - origin_x;
    const int y = static_cast<int>(std::floor(p.y)) - origin_y;
    if (x < 0 || y < 0 || x >= segmentation.width || y >= segmentation.height)
        return -1;
    return segmentation.label_at(x, y);
}

Observation observe(const Frame& frame, const SegmentationPlan& plan, Vec2 center, double box_w, double box_h,
                    const Config& config)
{
    Observation obs;
    SegmentationPlan local_plan = plan;
    Frame window;
    const Frame* image = &frame;

    if (config.search_window) {
        const double ww = box_w * config.search_window_factor;
        const double wh = box_h * config.search_window_factor;
        const int min_side = static_cast<int>(std::ceil(2.0 * descriptor_margin())) + 2;
        int x0 = static_cast<int>(std::floor(center.x - ww / 2.0));
        int y0 = static_cast<int>(std::floor(center.y - wh / 2.0));
        int x1 = static_cast<int>(std::ceil(center.x + ww / 2.0));
        int y1 = static_cast<int>(std::ceil(center.y + wh / 2.0));
        x0 = std::clamp(x0, 0, frame.width() - 1);
        y0 = std::clamp(y0, 0, frame.height() - 1);
        x1 = std::clamp(std::max(x1, x0 + min_side), x0 + 1, frame.width());
        y1 = std::clamp(std::max(y1, y0 + min_side), y0 + 1, frame.height());
        window = frame.crop(x0, y0, x1 - x0, y1 - y0);
        image = &window;
        obs.origin_x = x0;
        obs.origin_y = y0;
        local_plan = plan_for_area(plan, window.width(), window.height());
    }

    obs.segmentation = segment(*image, local_plan, {config.compactness, config.slic_iterations});
    const Vec2 origin{static_cast<double>(obs.origin_x), static_cast<double>(obs.origin_y)};
    for (Superpixel& sp : obs.segmentation.superpixels)
        sp.center += origin;

    const std::vector<Keypoint> detected = detect(*image, detector_params(plan, config));
    Description desc = describe(*image, detected);
    for (Keypoint& kp : desc.keypoints)
        kp.position += origin;
    obs.keypoints = std::move(desc.keypoints);
    obs.descriptors = std::move(desc.descriptors);

    obs.spikes = build_spikes(obs.segmentation.superpixels, obs.keypoints, config.radius_factor * plan.diameter);
    return obs;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

PoolMatches match_pools(const Model& model, std::span<const Descriptor> frame_descriptors, const Config& config)
{
    PoolMatches out;
    const std::size_t n_frame = frame_descriptors.size();
    const std::size_t n_fg = model.foreground.size();
    out.frame_to_fg.assign(n_frame, -1);
    out.frame_to_bg.assign(n_frame, -1);
    out.fg_to_frame = KeypointCorrespondence(n_fg, n_frame);

    std::vector<Descriptor> pool;
    pool.reserve(n_fg + model.background.size());
    for (const PoolKeypoint& pk : model.foreground)
        pool.push_back(pk.descriptor);
    for (const PoolKeypoint& pk : model.background)
        pool.push_back(pk.descriptor);

    const auto matches = match(frame_descriptors, pool, {config.theta_lo, config.singleton_cap});
    for (const KeypointMatch& m : matches) {
        const auto frame_idx = static_cast<std::size_t>(m.index_a);
        if (static_cast<std::size_t>(m.index_b) < n_fg) {
            out.frame_to_fg[frame_idx] = m.index_b;
            out.fg_to_frame.add(m.index_b, m.index_a);
        } else {
            out.frame_to_bg[frame_idx] = m.index_b - static_cast<int>(n_fg);
        }
    }
    return out;
}

CandidateTable score_candidates(const Model& model, std::span<const Spikes> query,
                                const KeypointCorrespondence& fg_to_frame, double theta_c)
{
    CandidateTable t;
    t.n_model = model.parts.size();
    t.n_query = query.size();
    t.scores.resize(t.n_model * t.n_query);
    t.displacement.resize(t.n_model * t.n_query);
    t.query_centers.reserve(query.size());
    for (const Spikes& q : query)
        t.query_centers.push_back(q.center);

    for (std::size_t i = 0; i < t.n_model; ++i) {
        const Vec2 expected = model.part_position(i);
        for (std::size_t j = 0; j < t.n_query; ++j) {
            t.scores[i * t.n_query + j] = similarity(model.parts[i].spikes, query[j], fg_to_frame, theta_c);
            t.displacement[i * t.n_query + j] = (expected - query[j].center).norm();
        }
    }
    return t;
}

std::vector<MatchPair> select_matches(const CandidateTable& table, const MatchGate& gate)
{
    std::vector<MatchPair> out;
    if (table.n_model == 0 || table.n_query == 0)
        return out;

    // Nearest query SPiKeS for every model part; lowest index wins ties.
    std::vector<std::size_t> nearest(table.n_model);
    for (std::size_t i = 0; i < table.n_model; ++i) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < table.n_query; ++j)
            if (table.score(i, j).total > table.score(i, best).total)
                best = j;
        nearest[i] = best;
    }

    // Many-to-one conflicts: the highest score keeps the query.
    constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> owner(table.n_query, none);
    for (std::size_t i = 0; i < table.n_model; ++i) {
        const std::size_t j = nearest[i];
        if (owner[j] == none || table.score(i, j).total > table.score(owner[j], j).total)
            owner[j] = i;
    }

    const double base = std::exp(-gate.theta_c);
    for (std::size_t i = 0; i < table.n_model; ++i) {
        const std::size_t j = nearest[i];
        if (owner[j] != i)
            continue;
        const SimilarityScore& z = table.score(i, j);
        const double threshold = z.n_kp_matches == 0 ? base : base + gate.lambda1;
        if (!(z.total > threshold) || !(table.disp(i, j) < gate.motion_limit))
            continue;
        MatchPair p;
        p.model_index = static_cast<int>(i);
        p.query_index = static_cast<int>(j);
        p.score = z;
        p.displacement = table.disp(i, j);
        p.query_center = table.query_centers.empty() ? Vec2{} : table.query_centers[j];
        out.push_back(p);
    }
    return out;
}

MatchGate match_gate(const Model& model, const Config& config)
{
    MatchGate g;
    g.theta_c = config.theta_c;
    g.lambda1 = config.lambda1;
    g.motion_limit = (model.last_center - model.prev_center).norm() + config.lambda2_factor * model.diameter();
    return g;
}

std::vector<MatchPair> match_model(const Model& model, std::span<const Spikes> query,
                                   const KeypointCorrespondence& fg_to_frame, const Config& config)
{
    return select_matches(score_candidates(model, query, fg_to_frame, config.theta_c), match_gate(model, config));
}

// ---------------------------------------------------------------------------
// Localization and occlusion
// ---------------------------------------------------------------------------

Location estimate_location(std::span<const MatchPair> pairs, const Model& model)
{
    if (pairs.empty())
        throw NoMatches();
    Location loc;
    Vec2 acc;
    double wsum = 0.0;
    for (const MatchPair& p : pairs) {
        const ModelSpikes& part = model.parts[static_cast<std::size_t>(p.model_index)];
        const Vec2 x = p.query_center + part.vote;
        const double w = part.persistence * part.predictive;
        loc.votes.push_back({x, w, p.model_index, p.query_center});
        acc += x * w;
        wsum += w;
    }
    if (!(wsum > 0.0))
        throw NoMatches();
    loc.center = acc * (1.0 / wsum);
    return loc;
}

int count_background_hits(const BoundingBox& box, std::span<const Keypoint> frame_keypoints,
                          std::span<const int> frame_to_bg)
{
    int hits = 0;
    for (std::size_t n = 0; n < frame_keypoints.size() && n < frame_to_bg.size(); ++n)
        if (frame_to_bg[n] >= 0 && box.contains(frame_keypoints[n].position))
            ++hits;
    return hits;
}

bool detect_occlusion(const BoundingBox& box, std::span<const Keypoint> frame_keypoints,
                      std::span<const int> frame_to_bg, int theta_o)
{
    return count_background_hits(box, frame_keypoints, frame_to_bg) > theta_o;
}

// ---------------------------------------------------------------------------
// Update
// ---------------------------------------------------------------------------

Vec2 vote_vector(Vec2 target_center, Vec2 part_center)
{
    return target_center - part_center;
}

double update_persistence(double omega, bool matched, double beta)
{
    return (1.0 - beta) * omega + beta * (matched ? 1.0 : 0.0);
}

double predictive_increment(Vec2 vote, Vec2 center)
{
    return std::exp(-(vote - center).squared_norm());
}

void refresh_structure(Model& model, const Config& config)
{
    const std::vector<Keypoint> fg = pool_positions(model.foreground);
    const double radius = radius_of(model, config);
    for (ModelSpikes& part : model.parts) {
        part.spikes.center = -part.vote;
        part.spikes.radius = radius;
        part.spikes.links = link_keypoints(part.spikes.center, fg, radius);
    }
}

Model update_model(const Model& model, std::span<const MatchPair> pairs, const Observation& obs,
                   const PoolMatches& pool_matches, Vec2 center, const Config& config)
{
    Model next = model;
    const std::size_t n_frame = obs.keypoints.size();
    const BoundingBox box = BoundingBox::centered(center, model.box_w, model.box_h);

    std::vector<bool> part_matched(model.parts.size(), false);
    std::vector<bool> query_matched(obs.spikes.size(), false);
    std::vector<bool> fg_blended(model.foreground.size(), false);

    // Appearance and vote update for every valid pair.
    for (const MatchPair& p : pairs) {
        const auto i = static_cast<std::size_t>(p.model_index);
        const auto j = static_cast<std::size_t>(p.query_index);
        const Spikes& q = obs.spikes[j];
        ModelSpikes& part = next.parts[i];
        part_matched[i] = true;
        query_matched[j] = true;

        part.spikes.histogram = blend(part.spikes.histogram, q.histogram, config.alpha_f);

        for (const KeypointLink& link : model.parts[i].spikes.links) {
            const int n = pool_matches.fg_to_frame.b_of(link.keypoint);
            if (n < 0 || fg_blended[static_cast<std::size_t>(link.keypoint)])
                continue;
            const bool in_query = std::binary_search(
                q.links.begin(), q.links.end(), KeypointLink{n, {}, 0.0},
                [](const KeypointLink& a, const KeypointLink& b) { return a.keypoint < b.keypoint; });
            if (!in_query)
                continue;
            const Keypoint& obs_kp = obs.keypoints[static_cast<std::size_t>(n)];
            blend_keypoint(next.foreground[static_cast<std::size_t>(link.keypoint)], obs_kp,
                           obs_kp.position - center, obs.descriptors[static_cast<std::size_t>(n)], config.alpha_f);
            fg_blended[static_cast<std::size_t>(link.keypoint)] = true;
        }

        // Predictive reward uses the vote that produced this frame's estimate.
        part.predictive += predictive_increment(q.center + model.parts[i].vote, center);
        if (config.phi_cap > 0.0)
            part.predictive = std::min(part.predictive, config.phi_cap);

        part.vote = part.vote * (1.0 - config.alpha_v) + vote_vector(center, q.center) * config.alpha_v;
    }

    for (std::size_t i = 0; i < next.parts.size(); ++i) {
        next.parts[i].persistence = update_persistence(next.parts[i].persistence, part_matched[i], config.beta);
        ++next.parts[i].age;
    }

    std::vector<bool> bg_matched(model.background.size(), false);
    for (const int b : pool_matches.frame_to_bg)
        if (b >= 0)
            bg_matched[static_cast<std::size_t>(b)] = true;
    for (std::size_t m = 0; m < next.foreground.size(); ++m)
        next.foreground[m].persistence = update_persistence(
            next.foreground[m].persistence, pool_matches.fg_to_frame.b_of(static_cast<int>(m)) >= 0, config.beta);
    for (std::size_t b = 0; b < next.background.size(); ++b)
        next.background[b].persistence = update_persistence(next.background[b].persistence, bg_matched[b], config.beta);

    // Insertion. Labels of the query superpixels that found a model part.
    std::vector<bool> label_matched(obs.segmentation.superpixels.size(), false);
    for (std::size_t j = 0; j < obs.spikes.size(); ++j)
        if (query_matched[j])
            label_matched[static_cast<std::size_t>(obs.spikes[j].superpixel)] = true;

    std::vector<bool> label_has_fg(obs.segmentation.superpixels.size(), false);
    std::vector<bool> inserted_fg(n_frame, false);
    for (std::size_t n = 0; n < n_frame; ++n) {
        const int label = obs.label_at(obs.keypoints[n].position);
        if (label < 0)
            continue;
        if (pool_matches.frame_to_fg[n] >= 0) {
            label_has_fg[static_cast<std::size_t>(label)] = true;
            continue;
        }
        if (pool_matches.frame_to_bg[n] >= 0 || !label_matched[static_cast<std::size_t>(label)])
            continue;
        PoolKeypoint pk;
        pk.keypoint = obs.keypoints[n];
        pk.keypoint.position = obs.keypoints[n].position - center;
        pk.descriptor = obs.descriptors[n];
        pk.persistence = config.omega_min;
        next.foreground.push_back(pk);
        inserted_fg[n] = true;
    }

    for (std::size_t j = 0; j < obs.spikes.size(); ++j) {
        const Spikes& q = obs.spikes[j];
        if (query_matched[j] || !label_has_fg[static_cast<std::size_t>(q.superpixel)] || !box.contains(q.center))
            continue;
        ModelSpikes part;
        part.spikes.superpixel = q.superpixel;
        part.spikes.histogram = q.histogram;
        part.vote = vote_vector(center, q.center);
        part.persistence = config.omega_min;
        part.predictive = 1.0;
        part.age = 0;
        next.parts.push_back(std::move(part));
    }

    // Background pool grows with unmatched keypoints around the new box.
    for (std::size_t n = 0; n < n_frame; ++n) {
        if (pool_matches.frame_to_fg[n] >= 0 || pool_matches.frame_to_bg[n] >= 0 || inserted_fg[n])
            continue;
        if (!in_band(box, config.surround_factor, obs.keypoints[n].position))
            continue;
        next.background.push_back({obs.keypoints[n], obs.descriptors[n], config.omega_min});
    }

    // Deletion of the weakest entries.
    keep_strongest(next.parts, next.max_parts, [](const ModelSpikes& p) { return p.persistence; });
    keep_strongest(next.foreground, static_cast<std::size_t>(config.fg_pool_cap),
                   [](const PoolKeypoint& k) { return k.persistence; });
    keep_strongest(next.background, static_cast<std::size_t>(config.bg_pool_cap),
                   [](const PoolKeypoint& k) { return k.persistence; });

    refresh_structure(next, config);

    next.prev_center = model.last_center;
    next.last_center = center;
    return next;
}

// ---------------------------------------------------------------------------
// Initialization and per-frame driver
// ---------------------------------------------------------------------------

Model init_model(const Frame& frame, const BoundingBox& box, const Config& config)
{
    validate(config);
    if (!box.valid() || box.x < 0.0 || box.y < 0.0 || box.x + box.w > frame.width() || box.y + box.h > frame.height())
        throw std::invalid_argument("initial box must lie inside the frame");

    Model model;
    model.box_w = box.w;
    model.box_h = box.h;
    model.plan = plan_segmentation(frame.width(), frame.height(), box.w, box.h, config.superpixels_per_box);
    const Vec2 c0 = box.center();
    model.last_center = c0;
    model.prev_center = c0;
    model.frame_index = frame.index();

    const Observation obs = observe(frame, model.plan, c0, box.w, box.h, config);
    const Segmentation& seg = obs.segmentation;

    std::vector<bool> selected(seg.superpixels.size(), false);
    for (const Superpixel& sp : seg.superpixels) {
        std::size_t inside = 0;
        for (const std::int32_t p : sp.pixels)
            if (box.contains_pixel(p % seg.width + obs.origin_x, p / seg.width + obs.origin_y))
                ++inside;
        if (static_cast<double>(inside) >= config.foreground_overlap * static_cast<double>(sp.pixels.size()))
            selected[static_cast<std::size_t>(sp.id)] = true;
    }

    for (const Spikes& s : obs.spikes) {
        if (!selected[static_cast<std::size_t>(s.superpixel)])
            continue;
        ModelSpikes part;
        part.spikes.superpixel = s.superpixel;
        part.spikes.histogram = s.histogram;
        part.vote = vote_vector(c0, s.center);
        model.parts.push_back(std::move(part));
    }
    if (model.parts.empty())
        throw EmptyModel();

    for (std::size_t n = 0; n < obs.keypoints.size(); ++n) {
        const Keypoint& kp = obs.keypoints[n];
        const int label = obs.label_at(kp.position);
        if (label >= 0 && selected[static_cast<std::size_t>(label)]) {
            PoolKeypoint pk{kp, obs.descriptors[n], 1.0};
            pk.keypoint.position = kp.position - c0;
            model.foreground.push_back(pk);
        } else if (in_band(box, config.surround_factor, kp.position)) {
            model.background.push_back({kp, obs.descriptors[n], 1.0});
        }
    }
    // Keypoints arrive sorted by response, so truncation keeps the strongest.
    if (model.foreground.size() > static_cast<std::size_t>(config.fg_pool_cap))
        model.foreground.resize(static_cast<std::size_t>(config.fg_pool_cap));
    if (model.background.size() > static_cast<std::size_t>(config.bg_pool_cap))
        model.background.resize(static_cast<std::size_t>(config.bg_pool_cap));

    model.max_parts = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::lround(config.max_model_factor * static_cast<double>(model.parts.size()))));
    refresh_structure(model, config);
    return model;
}

std::pair<FrameOutcome, Model> track_frame(const Model& model, const Frame& frame, const Config& config)
{
    FrameOutcome out;
    out.frame_index = frame.index();

    const Observation obs = observe(frame, model.plan, model.last_center, model.box_w, model.box_h, config);
    const PoolMatches pm = match_pools(model, obs.descriptors, config);
    const std::vector<MatchPair> pairs = match_model(model, obs.spikes, pm.fg_to_frame, config);
    out.n_valid_matches = static_cast<int>(pairs.size());

    if (pairs.empty()) {
        out.center = model.last_center + (model.last_center - model.prev_center);
        out.bbox = BoundingBox::centered(out.center, model.box_w, model.box_h);
        out.occluded = true;
        out.fallback = true;
        out.background_hits = count_background_hits(out.bbox, obs.keypoints, pm.frame_to_bg);
        return {std::move(out), model};
    }

    Location loc = estimate_location(pairs, model);
    out.center = loc.center;
    out.votes = std::move(loc.votes);
    out.bbox = BoundingBox::centered(out.center, model.box_w, model.box_h);
    out.background_hits = count_background_hits(out.bbox, obs.keypoints, pm.frame_to_bg);
    out.occluded = out.background_hits > config.theta_o;
    if (out.occluded)
        return {std::move(out), model};

    Model next = update_model(model, pairs, obs, pm, out.center, config);
    next.frame_index = frame.index();
    return {std::move(out), std::move(next)};
}

Tracker::Tracker(Config config) : config_(std::move(config))
{
    validate(config_);
}

FrameOutcome Tracker::init(const Frame& frame, const BoundingBox& box)
{
    model_ = init_model(frame, box, config_);
    FrameOutcome out;
    out.frame_index = frame.index();
    out.center = box.center();
    out.bbox = box;
    out.n_valid_matches = static_cast<int>(model_.parts.size());
    return out;
}

FrameOutcome Tracker::track(const Frame& frame)
{
    auto [outcome, next] = track_frame(model_, frame, config_);
    model_ = std::move(next);
    return outcome;
}

}  // namespace spikes
