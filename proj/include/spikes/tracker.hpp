#pragma once

#include "spikes/config.hpp"
#include "spikes/core.hpp"
#include "spikes/keypoints.hpp"
#include "spikes/segmentation.hpp"
#include "spikes/structure.hpp"

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace spikes {

class EmptyModel : public Error {
public:
    EmptyModel() : Error("no superpixel passes the foreground selection inside the initial box") {}
};

class NoMatches : public Error {
public:
    NoMatches() : Error("no valid model/query match to vote with") {}
};

/// Keypoint held in one of the model pools, with its persistence factor.
struct PoolKeypoint {
    Keypoint keypoint;
    Descriptor descriptor;
    double persistence = 1.0;

    bool operator==(const PoolKeypoint&) const = default;
};

/// One part of the appearance model.
///
/// Part geometry lives in target-centred coordinates: `spikes.center` is the
/// part position relative to the target center (always -vote) and its links
/// point into Model::foreground, whose positions are target-centred too.
struct ModelSpikes {
    Spikes spikes;
    Vec2 vote;
    double persistence = 1.0;  ///< omega, in (0, 1]
    double predictive = 1.0;   ///< phi, >= 1, never decreases
    int age = 0;               ///< updates survived since insertion

    bool operator==(const ModelSpikes&) const = default;
};

struct Model {
    std::vector<ModelSpikes> parts;
    std::vector<PoolKeypoint> foreground;  ///< K^f, target-centred positions
    std::vector<PoolKeypoint> background;  ///< K^b, image positions
    double box_w = 0.0;
    double box_h = 0.0;
    Vec2 last_center;  ///< x_{t-1}
    Vec2 prev_center;  ///< x_{t-2}
    SegmentationPlan plan;
    std::size_t max_parts = 0;
    int frame_index = 0;

    double diameter() const { return plan.diameter; }
    BoundingBox box() const { return BoundingBox::centered(last_center, box_w, box_h); }
    /// Image position of part `i` at the last estimate.
    Vec2 part_position(std::size_t i) const { return last_center + parts[i].spikes.center; }

    bool operator==(const Model&) const = default;
};

/// Everything extracted from one frame.
struct Observation {
    Segmentation segmentation;   ///< labels local to the processed window
    int origin_x = 0;            ///< window offset inside the frame
    int origin_y = 0;
    std::vector<Keypoint> keypoints;      ///< image coordinates
    std::vector<Descriptor> descriptors;  ///< parallel to keypoints
    std::vector<Spikes> spikes;           ///< one per superpixel, image coordinates

    /// Superpixel label under an image position, or -1 outside the window.
    int label_at(Vec2 p) const;
};

/// Segment, detect, describe and build SPiKeS. With `config.search_window`
/// only a window of search_window_factor x box around `center` is processed.
Observation observe(const Frame& frame, const SegmentationPlan& plan, Vec2 center, double box_w, double box_h,
                    const Config& config);

/// Frame keypoints matched against K^f and K^b in one ratio test.
struct PoolMatches {
    std::vector<int> frame_to_fg;          ///< K^f index per frame keypoint, or -1
    std::vector<int> frame_to_bg;          ///< K^b index per frame keypoint, or -1
    KeypointCorrespondence fg_to_frame;    ///< a = K^f, b = frame keypoints
};

PoolMatches match_pools(const Model& model, std::span<const Descriptor> frame_descriptors, const Config& config);

struct MatchPair {
    int model_index = 0;
    int query_index = 0;
    SimilarityScore score;
    double displacement = 0.0;
    Vec2 query_center;

    bool operator==(const MatchPair&) const = default;
};

/// Scores and displacements of every (model part, query SPiKeS) pair.
struct CandidateTable {
    std::size_t n_model = 0;
    std::size_t n_query = 0;
    std::vector<SimilarityScore> scores;  ///< row-major, n_model x n_query
    std::vector<double> displacement;     ///< row-major, n_model x n_query
    std::vector<Vec2> query_centers;

    const SimilarityScore& score(std::size_t i, std::size_t j) const { return scores[i * n_query + j]; }
    double disp(std::size_t i, std::size_t j) const { return displacement[i * n_query + j]; }
};

struct MatchGate {
    double theta_c = 0.7;
    double lambda1 = 1.0;
    double motion_limit = 0.0;  ///< ||x_{t-1} - x_{t-2}|| + lambda2
};

CandidateTable score_candidates(const Model& model, std::span<const Spikes> query,
                                const KeypointCorrespondence& fg_to_frame, double theta_c);

/// Greedy one-to-one selection: per-part argmax, conflicts resolved by the
/// highest score, then score and motion rejection. Sorted by model index.
std::vector<MatchPair> select_matches(const CandidateTable& table, const MatchGate& gate);

MatchGate match_gate(const Model& model, const Config& config);

std::vector<MatchPair> match_model(const Model& model, std::span<const Spikes> query,
                                   const KeypointCorrespondence& fg_to_frame, const Config& config);

struct Vote {
    Vec2 position;
    double weight = 0.0;
    int model_index = 0;
    Vec2 source;  ///< center of the matched query SPiKeS
};

struct Location {
    Vec2 center;
    std::vector<Vote> votes;
};

/// Weighted mean of x_q + v with weights omega * phi. Throws NoMatches on
/// an empty pair list.
Location estimate_location(std::span<const MatchPair> pairs, const Model& model);

/// Frame keypoints inside `box` that matched K^b.
int count_background_hits(const BoundingBox& box, std::span<const Keypoint> frame_keypoints,
                          std::span<const int> frame_to_bg);

/// True iff the background hits inside `box` strictly exceed `theta_o`.
bool detect_occlusion(const BoundingBox& box, std::span<const Keypoint> frame_keypoints,
                      std::span<const int> frame_to_bg, int theta_o);

// Scalar update rules.
Vec2 vote_vector(Vec2 target_center, Vec2 part_center);
double update_persistence(double omega, bool matched, double beta);
double predictive_increment(Vec2 vote, Vec2 center);

/// Appearance, weight, insertion, background and deletion steps for a
/// non-occluded frame.
Model update_model(const Model& model, std::span<const MatchPair> pairs, const Observation& obs,
                   const PoolMatches& pool_matches, Vec2 center, const Config& config);

/// Recompute every part's links against K^f.
void refresh_structure(Model& model, const Config& config);

Model init_model(const Frame& frame, const BoundingBox& box, const Config& config);

struct FrameOutcome {
    int frame_index = 0;
    Vec2 center;
    BoundingBox bbox;
    bool occluded = false;
    bool fallback = false;  ///< no valid match, constant-velocity prediction
    int n_valid_matches = 0;
    int background_hits = 0;
    std::vector<Vote> votes;
};

std::pair<FrameOutcome, Model> track_frame(const Model& model, const Frame& frame, const Config& config);

/// Stateful convenience wrapper.
class Tracker {
public:
    explicit Tracker(Config config = {});

    FrameOutcome init(const Frame& frame, const BoundingBox& box);
    FrameOutcome track(const Frame& frame);

    const Model& model() const { return model_; }
    const Config& config() const { return config_; }

private:
    Config config_;
    Model model_;
};

}  // namespace spikes
