#pragma once

#include "spikes/config.hpp"
#include "spikes/core.hpp"

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spikes {

class SequenceLoadError : public Error {
public:
    using Error::Error;
};

struct SequenceSpec {
    std::string name;
    std::vector<std::filesystem::path> frames;
    std::vector<BoundingBox> groundtruth;
};

inline constexpr int kPrecisionSteps = 51;   ///< LET = 0..50 px
inline constexpr int kSuccessSteps = 101;    ///< OR threshold 0.00..1.00

struct EvalCurves {
    std::array<double, kPrecisionSteps> precision{};
    std::array<double, kSuccessSteps> success{};
    double precision_at_20 = 0.0;
    double auc = 0.0;
    std::size_t n_frames = 0;
};

double cle(Vec2 predicted, Vec2 groundtruth);

/// Success threshold of bin `k` (k / 100).
double success_threshold(int k);

/// precision[t] = fraction with CLE <= t, success[k] = fraction with OR > k/100,
/// auc = mean of success. Throws std::invalid_argument on empty or
/// mismatched input.
EvalCurves compute_curves(std::span<const BoundingBox> predicted, std::span<const BoundingBox> groundtruth);

/// AUC of a tracker that reproduces the groundtruth exactly.
double perfect_auc();

/// One `x,y,w,h` per line; commas, tabs or spaces separate the fields.
/// With `one_indexed`, one is subtracted from x and y.
std::vector<BoundingBox> parse_groundtruth(std::string_view text, bool one_indexed = false);

/// Directory of numbered frames (or an img/ subdirectory) plus groundtruth_rect.txt.
SequenceSpec load_sequence(const std::filesystem::path& dir, bool one_indexed = false);

/// Numbered PNG/JPG frames of `dir` in name order.
std::vector<std::filesystem::path> list_frames(const std::filesystem::path& dir);

/// Sequence directories listed one per line, relative to the list file.
std::vector<std::filesystem::path> read_sequence_list(const std::filesystem::path& list_file);

struct SequenceResult {
    std::string name;
    bool ok = false;
    std::string error;
    std::vector<BoundingBox> predicted;
    std::vector<BoundingBox> groundtruth;
    std::vector<bool> occluded;
    EvalCurves curves;
};

struct OpeOptions {
    Config config;
    bool oracle = false;  ///< echo the groundtruth instead of tracking
    int threads = 1;
    bool one_indexed = false;
};

struct OpeReport {
    std::vector<SequenceResult> sequences;
    EvalCurves pooled;  ///< over every frame of every successful sequence
    std::size_t n_failed = 0;
};

/// Track a loaded sequence from its first groundtruth box.
SequenceResult track_sequence(const SequenceSpec& seq, const Config& config);

OpeReport run_ope(std::span<const std::filesystem::path> sequence_dirs, const OpeOptions& options);

/// metric,threshold,value; 51 precision rows then 101 success rows.
std::string curves_csv(const EvalCurves& curves);
/// sequence,precision_at_20,auc per successful sequence, then a pooled row.
std::string summary_csv(const OpeReport& report);
/// Precision and success plots side by side.
std::string curves_svg(const EvalCurves& curves, std::string_view title);

}  // namespace spikes
