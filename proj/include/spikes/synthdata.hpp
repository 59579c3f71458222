#pragma once

#include "spikes/core.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace spikes {

class SpecError : public Error {
public:
    using Error::Error;
};

enum class ScenarioKind { translate, deform, occlude, illum, clutter };

std::string_view to_string(ScenarioKind kind);
ScenarioKind parse_kind(std::string_view name);

/// Frame indices below are zero-based.
struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::translate;
    int frames = 60;
    std::uint64_t seed = 7;
    int width = 320;
    int height = 240;

    int target_w = 60;
    int target_h = 60;
    int start_x = 20;          ///< target top-left at frame 0
    int start_y = 90;
    double velocity_x = 3.0;   ///< px/frame, positions rounded to whole pixels
    double velocity_y = 0.0;
    double grain = 7.0;        ///< target texture feature size, px
    double background_grain = 9.0;
    bool plain_background = false;

    // occlude
    int occluder_w = 171;
    int occluder_h = 140;
    int occluder_x = -51;      ///< left edge while resting
    int occluder_y = 50;
    int occluder_start = 8;    ///< last resting frame
    int occluder_speed = 22;   ///< px/frame afterwards

    // illum
    double gain_start = 1.0;
    double gain_end = 1.5;

    // deform: x' = x + s(t) (y - cy), s(t) = amplitude sin(2 pi t / period)
    double shear_amplitude = 0.15;
    double shear_period = 16.0;

    // clutter
    int clutter_blobs = 6;

    bool operator==(const ScenarioSpec&) const = default;
};

/// Defaults tuned for each kind at 320x240.
ScenarioSpec default_scenario(ScenarioKind kind);

/// `key = value` lines, `#` comments. `kind` is applied first so the other
/// keys override that kind's defaults.
ScenarioSpec parse_scenario(std::string_view text);
ScenarioSpec load_scenario(const std::filesystem::path& path);
std::string serialize_scenario(const ScenarioSpec& spec);

/// Throws SpecError on an invalid spec, including targets leaving the frame
/// in every kind but occlude.
void validate(const ScenarioSpec& spec);

struct GeneratedSequence {
    ScenarioSpec spec;
    std::vector<Frame> frames;
    std::vector<BoundingBox> groundtruth;            ///< bounding box of the rendered target mask
    std::vector<std::optional<BoundingBox>> occluders;
    std::vector<double> visibility;                  ///< unoccluded share of target pixels
};

GeneratedSequence generate(const ScenarioSpec& spec);

/// Frames 0001.png..., groundtruth_rect.txt and manifest.txt.
void write_sequence(const std::filesystem::path& dir, const GeneratedSequence& seq);

}  // namespace spikes
