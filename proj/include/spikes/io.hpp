#pragma once

#include "spikes/core.hpp"
#include "spikes/tracker.hpp"

#include <filesystem>
#include <string>

namespace spikes {

class IoError : public Error {
public:
    using Error::Error;
};

/// Any format OpenCV can decode; grayscale inputs are expanded to RGB.
Frame read_frame(const std::filesystem::path& path, int index = 0);

/// Encoding chosen from the extension. PNG output is deterministic.
void write_frame(const std::filesystem::path& path, const Frame& frame);

inline constexpr int kSnapshotVersion = 1;

/// Complete model state as JSON. Doubles round-trip exactly.
std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);

void save_model(const std::filesystem::path& path, const Model& model);
Model load_model(const std::filesystem::path& path);

}  // namespace spikes
