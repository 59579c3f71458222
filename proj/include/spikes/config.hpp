#pragma once

#include "spikes/core.hpp"

#include <filesystem>
#include <string>
#include <string_view>

namespace spikes {

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Every tracker tunable. Quantities tied to the superpixel diameter D^s are
/// stored as factors (lambda2 = lambda2_factor * D^s, R = radius_factor * D^s).
struct Config {
    // SPiKeS scoring and matching
    double theta_c = 0.7;             ///< color gate on the Bhattacharyya distance
    double theta_lo = 0.75;           ///< Lowe ratio for keypoint matching
    double singleton_cap = 0.7;       ///< ratio-test fallback when one candidate exists
    double lambda1 = 1.0;             ///< extra score required when keypoints matched
    double lambda2_factor = 4.0;      ///< motion slack in units of D^s
    double radius_factor = 2.0;       ///< SPiKeS radius in units of D^s

    // Update
    int theta_o = 3;                  ///< occlusion: background matches in box must exceed this
    double alpha_f = 0.1;
    double alpha_v = 0.1;
    double beta = 0.1;
    double omega_min = 0.1;
    double phi_cap = 0.0;             ///< 0 disables the cap on the predictive factor

    // Model capacity
    double max_model_factor = 3.0;    ///< N_m^max relative to the initial part count
    int fg_pool_cap = 1000;
    int bg_pool_cap = 1000;

    // Segmentation and detection
    double superpixels_per_box = 30.0;
    double compactness = 10.0;
    int slic_iterations = 10;
    int max_keypoints = 2000;

    // Initialization
    double foreground_overlap = 0.6;  ///< fraction of a superpixel inside the box
    double surround_factor = 2.0;     ///< background band = box inflated by this, minus box

    bool search_window = false;       ///< restrict processing to a window around the target
    double search_window_factor = 3.0;

    bool operator==(const Config&) const = default;
};

/// Throws ConfigError naming the first field outside its bounds.
void validate(const Config& config);

/// Parse flat `key = value` text; `#` starts a comment. Unknown keys,
/// malformed values and out-of-range values are ConfigError.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);

/// Every field, one per line, in a fixed order. Round-trips through parse_config.
std::string serialize_config(const Config& config);

}  // namespace spikes
