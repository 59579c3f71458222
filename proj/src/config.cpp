#include "spikes/config.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>
#include <variant>

namespace spikes {

namespace {

enum class Bound { open, closed };

struct Range {
    double lo;
    Bound lo_kind;
    double hi;
    Bound hi_kind;

    bool contains(double v) const
    {
        const bool above = lo_kind == Bound::open ? v > lo : v >= lo;
        const bool below = hi_kind == Bound::open ? v < hi : v <= hi;
        return above && below;
    }
    std::string describe() const;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::string Range::describe() const
{
    std::string s = lo_kind == Bound::open ? "(" : "[";
    s += format_double(lo) + ", ";
    s += hi == kInf ? "inf" : format_double(hi);
    s += (hi_kind == Bound::open || hi == kInf) ? ")" : "]";
    return s;
}

using Member = std::variant<double Config::*, int Config::*, bool Config::*>;

struct Field {
    std::string_view key;
    Member member;
    Range range;
};

constexpr Range unit_open{0.0, Bound::open, 1.0, Bound::open};
constexpr Range unit_half{0.0, Bound::open, 1.0, Bound::closed};
constexpr Range positive{0.0, Bound::open, kInf, Bound::open};
constexpr Range non_negative{0.0, Bound::closed, kInf, Bound::open};
constexpr Range at_least_one{1.0, Bound::closed, kInf, Bound::open};
constexpr Range boolean{0.0, Bound::closed, 1.0, Bound::closed};

const std::array<Field, 23>& fields()
{
    static const std::array<Field, 23> table{{
        {"theta_c", &Config::theta_c, unit_open},
        {"theta_lo", &Config::theta_lo, unit_open},
        {"singleton_cap", &Config::singleton_cap, positive},
        {"lambda1", &Config::lambda1, non_negative},
        {"lambda2_factor", &Config::lambda2_factor, positive},
        {"radius_factor", &Config::radius_factor, positive},
        {"theta_o", &Config::theta_o, non_negative},
        {"alpha_f", &Config::alpha_f, unit_half},
        {"alpha_v", &Config::alpha_v, unit_half},
        {"beta", &Config::beta, unit_half},
        {"omega_min", &Config::omega_min, unit_half},
        {"phi_cap", &Config::phi_cap, non_negative},
        {"max_model_factor", &Config::max_model_factor, at_least_one},
        {"fg_pool_cap", &Config::fg_pool_cap, at_least_one},
        {"bg_pool_cap", &Config::bg_pool_cap, at_least_one},
        {"superpixels_per_box", &Config::superpixels_per_box, positive},
        {"compactness", &Config::compactness, positive},
        {"slic_iterations", &Config::slic_iterations, at_least_one},
        {"max_keypoints", &Config::max_keypoints, at_least_one},
        {"foreground_overlap", &Config::foreground_overlap, unit_half},
        {"surround_factor", &Config::surround_factor, {1.0, Bound::open, kInf, Bound::open}},
        {"search_window", &Config::search_window, boolean},
        {"search_window_factor", &Config::search_window_factor, {1.0, Bound::open, kInf, Bound::open}},
    }};
    return table;
}

double read_numeric(const Config& c, const Member& m)
{
    return std::visit(
        [&](auto ptr) -> double {
            return static_cast<double>(c.*ptr);
        },
        m);
}

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

void assign(Config& c, const Field& f, std::string_view value, int line_no)
{
    auto fail = [&](const std::string& why) {
        throw ConfigError("line " + std::to_string(line_no) + ": " + std::string(f.key) + ": " + why);
    };
    std::visit(
        [&](auto ptr) {
            using T = std::remove_reference_t<decltype(c.*ptr)>;
            if constexpr (std::is_same_v<T, bool>) {
                if (value == "true" || value == "on" || value == "1")
                    c.*ptr = true;
                else if (value == "false" || value == "off" || value == "0")
                    c.*ptr = false;
                else
                    fail("expected a boolean (true/false/on/off), got '" + std::string(value) + "'");
            } else {
                T v{};
                const auto res = std::from_chars(value.data(), value.data() + value.size(), v);
                if (res.ec != std::errc{} || res.ptr != value.data() + value.size())
                    fail(std::string("expected ") + (std::is_same_v<T, int> ? "an integer" : "a number")
                         + ", got '" + std::string(value) + "'");
                c.*ptr = v;
            }
        },
        f.member);
}

}  // namespace

void validate(const Config& config)
{
    for (const Field& f : fields()) {
        const double v = read_numeric(config, f.member);
        if (!f.range.contains(v))
            throw ConfigError(std::string(f.key) + " = " + format_double(v) + " is out of range: must lie in "
                              + f.range.describe());
    }
}

Config parse_config(std::string_view text)
{
    Config c;
    int line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        if (const auto hash = line.find('#'); hash != std::string_view::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value', got '"
                              + std::string(line) + "'");
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));

        const Field* field = nullptr;
        for (const Field& f : fields())
            if (f.key == key)
                field = &f;
        if (field == nullptr)
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
        assign(c, *field, value, line_no);
    }
    validate(c);
    return c;
}

Config load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const Config& config)
{
    std::string out = "# SPiKeS tracker configuration\n";
    for (const Field& f : fields()) {
        out += f.key;
        out += " = ";
        std::visit(
            [&](auto ptr) {
                using T = std::remove_cvref_t<decltype(config.*ptr)>;
                if constexpr (std::is_same_v<T, bool>)
                    out += config.*ptr ? "true" : "false";
                else if constexpr (std::is_same_v<T, int>)
                    out += std::to_string(config.*ptr);
                else
                    out += format_double(config.*ptr);
            },
            f.member);
        out += '\n';
    }
    return out;
}

}  // namespace spikes
