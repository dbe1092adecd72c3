#pragma once

#include "common.hpp"
#include "pointcloud.hpp"
#include "shapes.hpp"
#include "surface.hpp"
#include "trainer.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace lsa {

using Setting = std::pair<std::string, std::string>;

/// Everything a command needs to reproduce its run. Exactly one of
/// `input` and `shape` names the supervision.
struct RunConfig {
    std::filesystem::path input;
    std::string shape;               // parse_shape() syntax
    std::size_t points = 5000;       // surface samples drawn from `shape`
    TrainConfig train;
    GridSpec grid;
    std::filesystem::path out;
    std::size_t eval_samples = 30000;

    void validate() const;
    /// The supervision cloud in scene coordinates.
    PointCloud load_cloud() const;
    std::optional<AnalyticShape> reference_shape() const;
};

/// Applies one key=value pair; unknown keys and bad values throw ConfigError naming the key.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value);
void apply_settings(RunConfig& config, const std::vector<Setting>& settings);

/// Reads "key = value" lines; '#' starts a comment.
std::vector<Setting> read_settings(const std::filesystem::path& path);
std::vector<Setting> parse_settings(const std::string& text);

/// Every key with its current value, in a stable order; apply_settings() inverts it.
std::vector<Setting> to_settings(const RunConfig& config);
void write_settings(const std::vector<Setting>& settings, const std::filesystem::path& path);

/// Exact decimal text for a double (round-trips through strtod).
std::string format_real(double v);

} // namespace lsa
