#pragma once

// Run configuration: one key-value file in a small TOML subset.
//
//   # comment
//   [section]
//   key = 12            # integer or decimal
//   key = true          # boolean
//   key = "text"        # string
//   key = [1.5, -2, 3]  # list of numbers
//
// Sections: protocol, fleet, features, tasks, paths. Unknown sections and
// keys are rejected with the file and line. Only [paths] keys may be
// overridden from the environment: BATDEG_PATHS_<KEY> (key upper-cased).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "batdeg/cell/fleet.hpp"
#include "batdeg/features/expr.hpp"
#include "batdeg/features/resample.hpp"
#include "batdeg/pipeline/labels.hpp"
#include "batdeg/pipeline/task.hpp"

namespace batdeg::config {

struct ProtocolSection {
    std::size_t n_states = 8;
    double cap_w = 16.0;
    double zero_keep_ratio = 0.25;
    std::uint64_t seed = 1;
    double duration_s = 8.0 * 3600.0;
    double step_s = 125.0;
    double trace_s = 20000.0;
    double pack_cells = 3000.0;
    std::size_t cycles_per_spec = 1;
};

struct FeatureSection {
    int groups = 7;
    int segments = 4;
    int early_cycles = 50;
    std::size_t grid_len = 100;
};

struct TaskSection {
    std::size_t seeds = 16;
    std::uint64_t seed = 0;
    double train_fraction = 0.6;
    std::string knee_mode = "max_slope_change";
    double knee_threshold = 0.0005;
    std::size_t knee_interval = 50;
    double eol_fraction = 0.8;
    std::size_t nominal_window = 5;
    std::size_t n_trees = 300;
    std::string max_features = "auto";
    std::size_t min_samples_leaf = 1;
    std::size_t max_depth = 0;
    std::string tie_break = "draw_order";
    std::size_t importance_top = 20;
};

struct PathSection {
    std::string data = "run/data";
    std::string protocols = "run/protocols";
    std::string features = "run/features.csv";
    std::string labels = "run/labels.csv";
    std::string patterns;  ///< optional cell_id,pattern CSV for the pattern task
    std::string models = "run/models";
    std::string reports = "run/reports";
    std::string schedule = "run/schedule"; ///< checkpoint and campaign log
};

struct RunConfig {
    ProtocolSection protocol;
    cell::FleetConfig fleet;
    FeatureSection features;
    TaskSection tasks;
    PathSection paths;

    RunConfig();

    /// Throws ValidationError describing the first invalid value.
    void validate() const;

    /// fleet with the [protocol] generation options applied.
    cell::FleetConfig fleet_config() const;
    features::SpaceConfig space() const;
    features::ResampleOptions resample() const;
    pipeline::LifeLabelConfig life_labels() const;
    pipeline::KneeConfig knee_labels() const;
    pipeline::TaskConfig task_config() const;

    /// Canonical text in the file grammar; parse(to_text()) reproduces the config.
    std::string to_text() const;
};

/// Parses `text` on top of the defaults; `source` names the input in errors.
RunConfig parse_config(std::string_view text, const std::string& source = "<config>");
/// Reads a file, applies BATDEG_PATHS_* overrides and validates.
RunConfig load_config(const std::filesystem::path& path);
/// Defaults plus environment path overrides, validated.
RunConfig default_config();
void apply_env_overrides(RunConfig& cfg);

} // namespace batdeg::config
