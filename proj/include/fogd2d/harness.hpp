#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fogd2d/analytics.hpp"
#include "fogd2d/content.hpp"
#include "fogd2d/optimizer.hpp"
#include "fogd2d/simulator.hpp"

namespace fogd2d {

inline constexpr std::string_view kToolkitVersion = "1.0.0";
inline constexpr int kConfigSchemaVersion = 1;

enum class PolicySource { Uniform, Mpc, Explicit, Optimizer };

std::string_view to_string(PolicySource s);
PolicySource parse_policy_source(std::string_view text);

/// Parameters that may be swept. Each maps onto one NetworkParams or
/// ContentParams field.
inline constexpr std::string_view kSweepAxes[] = {"lambda_u", "lambda_g", "gamma", "I_th", "theta_u", "R_d"};

struct SweepConfig {
    std::string axis;            // empty: single point at the base parameters
    std::vector<double> values;
};

struct SimulationConfig {
    bool enabled = true;
    std::size_t replications = 2000;
    std::uint64_t master_seed = 1;
    unsigned threads = 0;
    bool stratified = true;
    bool typical_feeds_selection = true;
    double sensing_tail = 40.0;
};

struct OutputConfig {
    std::string directory = "results";
    std::vector<std::string> formats{"csv", "manifest"};
};

struct ExperimentConfig {
    NetworkParams network;
    ContentParams content;
    QuadratureConfig quadrature;
    PolicySource policy_source = PolicySource::Uniform;
    std::vector<double> explicit_policy;
    OptimizerConfig optimizer;
    SweepConfig sweep;
    SimulationConfig simulation;
    OutputConfig outputs;
    /// Appended to every metric name as "metric:tag" to tell curves apart
    /// when several experiments share one table.
    std::string metric_tag;

    /// Rejects inconsistent configurations before any computation.
    void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Strict: unknown keys anywhere are errors.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies "section.key=value" overrides. The key must already exist in the
/// schema; the value is parsed as JSON, falling back to a plain string.
ExperimentConfig apply_overrides(const ExperimentConfig& config, const std::vector<std::string>& overrides);

/// Applies one sweep value to a copy of the base parameters.
void apply_sweep_value(std::string_view axis, double value, NetworkParams& net, ContentParams& content);

struct ResultRow {
    std::string sweep_axis;
    double sweep_value = 0.0;
    std::string metric;
    std::optional<int> file_index;  // 1-based; absent for aggregates
    std::string scheme;
    std::optional<double> analytical;
    std::optional<double> sim_mean;
    std::optional<double> sim_ci95;
    std::size_t replications = 0;
    std::uint64_t seed = 0;

    bool operator==(const ResultRow&) const = default;
};

struct PointRecord {
    std::size_t index = 0;
    double value = 0.0;
    std::uint64_t seed = 0;
    double wall_time_s = 0.0;
    bool failed = false;
    std::string error;
    std::vector<double> policy;
};

struct ExperimentResult {
    ExperimentConfig config;
    std::vector<ResultRow> rows;
    std::vector<PointRecord> points;
    double wall_time_s = 0.0;

    bool any_failed() const;
};

/// Seed of sweep point `index`; depends only on the master seed and index.
std::uint64_t point_seed(std::uint64_t master_seed, std::size_t index);

CachingPolicy resolve_policy(const ExperimentConfig& config, const ScdpModel& model);

/// Runs every sweep point in order. A numerical failure at one point marks
/// that point failed and continues with the next.
ExperimentResult run_experiment(const ExperimentConfig& config);

struct FigureCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct FigureResult {
    std::string tag;
    std::string scale;
    std::vector<ExperimentResult> parts;
    std::vector<ResultRow> rows;  // all parts concatenated
    std::vector<FigureCheck> checks;
};

inline constexpr std::string_view kFigureTags[] = {"fig1a", "fig1b", "fig2", "fig3", "fig4",
                                                   "fig5",  "fig6",  "fig7", "fig8a", "fig8b"};

/// Replications per preset at each scale.
std::size_t scale_replications(std::string_view scale);

/// Logarithmic grid of `points` values over [lo, hi].
std::vector<double> log_grid(double lo, double hi, std::size_t points);

/// Preset configurations of one figure family (one per curve group).
std::vector<ExperimentConfig> figure_configs(std::string_view tag, std::string_view scale,
                                             std::optional<std::size_t> replications = std::nullopt,
                                             std::uint64_t seed = 1, unsigned threads = 0);

FigureResult reproduce_figure(std::string_view tag, std::string_view scale,
                              std::optional<std::size_t> replications = std::nullopt, std::uint64_t seed = 1,
                              unsigned threads = 0);

// --- persistence -------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "sweep_axis,sweep_value,metric,file_index,scheme,analytical,sim_mean,sim_ci95,replications,seed";

std::string format_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> parse_csv(std::string_view text);

nlohmann::json manifest_json(const std::vector<ExperimentResult>& parts, std::string_view figure_tag = {});

struct PersistedFiles {
    std::filesystem::path table;
    std::filesystem::path manifest;
    std::vector<std::filesystem::path> series;
};

/// Writes results.csv, manifest.json and, with the "series" format, one
/// plot-ready file per curve under series/.
PersistedFiles persist_results(const std::vector<ExperimentResult>& parts, const std::filesystem::path& directory,
                               const std::vector<std::string>& formats, std::string_view figure_tag = {});

}  // namespace fogd2d
