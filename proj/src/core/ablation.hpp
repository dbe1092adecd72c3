#pragma once

#include "config.hpp"
#include "losses.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace lsa {

/// Sweep varies one factor at a time around the base configuration; Cross
/// takes the full product of the listed candidates.
enum class AblationMode { Sweep, Cross };

struct AblationGrid {
    std::vector<double> alpha;
    std::vector<double> delta;
    std::vector<WeightMode> weight;
    std::vector<ConsistencyMetric> metric;
    std::vector<ConsistencyTarget> target;
    std::vector<std::uint64_t> seeds;  // empty: the base seed only
    AblationMode mode = AblationMode::Sweep;

    /// alpha {0, 0.001, 0.01, 0.1, 1}, delta {0, 1, 10, 100}, both weight
    /// modes, all three metrics, both targets.
    static AblationGrid full();
};

/// Keys alpha, delta, weight, metric, target, seeds (comma-separated lists) and mode.
AblationGrid parse_grid(const std::vector<Setting>& settings);
AblationGrid read_grid(const std::filesystem::path& path);

struct AblationVariant {
    std::string label;
    LossConfig loss;
};

std::vector<AblationVariant> expand(const AblationGrid& grid, const LossConfig& base);
std::string variant_label(const LossConfig& loss);

struct AblationRow {
    std::string variant;
    std::uint64_t seed = 0;
    LossConfig loss;
    double cd = 0.0;
    double nc = 0.0;
    double mean_consistency = 0.0;
};

/// Fits, extracts and evaluates every (variant, seed) pair in order. Run
/// artifacts go to base.out/runs/<n> when base.out is set.
std::vector<AblationRow> run_ablation(const RunConfig& base, const AblationGrid& grid,
                                      const std::function<void(const AblationRow&)>& progress = {});

std::string ablation_csv_header();
std::string ablation_csv_row(const AblationRow& row);
void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path);

struct RunEvaluation {
    FitResult fit;
    TriangleMesh mesh;  // scene coordinates
    EvalReport report;
};

/// fit + extract + evaluate against the analytic shape, or the input cloud
/// when the config names a file. An empty mesh yields NaN metrics.
RunEvaluation fit_and_evaluate(const RunConfig& config, const std::filesystem::path& out_dir = {});

} // namespace lsa
