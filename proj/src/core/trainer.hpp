#pragma once

#include "common.hpp"
#include "losses.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "pointcloud.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <vector>

namespace lsa {

struct TrainConfig {
    std::size_t iterations = 5000;
    std::size_t batch_size = 1000;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    bool cosine_decay = false;
    std::uint64_t seed = 42;
    std::size_t log_every = 100;
    std::size_t checkpoint_every = 1000;  // 0 writes only the final checkpoint
    std::size_t probe_size = 2000;
    std::size_t sigma_neighbor = 50;
    Architecture architecture;
    LossConfig loss;

    void validate() const;
};

struct HistoryRecord {
    std::size_t step = 0;
    double baseline = 0.0;
    double alignment = 0.0;
    double mean_beta = 0.0;
    double mean_consistency = 0.0;  // over the frozen probe set

    bool operator==(const HistoryRecord&) const = default;
};

struct TrainHistory {
    std::vector<HistoryRecord> records;

    void write_csv(const std::filesystem::path& path) const;
    static TrainHistory read_csv(const std::filesystem::path& path);
};

/// First-order adaptive-moment optimizer with bias correction.
class Adam {
public:
    Adam() = default;
    Adam(std::size_t n, double beta1, double beta2, double epsilon);

    void update(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr);

    std::uint64_t steps() const noexcept { return t_; }
    const Eigen::VectorXd& first_moment() const noexcept { return m_; }
    const Eigen::VectorXd& second_moment() const noexcept { return v_; }
    void restore(Eigen::VectorXd m, Eigen::VectorXd v, std::uint64_t t);

private:
    Eigen::VectorXd m_, v_;
    double beta1_ = 0.9, beta2_ = 0.999, epsilon_ = 1e-8;
    std::uint64_t t_ = 0;
};

/// Learning rate at `step`, honouring the optional cosine decay.
double learning_rate_at(const TrainConfig& config, std::size_t step);

/// Draws a batch, evaluates the objective, applies one update. Throws
/// NumericError naming `step_index` if the loss or its gradient is not finite;
/// the network is left untouched in that case.
LossReport train_step(SdfNetwork& net, Adam& optimizer, const QuerySampler& sampler, const LossConfig& loss,
                      std::size_t batch_size, double lr, std::mt19937_64& rng, std::size_t step_index = 0);

struct FitResult {
    SdfNetwork network;
    Normalization normalization;
    TrainHistory history;
    ConsistencyStats final_probe;
    double alpha = 0.0;  // the weight actually used, after auto-balance
};

/// Stateful training run over a normalized cloud. Artifacts go to
/// `out_dir` when it is nonempty: model.ckpt, trainer.state, history.csv.
class Trainer {
public:
    Trainer(const PointCloud& normalized, const TrainConfig& config, std::filesystem::path out_dir = {});

    /// Continues from the checkpoint pair in `out_dir`.
    static Trainer resume(const PointCloud& normalized, const TrainConfig& config, const std::filesystem::path& out_dir);

    /// Runs until `until` steps have been taken (or the configured iterations).
    void run(std::optional<std::size_t> until = std::nullopt);
    FitResult finish();

    std::size_t step() const noexcept { return step_; }
    const SdfNetwork& network() const noexcept { return net_; }
    const TrainHistory& history() const noexcept { return history_; }
    const std::vector<Vec3>& probe() const noexcept { return probe_; }

    void write_checkpoint() const;

    /// Called after every logged step.
    std::function<void(const HistoryRecord&)> on_log;

private:
    const PointCloud* pc_;
    TrainConfig config_;
    std::filesystem::path out_dir_;
    QuerySampler sampler_;
    SdfNetwork net_;
    Adam adam_;
    std::mt19937_64 rng_;
    std::vector<Vec3> probe_;
    TrainHistory history_;
    std::size_t step_ = 0;
    double alpha_ = 0.0;
    bool balanced_ = false;
};

/// Normalizes the cloud, trains, and returns the network with its transform.
FitResult fit(const PointCloud& pc, const TrainConfig& config, const std::filesystem::path& out_dir = {});

/// Seed of the frozen probe batch, derived from the run seed.
std::uint64_t probe_seed(std::uint64_t seed);

} // namespace lsa
