#pragma once

#include "common.hpp"
#include "diffcore.hpp"
#include "field.hpp"
#include "pointcloud.hpp"

#include <span>
#include <string_view>
#include <vector>

namespace lsa {

enum class BaselineKind { NeuralPull, EikonalSurface };
enum class WeightMode { PredictedDistance, EuclideanDistance, None };
enum class ConsistencyMetric { Cosine, Mse, MseNormalized };
enum class ConsistencyTarget { Projection, FixedNearest };
enum class ProjectionGradient { Through, Detached };
/// Displacement along the normalized gradient: f(q) (signed) or |f(q)|.
enum class ProjectionForm { Signed, Absolute };
/// How per-query alignment terms enter the objective: summed over the batch
/// (weight scales with batch size) or averaged.
enum class AlignmentReduction { Sum, Mean };

std::string_view to_string(BaselineKind v);
std::string_view to_string(WeightMode v);
std::string_view to_string(ConsistencyMetric v);
std::string_view to_string(ConsistencyTarget v);
std::string_view to_string(ProjectionGradient v);
std::string_view to_string(ProjectionForm v);
std::string_view to_string(AlignmentReduction v);

BaselineKind parse_baseline(std::string_view s);
WeightMode parse_weight_mode(std::string_view s);
ConsistencyMetric parse_metric(std::string_view s);
ConsistencyTarget parse_target(std::string_view s);
ProjectionGradient parse_projection_gradient(std::string_view s);
ProjectionForm parse_projection_form(std::string_view s);
AlignmentReduction parse_reduction(std::string_view s);

struct LossConfig {
    BaselineKind baseline = BaselineKind::NeuralPull;
    double alpha = 0.01;   // weight of the alignment term
    double delta = 10.0;   // decay of the per-query weight
    WeightMode weight_mode = WeightMode::PredictedDistance;
    ConsistencyMetric metric = ConsistencyMetric::Cosine;
    ConsistencyTarget target = ConsistencyTarget::Projection;
    ProjectionGradient projection_gradient = ProjectionGradient::Through;
    ProjectionForm projection_form = ProjectionForm::Signed;
    AlignmentReduction reduction = AlignmentReduction::Sum;
    /// Replace alpha at the first step with baseline / alignment.
    bool auto_balance = false;
    /// Draw a separate query batch for the alignment term.
    bool independent_alignment_batch = false;
    /// Eikonal weight inside the eikonal-surface baseline.
    double eikonal_weight = 0.1;

    void validate() const;
    bool operator==(const LossConfig&) const = default;
};

struct LossReport {
    double total = 0.0;
    double baseline = 0.0;
    double alignment = 0.0;         // the term alpha multiplies (sum or mean of beta * c)
    double mean_beta = 0.0;
    double mean_consistency = 0.0;  // unweighted
    std::size_t used = 0;
    std::size_t skipped = 0;
};

// ---- primitives over any field -------------------------------------------

/// q moved along the normalized gradient by the predicted distance.
/// Throws NumericError when the gradient vanishes.
Vec3 pull_projection(const ScalarField& field, const Vec3& q, ProjectionForm form = ProjectionForm::Signed);
Vec3 pull_projection(const FieldSample& at_q, const Vec3& q, ProjectionForm form = ProjectionForm::Signed);

/// Consistency between two gradients; cosine distance lies in [0, 2].
/// Throws NumericError if a normalizing metric meets a vanishing gradient.
double gradient_consistency(const Vec3& ga, const Vec3& gb, ConsistencyMetric metric = ConsistencyMetric::Cosine);

/// 1 - cos(grad f(q), grad f(target)).
double consistency(const ScalarField& field, const Vec3& q, const Vec3& target,
                   ConsistencyMetric metric = ConsistencyMetric::Cosine);

/// exp(-delta * |distance|)
double adaptive_weight(double distance, double delta);
double adaptive_weight(const ScalarField& field, const Vec3& q, double delta);

// ---- taped building blocks ------------------------------------------------

/// Empty optional-like result: `ok` is false when the gradient vanishes.
struct ProjectionVars {
    Var3 point;
    bool ok = false;
};

ProjectionVars pull_projection(const FieldVars& at_q, const Var3& q, ProjectionForm form);
/// Requires gradients with norm above the epsilon floor for normalizing metrics.
Var consistency_term(const Var3& ga, const Var3& gb, ConsistencyMetric metric);
Var adaptive_weight(const Var& distance, double delta);

// ---- loss terms -----------------------------------------------------------

/// Mean squared distance between pulled queries and their anchors.
Var neuralpull_loss(Tape& tape, const QueryBatch& batch, const PointCloud& pc);
Var neuralpull_term(const QueryBatch& batch, const PointCloud& pc, std::span<const FieldVars> at_q,
                    std::size_t* skipped = nullptr);

/// Mean of (|grad f| - 1)^2.
Var eikonal_loss(Tape& tape, std::span<const Vec3> points);
Var eikonal_term(std::span<const FieldVars> samples);

struct AlignmentResult {
    Var loss;                          // sum(beta * c) / used
    std::vector<double> beta;          // per query, NaN when skipped
    std::vector<double> consistency;   // per query, NaN when skipped
    std::size_t used = 0;
    std::size_t skipped = 0;
    double mean_beta = 0.0;
    double mean_consistency = 0.0;
};

AlignmentResult alignment_loss(Tape& tape, const QueryBatch& batch, const PointCloud& pc, const LossConfig& config);
AlignmentResult alignment_term(Tape& tape, const QueryBatch& batch, const PointCloud& pc, const LossConfig& config,
                               std::span<const FieldVars> at_q);

struct TotalLoss {
    Var loss;
    LossReport report;
};

/// baseline + alpha * alignment, where alignment is sum(beta * c) or its
/// mean per config.reduction. When alpha is zero the alignment term is
/// still measured for the report, on a scratch tape, and contributes no
/// gradient. `alignment_batch` overrides the batch used by the alignment term.
TotalLoss total_loss(Tape& tape, const QueryBatch& batch, const PointCloud& pc, const LossConfig& config,
                     const QueryBatch* alignment_batch = nullptr);

} // namespace lsa
