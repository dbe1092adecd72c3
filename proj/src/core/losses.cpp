#include "losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lsa {

namespace {

template <typename E>
struct Names {
    E value;
    std::string_view name;
};

constexpr Names<BaselineKind> kBaselines[] = {{BaselineKind::NeuralPull, "neural-pull"},
                                              {BaselineKind::EikonalSurface, "eikonal-surface"}};
constexpr Names<WeightMode> kWeightModes[] = {{WeightMode::PredictedDistance, "predicted"},
                                              {WeightMode::EuclideanDistance, "euclidean"},
                                              {WeightMode::None, "none"}};
constexpr Names<ConsistencyMetric> kMetrics[] = {{ConsistencyMetric::Cosine, "cosine"},
                                                 {ConsistencyMetric::Mse, "mse"},
                                                 {ConsistencyMetric::MseNormalized, "mse-normalized"}};
constexpr Names<ConsistencyTarget> kTargets[] = {{ConsistencyTarget::Projection, "projection"},
                                                 {ConsistencyTarget::FixedNearest, "fixed"}};
constexpr Names<ProjectionGradient> kProjGrad[] = {{ProjectionGradient::Through, "through"},
                                                   {ProjectionGradient::Detached, "detached"}};
constexpr Names<ProjectionForm> kProjForm[] = {{ProjectionForm::Signed, "signed"},
                                               {ProjectionForm::Absolute, "absolute"}};
constexpr Names<AlignmentReduction> kReductions[] = {{AlignmentReduction::Sum, "sum"},
                                                     {AlignmentReduction::Mean, "mean"}};

template <typename E, std::size_t N>
std::string_view name_of(const Names<E> (&table)[N], E v) {
    for (const auto& n : table)
        if (n.value == v) return n.name;
    return "?";
}

template <typename E, std::size_t N>
E parse_of(const Names<E> (&table)[N], std::string_view s, const char* field) {
    for (const auto& n : table)
        if (n.name == s) return n.value;
    std::string msg = std::string(field) + ": unknown value '" + std::string(s) + "' (expected";
    for (const auto& n : table) msg += " " + std::string(n.name);
    throw ConfigError(msg + ")");
}

bool normalizing(ConsistencyMetric m) { return m != ConsistencyMetric::Mse; }

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

std::string_view to_string(BaselineKind v) { return name_of(kBaselines, v); }
std::string_view to_string(WeightMode v) { return name_of(kWeightModes, v); }
std::string_view to_string(ConsistencyMetric v) { return name_of(kMetrics, v); }
std::string_view to_string(ConsistencyTarget v) { return name_of(kTargets, v); }
std::string_view to_string(ProjectionGradient v) { return name_of(kProjGrad, v); }
std::string_view to_string(ProjectionForm v) { return name_of(kProjForm, v); }
std::string_view to_string(AlignmentReduction v) { return name_of(kReductions, v); }

BaselineKind parse_baseline(std::string_view s) { return parse_of(kBaselines, s, "baseline"); }
WeightMode parse_weight_mode(std::string_view s) { return parse_of(kWeightModes, s, "weight_mode"); }
ConsistencyMetric parse_metric(std::string_view s) { return parse_of(kMetrics, s, "metric"); }
ConsistencyTarget parse_target(std::string_view s) { return parse_of(kTargets, s, "target"); }
ProjectionGradient parse_projection_gradient(std::string_view s) {
    return parse_of(kProjGrad, s, "projection_gradient");
}
ProjectionForm parse_projection_form(std::string_view s) { return parse_of(kProjForm, s, "projection_form"); }
AlignmentReduction parse_reduction(std::string_view s) { return parse_of(kReductions, s, "reduction"); }

void LossConfig::validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
        throw ConfigError("alpha: must be >= 0 (got " + std::to_string(alpha) + ")");
    if (!(delta >= 0.0) || !std::isfinite(delta))
        throw ConfigError("delta: must be >= 0 (got " + std::to_string(delta) + ")");
    if (!(eikonal_weight >= 0.0) || !std::isfinite(eikonal_weight))
        throw ConfigError("eikonal_weight: must be >= 0");
}

// ---- primitives ------------------------------------------------------------

Vec3 pull_projection(const FieldSample& at_q, const Vec3& q, ProjectionForm form) {
    const double len = at_q.gradient.norm();
    if (!(len > kGradientEpsilon)) throw NumericError("projection: vanishing gradient");
    const double d = form == ProjectionForm::Signed ? at_q.value : std::abs(at_q.value);
    return q - at_q.gradient * (d / len);
}

Vec3 pull_projection(const ScalarField& field, const Vec3& q, ProjectionForm form) {
    return pull_projection(field.sample(q), q, form);
}

double gradient_consistency(const Vec3& ga, const Vec3& gb, ConsistencyMetric metric) {
    if (metric == ConsistencyMetric::Mse) return (ga - gb).squaredNorm();
    const double la = ga.norm(), lb = gb.norm();
    if (!(la > kGradientEpsilon) || !(lb > kGradientEpsilon))
        throw NumericError("consistency: vanishing gradient");
    if (metric == ConsistencyMetric::MseNormalized) return (ga / la - gb / lb).squaredNorm();
    return std::clamp(1.0 - ga.dot(gb) / (la * lb), 0.0, 2.0);
}

double consistency(const ScalarField& field, const Vec3& q, const Vec3& target, ConsistencyMetric metric) {
    return gradient_consistency(field.sample(q).gradient, field.sample(target).gradient, metric);
}

double adaptive_weight(double distance, double delta) { return std::exp(-delta * std::abs(distance)); }

double adaptive_weight(const ScalarField& field, const Vec3& q, double delta) {
    return adaptive_weight(field.value(q), delta);
}

// ---- taped -----------------------------------------------------------------

ProjectionVars pull_projection(const FieldVars& at_q, const Var3& q, ProjectionForm form) {
    const Var len = norm(at_q.gradient);
    if (!(len.value() > kGradientEpsilon)) return {};
    const Var d = form == ProjectionForm::Signed ? at_q.value : abs(at_q.value);
    return {q - at_q.gradient * (d / len), true};
}

Var consistency_term(const Var3& ga, const Var3& gb, ConsistencyMetric metric) {
    switch (metric) {
    case ConsistencyMetric::Mse: return squared_norm(ga - gb);
    case ConsistencyMetric::MseNormalized: return squared_norm(ga * (Var(1.0) / norm(ga)) - gb * (Var(1.0) / norm(gb)));
    case ConsistencyMetric::Cosine: break;
    }
    return Var(1.0) - dot(ga, gb) / (norm(ga) * norm(gb));
}

Var adaptive_weight(const Var& distance, double delta) { return exp(abs(distance) * Var(-delta)); }

// ---- loss terms ------------------------------------------------------------

Var neuralpull_term(const QueryBatch& batch, const PointCloud& pc, std::span<const FieldVars> at_q,
                    std::size_t* skipped) {
    Var sum(0.0);
    std::size_t used = 0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto proj = pull_projection(at_q[i], Var3(batch.queries[i]), ProjectionForm::Signed);
        if (!proj.ok) continue;
        const Vec3& anchor = pc.positions()[batch.anchors[i]];
        sum = sum + squared_norm(proj.point - Var3(anchor));
        ++used;
    }
    if (skipped) *skipped = batch.size() - used;
    if (used == 0) throw NumericError("degenerate batch: every query has a vanishing gradient");
    return sum / Var(static_cast<double>(used));
}

Var neuralpull_loss(Tape& tape, const QueryBatch& batch, const PointCloud& pc) {
    const auto at_q = tape.eval(batch.queries);
    return neuralpull_term(batch, pc, at_q);
}

Var eikonal_term(std::span<const FieldVars> samples) {
    if (samples.empty()) throw EmptyError("eikonal term over an empty point set");
    Var sum(0.0);
    for (const auto& s : samples) sum = sum + square(norm(s.gradient) - Var(1.0));
    return sum / Var(static_cast<double>(samples.size()));
}

Var eikonal_loss(Tape& tape, std::span<const Vec3> points) {
    const auto samples = tape.eval(points);
    return eikonal_term(samples);
}

AlignmentResult alignment_term(Tape& tape, const QueryBatch& batch, const PointCloud& pc, const LossConfig& config,
                               std::span<const FieldVars> at_q) {
    const std::size_t n = batch.size();
    AlignmentResult res;
    res.beta.assign(n, kNaN);
    res.consistency.assign(n, kNaN);

    std::vector<std::size_t> active;
    std::vector<Var3> targets;
    active.reserve(n);
    targets.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(at_q[i].gradient.value().norm() > kGradientEpsilon)) continue;
        if (config.target == ConsistencyTarget::FixedNearest) {
            targets.emplace_back(pc.positions()[batch.anchors[i]]);
        } else {
            auto proj = pull_projection(at_q[i], Var3(batch.queries[i]), config.projection_form);
            if (!proj.ok) continue;
            targets.push_back(config.projection_gradient == ProjectionGradient::Detached ? Tape::detach(proj.point)
                                                                                         : proj.point);
        }
        active.push_back(i);
    }
    const auto at_t = tape.eval(targets);

    Var sum(0.0);
    double beta_sum = 0.0, c_sum = 0.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
        const std::size_t i = active[k];
        if (normalizing(config.metric) && !(at_t[k].gradient.value().norm() > kGradientEpsilon)) continue;
        const Var c = consistency_term(at_q[i].gradient, at_t[k].gradient, config.metric);
        Var beta(1.0);
        switch (config.weight_mode) {
        case WeightMode::PredictedDistance: beta = adaptive_weight(at_q[i].value, config.delta); break;
        case WeightMode::EuclideanDistance: {
            const double d = std::sqrt(squared_distance(batch.queries[i], pc.positions()[batch.anchors[i]]));
            beta = Var(adaptive_weight(d, config.delta));
            break;
        }
        case WeightMode::None: break;
        }
        sum = sum + beta * c;
        res.beta[i] = beta.value();
        res.consistency[i] = c.value();
        beta_sum += beta.value();
        c_sum += c.value();
        ++res.used;
    }
    res.skipped = n - res.used;
    if (res.used == 0) throw NumericError("degenerate batch: no query has a usable alignment target");
    const double used = static_cast<double>(res.used);
    res.loss = sum / Var(used);
    res.mean_beta = beta_sum / used;
    res.mean_consistency = c_sum / used;
    return res;
}

AlignmentResult alignment_loss(Tape& tape, const QueryBatch& batch, const PointCloud& pc, const LossConfig& config) {
    config.validate();
    const auto at_q = tape.eval(batch.queries);
    return alignment_term(tape, batch, pc, config, at_q);
}

TotalLoss total_loss(Tape& tape, const QueryBatch& batch, const PointCloud& pc, const LossConfig& config,
                     const QueryBatch* alignment_batch) {
    config.validate();
    const auto at_q = tape.eval(batch.queries);

    TotalLoss out;
    Var baseline;
    std::size_t skipped = 0;
    if (config.baseline == BaselineKind::NeuralPull) {
        baseline = neuralpull_term(batch, pc, at_q, &skipped);
    } else {
        std::vector<Vec3> surface;
        surface.reserve(batch.size());
        for (auto a : batch.anchors) surface.push_back(pc.positions()[a]);
        const auto at_s = tape.eval(surface);
        Var sdf_sum(0.0);
        for (const auto& s : at_s) sdf_sum = sdf_sum + abs(s.value);
        baseline = sdf_sum / Var(static_cast<double>(at_s.size())) + Var(config.eikonal_weight) * eikonal_term(at_q);
    }

    const QueryBatch& abatch = alignment_batch ? *alignment_batch : batch;
    AlignmentResult align;
    if (config.alpha > 0.0) {
        if (alignment_batch) {
            const auto at_a = tape.eval(abatch.queries);
            align = alignment_term(tape, abatch, pc, config, at_a);
        } else {
            align = alignment_term(tape, abatch, pc, config, at_q);
        }
        if (config.reduction == AlignmentReduction::Sum) align.loss = align.loss * Var(static_cast<double>(align.used));
        out.loss = baseline + Var(config.alpha) * align.loss;
    } else {
        Tape scratch(tape.network());
        const auto at_a = scratch.eval(abatch.queries);
        align = alignment_term(scratch, abatch, pc, config, at_a);
        double value = align.loss.value();
        if (config.reduction == AlignmentReduction::Sum) value *= static_cast<double>(align.used);
        align.loss = Var(value);
        out.loss = baseline;
    }

    out.report.baseline = baseline.value();
    out.report.alignment = align.loss.value();
    out.report.total = out.loss.value();
    out.report.mean_beta = align.mean_beta;
    out.report.mean_consistency = align.mean_consistency;
    out.report.used = align.used;
    out.report.skipped = std::max(skipped, align.skipped);
    return out;
}

} // namespace lsa
