#include "metrics.hpp"

#include "diffcore.hpp"
#include "kdtree.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

namespace lsa {

namespace {

double mean_nearest(std::span<const Vec3> from, const KdTree& to) {
    double sum = 0.0;
    for (const auto& p : from) sum += to.nearest(p).distance;
    return sum / static_cast<double>(from.size());
}

double quantile(std::vector<double> v, double q) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const double pos = q * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

} // namespace

double chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b) {
    if (a.empty() || b.empty()) throw EmptyError("chamfer distance needs two nonempty point sets");
    const KdTree ta(a), tb(b);
    return 0.5 * (mean_nearest(a, tb) + mean_nearest(b, ta));
}

SurfaceSamples sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed) {
    std::vector<double> areas(mesh.faces.size());
    double total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) total += areas[f] = triangle_area(mesh, f);
    if (!(total > 0.0)) throw EmptyError("mesh has no surface area to sample");

    std::mt19937_64 rng(seed);
    std::discrete_distribution<std::size_t> pick(areas.begin(), areas.end());
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    SurfaceSamples out;
    out.points.reserve(n);
    out.normals.reserve(n);
    for (std::size_t s = 0; s < n; ++s) {
        const std::size_t f = pick(rng);
        const double r1 = std::sqrt(unit(rng));
        const double r2 = unit(rng);
        // Corners in index order, so positions do not depend on the winding.
        auto t = mesh.faces[f];
        std::sort(t.begin(), t.end());
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        out.points.push_back((1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c);
        out.normals.push_back(face_normal(mesh, f));
    }
    return out;
}

SurfaceSamples sample_shape(const AnalyticShape& shape, std::size_t n, std::uint64_t seed) {
    const PointCloud pc = sample_surface(shape, n, seed);
    return {pc.positions(), pc.normals()};
}

double normal_consistency(const SurfaceSamples& a, const SurfaceSamples& b) {
    if (a.points.empty() || b.points.empty()) throw EmptyError("normal consistency needs two nonempty sample sets");
    if (a.normals.size() != a.points.size() || b.normals.size() != b.points.size())
        throw ConfigError("normal consistency: every sample needs a normal");
    const KdTree ta(a.points), tb(b.points);
    auto one_way = [](const SurfaceSamples& from, const SurfaceSamples& to, const KdTree& index) {
        double sum = 0.0;
        for (std::size_t i = 0; i < from.points.size(); ++i) {
            const auto nn = index.nearest(from.points[i]);
            sum += std::abs(from.normals[i].dot(to.normals[nn.index]));
        }
        return sum / static_cast<double>(from.points.size());
    };
    const double nc = 0.5 * (one_way(a, b, tb) + one_way(b, a, ta));
    return std::clamp(nc, 0.0, 1.0);
}

double normal_consistency(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed) {
    return normal_consistency(sample_mesh(a, n, seed), sample_mesh(b, n, seed));
}

namespace {

ConsistencyStats summarize(std::span<const Vec3> queries, std::span<const FieldSample> at_q,
                           const std::vector<Vec3>& targets, std::span<const FieldSample> at_p,
                           const std::vector<std::size_t>& source) {
    ConsistencyStats stats;
    std::vector<double> cs, residuals;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        const Vec3& ga = at_q[source[k]].gradient;
        const Vec3& gb = at_p[k].gradient;
        if (!(gb.norm() > kGradientEpsilon)) continue;
        cs.push_back(gradient_consistency(ga, gb, ConsistencyMetric::Cosine));
        residuals.push_back(std::abs(at_p[k].value));
    }
    stats.used = cs.size();
    stats.skipped = queries.size() - cs.size();
    if (cs.empty()) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        stats.mean = stats.median = stats.fraction_above = nan;
        stats.residual_median = stats.residual_p90 = stats.residual_max = nan;
        return stats;
    }
    double sum = 0.0;
    std::size_t above = 0;
    for (double c : cs) {
        sum += c;
        if (c > 0.1) ++above;
    }
    stats.mean = sum / static_cast<double>(cs.size());
    stats.fraction_above = static_cast<double>(above) / static_cast<double>(cs.size());
    stats.median = quantile(cs, 0.5);
    stats.residual_median = quantile(residuals, 0.5);
    stats.residual_p90 = quantile(residuals, 0.9);
    stats.residual_max = *std::max_element(residuals.begin(), residuals.end());
    return stats;
}

template <class Eval>
ConsistencyStats consistency_stats_impl(Eval&& eval, std::span<const Vec3> queries, ProjectionForm form) {
    const auto at_q = eval(queries);
    std::vector<Vec3> targets;
    std::vector<std::size_t> source;
    for (std::size_t i = 0; i < queries.size(); ++i) {
        if (!(at_q[i].gradient.norm() > kGradientEpsilon)) continue;
        targets.push_back(pull_projection(at_q[i], queries[i], form));
        source.push_back(i);
    }
    const auto at_p = eval(std::span<const Vec3>(targets));
    return summarize(queries, at_q, targets, at_p, source);
}

} // namespace

ConsistencyStats consistency_stats(const ScalarField& field, std::span<const Vec3> queries, ProjectionForm form) {
    return consistency_stats_impl(
        [&](std::span<const Vec3> pts) {
            std::vector<FieldSample> out;
            out.reserve(pts.size());
            for (const auto& p : pts) out.push_back(field.sample(p));
            return out;
        },
        queries, form);
}

ConsistencyStats consistency_stats(const SdfNetwork& net, std::span<const Vec3> queries, ProjectionForm form) {
    return consistency_stats_impl([&](std::span<const Vec3> pts) { return eval_field(net, pts); }, queries, form);
}

Vec3 FieldSlice::point(int i, int j) const {
    const int u_axis = axis == 0 ? 1 : 0;
    const int v_axis = axis == 2 ? 1 : 2;
    Vec3 p = Vec3::Zero();
    p[axis] = offset;
    p[u_axis] = -1.0 + 2.0 * i / static_cast<double>(resolution - 1);
    p[v_axis] = -1.0 + 2.0 * j / static_cast<double>(resolution - 1);
    return p;
}

int parse_axis(std::string_view name) {
    if (name == "x") return 0;
    if (name == "y") return 1;
    if (name == "z") return 2;
    throw ConfigError("axis: expected x, y or z (got '" + std::string(name) + "')");
}

char axis_name(int axis) { return "xyz"[axis]; }

namespace {

FieldSlice slice_frame(int axis, double offset, int resolution) {
    if (axis < 0 || axis > 2) throw ConfigError("axis: must be 0, 1 or 2");
    if (resolution < 2) throw ConfigError("resolution: must be >= 2 (got " + std::to_string(resolution) + ")");
    if (!std::isfinite(offset)) throw ConfigError("offset: must be finite");
    FieldSlice s;
    s.axis = axis;
    s.offset = offset;
    s.resolution = resolution;
    return s;
}

std::vector<Vec3> slice_points(const FieldSlice& s) {
    std::vector<Vec3> pts;
    pts.reserve(static_cast<std::size_t>(s.resolution) * s.resolution);
    for (int j = 0; j < s.resolution; ++j)
        for (int i = 0; i < s.resolution; ++i) pts.push_back(s.point(i, j));
    return pts;
}

} // namespace

FieldSlice slice_field(const ScalarField& field, int axis, double offset, int resolution) {
    FieldSlice s = slice_frame(axis, offset, resolution);
    for (const auto& p : slice_points(s)) {
        const auto fs = field.sample(p);
        s.values.push_back(fs.value);
        s.gradients.push_back(fs.gradient);
    }
    return s;
}

FieldSlice slice_field(const SdfNetwork& net, int axis, double offset, int resolution) {
    FieldSlice s = slice_frame(axis, offset, resolution);
    for (const auto& fs : eval_field(net, slice_points(s))) {
        s.values.push_back(fs.value);
        s.gradients.push_back(fs.gradient);
    }
    return s;
}

std::uint8_t slice_intensity(double value) {
    const double d = std::clamp(value, -kSliceClamp, kSliceClamp);
    if (d < 0.0) return static_cast<std::uint8_t>(std::lround(127.0 * (d + kSliceClamp) / kSliceClamp));
    return static_cast<std::uint8_t>(128 + std::lround(127.0 * d / kSliceClamp));
}

void export_slice_csv(const FieldSlice& slice, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write slice " + path.string());
    // shortest text that reads back to the same double
    auto text = [](double v) {
        char buf[32];
        return std::string(buf, std::to_chars(buf, buf + sizeof buf, v).ptr);
    };
    out << "axis,offset,resolution\n" << axis_name(slice.axis) << ',' << text(slice.offset) << ',' << slice.resolution
        << '\n';
    for (int j = 0; j < slice.resolution; ++j) {
        for (int i = 0; i < slice.resolution; ++i) out << (i ? "," : "") << text(slice.at(i, j));
        out << '\n';
    }
    if (!out) throw IoError("short write to " + path.string());
}

void export_slice_pgm(const FieldSlice& slice, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write image " + path.string());
    out << "P5\n" << slice.resolution << ' ' << slice.resolution << "\n255\n";
    for (int j = slice.resolution - 1; j >= 0; --j)
        for (int i = 0; i < slice.resolution; ++i) out.put(static_cast<char>(slice_intensity(slice.at(i, j))));
    if (!out) throw IoError("short write to " + path.string());
}

EvalReport evaluate(const TriangleMesh& reconstruction, const SurfaceSamples& reference, std::size_t n,
                    std::uint64_t seed) {
    if (reconstruction.empty()) throw EmptyError("reconstruction mesh is empty");
    const auto rec = sample_mesh(reconstruction, n, seed);
    EvalReport r;
    r.cd = chamfer_l1(rec.points, reference.points);
    r.nc = normal_consistency(rec, reference);
    r.samples_reconstruction = rec.points.size();
    r.samples_reference = reference.points.size();
    r.seed = seed;
    return r;
}

EvalReport evaluate(const TriangleMesh& reconstruction, const TriangleMesh& reference, std::size_t n,
                    std::uint64_t seed) {
    if (reference.empty()) throw EmptyError("reference mesh is empty");
    return evaluate(reconstruction, sample_mesh(reference, n, seed), n, seed);
}

EvalReport evaluate(const TriangleMesh& reconstruction, const AnalyticShape& reference, std::size_t n,
                    std::uint64_t seed) {
    return evaluate(reconstruction, sample_shape(reference, n, seed), n, seed);
}

void write_eval_report(const EvalReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write report " + path.string());
    out << "# cd = " << kChamferConvention << '\n' << std::setprecision(17) << "cd=" << report.cd
        << "\nnc=" << report.nc << "\nsamples_reconstruction=" << report.samples_reconstruction
        << "\nsamples_reference=" << report.samples_reference << "\nseed=" << report.seed << '\n';
    if (!out) throw IoError("short write to " + path.string());
}

std::string eval_csv_header() { return "cd,nc,samples_reconstruction,samples_reference,seed"; }

std::string eval_csv_row(const EvalReport& r) {
    std::ostringstream s;
    s << std::setprecision(17) << r.cd << ',' << r.nc << ',' << r.samples_reconstruction << ','
      << r.samples_reference << ',' << r.seed;
    return s.str();
}

} // namespace lsa
