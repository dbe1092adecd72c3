#pragma once

#include "common.hpp"
#include "field.hpp"
#include "losses.hpp"
#include "network.hpp"
#include "shapes.hpp"
#include "surface.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace lsa {

/// 0.5 * (mean_a min_b |a-b| + mean_b min_a |b-a|). Throws EmptyError on an empty set.
double chamfer_l1(std::span<const Vec3> a, std::span<const Vec3> b);

/// Points on a surface with the normal of the face (or analytic surface) they lie on.
struct SurfaceSamples {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
};

/// Area-weighted uniform samples with face normals. Throws EmptyError on a mesh with no area.
SurfaceSamples sample_mesh(const TriangleMesh& mesh, std::size_t n, std::uint64_t seed);
SurfaceSamples sample_shape(const AnalyticShape& shape, std::size_t n, std::uint64_t seed);

/// 0.5 * (mean_a |n_a . n_nn(a)| + mean_b |n_b . n_nn(b)|), nn by sample position.
double normal_consistency(const SurfaceSamples& a, const SurfaceSamples& b);
double normal_consistency(const TriangleMesh& a, const TriangleMesh& b, std::size_t n, std::uint64_t seed);

struct ConsistencyStats {
    double mean = 0.0;
    double median = 0.0;
    double fraction_above = 0.0;  // share of queries with c > 0.1
    double residual_median = 0.0; // |f(p0)| quantiles
    double residual_p90 = 0.0;
    double residual_max = 0.0;
    std::size_t used = 0;
    std::size_t skipped = 0;
};

/// Cosine consistency between each query and its zero-level-set projection.
/// Queries whose gradient vanishes at q or p0 are skipped.
ConsistencyStats consistency_stats(const ScalarField& field, std::span<const Vec3> queries,
                                   ProjectionForm form = ProjectionForm::Signed);
ConsistencyStats consistency_stats(const SdfNetwork& net, std::span<const Vec3> queries,
                                   ProjectionForm form = ProjectionForm::Signed);

/// Square cross-section of [-1,1]^3 orthogonal to `axis` at `offset`.
/// Cell (i, j) sits at u = -1 + 2i/(res-1), v = -1 + 2j/(res-1) where u and
/// v are the two remaining axes in increasing order; storage is row-major
/// with j as the row.
struct FieldSlice {
    int axis = 2;
    double offset = 0.0;
    int resolution = 0;
    std::vector<double> values;
    std::vector<Vec3> gradients;

    Vec3 point(int i, int j) const;
    double at(int i, int j) const { return values[static_cast<std::size_t>(j) * resolution + i]; }
};

int parse_axis(std::string_view name);
char axis_name(int axis);

FieldSlice slice_field(const ScalarField& field, int axis, double offset, int resolution);
FieldSlice slice_field(const SdfNetwork& net, int axis, double offset, int resolution);

/// Clamp to [-0.2, 0.2]; negatives map linearly onto 0..127, the rest onto 128..255.
inline constexpr double kSliceClamp = 0.2;
std::uint8_t slice_intensity(double value);

/// Header "axis,offset,resolution", one line with those values, then one row per j.
void export_slice_csv(const FieldSlice& slice, const std::filesystem::path& path);
/// Binary 8-bit PGM; image row 0 is j = resolution-1 so v grows upward.
void export_slice_pgm(const FieldSlice& slice, const std::filesystem::path& path);

struct EvalReport {
    double cd = 0.0;
    double nc = 0.0;
    std::size_t samples_reconstruction = 0;
    std::size_t samples_reference = 0;
    std::uint64_t seed = 0;
};

inline constexpr const char* kChamferConvention = "0.5*(mean_a min_b |a-b| + mean_b min_a |b-a|)";

/// Both surfaces sampled with the same seed.
EvalReport evaluate(const TriangleMesh& reconstruction, const SurfaceSamples& reference, std::size_t n,
                    std::uint64_t seed);
EvalReport evaluate(const TriangleMesh& reconstruction, const TriangleMesh& reference, std::size_t n,
                    std::uint64_t seed);
EvalReport evaluate(const TriangleMesh& reconstruction, const AnalyticShape& reference, std::size_t n,
                    std::uint64_t seed);

void write_eval_report(const EvalReport& report, const std::filesystem::path& path);
std::string eval_csv_header();
std::string eval_csv_row(const EvalReport& report);

} // namespace lsa
