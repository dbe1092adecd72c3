#pragma once

#include "common.hpp"
#include "field.hpp"
#include "pointcloud.hpp"

#include <cstdint>
#include <string>
#include <string_view>

namespace lsa {

enum class ShapeKind { Sphere, Box, Torus };

/// Closed-form signed distance ground truth.
///
/// Gradient conventions at singular points: the sphere center returns
/// (0,0,1); box points equidistant from several faces use the lowest axis;
/// torus points on the symmetry axis or on the core circle are left to the
/// closed-form expression and are excluded from tests.
class AnalyticShape final : public ScalarField {
public:
    static AnalyticShape sphere(double radius, const Vec3& center = Vec3::Zero());
    static AnalyticShape box(const Vec3& half_extents, const Vec3& center = Vec3::Zero());
    /// Torus around the z axis.
    static AnalyticShape torus(double major_radius, double minor_radius, const Vec3& center = Vec3::Zero());

    ShapeKind kind() const noexcept { return kind_; }
    const Vec3& center() const noexcept { return center_; }
    double radius() const noexcept { return a_; }
    Vec3 half_extents() const noexcept { return extents_; }
    double major_radius() const noexcept { return a_; }
    double minor_radius() const noexcept { return b_; }

    FieldSample sample(const Vec3& q) const override;
    double value(const Vec3& q) const override;

    /// Canonical "kind:key=value,..." description; parse_shape() accepts it.
    std::string describe() const;

private:
    AnalyticShape(ShapeKind kind, const Vec3& center) : kind_(kind), center_(center) {}

    ShapeKind kind_;
    Vec3 center_;
    Vec3 extents_ = Vec3::Zero();
    double a_ = 0.0;
    double b_ = 0.0;
};

inline FieldSample analytic_sdf(const AnalyticShape& shape, const Vec3& q) { return shape.sample(q); }

/// Surface samples with exact normals, in the shape's own coordinates.
/// Sphere and box are area-uniform; the torus uses rejection on the
/// minor angle to correct the parameter density.
PointCloud sample_surface(const AnalyticShape& shape, std::size_t n, std::uint64_t seed);

/// "sphere", "sphere:r=0.8", "box:hx=1,hy=0.5,hz=0.5", "torus:R=1,r=0.4",
/// each optionally with cx/cy/cz.
AnalyticShape parse_shape(std::string_view spec);

} // namespace lsa
