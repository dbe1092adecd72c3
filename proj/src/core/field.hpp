#pragma once

#include "common.hpp"

namespace lsa {

/// Value and spatial gradient of a scalar field at one point.
struct FieldSample {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();
};

/// Anything that can be sampled as a signed distance field: networks,
/// analytic shapes, closed-form test fields.
class ScalarField {
public:
    virtual ~ScalarField() = default;
    virtual FieldSample sample(const Vec3& q) const = 0;
    virtual double value(const Vec3& q) const { return sample(q).value; }
};

/// f(q) = w . q + b
class LinearField final : public ScalarField {
public:
    LinearField(const Vec3& w, double b) : w_(w), b_(b) {}
    FieldSample sample(const Vec3& q) const override { return {w_.dot(q) + b_, w_}; }

private:
    Vec3 w_;
    double b_;
};

} // namespace lsa
