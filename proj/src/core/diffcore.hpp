#pragma once

// Reverse-mode differentiation over network evaluations.
//
// A Tape records scalar operations (Var) and batched network evaluations.
// Each network evaluation yields the field value and its exact spatial
// gradient, computed by forward-mode tangent propagation through the MLP.
// The reverse sweep differentiates through both, so losses built from
// spatial gradients (and from points that themselves depend on the
// network, like zero-level-set projections) get exact parameter gradients.

#include "common.hpp"
#include "field.hpp"
#include "network.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

namespace lsa {

/// d(loss)/d(theta), laid out like SdfNetwork::parameters().
using ParamGradient = Eigen::VectorXd;

class Tape;

/// Scalar on a tape, or a constant when tape() is null.
class Var {
public:
    Var() = default;
    Var(double constant) : value_(constant) {}  // NOLINT(google-explicit-constructor)

    double value() const noexcept { return value_; }
    Tape* tape() const noexcept { return tape_; }
    std::int32_t index() const noexcept { return index_; }
    bool is_constant() const noexcept { return tape_ == nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::int32_t index, double value) : tape_(tape), index_(index), value_(value) {}

    Tape* tape_ = nullptr;
    std::int32_t index_ = -1;
    double value_ = 0.0;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var sqrt(const Var& a);
Var exp(const Var& a);
Var abs(const Var& a);
Var square(const Var& a);

struct Var3 {
    Var x, y, z;

    Var3() = default;
    Var3(Var x_, Var y_, Var z_) : x(x_), y(y_), z(z_) {}
    explicit Var3(const Vec3& v) : x(v.x()), y(v.y()), z(v.z()) {}

    Vec3 value() const { return {x.value(), y.value(), z.value()}; }
};

Var3 operator+(const Var3& a, const Var3& b);
Var3 operator-(const Var3& a, const Var3& b);
Var3 operator*(const Var3& a, const Var& s);
Var dot(const Var3& a, const Var3& b);
Var norm(const Var3& a);
Var squared_norm(const Var3& a);

/// FieldSample whose entries live on a tape.
struct FieldVars {
    Var value;
    Var3 gradient;

    FieldSample sample() const { return {value.value(), gradient.value()}; }
};

class Tape {
public:
    explicit Tape(const SdfNetwork& net);
    ~Tape();
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    const SdfNetwork& network() const noexcept { return net_; }

    /// Evaluates the network at every point as one batch. Points may be
    /// constants or depend on earlier tape values.
    std::vector<FieldVars> eval(std::span<const Var3> points);
    std::vector<FieldVars> eval(std::span<const Vec3> points);

    /// Same value, no gradient path.
    static Var detach(const Var& v) { return Var(v.value()); }
    static Var3 detach(const Var3& v) { return Var3(v.value()); }

    /// Parameter gradient of `loss`. The network must not have changed
    /// since the tape recorded its evaluations.
    ParamGradient gradient(const Var& loss) const;

    std::size_t node_count() const noexcept { return nodes_.size(); }

    // Primitive recording, used by the operator overloads.
    Var unary(double value, const Var& a, double da);
    Var binary(double value, const Var& a, double da, const Var& b, double db);

private:
    struct Node {
        std::int32_t a = -1;
        std::int32_t b = -1;
        double da = 0.0;
        double db = 0.0;
    };
    struct Block;

    void check_owner(const Var& v) const;

    const SdfNetwork& net_;
    std::vector<Node> nodes_;
    std::vector<std::unique_ptr<Block>> blocks_;
};

/// Value and exact spatial gradient at each point.
std::vector<FieldSample> eval_field(const SdfNetwork& net, std::span<const Vec3> points);

/// Values only; cheaper than eval_field when gradients are not needed.
std::vector<double> eval_values(const SdfNetwork& net, std::span<const Vec3> points);

/// d(loss)/d(theta) for a loss recorded on a tape bound to `net`.
ParamGradient loss_param_gradients(const SdfNetwork& net, const Var& loss);

} // namespace lsa
