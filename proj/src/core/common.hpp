#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lsa {

using Vec3 = Eigen::Vector3d;

/// Error categories surfaced through the C API as distinct status codes.
enum class ErrorKind {
    Config,      // invalid configuration value or precondition
    Parse,       // malformed input file
    Io,          // filesystem failure
    Numeric,     // non-finite value or vanishing gradient
    Graph,       // misuse of the differentiation tape
    Empty,       // empty input where data is required
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct ParseError : Error {
    ParseError(const std::string& what, std::size_t line)
        : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

struct IoError : Error {
    explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

struct NumericError : Error {
    explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

struct GraphError : Error {
    explicit GraphError(const std::string& what) : Error(ErrorKind::Graph, what) {}
};

struct EmptyError : Error {
    explicit EmptyError(const std::string& what) : Error(ErrorKind::Empty, what) {}
};

/// Gradient-norm floor below which directions are treated as undefined.
inline constexpr double kGradientEpsilon = 1e-12;

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

/// Maps scene coordinates into the unit training domain:
/// normalized = (scene - center) * scale.
struct Normalization {
    Vec3 center = Vec3::Zero();
    double scale = 1.0;

    Vec3 apply(const Vec3& p) const { return (p - center) * scale; }
    Vec3 invert(const Vec3& p) const { return p / scale + center; }

    /// Transform equivalent to applying `*this` and then `next`.
    Normalization then(const Normalization& next) const {
        return {center + next.center / scale, scale * next.scale};
    }
};

} // namespace lsa
