#include "shapes.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

namespace lsa {

namespace {

void require_positive(double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + ": must be > 0");
}

} // namespace

AnalyticShape AnalyticShape::sphere(double radius, const Vec3& center) {
    require_positive(radius, "radius");
    AnalyticShape s(ShapeKind::Sphere, center);
    s.a_ = radius;
    return s;
}

AnalyticShape AnalyticShape::box(const Vec3& half_extents, const Vec3& center) {
    require_positive(half_extents.x(), "hx");
    require_positive(half_extents.y(), "hy");
    require_positive(half_extents.z(), "hz");
    AnalyticShape s(ShapeKind::Box, center);
    s.extents_ = half_extents;
    return s;
}

AnalyticShape AnalyticShape::torus(double major_radius, double minor_radius, const Vec3& center) {
    require_positive(major_radius, "R");
    require_positive(minor_radius, "r");
    AnalyticShape s(ShapeKind::Torus, center);
    s.a_ = major_radius;
    s.b_ = minor_radius;
    return s;
}

double AnalyticShape::value(const Vec3& q) const {
    const Vec3 p = q - center_;
    switch (kind_) {
    case ShapeKind::Sphere: return p.norm() - a_;
    case ShapeKind::Box: {
        const Vec3 d = p.cwiseAbs() - extents_;
        return d.cwiseMax(0.0).norm() + std::min(d.maxCoeff(), 0.0);
    }
    case ShapeKind::Torus: {
        const double rho = std::hypot(p.x(), p.y());
        return std::hypot(rho - a_, p.z()) - b_;
    }
    }
    return 0.0;
}

FieldSample AnalyticShape::sample(const Vec3& q) const {
    const Vec3 p = q - center_;
    FieldSample s;
    s.value = value(q);
    switch (kind_) {
    case ShapeKind::Sphere: {
        const double r = p.norm();
        s.gradient = r > 0.0 ? Vec3(p / r) : Vec3(0.0, 0.0, 1.0);
        break;
    }
    case ShapeKind::Box: {
        const Vec3 d = p.cwiseAbs() - extents_;
        const Vec3 outside = d.cwiseMax(0.0);
        const double len = outside.norm();
        if (len > 0.0) {
            for (int i = 0; i < 3; ++i) s.gradient[i] = std::copysign(outside[i] / len, p[i]);
        } else {
            int axis = 0;
            d.maxCoeff(&axis);  // first maximal axis
            s.gradient = Vec3::Zero();
            s.gradient[axis] = p[axis] < 0.0 ? -1.0 : 1.0;
        }
        break;
    }
    case ShapeKind::Torus: {
        const double rho = std::hypot(p.x(), p.y());
        const double radial = rho - a_;
        const double len = std::hypot(radial, p.z());
        if (rho > 0.0 && len > 0.0)
            s.gradient = Vec3(radial * p.x() / rho, radial * p.y() / rho, p.z()) / len;
        else
            s.gradient = Vec3(0.0, 0.0, 1.0);
        break;
    }
    }
    return s;
}

std::string AnalyticShape::describe() const {
    std::ostringstream os;
    os.precision(17);
    switch (kind_) {
    case ShapeKind::Sphere: os << "sphere:r=" << a_; break;
    case ShapeKind::Box: os << "box:hx=" << extents_.x() << ",hy=" << extents_.y() << ",hz=" << extents_.z(); break;
    case ShapeKind::Torus: os << "torus:R=" << a_ << ",r=" << b_; break;
    }
    if (!center_.isZero(0.0)) os << ",cx=" << center_.x() << ",cy=" << center_.y() << ",cz=" << center_.z();
    return os.str();
}

PointCloud sample_surface(const AnalyticShape& shape, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw ConfigError("points: must be >= 1");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<Vec3> pos, nrm;
    pos.reserve(n);
    nrm.reserve(n);
    const Vec3& c = shape.center();

    switch (shape.kind()) {
    case ShapeKind::Sphere:
        while (pos.size() < n) {
            const double x = gauss(rng), y = gauss(rng), z = gauss(rng);
            const Vec3 d(x, y, z);
            const double len = d.norm();
            if (len < 1e-8) continue;
            const Vec3 u = d / len;
            pos.push_back(c + shape.radius() * u);
            nrm.push_back(u);
        }
        break;
    case ShapeKind::Box: {
        const Vec3 h = shape.half_extents();
        const double areas[3] = {h.y() * h.z(), h.x() * h.z(), h.x() * h.y()};
        std::discrete_distribution<int> face({areas[0], areas[0], areas[1], areas[1], areas[2], areas[2]});
        for (std::size_t i = 0; i < n; ++i) {
            const int f = face(rng);
            const int axis = f / 2;
            const double sign = (f % 2 == 0) ? 1.0 : -1.0;
            Vec3 p;
            for (int k = 0; k < 3; ++k) {
                const double u = unit(rng);
                p[k] = (2.0 * u - 1.0) * h[k];
            }
            p[axis] = sign * h[axis];
            Vec3 normal = Vec3::Zero();
            normal[axis] = sign;
            pos.push_back(c + p);
            nrm.push_back(normal);
        }
        break;
    }
    case ShapeKind::Torus: {
        const double big = shape.major_radius(), small = shape.minor_radius();
        while (pos.size() < n) {
            const double theta = 2.0 * std::numbers::pi * unit(rng);
            const double phi = 2.0 * std::numbers::pi * unit(rng);
            const double accept = unit(rng);
            // Surface element is proportional to (R + r cos phi).
            if (accept * (big + small) > big + small * std::cos(phi)) continue;
            const double ring = big + small * std::cos(phi);
            const Vec3 normal(std::cos(phi) * std::cos(theta), std::cos(phi) * std::sin(theta), std::sin(phi));
            pos.push_back(c + Vec3(ring * std::cos(theta), ring * std::sin(theta), small * std::sin(phi)));
            nrm.push_back(normal);
        }
        break;
    }
    }
    return PointCloud(std::move(pos), std::move(nrm));
}

AnalyticShape parse_shape(std::string_view spec) {
    const auto colon = spec.find(':');
    const std::string kind(spec.substr(0, colon));
    std::map<std::string, double> kv;
    if (colon != std::string_view::npos) {
        std::string_view rest = spec.substr(colon + 1);
        while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string_view item = rest.substr(0, comma);
            const auto eq = item.find('=');
            if (eq == std::string_view::npos) throw ConfigError("shape: expected key=value in '" + std::string(item) + "'");
            const std::string key(item.substr(0, eq));
            const std::string_view val = item.substr(eq + 1);
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(val.data(), val.data() + val.size(), v);
            if (ec != std::errc() || ptr != val.data() + val.size())
                throw ConfigError("shape: bad number for '" + key + "'");
            kv[key] = v;
            if (comma == std::string_view::npos) break;
            rest = rest.substr(comma + 1);
        }
    }
    auto take = [&](const char* key, double fallback) {
        const auto it = kv.find(key);
        if (it == kv.end()) return fallback;
        const double v = it->second;
        kv.erase(it);
        return v;
    };
    const Vec3 center(take("cx", 0.0), take("cy", 0.0), take("cz", 0.0));
    AnalyticShape shape = [&] {
        if (kind == "sphere") return AnalyticShape::sphere(take("r", 1.0), center);
        if (kind == "box") return AnalyticShape::box({take("hx", 1.0), take("hy", 1.0), take("hz", 1.0)}, center);
        if (kind == "torus") return AnalyticShape::torus(take("R", 1.0), take("r", 0.4), center);
        throw ConfigError("shape: unknown kind '" + kind + "' (expected sphere, box or torus)");
    }();
    if (!kv.empty()) throw ConfigError("shape: unknown parameter '" + kv.begin()->first + "' for " + kind);
    return shape;
}

} // namespace lsa
