#pragma once

// Shared generators and brute-force oracles for the unit tests.

#include "diffcore.hpp"
#include "kdtree.hpp"
#include "network.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace lsa::test {

inline Vec3 random_point(std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    const double x = u(rng), y = u(rng), z = u(rng);
    return {x, y, z};
}

inline std::vector<Vec3> random_points(std::mt19937_64& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
    std::vector<Vec3> pts;
    pts.reserve(n);
    for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point(rng, lo, hi));
    return pts;
}

/// Small smooth network with parameters perturbed away from the geometric
/// init so every layer matters.
inline SdfNetwork random_network(std::uint64_t seed, int depth = 4, int width = 16, double sharpness = 10.0,
                                 int skip_layer = 2) {
    Architecture a;
    a.depth = depth;
    a.width = width;
    a.skip_layer = skip_layer;
    a.sharpness = sharpness;
    SdfNetwork net = init_network(a, seed);
    std::mt19937_64 rng(seed ^ 0xABCDEFULL);
    std::normal_distribution<double> n(0.0, 0.05);
    for (auto& p : net.mutable_parameters()) p += n(rng);
    return net;
}

/// Relative error with an absolute floor so near-zero references do not blow up.
inline double rel_err(double got, double want, double floor = 1e-6) {
    return std::abs(got - want) / std::max(std::abs(want), floor);
}

inline double rel_err(const Vec3& got, const Vec3& want, double floor = 1e-6) {
    return (got - want).norm() / std::max(want.norm(), floor);
}

inline Vec3 fd_spatial_gradient(const SdfNetwork& net, const Vec3& q, double h = 1e-4) {
    Vec3 g;
    for (int k = 0; k < 3; ++k) {
        Vec3 a = q, b = q;
        a[k] += h;
        b[k] -= h;
        g[k] = (predict(net, a) - predict(net, b)) / (2.0 * h);
    }
    return g;
}

/// Central differences of loss(net) over every parameter.
template <class Loss>
Eigen::VectorXd fd_param_gradient(const SdfNetwork& net, Loss&& loss, double h = 1e-6) {
    SdfNetwork work = net;
    Eigen::VectorXd g(static_cast<Eigen::Index>(net.parameter_count()));
    for (Eigen::Index i = 0; i < g.size(); ++i) {
        const double saved = work.parameters()[i];
        work.mutable_parameters()[i] = saved + h;
        const double up = loss(work);
        work.mutable_parameters()[i] = saved - h;
        const double down = loss(work);
        work.mutable_parameters()[i] = saved;
        g[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// Largest per-entry relative error, floored by a fraction of the gradient scale.
inline double max_rel_err(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
    const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-12);
    double worst = 0.0;
    for (Eigen::Index i = 0; i < want.size(); ++i)
        worst = std::max(worst, std::abs(got[i] - want[i]) / std::max(std::abs(want[i]), 1e-3 * scale));
    return worst;
}

inline std::vector<Neighbor> brute_knn(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k) {
    std::vector<std::pair<double, std::size_t>> all;
    all.reserve(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) all.emplace_back(squared_distance(pts[i], q), i);
    std::sort(all.begin(), all.end());
    std::vector<Neighbor> out;
    for (std::size_t i = 0; i < std::min(k, all.size()); ++i) out.push_back({all[i].second, std::sqrt(all[i].first)});
    return out;
}

inline double brute_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    auto one_way = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double sum = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) best = std::min(best, squared_distance(p, q));
            sum += std::sqrt(best);
        }
        return sum / static_cast<double>(from.size());
    };
    return 0.5 * (one_way(a, b) + one_way(b, a));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("lsalign-" + tag + "-" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace lsa::test
