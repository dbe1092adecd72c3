#pragma once

#include "common.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace lsa {

/// Squared Euclidean distance in a fixed evaluation order, shared bit for bit
/// by the index, brute-force checks and metrics.
inline double squared_distance(const Vec3& a, const Vec3& b) {
    const double dx = a.x() - b.x();
    const double dy = a.y() - b.y();
    const double dz = a.z() - b.z();
    return dx * dx + dy * dy + dz * dz;
}

struct Neighbor {
    std::size_t index = 0;
    double distance = 0.0;
};

/// Exact k-nearest-neighbour index. Results are ordered by (distance,
/// index), so ties always resolve to the lower point index.
class KdTree {
public:
    KdTree() = default;
    explicit KdTree(std::span<const Vec3> points);

    std::size_t size() const noexcept { return points_.size(); }
    const std::vector<Vec3>& points() const noexcept { return points_; }

    std::vector<Neighbor> knn(const Vec3& q, std::size_t k) const;
    Neighbor nearest(const Vec3& q) const;

private:
    struct Node {
        std::uint32_t begin = 0, end = 0;   // range in order_
        std::int32_t left = -1, right = -1;
        int axis = 0;
        double split = 0.0;
    };

    std::int32_t build(std::uint32_t begin, std::uint32_t end);

    std::vector<Vec3> points_;
    std::vector<std::uint32_t> order_;
    std::vector<Node> nodes_;
};

} // namespace lsa
