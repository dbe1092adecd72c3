#include "kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace lsa {

namespace {

constexpr std::uint32_t kLeafSize = 12;

struct Candidate {
    double d2;
    std::uint32_t index;
    bool operator<(const Candidate& o) const { return d2 < o.d2 || (d2 == o.d2 && index < o.index); }
};

// Max-heap on (d2, index): top() is the current worst kept candidate.
using CandidateHeap = std::priority_queue<Candidate>;

} // namespace

KdTree::KdTree(std::span<const Vec3> points) : points_(points.begin(), points.end()) {
    order_.resize(points_.size());
    for (std::uint32_t i = 0; i < order_.size(); ++i) order_[i] = i;
    if (!points_.empty()) {
        nodes_.reserve(2 * points_.size() / kLeafSize + 2);
        build(0, static_cast<std::uint32_t>(points_.size()));
    }
}

std::int32_t KdTree::build(std::uint32_t begin, std::uint32_t end) {
    const auto id = static_cast<std::int32_t>(nodes_.size());
    nodes_.push_back({begin, end, -1, -1, 0, 0.0});
    if (end - begin <= kLeafSize) return id;

    Vec3 lo = points_[order_[begin]], hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] == lo[axis]) return id;  // all points coincide

    const std::uint32_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::uint32_t a, std::uint32_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];

    const std::int32_t left = build(begin, mid);
    const std::int32_t right = build(mid, end);
    auto& n = nodes_[static_cast<std::size_t>(id)];
    n.axis = axis;
    n.split = split;
    n.left = left;
    n.right = right;
    return id;
}

std::vector<Neighbor> KdTree::knn(const Vec3& q, std::size_t k) const {
    k = std::min(k, points_.size());
    std::vector<Neighbor> out;
    if (k == 0) return out;

    CandidateHeap heap;
    // Left children hold coordinates <= split and right children >= split,
    // so |q[axis] - split| lower-bounds the distance to the far side.
    auto visit = [&](auto&& self, std::int32_t id) -> void {
        const Node& n = nodes_[static_cast<std::size_t>(id)];
        if (n.left < 0) {
            for (std::uint32_t i = n.begin; i < n.end; ++i) {
                const Candidate c{squared_distance(points_[order_[i]], q), order_[i]};
                if (heap.size() < k) heap.push(c);
                else if (c < heap.top()) {
                    heap.pop();
                    heap.push(c);
                }
            }
            return;
        }
        const double diff = q[n.axis] - n.split;
        const std::int32_t near = diff <= 0.0 ? n.left : n.right;
        const std::int32_t far = diff <= 0.0 ? n.right : n.left;
        self(self, near);
        if (heap.size() < k || diff * diff <= heap.top().d2) self(self, far);
    };
    visit(visit, 0);

    out.resize(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
        out[i] = {heap.top().index, std::sqrt(heap.top().d2)};
        heap.pop();
    }
    return out;
}

Neighbor KdTree::nearest(const Vec3& q) const {
    if (points_.empty()) throw EmptyError("nearest neighbour query on an empty index");
    return knn(q, 1).front();
}

} // namespace lsa
