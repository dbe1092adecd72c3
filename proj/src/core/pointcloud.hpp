#pragma once

#include "common.hpp"
#include "kdtree.hpp"

#include <filesystem>
#include <memory>
#include <random>
#include <string_view>
#include <vector>

namespace lsa {

/// Point supervision with an exact spatial index. Immutable once built;
/// `normalization` maps the original scene coordinates to the stored ones.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::vector<Vec3> positions, std::vector<Vec3> normals = {},
                        const Normalization& normalization = {});

    std::size_t size() const noexcept { return positions_.size(); }
    bool empty() const noexcept { return positions_.empty(); }
    bool has_normals() const noexcept { return !normals_.empty(); }

    const std::vector<Vec3>& positions() const noexcept { return positions_; }
    const std::vector<Vec3>& normals() const noexcept { return normals_; }
    const Normalization& normalization() const noexcept { return normalization_; }
    const KdTree& index() const noexcept { return *index_; }

private:
    std::vector<Vec3> positions_;
    std::vector<Vec3> normals_;
    Normalization normalization_;
    std::shared_ptr<const KdTree> index_ = std::make_shared<KdTree>();
};

enum class CloudFormat { Xyz, PlyAscii };

/// Picks a format from the file extension (.xyz/.txt/.pts or .ply).
CloudFormat cloud_format_for(const std::filesystem::path& path);
CloudFormat parse_cloud_format(std::string_view name);

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format);
PointCloud load_point_cloud(const std::filesystem::path& path);
void save_point_cloud_xyz(const std::filesystem::path& path, const PointCloud& pc);

/// Longest bounding-box edge after normalization.
inline constexpr double kNormalizedExtent = 1.9;

struct NormalizeResult {
    PointCloud cloud;         // carries the cumulative normalization
    Normalization transform;  // the step applied by this call
};

/// Centers on the bounding-box center and scales the longest edge to 1.9.
NormalizeResult normalize(const PointCloud& pc);

/// Undoes the cloud's cumulative normalization.
PointCloud denormalize(const PointCloud& pc);

/// The k nearest cloud points to q in ascending (distance, index) order.
std::vector<Neighbor> knn(const PointCloud& pc, const Vec3& q, std::size_t k);

/// Training queries: surface points jittered by isotropic Gaussian noise.
struct QueryBatch {
    std::vector<Vec3> queries;
    std::vector<std::size_t> anchors;  // nearest cloud point to each query
    std::vector<double> sigmas;        // noise scale used for each query

    std::size_t size() const noexcept { return queries.size(); }
};

/// Caches the per-point noise scale so batches can be drawn cheaply.
class QuerySampler {
public:
    /// sigma(p) is the distance from p to its `neighbor`-th nearest other point.
    explicit QuerySampler(const PointCloud& pc, std::size_t neighbor = 50);

    QueryBatch sample(std::size_t n, std::mt19937_64& rng) const;

    const PointCloud& cloud() const noexcept { return *pc_; }
    const std::vector<double>& sigmas() const noexcept { return sigmas_; }

private:
    const PointCloud* pc_;
    std::vector<double> sigmas_;
};

QueryBatch sample_queries(const PointCloud& pc, std::size_t n, std::uint64_t seed);

} // namespace lsa
