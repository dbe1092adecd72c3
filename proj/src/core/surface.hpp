#pragma once

#include "common.hpp"
#include "field.hpp"
#include "network.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace lsa {

struct TriangleMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<std::uint32_t, 3>> faces;
    std::vector<Vec3> normals;  // per vertex; empty when absent

    bool empty() const noexcept { return faces.empty(); }
    /// Throws ConfigError on out-of-range or repeated indices, or non-unit normals.
    void validate() const;
};

/// Regular lattice of `resolution` nodes per axis spanning [lo, hi].
struct GridSpec {
    int resolution = 128;
    Vec3 lo = Vec3::Constant(-1.0);
    Vec3 hi = Vec3::Constant(1.0);
    double iso = 0.0;

    void validate() const;
    Vec3 spacing() const { return (hi - lo) / static_cast<double>(resolution - 1); }
    Vec3 node(int i, int j, int k) const;
    std::size_t node_count() const;
};

/// Node values in x-fastest order.
std::vector<double> sample_grid(const ScalarField& field, const GridSpec& grid);
std::vector<double> sample_grid(const SdfNetwork& net, const GridSpec& grid);

/// Iso-surface {f = grid.iso} by table-driven marching cubes with linear
/// edge interpolation. Vertices are welded on grid edges. An absent sign
/// change yields an empty mesh.
TriangleMesh marching_cubes(std::span<const double> node_values, const GridSpec& grid);
TriangleMesh marching_cubes(const ScalarField& field, const GridSpec& grid);

/// One mesh per iso value, sharing one grid evaluation. Vertex normals are
/// the normalized network gradients.
std::vector<TriangleMesh> extract_levels(const SdfNetwork& net, std::span<const double> isos, const GridSpec& grid);
std::vector<TriangleMesh> extract_levels(const ScalarField& field, std::span<const double> isos, const GridSpec& grid);

/// Maps vertices back to scene coordinates.
TriangleMesh denormalize(TriangleMesh mesh, const Normalization& norm);

enum class MeshFormat { Obj, PlyAscii };
MeshFormat parse_mesh_format(std::string_view name);
MeshFormat mesh_format_for(const std::filesystem::path& path);

void export_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format);
TriangleMesh load_mesh(const std::filesystem::path& path);

double triangle_area(const TriangleMesh& mesh, std::size_t face);
Vec3 face_normal(const TriangleMesh& mesh, std::size_t face);

} // namespace lsa
