#include "surface.hpp"

#include "diffcore.hpp"
#include "mc_tables.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

namespace lsa {

void TriangleMesh::validate() const {
    const auto n = vertices.size();
    for (std::size_t f = 0; f < faces.size(); ++f) {
        const auto& t = faces[f];
        for (auto v : t)
            if (v >= n) throw ConfigError("mesh: face " + std::to_string(f) + " references a missing vertex");
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2])
            throw ConfigError("mesh: face " + std::to_string(f) + " repeats a vertex");
    }
    if (!normals.empty()) {
        if (normals.size() != n) throw ConfigError("mesh: normal count does not match vertex count");
        for (const auto& nv : normals)
            if (std::abs(nv.norm() - 1.0) > 1e-6) throw ConfigError("mesh: vertex normal is not unit length");
    }
}

void GridSpec::validate() const {
    if (resolution < 8) throw ConfigError("resolution: must be >= 8 (got " + std::to_string(resolution) + ")");
    if (!(hi.array() > lo.array()).all()) throw ConfigError("bounds: grid box is empty");
    if (!std::isfinite(iso)) throw ConfigError("iso: must be finite");
}

Vec3 GridSpec::node(int i, int j, int k) const {
    const Vec3 h = spacing();
    return {lo.x() + i * h.x(), lo.y() + j * h.y(), lo.z() + k * h.z()};
}

std::size_t GridSpec::node_count() const {
    const auto r = static_cast<std::size_t>(resolution);
    return r * r * r;
}

namespace {

std::vector<Vec3> grid_nodes(const GridSpec& grid) {
    std::vector<Vec3> nodes;
    nodes.reserve(grid.node_count());
    for (int k = 0; k < grid.resolution; ++k)
        for (int j = 0; j < grid.resolution; ++j)
            for (int i = 0; i < grid.resolution; ++i) nodes.push_back(grid.node(i, j, k));
    return nodes;
}

} // namespace

std::vector<double> sample_grid(const ScalarField& field, const GridSpec& grid) {
    grid.validate();
    std::vector<double> values;
    values.reserve(grid.node_count());
    for (const auto& p : grid_nodes(grid)) values.push_back(field.value(p));
    return values;
}

std::vector<double> sample_grid(const SdfNetwork& net, const GridSpec& grid) {
    grid.validate();
    // One z-slab at a time keeps the node buffer small.
    std::vector<double> values;
    values.reserve(grid.node_count());
    std::vector<Vec3> slab;
    const int r = grid.resolution;
    slab.reserve(static_cast<std::size_t>(r) * static_cast<std::size_t>(r));
    for (int k = 0; k < r; ++k) {
        slab.clear();
        for (int j = 0; j < r; ++j)
            for (int i = 0; i < r; ++i) slab.push_back(grid.node(i, j, k));
        const auto v = eval_values(net, slab);
        values.insert(values.end(), v.begin(), v.end());
    }
    return values;
}

TriangleMesh marching_cubes(std::span<const double> node_values, const GridSpec& grid) {
    grid.validate();
    if (node_values.size() != grid.node_count()) throw ConfigError("marching cubes: node count does not match grid");
    const int r = grid.resolution;
    const auto idx = [r](int i, int j, int k) {
        return static_cast<std::size_t>(i) +
               static_cast<std::size_t>(r) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(r) * k);
    };

    // Nodes exactly at iso count as outside, so every sign-changing edge has
    // vb != va and a node at iso yields a vertex on that node.
    const std::span<const double> vals = node_values;
    for (std::size_t n = 0; n < vals.size(); ++n) {
        if (!std::isfinite(vals[n])) throw NumericError("marching cubes: non-finite field value at node " + std::to_string(n));
    }

    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, std::uint32_t> edge_vertex;
    auto vertex_on = [&](int i, int j, int k, int axis) -> std::uint32_t {
        const std::uint64_t key = 3 * static_cast<std::uint64_t>(idx(i, j, k)) + static_cast<std::uint64_t>(axis);
        const auto [it, inserted] = edge_vertex.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
        if (inserted) {
            int i2 = i, j2 = j, k2 = k;
            (axis == 0 ? i2 : axis == 1 ? j2 : k2) += 1;
            const double va = vals[idx(i, j, k)];
            const double vb = vals[idx(i2, j2, k2)];
            const Vec3 pa = grid.node(i, j, k);
            const Vec3 pb = grid.node(i2, j2, k2);
            const double t = (grid.iso - va) / (vb - va);
            mesh.vertices.push_back(pa + t * (pb - pa));
        }
        return it->second;
    };

    for (int k = 0; k + 1 < r; ++k) {
        for (int j = 0; j + 1 < r; ++j) {
            for (int i = 0; i + 1 < r; ++i) {
                int cube = 0;
                for (int c = 0; c < 8; ++c) {
                    const auto& o = mc::kCorners[static_cast<std::size_t>(c)];
                    if (vals[idx(i + o[0], j + o[1], k + o[2])] < grid.iso) cube |= 1 << c;
                }
                const auto& row = mc::kTriangleTable[static_cast<std::size_t>(cube)];
                for (int t = 0; t < 16 && row[static_cast<std::size_t>(t)] >= 0; t += 3) {
                    std::array<std::uint32_t, 3> face{};
                    for (int v = 0; v < 3; ++v) {
                        const auto& edge = mc::kEdges[static_cast<std::size_t>(row[static_cast<std::size_t>(t + v)])];
                        const auto& o = mc::kCorners[static_cast<std::size_t>(edge[0])];
                        face[static_cast<std::size_t>(v)] = vertex_on(i + o[0], j + o[1], k + o[2], edge[1]);
                    }
                    // Table winding faces the low side; flip so normals point toward increasing f.
                    mesh.faces.push_back({face[0], face[2], face[1]});
                }
            }
        }
    }
    return mesh;
}

TriangleMesh marching_cubes(const ScalarField& field, const GridSpec& grid) {
    const auto values = sample_grid(field, grid);
    return marching_cubes(values, grid);
}

namespace {

Vec3 unit_or_up(const Vec3& g) {
    const double len = g.norm();
    return len > kGradientEpsilon ? Vec3(g / len) : Vec3(0.0, 0.0, 1.0);
}

template <class Normals>
std::vector<TriangleMesh> extract_from_values(std::span<const double> values, std::span<const double> isos,
                                              const GridSpec& grid, Normals&& normals) {
    std::vector<TriangleMesh> meshes;
    for (double iso : isos) {
        GridSpec g = grid;
        g.iso = iso;
        TriangleMesh mesh = marching_cubes(values, g);
        mesh.normals = normals(mesh.vertices);
        meshes.push_back(std::move(mesh));
    }
    return meshes;
}

} // namespace

std::vector<TriangleMesh> extract_levels(const SdfNetwork& net, std::span<const double> isos, const GridSpec& grid) {
    if (isos.empty()) return {};
    const auto values = sample_grid(net, grid);
    return extract_from_values(values, isos, grid, [&](const std::vector<Vec3>& vertices) {
        std::vector<Vec3> normals;
        normals.reserve(vertices.size());
        for (const auto& s : eval_field(net, vertices)) normals.push_back(unit_or_up(s.gradient));
        return normals;
    });
}

std::vector<TriangleMesh> extract_levels(const ScalarField& field, std::span<const double> isos, const GridSpec& grid) {
    if (isos.empty()) return {};
    const auto values = sample_grid(field, grid);
    return extract_from_values(values, isos, grid, [&](const std::vector<Vec3>& vertices) {
        std::vector<Vec3> normals;
        normals.reserve(vertices.size());
        for (const auto& v : vertices) normals.push_back(unit_or_up(field.sample(v).gradient));
        return normals;
    });
}

TriangleMesh denormalize(TriangleMesh mesh, const Normalization& norm) {
    for (auto& v : mesh.vertices) v = norm.invert(v);
    return mesh;
}

MeshFormat parse_mesh_format(std::string_view name) {
    if (name == "obj") return MeshFormat::Obj;
    if (name == "ply" || name == "ply-ascii") return MeshFormat::PlyAscii;
    throw ConfigError("format: unknown mesh format '" + std::string(name) + "' (expected obj or ply)");
}

MeshFormat mesh_format_for(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".obj") return MeshFormat::Obj;
    if (ext == ".ply") return MeshFormat::PlyAscii;
    throw ConfigError("format: cannot infer mesh format from '" + path.string() + "'");
}

void export_mesh(const TriangleMesh& mesh, const std::filesystem::path& path, MeshFormat format) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write mesh " + path.string());
    out << std::setprecision(12);
    const bool normals = !mesh.normals.empty();
    if (format == MeshFormat::Obj) {
        for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
        if (normals)
            for (const auto& n : mesh.normals) out << "vn " << n.x() << ' ' << n.y() << ' ' << n.z() << '\n';
        for (const auto& f : mesh.faces) {
            out << 'f';
            for (auto v : f) {
                out << ' ' << v + 1;
                if (normals) out << "//" << v + 1;
            }
            out << '\n';
        }
    } else {
        out << "ply\nformat ascii 1.0\n"
            << "element vertex " << mesh.vertices.size() << '\n'
            << "property double x\nproperty double y\nproperty double z\n";
        if (normals) out << "property double nx\nproperty double ny\nproperty double nz\n";
        out << "element face " << mesh.faces.size() << '\n'
            << "property list uchar int vertex_indices\nend_header\n";
        for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
            const auto& v = mesh.vertices[i];
            out << v.x() << ' ' << v.y() << ' ' << v.z();
            if (normals) out << ' ' << mesh.normals[i].x() << ' ' << mesh.normals[i].y() << ' ' << mesh.normals[i].z();
            out << '\n';
        }
        for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
    if (!out) throw IoError("short write to " + path.string());
}

namespace {

double to_real(std::string_view tok, std::size_t lineno) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("expected a number, got '" + std::string(tok) + "'", lineno);
    return v;
}

long to_int(std::string_view tok, std::size_t lineno) {
    long v = 0;
    const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size())
        throw ParseError("expected an integer, got '" + std::string(tok) + "'", lineno);
    return v;
}

std::vector<std::string_view> tokens(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const auto s = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > s) out.push_back(line.substr(s, i - s));
    }
    return out;
}

void add_polygon(TriangleMesh& mesh, const std::vector<std::uint32_t>& poly, std::size_t lineno) {
    if (poly.size() < 3) throw ParseError("face with fewer than 3 vertices", lineno);
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) mesh.faces.push_back({poly[0], poly[i], poly[i + 1]});
}

TriangleMesh load_obj(std::istream& in) {
    TriangleMesh mesh;
    std::vector<Vec3> normals;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = tokens(line);
        if (tok.empty() || tok[0].front() == '#') continue;
        if (tok[0] == "v") {
            if (tok.size() < 4) throw ParseError("vertex needs 3 coordinates", lineno);
            mesh.vertices.emplace_back(to_real(tok[1], lineno), to_real(tok[2], lineno), to_real(tok[3], lineno));
        } else if (tok[0] == "vn") {
            if (tok.size() < 4) throw ParseError("normal needs 3 components", lineno);
            normals.emplace_back(to_real(tok[1], lineno), to_real(tok[2], lineno), to_real(tok[3], lineno));
        } else if (tok[0] == "f") {
            std::vector<std::uint32_t> poly;
            for (std::size_t i = 1; i < tok.size(); ++i) {
                const auto slash = tok[i].find('/');
                long v = to_int(tok[i].substr(0, slash), lineno);
                if (v < 0) v += static_cast<long>(mesh.vertices.size()) + 1;
                if (v < 1 || static_cast<std::size_t>(v) > mesh.vertices.size())
                    throw ParseError("face index out of range", lineno);
                poly.push_back(static_cast<std::uint32_t>(v - 1));
            }
            add_polygon(mesh, poly, lineno);
        }
    }
    if (normals.size() == mesh.vertices.size()) mesh.normals = std::move(normals);
    return mesh;
}

TriangleMesh load_ply(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&] {
        if (!std::getline(in, line)) throw ParseError("unexpected end of file", lineno);
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
    };
    next();
    if (line != "ply") throw ParseError("missing 'ply' magic", lineno);
    std::size_t n_vert = 0, n_face = 0;
    std::vector<std::string> vprops;
    std::string current;
    for (;;) {
        next();
        const auto tok = tokens(line);
        if (tok.empty() || tok[0] == "comment") continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "format" && (tok.size() < 2 || tok[1] != "ascii"))
            throw ParseError("only ascii PLY is supported", lineno);
        if (tok[0] == "element" && tok.size() == 3) {
            current = std::string(tok[1]);
            const auto count = static_cast<std::size_t>(to_int(tok[2], lineno));
            if (current == "vertex") n_vert = count;
            else if (current == "face") n_face = count;
            else if (count > 0) throw ParseError("unsupported element '" + current + "'", lineno);
        } else if (tok[0] == "property" && current == "vertex") {
            vprops.emplace_back(tok.back());
        }
    }
    auto find = [&](const char* name) {
        const auto it = std::find(vprops.begin(), vprops.end(), name);
        return it == vprops.end() ? -1 : static_cast<int>(it - vprops.begin());
    };
    const int ix = find("x"), iy = find("y"), iz = find("z");
    const int inx = find("nx"), iny = find("ny"), inz = find("nz");
    if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z", lineno);
    TriangleMesh mesh;
    for (std::size_t i = 0; i < n_vert; ++i) {
        next();
        const auto tok = tokens(line);
        if (tok.size() != vprops.size()) throw ParseError("wrong number of vertex values", lineno);
        auto at = [&](int k) { return to_real(tok[static_cast<std::size_t>(k)], lineno); };
        mesh.vertices.emplace_back(at(ix), at(iy), at(iz));
        if (inx >= 0 && iny >= 0 && inz >= 0) mesh.normals.emplace_back(at(inx), at(iny), at(inz));
    }
    for (std::size_t i = 0; i < n_face; ++i) {
        next();
        const auto tok = tokens(line);
        if (tok.empty()) throw ParseError("empty face line", lineno);
        const auto count = static_cast<std::size_t>(to_int(tok[0], lineno));
        if (tok.size() != count + 1) throw ParseError("face vertex count mismatch", lineno);
        std::vector<std::uint32_t> poly;
        for (std::size_t k = 1; k <= count; ++k) {
            const long v = to_int(tok[k], lineno);
            if (v < 0 || static_cast<std::size_t>(v) >= mesh.vertices.size())
                throw ParseError("face index out of range", lineno);
            poly.push_back(static_cast<std::uint32_t>(v));
        }
        add_polygon(mesh, poly, lineno);
    }
    return mesh;
}

} // namespace

TriangleMesh load_mesh(const std::filesystem::path& path) {
    const MeshFormat format = mesh_format_for(path);
    std::ifstream in(path);
    if (!in) throw IoError("cannot open mesh " + path.string());
    return format == MeshFormat::Obj ? load_obj(in) : load_ply(in);
}

double triangle_area(const TriangleMesh& mesh, std::size_t face) {
    const auto& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    return 0.5 * (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a).norm();
}

Vec3 face_normal(const TriangleMesh& mesh, std::size_t face) {
    const auto& f = mesh.faces[face];
    const Vec3& a = mesh.vertices[f[0]];
    const Vec3 n = (mesh.vertices[f[1]] - a).cross(mesh.vertices[f[2]] - a);
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3(0.0, 0.0, 1.0);
}

} // namespace lsa
