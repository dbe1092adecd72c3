#include "doctest.h"
#include "shapes.hpp"
#include "support.hpp"
#include "surface.hpp"

#include <fstream>
#include <map>
#include <set>

using namespace lsa;

namespace {

class ConstantField final : public ScalarField {
public:
    explicit ConstantField(double v) : v_(v) {}
    FieldSample sample(const Vec3&) const override { return {v_, Vec3::Zero()}; }

private:
    double v_;
};

GridSpec grid_of(int res, double bound = 1.0, double iso = 0.0) {
    GridSpec g;
    g.resolution = res;
    g.lo = Vec3::Constant(-bound);
    g.hi = Vec3::Constant(bound);
    g.iso = iso;
    return g;
}

double max_radius_error(const TriangleMesh& m, double radius) {
    double worst = 0.0;
    for (const auto& v : m.vertices) worst = std::max(worst, std::abs(v.norm() - radius));
    return worst;
}

double mean_radius(const TriangleMesh& m) {
    double sum = 0.0;
    for (const auto& v : m.vertices) sum += v.norm();
    return sum / static_cast<double>(m.vertices.size());
}

/// Every undirected edge is shared by exactly two faces with opposite orientation.
bool closed_and_oriented(const TriangleMesh& m) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, int> directed;
    for (const auto& f : m.faces)
        for (int e = 0; e < 3; ++e) ++directed[{f[static_cast<std::size_t>(e)], f[static_cast<std::size_t>((e + 1) % 3)]}];
    for (const auto& [edge, count] : directed) {
        if (count != 1) return false;
        const auto twin = directed.find({edge.second, edge.first});
        if (twin == directed.end() || twin->second != 1) return false;
    }
    return true;
}

/// The grid edge a marching-cubes vertex was interpolated on.
std::pair<Vec3, Vec3> host_edge(const GridSpec& g, const Vec3& v) {
    const Vec3 h = g.spacing();
    Vec3 a, b;
    int free_axis = -1;
    for (int k = 0; k < 3; ++k) {
        const double u = (v[k] - g.lo[k]) / h[k];
        const double r = std::round(u);
        if (std::abs(u - r) < 1e-9) {
            a[k] = b[k] = g.lo[k] + r * h[k];
        } else {
            free_axis = k;
            a[k] = g.lo[k] + std::floor(u) * h[k];
            b[k] = a[k] + h[k];
        }
    }
    if (free_axis < 0) b = a;
    return {a, b};
}

} // namespace

TEST_CASE("grid specification") {
    const GridSpec g = grid_of(11);
    CHECK(g.node_count() == 1331);
    CHECK(g.node(0, 0, 0) == Vec3(-1, -1, -1));
    CHECK((g.node(10, 5, 0) - Vec3(1, 0, -1)).norm() < 1e-15);
    CHECK_THROWS_AS(grid_of(7).validate(), ConfigError);
    GridSpec flat = grid_of(16);
    flat.hi.z() = flat.lo.z();
    CHECK_THROWS_AS(flat.validate(), ConfigError);
    GridSpec bad_iso = grid_of(16);
    bad_iso.iso = std::nan("");
    CHECK_THROWS_AS(bad_iso.validate(), ConfigError);
}

TEST_CASE("no sign change yields an empty mesh") {
    CHECK(marching_cubes(ConstantField(1.0), grid_of(16)).empty());
    CHECK(marching_cubes(ConstantField(-1.0), grid_of(16)).empty());
    CHECK(marching_cubes(AnalyticShape::sphere(0.2, Vec3(5, 5, 5)), grid_of(16)).empty());
}

TEST_CASE("planes are reproduced exactly") {
    for (int res : {16, 17, 33}) {
        const auto mesh = marching_cubes(LinearField(Vec3(0, 0, 1), 0.0), grid_of(res));
        REQUIRE_FALSE(mesh.empty());
        mesh.validate();
        double worst = 0.0;
        for (const auto& v : mesh.vertices) worst = std::max(worst, std::abs(v.z()));
        CHECK(worst < 1e-12);
        double area = 0.0;
        for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
            area += triangle_area(mesh, f);
            if (triangle_area(mesh, f) > 0.0) CHECK(face_normal(mesh, f).z() > 1.0 - 1e-12);
        }
        CHECK(area == doctest::Approx(4.0).epsilon(1e-12));
    }
}

TEST_CASE("sphere vertices stay within two cell diagonals") {
    const auto sphere = AnalyticShape::sphere(1.0);
    const GridSpec g = grid_of(64, 1.2);
    const auto mesh = marching_cubes(sphere, g);
    mesh.validate();
    const double diag = g.spacing().norm();
    const double err64 = max_radius_error(mesh, 1.0);
    CHECK(err64 < 2.0 * diag);
    CHECK(closed_and_oriented(mesh));

    // faces point outward, toward increasing f
    double outward = 0.0, total = 0.0;
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        const double a = triangle_area(mesh, f);
        if (a == 0.0) continue;
        const Vec3 c = (mesh.vertices[mesh.faces[f][0]] + mesh.vertices[mesh.faces[f][1]] + mesh.vertices[mesh.faces[f][2]]) / 3.0;
        outward += a * face_normal(mesh, f).dot(c.normalized());
        total += a;
    }
    CHECK(outward / total > 0.99);

    const auto fine = marching_cubes(sphere, grid_of(128, 1.2));
    CHECK(max_radius_error(fine, 1.0) <= err64);
}

TEST_CASE("vertices are welded on grid edges") {
    const auto mesh = marching_cubes(AnalyticShape::torus(0.6, 0.25), grid_of(40));
    std::set<std::array<double, 3>> seen;
    for (const auto& v : mesh.vertices) CHECK(seen.insert({v.x(), v.y(), v.z()}).second);
    CHECK(closed_and_oriented(mesh));
}

TEST_CASE("vertex residual is bounded by the change across its edge") {
    const AnalyticShape shapes[] = {AnalyticShape::sphere(0.7), AnalyticShape::torus(0.6, 0.25),
                                    AnalyticShape::box(Vec3(0.5, 0.4, 0.3))};
    for (const auto& shape : shapes) {
        for (double iso : {-0.1, 0.0, 0.15}) {
            const GridSpec g = grid_of(24, 1.0, iso);
            const auto mesh = marching_cubes(shape, g);
            REQUIRE_FALSE(mesh.empty());
            for (const auto& v : mesh.vertices) {
                const auto [a, b] = host_edge(g, v);
                CHECK(std::abs(shape.value(v) - iso) <= std::abs(shape.value(b) - shape.value(a)) + 1e-12);
            }
        }
    }
}

TEST_CASE("mesh extraction is deterministic") {
    const SdfNetwork net = test::random_network(5, 3, 16, 10.0, 1);
    const GridSpec g = grid_of(24);
    const NetworkField field(net);
    const auto a = marching_cubes(field, g);
    const auto b = marching_cubes(field, g);
    CHECK(a.vertices == b.vertices);
    CHECK(a.faces == b.faces);
}

TEST_CASE("level extraction") {
    const auto sphere = AnalyticShape::sphere(1.0);
    const GridSpec g = grid_of(64, 1.5);
    const double cell = g.spacing().x();
    const std::vector<double> isos{-0.2, 0.0, 0.2};
    const auto levels = extract_levels(sphere, isos, g);
    REQUIRE(levels.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(std::abs(mean_radius(levels[i]) - (1.0 + isos[i])) < 2.0 * cell);
        levels[i].validate();
        for (std::size_t v = 0; v < levels[i].vertices.size(); ++v)
            CHECK(levels[i].normals[v].dot(levels[i].vertices[v].normalized()) > 1.0 - 1e-12);
    }
    CHECK(extract_levels(sphere, std::vector<double>{}, g).empty());

    const SdfNetwork net = init_network([] {
        Architecture a;
        a.depth = 3;
        a.width = 32;
        a.skip_layer = 1;
        return a;
    }(), 3);
    const GridSpec ng = grid_of(32);
    const std::vector<double> zero{0.0};
    const auto from_net = extract_levels(net, zero, ng);
    const auto direct = marching_cubes(sample_grid(net, ng), ng);
    REQUIRE(from_net.size() == 1);
    CHECK(from_net[0].vertices == direct.vertices);
    CHECK(from_net[0].faces == direct.faces);
    CHECK(from_net[0].normals.size() == direct.vertices.size());
    const auto via_field = marching_cubes(NetworkField(net), ng);
    CHECK(via_field.faces == direct.faces);
}

TEST_CASE("grid sampling of networks matches pointwise evaluation") {
    const SdfNetwork net = test::random_network(6);
    const GridSpec g = grid_of(9);
    const auto values = sample_grid(net, g);
    const auto field_values = sample_grid(NetworkField(net), g);
    REQUIRE(values.size() == g.node_count());
    for (std::size_t n = 0; n < values.size(); ++n) CHECK(values[n] == doctest::Approx(field_values[n]).epsilon(1e-13));
    CHECK(values[1] == doctest::Approx(predict(net, g.node(1, 0, 0))).epsilon(1e-13));
}

TEST_CASE("non-finite field values are rejected") {
    std::vector<double> values(grid_of(8).node_count(), 1.0);
    values[17] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(marching_cubes(values, grid_of(8)), NumericError);
    CHECK_THROWS_AS(marching_cubes(std::vector<double>(5, 1.0), grid_of(8)), ConfigError);
}

TEST_CASE("mesh validation") {
    TriangleMesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    m.faces = {{0, 1, 2}};
    CHECK_NOTHROW(m.validate());
    CHECK(triangle_area(m, 0) == 0.5);
    CHECK(face_normal(m, 0) == Vec3(0, 0, 1));
    m.faces = {{0, 1, 3}};
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m.faces = {{0, 1, 1}};
    CHECK_THROWS_AS(m.validate(), ConfigError);
    m.faces = {{0, 1, 2}};
    m.normals = {Vec3(0, 0, 1), Vec3(0, 0, 1), Vec3(0, 0, 2)};
    CHECK_THROWS_AS(m.validate(), ConfigError);
}

TEST_CASE("mesh export and import") {
    test::TempDir dir("mesh");
    TriangleMesh tri;
    tri.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    tri.faces = {{0, 1, 2}};
    export_mesh(tri, dir / "tri.obj", MeshFormat::Obj);
    std::ifstream in(dir / "tri.obj");
    int v_lines = 0, f_lines = 0;
    for (std::string line; std::getline(in, line);) {
        v_lines += line.rfind("v ", 0) == 0;
        f_lines += line.rfind("f ", 0) == 0;
    }
    CHECK(v_lines == 3);
    CHECK(f_lines == 1);

    const auto levels = extract_levels(AnalyticShape::sphere(0.8), std::vector<double>{0.0}, grid_of(32));
    const TriangleMesh& sphere = levels[0];
    for (auto [name, format] : {std::pair{"s.obj", MeshFormat::Obj}, std::pair{"s.ply", MeshFormat::PlyAscii}}) {
        export_mesh(sphere, dir / name, format);
        const TriangleMesh back = load_mesh(dir / name);
        REQUIRE(back.vertices.size() == sphere.vertices.size());
        CHECK(back.faces == sphere.faces);
        double worst = 0.0;
        for (std::size_t i = 0; i < back.vertices.size(); ++i)
            worst = std::max(worst, (back.vertices[i] - sphere.vertices[i]).cwiseAbs().maxCoeff());
        CHECK(worst < 1e-6);
        REQUIRE(back.normals.size() == sphere.normals.size());
        CHECK((back.normals[0] - sphere.normals[0]).norm() < 1e-6);
    }

    CHECK_THROWS_AS(parse_mesh_format("stl"), ConfigError);
    CHECK(parse_mesh_format("ply-ascii") == MeshFormat::PlyAscii);
    CHECK_THROWS_AS(mesh_format_for("a.stl"), ConfigError);
    CHECK_THROWS_AS(load_mesh(dir / "missing.obj"), IoError);
    std::ofstream(dir / "bad.obj") << "v 0 0 0\nv 1 0 0\nf 1 2 7\n";
    CHECK_THROWS_AS(load_mesh(dir / "bad.obj"), ParseError);
    std::ofstream(dir / "quad.obj") << "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\nf -4 -3 -1\n";
    const auto quad = load_mesh(dir / "quad.obj");
    CHECK(quad.faces.size() == 3);
}

TEST_CASE("denormalize maps back to scene coordinates") {
    TriangleMesh m;
    m.vertices = {Vec3(0.95, 0, 0)};
    const Normalization n{Vec3(5, 0, 0), 0.19};
    const auto back = denormalize(m, n);
    CHECK((back.vertices[0] - Vec3(10, 0, 0)).norm() < 1e-12);
}
