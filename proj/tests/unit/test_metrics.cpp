#include "doctest.h"
#include "metrics.hpp"
#include "support.hpp"

#include <fstream>

using namespace lsa;

namespace {

GridSpec grid_of(int res, double bound = 1.2) {
    GridSpec g;
    g.resolution = res;
    g.lo = Vec3::Constant(-bound);
    g.hi = Vec3::Constant(bound);
    return g;
}

TriangleMesh unit_square(int normal_axis) {
    TriangleMesh m;
    const int u = (normal_axis + 1) % 3, v = (normal_axis + 2) % 3;
    for (auto [a, b] : {std::pair{0.0, 0.0}, std::pair{1.0, 0.0}, std::pair{1.0, 1.0}, std::pair{0.0, 1.0}}) {
        Vec3 p = Vec3::Zero();
        p[u] = a;
        p[v] = b;
        m.vertices.push_back(p);
    }
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

TriangleMesh flipped(TriangleMesh m) {
    for (auto& f : m.faces) std::swap(f[1], f[2]);
    return m;
}

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_CASE("chamfer closed forms") {
    const std::vector<Vec3> a{Vec3(0, 0, 0)}, b{Vec3(1, 0, 0)};
    CHECK(chamfer_l1(a, b) == 1.0);
    CHECK(chamfer_l1(a, a) == 0.0);
    const std::vector<Vec3> c{Vec3(0, 0, 0), Vec3(0, 0, 2)};
    // a->c: 0; c->a: (0 + 2)/2
    CHECK(chamfer_l1(a, c) == 0.5);
    CHECK_THROWS_AS(chamfer_l1({}, a), EmptyError);
    CHECK_THROWS_AS(chamfer_l1(a, {}), EmptyError);
}

TEST_CASE("chamfer equals the exhaustive computation") {
    std::mt19937_64 rng(51);
    std::uniform_int_distribution<std::size_t> size(1, 300);
    for (int trial = 0; trial < 40; ++trial) {
        const auto a = test::random_points(rng, size(rng));
        const auto b = test::random_points(rng, size(rng), -0.5, 1.5);
        const double cd = chamfer_l1(a, b);
        CHECK(cd == test::brute_chamfer(a, b));
        CHECK(cd == chamfer_l1(b, a));
        CHECK(cd > 0.0);
    }
    // zero iff equal as multisets of positions
    auto a = test::random_points(rng, 50);
    auto shuffled = a;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(chamfer_l1(a, shuffled) == 0.0);
}

TEST_CASE("mesh sampling") {
    const auto mesh = marching_cubes(AnalyticShape::sphere(1.0), grid_of(48));
    const auto s = sample_mesh(mesh, 5000, 3);
    REQUIRE(s.points.size() == 5000);
    REQUIRE(s.normals.size() == 5000);
    const auto again = sample_mesh(mesh, 5000, 3);
    CHECK(again.points == s.points);
    const double cell = grid_of(48).spacing().norm();
    for (std::size_t i = 0; i < s.points.size(); ++i) {
        CHECK(std::abs(s.points[i].norm() - 1.0) < cell);
        CHECK(std::abs(s.normals[i].norm() - 1.0) < 1e-12);
    }
    // area-weighted: a 1x1 and a 3x1 rectangle split 1:3
    TriangleMesh two = unit_square(2);
    const TriangleMesh wide = [] {
        TriangleMesh m = unit_square(2);
        for (auto& v : m.vertices) v = Vec3(5.0 + 3.0 * v.x(), v.y(), 0.0);
        return m;
    }();
    for (const auto& f : wide.faces) two.faces.push_back({f[0] + 4, f[1] + 4, f[2] + 4});
    two.vertices.insert(two.vertices.end(), wide.vertices.begin(), wide.vertices.end());
    const auto split = sample_mesh(two, 20000, 1);
    std::size_t right = 0;
    for (const auto& p : split.points) right += p.x() > 2.0;
    CHECK(std::abs(right / 20000.0 - 0.75) < 0.015);

    CHECK_THROWS_AS(sample_mesh(TriangleMesh{}, 10, 1), EmptyError);
}

TEST_CASE("normal consistency") {
    const auto mesh = marching_cubes(AnalyticShape::sphere(0.9), grid_of(32));
    CHECK(normal_consistency(mesh, mesh, 3000, 5) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(normal_consistency(mesh, flipped(mesh), 3000, 5) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(normal_consistency(unit_square(2), unit_square(0), 500, 2) == 0.0);
    const auto tilted = marching_cubes(AnalyticShape::torus(0.6, 0.25), grid_of(32));
    const double nc = normal_consistency(mesh, tilted, 2000, 7);
    CHECK(nc >= 0.0);
    CHECK(nc <= 1.0);
}

TEST_CASE("consistency statistics") {
    std::mt19937_64 rng(61);
    const auto queries = test::random_points(rng, 500);
    const auto linear = consistency_stats(LinearField(Vec3(0.1, 0.2, -1.0), 0.3), queries);
    CHECK(linear.mean < 1e-15);
    CHECK(linear.fraction_above == 0.0);
    CHECK(linear.used == 500);

    std::vector<Vec3> off_center;
    for (const auto& q : queries)
        if (q.norm() > 0.05) off_center.push_back(q);
    const auto sphere = consistency_stats(AnalyticShape::sphere(0.6), off_center);
    CHECK(sphere.mean < 1e-12);
    CHECK(sphere.residual_max < 1e-12);

    const SdfNetwork net = test::random_network(3);
    const auto s = consistency_stats(net, queries);
    CHECK(s.used + s.skipped == queries.size());
    for (double v : {s.mean, s.median, s.fraction_above}) {
        CHECK(std::isfinite(v));
        CHECK(v >= 0.0);
        CHECK(v <= 2.0);
    }
    CHECK(s.residual_median <= s.residual_p90);
    CHECK(s.residual_p90 <= s.residual_max);
    const auto via_field = consistency_stats(NetworkField(net), queries);
    CHECK(via_field.mean == doctest::Approx(s.mean).epsilon(1e-12));

    class Flat final : public ScalarField {
    public:
        FieldSample sample(const Vec3&) const override { return {1.0, Vec3::Zero()}; }
    };
    const auto none = consistency_stats(Flat{}, queries);
    CHECK(none.used == 0);
    CHECK(std::isnan(none.mean));
}

TEST_CASE("field slices") {
    const auto sphere = AnalyticShape::sphere(1.0);
    const FieldSlice s = slice_field(sphere, 2, 0.0, 65);
    REQUIRE(s.values.size() == 65u * 65u);
    REQUIRE(s.gradients.size() == s.values.size());
    CHECK(s.at(32, 32) == -1.0);
    CHECK(s.point(0, 64) == Vec3(-1, 1, 0));
    CHECK(slice_field(sphere, 0, 0.25, 9).point(2, 3) == Vec3(0.25, -0.5, -0.25));
    CHECK(slice_intensity(s.at(32, 32)) == 0);

    const SdfNetwork net = test::random_network(9);
    const FieldSlice ns = slice_field(net, 1, -0.3, 17);
    for (int j = 0; j < 17; j += 4)
        for (int i = 0; i < 17; i += 4) CHECK(ns.at(i, j) == doctest::Approx(predict(net, ns.point(i, j))).epsilon(1e-13));

    CHECK_THROWS_AS(slice_field(sphere, 2, 0.0, 0), ConfigError);
    CHECK_THROWS_AS(slice_field(sphere, 3, 0.0, 8), ConfigError);
    CHECK(parse_axis("y") == 1);
    CHECK(axis_name(2) == 'z');
    CHECK_THROWS_AS(parse_axis("w"), ConfigError);
}

TEST_CASE("slice intensity ramp") {
    CHECK(slice_intensity(-1.0) == 0);
    CHECK(slice_intensity(-0.2) == 0);
    CHECK(slice_intensity(-1e-9) == 127);
    CHECK(slice_intensity(0.0) == 128);
    CHECK(slice_intensity(0.1) == 192);
    CHECK(slice_intensity(0.2) == 255);
    CHECK(slice_intensity(7.0) == 255);
    std::uint8_t prev = 0;
    for (int k = -300; k <= 300; ++k) {
        const auto v = slice_intensity(k * 1e-3);
        CHECK(v >= prev);
        prev = v;
    }
}

TEST_CASE("slice export") {
    test::TempDir dir("slice");
    const FieldSlice s = slice_field(AnalyticShape::sphere(0.5), 2, 0.0, 8);
    export_slice_csv(s, dir / "s.csv");
    export_slice_pgm(s, dir / "s.pgm");

    std::ifstream csv(dir / "s.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "axis,offset,resolution");
    std::getline(csv, line);
    CHECK(line == "z,0,8");
    std::vector<std::vector<double>> rows;
    while (std::getline(csv, line)) {
        std::vector<double> row;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) row.push_back(std::stod(cell));
        rows.push_back(row);
    }
    REQUIRE(rows.size() == 8);
    for (int j = 0; j < 8; ++j) {
        REQUIRE(rows[static_cast<std::size_t>(j)].size() == 8);
        for (int i = 0; i < 8; ++i) CHECK(rows[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] == s.at(i, j));
    }

    const std::string pgm = read_file(dir / "s.pgm");
    const std::string header = "P5\n8 8\n255\n";
    REQUIRE(pgm.size() == header.size() + 64);
    CHECK(pgm.substr(0, header.size()) == header);
    // image row 0 is the top (largest v)
    CHECK(static_cast<std::uint8_t>(pgm[header.size() + 2]) == slice_intensity(s.at(2, 7)));
    CHECK(static_cast<std::uint8_t>(pgm[header.size() + 7 * 8 + 5]) == slice_intensity(s.at(5, 0)));
}

TEST_CASE("evaluation reports") {
    const auto mesh = marching_cubes(AnalyticShape::sphere(1.0), grid_of(48));
    const auto self = evaluate(mesh, mesh, 4000, 3);
    CHECK(self.cd == 0.0);
    CHECK(self.nc == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(self.samples_reconstruction == 4000);
    CHECK(self.seed == 3);

    const auto vs_shape = evaluate(mesh, AnalyticShape::sphere(1.0), 4000, 3);
    CHECK(vs_shape.cd > 0.0);
    CHECK(vs_shape.cd < 0.05);
    CHECK(vs_shape.nc > 0.99);
    CHECK(vs_shape.nc <= 1.0);

    CHECK_THROWS_AS(evaluate(TriangleMesh{}, mesh, 100, 1), EmptyError);

    test::TempDir dir("eval");
    write_eval_report(vs_shape, dir / "eval.txt");
    const std::string text = read_file(dir / "eval.txt");
    CHECK(text.find("cd=") != std::string::npos);
    CHECK(text.find("nc=") != std::string::npos);
    CHECK(eval_csv_header().rfind("cd,nc", 0) == 0);
    CHECK(eval_csv_row(vs_shape).find(',') != std::string::npos);
}
