#include "doctest.h"
#include "pointcloud.hpp"
#include "support.hpp"

#include <fstream>

using namespace lsa;

namespace {

void write_text(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

std::size_t parse_error_line(const std::filesystem::path& p) {
    try {
        load_point_cloud(p);
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

bool same_neighbors(const std::vector<Neighbor>& a, const std::vector<Neighbor>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i].index != b[i].index || a[i].distance != b[i].distance) return false;
    return true;
}

} // namespace

TEST_CASE("xyz files load in order") {
    test::TempDir dir("xyz");
    write_text(dir / "a.xyz", "0 0 0\n1 0 0\n\n0 1 0\n");
    const PointCloud pc = load_point_cloud(dir / "a.xyz");
    REQUIRE(pc.size() == 3);
    CHECK_FALSE(pc.has_normals());
    CHECK(pc.positions()[1] == Vec3(1, 0, 0));
    CHECK(pc.positions()[2] == Vec3(0, 1, 0));

    write_text(dir / "n.xyz", "0 0 0 0 0 2\n1 0 0 0 3 0\n");
    const PointCloud withn = load_point_cloud(dir / "n.xyz");
    REQUIRE(withn.has_normals());
    CHECK(withn.normals()[0] == Vec3(0, 0, 1));
    CHECK(withn.normals()[1] == Vec3(0, 1, 0));
}

TEST_CASE("xyz parse errors carry the line number") {
    test::TempDir dir("xyzbad");
    write_text(dir / "a.xyz", "0 0\n");
    CHECK(parse_error_line(dir / "a.xyz") == 1);
    write_text(dir / "b.xyz", "0 0 0\n1 1 1\n1 x 1\n");
    CHECK(parse_error_line(dir / "b.xyz") == 3);
    write_text(dir / "c.xyz", "0 0 0\n1 1 1 0 0 1\n");
    CHECK(parse_error_line(dir / "c.xyz") == 2);
    write_text(dir / "empty.xyz", "\n\n");
    CHECK_THROWS_AS(load_point_cloud(dir / "empty.xyz"), EmptyError);
    CHECK_THROWS_AS(load_point_cloud(dir / "nope.xyz"), IoError);
}

TEST_CASE("ascii ply with normals") {
    test::TempDir dir("ply");
    write_text(dir / "a.ply",
               "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float x\nproperty float y\n"
               "property float z\nproperty float nx\nproperty float ny\nproperty float nz\n"
               "element face 0\nproperty list uchar int vertex_indices\nend_header\n"
               "0 0 0 0 0 1\n1 2 3 1 0 0\n");
    const PointCloud pc = load_point_cloud(dir / "a.ply");
    REQUIRE(pc.size() == 2);
    REQUIRE(pc.has_normals());
    CHECK(pc.positions()[1] == Vec3(1, 2, 3));
    CHECK(pc.normals()[0] == Vec3(0, 0, 1));

    write_text(dir / "bin.ply", "ply\nformat binary_little_endian 1.0\nend_header\n");
    CHECK_THROWS_AS(load_point_cloud(dir / "bin.ply"), ParseError);
    write_text(dir / "short.ply",
               "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\nproperty float z\n"
               "end_header\n0 0 0\n");
    CHECK_THROWS_AS(load_point_cloud(dir / "short.ply"), ParseError);
}

TEST_CASE("format selection") {
    CHECK(cloud_format_for("a.xyz") == CloudFormat::Xyz);
    CHECK(cloud_format_for("a.PLY") == CloudFormat::PlyAscii);
    CHECK(parse_cloud_format("ply-ascii") == CloudFormat::PlyAscii);
    CHECK_THROWS_AS(parse_cloud_format("las"), ConfigError);
}

TEST_CASE("xyz save round-trips exactly") {
    test::TempDir dir("xyzsave");
    std::mt19937_64 rng(3);
    const auto pts = test::random_points(rng, 50, -10, 10);
    std::vector<Vec3> normals;
    for (const auto& p : test::random_points(rng, 50)) normals.push_back(p.normalized());
    const PointCloud pc(pts, normals);
    save_point_cloud_xyz(dir / "out.xyz", pc);
    const PointCloud back = load_point_cloud(dir / "out.xyz");
    REQUIRE(back.size() == pc.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        CHECK(back.positions()[i] == pts[i]);
        CHECK((back.normals()[i] - normals[i]).norm() < 1e-15);
    }
}

TEST_CASE("normalize maps the bounding box onto the unit domain") {
    const PointCloud pc({Vec3(0, 0, 0), Vec3(10, 0, 0)});
    const auto r = normalize(pc);
    CHECK((r.cloud.positions()[0] - Vec3(-0.95, 0, 0)).norm() < 1e-15);
    CHECK((r.cloud.positions()[1] - Vec3(0.95, 0, 0)).norm() < 1e-15);
    CHECK(r.transform.scale == doctest::Approx(0.19).epsilon(1e-15));

    CHECK_THROWS_AS(normalize(PointCloud({Vec3(1, 2, 3), Vec3(1, 2, 3)})), ConfigError);
    CHECK_THROWS_AS(normalize(PointCloud()), EmptyError);
}

TEST_CASE("normalize is idempotent and invertible on random clouds") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> scale(0.01, 100.0), shift(-50.0, 50.0);
    for (int trial = 0; trial < 30; ++trial) {
        const double s = scale(rng);
        const Vec3 c(shift(rng), shift(rng), shift(rng));
        std::vector<Vec3> pts;
        for (const auto& p : test::random_points(rng, 40)) pts.push_back(p * s + c);
        const PointCloud pc(pts);
        const auto once = normalize(pc);
        for (const auto& p : once.cloud.positions()) CHECK(p.cwiseAbs().maxCoeff() <= 0.95 + 1e-12);
        const auto twice = normalize(once.cloud);
        CHECK(std::abs(twice.transform.scale - 1.0) < 1e-12);
        CHECK(twice.transform.center.norm() < 1e-12);
        for (std::size_t i = 0; i < pts.size(); ++i)
            CHECK((twice.cloud.positions()[i] - once.cloud.positions()[i]).norm() < 1e-12);

        const PointCloud back = denormalize(twice.cloud);
        for (std::size_t i = 0; i < pts.size(); ++i)
            CHECK((back.positions()[i] - pts[i]).norm() <= 1e-9 * std::max(1.0, pts[i].norm()));
    }
}

TEST_CASE("knn closed forms") {
    const PointCloud pc({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(2, 0, 0)});
    const auto one = knn(pc, Vec3(1.2, 0, 0), 1);
    REQUIRE(one.size() == 1);
    CHECK(one[0].index == 1);
    CHECK(one[0].distance == doctest::Approx(0.2));
    CHECK(knn(pc, Vec3::Zero(), 0).empty());
    CHECK_THROWS_AS(knn(pc, Vec3::Zero(), 4), ConfigError);

    // equidistant ties resolve to the lower index
    const auto tie = knn(pc, Vec3(0.5, 0, 0), 2);
    CHECK(tie[0].index == 0);
    CHECK(tie[1].index == 1);
}

TEST_CASE("knn equals an exhaustive scan") {
    std::mt19937_64 rng(23);
    for (std::size_t n : {1, 2, 7, 100, 1000, 10000}) {
        const auto pts = test::random_points(rng, n);
        const PointCloud pc(pts);
        std::uniform_int_distribution<std::size_t> kd(0, std::min<std::size_t>(n, 20));
        for (int t = 0; t < 40; ++t) {
            const Vec3 q = test::random_point(rng, -1.3, 1.3);
            const std::size_t k = kd(rng);
            CHECK(same_neighbors(knn(pc, q, k), test::brute_knn(pts, q, k)));
        }
    }
}

TEST_CASE("knn on a lattice with many exact ties") {
    std::vector<Vec3> pts;
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 6; ++j)
            for (int k = 0; k < 6; ++k) pts.emplace_back(i, j, k);
    const PointCloud pc(pts);
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const Vec3 q(std::round(test::random_point(rng, 0, 5).x() * 2) / 2, 2.5, 1.0);
        CHECK(same_neighbors(knn(pc, q, 9), test::brute_knn(pts, q, 9)));
    }
}

TEST_CASE("query sampling") {
    std::mt19937_64 rng(31);
    const PointCloud pc(test::random_points(rng, 400));
    const QueryBatch a = sample_queries(pc, 1000, 5);
    const QueryBatch b = sample_queries(pc, 1000, 5);
    REQUIRE(a.size() == 1000);
    CHECK(a.anchors.size() == 1000);
    CHECK(a.sigmas.size() == 1000);
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a.queries[i] == b.queries[i]);
        CHECK(a.anchors[i] == b.anchors[i]);
        CHECK(a.anchors[i] < pc.size());
        CHECK(a.sigmas[i] > 0.0);
        CHECK(a.queries[i].allFinite());
        CHECK(a.anchors[i] == test::brute_knn(pc.positions(), a.queries[i], 1)[0].index);
    }
    const QueryBatch c = sample_queries(pc, 1000, 6);
    CHECK(c.queries[0] != a.queries[0]);
    CHECK_THROWS_AS(sample_queries(pc, 0, 1), ConfigError);
}

TEST_CASE("noise scale is the 50th-neighbour distance") {
    std::vector<Vec3> pts;
    const double h = 0.1;
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k < 8; ++k) pts.emplace_back(i * h, j * h, k * h);
    const PointCloud pc(pts);
    const QuerySampler sampler(pc);
    REQUIRE(sampler.sigmas().size() == pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        // the point itself is the 0th neighbour
        CHECK(sampler.sigmas()[i] == test::brute_knn(pts, pts[i], 51)[50].distance);
    }

    const PointCloud tiny({Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 3, 0)});
    const QuerySampler clamped(tiny);
    CHECK(clamped.sigmas()[0] == 3.0);
}
