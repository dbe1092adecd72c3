#include "doctest.h"
#include "lsalign/lsalign.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace {

namespace fs = std::filesystem;

struct Scratch {
    fs::path path;
    Scratch() {
        path = fs::temp_directory_path() / ("lsalign-capi-" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~Scratch() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

const char* kTinyFit = "shape = sphere:r=0.8\n"
                       "points = 400\n"
                       "iterations = 25\n"
                       "batch = 64\n"
                       "lr = 0.001\n"
                       "depth = 4\n"
                       "width = 16\n"
                       "skip_layer = 2\n"
                       "probe = 100\n"
                       "sigma_neighbor = 20\n"
                       "log_every = 5\n"
                       "checkpoint_every = 0\n"
                       "resolution = 24\n"
                       "eval_samples = 2000\n";

std::string error_text() { return lsa_last_error(); }

} // namespace

TEST_CASE("status names and version") {
    CHECK(std::string(lsa_version()).size() > 0);
    CHECK(std::string(lsa_status_name(LSA_OK)) == "ok");
    for (int s = LSA_OK; s <= LSA_ERR_INTERNAL; ++s)
        CHECK(std::string(lsa_status_name(static_cast<lsa_status>(s))).size() > 0);
}

TEST_CASE("null arguments are rejected") {
    lsa_cloud* cloud = nullptr;
    CHECK(lsa_cloud_load(nullptr, &cloud) == LSA_ERR_INVALID_ARGUMENT);
    CHECK(lsa_cloud_load("x.xyz", nullptr) == LSA_ERR_INVALID_ARGUMENT);
    size_t n = 0;
    CHECK(lsa_cloud_size(nullptr, &n) == LSA_ERR_INVALID_ARGUMENT);
    CHECK(lsa_network_predict(nullptr, nullptr, 0, nullptr, nullptr) == LSA_ERR_INVALID_ARGUMENT);
    CHECK(error_text().size() > 0);
    lsa_cloud_free(nullptr);
    lsa_network_free(nullptr);
    lsa_mesh_free(nullptr);
    lsa_string_free(nullptr);
}

TEST_CASE("configuration validation and echo") {
    char* echo = nullptr;
    REQUIRE(lsa_config_validate(kTinyFit, &echo) == LSA_OK);
    REQUIRE(echo != nullptr);
    const std::string text = echo;
    lsa_string_free(echo);
    CHECK(text.find("iterations = 25") != std::string::npos);
    CHECK(text.find("alpha = 0.01") != std::string::npos);
    // the echo validates to itself
    char* again = nullptr;
    REQUIRE(lsa_config_validate(text.c_str(), &again) == LSA_OK);
    CHECK(std::string(again) == text);
    lsa_string_free(again);

    CHECK(lsa_config_validate("shape = sphere\nalpha = -1\n", nullptr) == LSA_ERR_CONFIG);
    CHECK(error_text().find("alpha") != std::string::npos);
    CHECK(lsa_config_validate("shape = sphere\nresolution = 4\n", nullptr) == LSA_ERR_CONFIG);
    CHECK(lsa_config_validate("shape = sphere\nwat = 1\n", nullptr) == LSA_ERR_CONFIG);
    CHECK(lsa_config_validate("shape = sphere\njunk line\n", nullptr) == LSA_ERR_PARSE);
    CHECK(lsa_config_validate("alpha = 0\n", nullptr) == LSA_ERR_CONFIG);
}

TEST_CASE("clouds") {
    Scratch dir;
    lsa_cloud* cloud = nullptr;
    REQUIRE(lsa_cloud_from_shape("torus:R=0.6,r=0.2", 300, 4, &cloud) == LSA_OK);
    size_t n = 0;
    REQUIRE(lsa_cloud_size(cloud, &n) == LSA_OK);
    CHECK(n == 300);
    REQUIRE(lsa_cloud_save(cloud, (dir / "t.xyz").c_str()) == LSA_OK);
    lsa_cloud* loaded = nullptr;
    REQUIRE(lsa_cloud_load((dir / "t.xyz").c_str(), &loaded) == LSA_OK);
    REQUIRE(lsa_cloud_size(loaded, &n) == LSA_OK);
    CHECK(n == 300);
    lsa_cloud_free(loaded);
    lsa_cloud_free(cloud);

    CHECK(lsa_cloud_from_shape("cone", 10, 1, &cloud) == LSA_ERR_CONFIG);
    CHECK(lsa_cloud_load((dir / "missing.xyz").c_str(), &cloud) == LSA_ERR_IO);
    {
        std::ofstream bad(dir / "bad.xyz");
        bad << "0 0 0\n1 2\n";
    }
    CHECK(lsa_cloud_load((dir / "bad.xyz").c_str(), &cloud) == LSA_ERR_PARSE);
    CHECK(error_text().find("line 2") != std::string::npos);
}

TEST_CASE("fit, extract, evaluate, slice") {
    Scratch dir;
    const std::string settings = std::string(kTinyFit) + "out = " + dir.path.string() + "\n";

    std::vector<size_t> logged;
    auto log = [](size_t step, double, double, double, double, void* user) {
        static_cast<std::vector<size_t>*>(user)->push_back(step);
    };
    lsa_fit_summary summary{};
    lsa_network* net = nullptr;
    REQUIRE(lsa_fit(settings.c_str(), log, &logged, &summary, &net) == LSA_OK);
    REQUIRE(net != nullptr);
    CHECK(summary.steps == 25);
    CHECK(summary.alpha == 0.01);
    CHECK(std::isfinite(summary.baseline));
    CHECK(summary.probe_consistency >= 0.0);
    CHECK(logged == std::vector<size_t>{0, 5, 10, 15, 20, 25});
    for (const char* f : {"config.txt", "model.ckpt", "trainer.state", "history.csv"})
        CHECK(fs::exists(dir.path / f));

    size_t params = 0;
    REQUIRE(lsa_network_parameter_count(net, &params) == LSA_OK);
    CHECK(params == 3 * 16 + 16 + 16 * 16 + 16 + (16 + 3) * 16 + 16 + 16 * 16 + 16 + 16 + 1);

    const double xyz[6] = {0, 0, 0, 0.9, 0.9, 0.9};
    double values[2], grads[6];
    REQUIRE(lsa_network_predict(net, xyz, 2, values, grads) == LSA_OK);
    CHECK(values[0] < 0.0);
    CHECK(values[1] > 0.0);
    double only[2];
    REQUIRE(lsa_network_predict(net, xyz, 2, only, nullptr) == LSA_OK);
    CHECK(only[0] == doctest::Approx(values[0]).epsilon(1e-13));

    // checkpoint round-trip
    lsa_network* reloaded = nullptr;
    REQUIRE(lsa_network_load((dir / "model.ckpt").c_str(), &reloaded) == LSA_OK);
    double again[2];
    REQUIRE(lsa_network_predict(reloaded, xyz, 2, again, nullptr) == LSA_OK);
    CHECK(again[0] == only[0]);
    CHECK(again[1] == only[1]);
    double center[3], scale = 0.0;
    REQUIRE(lsa_network_normalization(reloaded, center, &scale) == LSA_OK);
    CHECK(scale > 0.0);
    lsa_network_free(reloaded);
    {
        std::ofstream junk(dir / "junk.ckpt");
        junk << "not a checkpoint";
    }
    CHECK(lsa_network_load((dir / "junk.ckpt").c_str(), &reloaded) == LSA_ERR_PARSE);

    lsa_grid grid = lsa_grid_default();
    grid.resolution = 32;
    lsa_mesh* mesh = nullptr;
    REQUIRE(lsa_extract(net, &grid, &mesh) == LSA_OK);
    size_t nv = 0, nf = 0;
    REQUIRE(lsa_mesh_counts(mesh, &nv, &nf) == LSA_OK);
    CHECK(nv > 0);
    CHECK(nf > 0);
    REQUIRE(lsa_mesh_save(mesh, (dir / "mesh.ply").c_str(), nullptr) == LSA_OK);
    lsa_mesh* loaded = nullptr;
    REQUIRE(lsa_mesh_load((dir / "mesh.ply").c_str(), &loaded) == LSA_OK);
    size_t lv = 0, lf = 0;
    REQUIRE(lsa_mesh_counts(loaded, &lv, &lf) == LSA_OK);
    CHECK(lv == nv);
    CHECK(lf == nf);

    lsa_eval_report report{};
    REQUIRE(lsa_evaluate_shape(mesh, "sphere:r=0.8", 3000, 2, &report) == LSA_OK);
    CHECK(std::isfinite(report.cd));
    CHECK(report.nc >= 0.0);
    CHECK(report.nc <= 1.0);
    CHECK(report.seed == 2);
    lsa_eval_report self{};
    REQUIRE(lsa_evaluate_mesh(mesh, loaded, 3000, 2, &self) == LSA_OK);
    CHECK(self.cd < 1e-6);
    lsa_cloud* cloud = nullptr;
    REQUIRE(lsa_cloud_from_shape("sphere:r=0.8", 2000, 3, &cloud) == LSA_OK);
    lsa_eval_report vs_cloud{};
    REQUIRE(lsa_evaluate_cloud(mesh, cloud, 3000, 2, &vs_cloud) == LSA_OK);
    CHECK(std::isfinite(vs_cloud.cd));
    REQUIRE(lsa_eval_report_write(&report, (dir / "eval.txt").c_str(), (dir / "eval.csv").c_str()) == LSA_OK);
    CHECK(fs::exists(dir.path / "eval.csv"));
    lsa_cloud_free(cloud);

    grid.iso = 50.0;
    lsa_mesh* empty = nullptr;
    REQUIRE(lsa_extract(net, &grid, &empty) == LSA_OK);
    REQUIRE(lsa_mesh_counts(empty, &nv, &nf) == LSA_OK);
    CHECK(nf == 0);
    CHECK(lsa_evaluate_shape(empty, "sphere", 100, 1, &report) == LSA_ERR_EMPTY);
    grid.resolution = 4;
    CHECK(lsa_extract(net, &grid, &empty) == LSA_ERR_CONFIG);
    lsa_mesh_free(empty);

    REQUIRE(lsa_slice(net, 'z', 0.0, 33, (dir / "s.csv").c_str(), (dir / "s.pgm").c_str()) == LSA_OK);
    CHECK(fs::file_size(dir.path / "s.pgm") == std::string("P5\n33 33\n255\n").size() + 33 * 33);
    CHECK(lsa_slice(net, 'q', 0.0, 33, nullptr, nullptr) == LSA_ERR_CONFIG);

    lsa_mesh_free(loaded);
    lsa_mesh_free(mesh);
    lsa_network_free(net);
}

TEST_CASE("fits are reproducible through the interface") {
    lsa_fit_summary a{}, b{};
    REQUIRE(lsa_fit(kTinyFit, nullptr, nullptr, &a, nullptr) == LSA_OK);
    REQUIRE(lsa_fit(kTinyFit, nullptr, nullptr, &b, nullptr) == LSA_OK);
    CHECK(a.baseline == b.baseline);
    CHECK(a.alignment == b.alignment);
    CHECK(a.probe_consistency == b.probe_consistency);
    CHECK(lsa_fit("shape = sphere\niterations = 0\n", nullptr, nullptr, nullptr, nullptr) == LSA_ERR_CONFIG);
}

TEST_CASE("ablation rows") {
    Scratch dir;
    const std::string settings = std::string(kTinyFit) + "out = " + dir.path.string() + "\n";
    std::vector<std::string> variants;
    auto row = [](const lsa_ablation_row* r, void* user) {
        static_cast<std::vector<std::string>*>(user)->push_back(r->variant);
    };
    size_t rows = 0;
    REQUIRE(lsa_ablate(settings.c_str(), "alpha = 0, 0.01\ntarget = fixed\n", row, &variants, &rows) == LSA_OK);
    CHECK(rows == 3);
    REQUIRE(variants.size() == 3);
    CHECK(variants[2].find("target=fixed") != std::string::npos);
    CHECK(fs::exists(dir.path / "ablation.csv"));
    CHECK(lsa_ablate(settings.c_str(), "alpha = -1\n", nullptr, nullptr, nullptr) == LSA_ERR_CONFIG);
}
