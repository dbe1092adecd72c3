#include "lsalign/lsalign.h"

#include "ablation.hpp"
#include "config.hpp"
#include "diffcore.hpp"
#include "metrics.hpp"
#include "network.hpp"
#include "pointcloud.hpp"
#include "shapes.hpp"
#include "surface.hpp"
#include "trainer.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <new>
#include <string>

struct lsa_cloud {
    lsa::PointCloud cloud;
};

struct lsa_network {
    lsa::Checkpoint checkpoint;
};

struct lsa_mesh {
    lsa::TriangleMesh mesh;
};

namespace {

thread_local std::string g_last_error;

lsa_status fail(lsa_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

lsa_status status_of(lsa::ErrorKind kind) {
    switch (kind) {
    case lsa::ErrorKind::Config: return LSA_ERR_CONFIG;
    case lsa::ErrorKind::Parse: return LSA_ERR_PARSE;
    case lsa::ErrorKind::Io: return LSA_ERR_IO;
    case lsa::ErrorKind::Numeric: return LSA_ERR_NUMERIC;
    case lsa::ErrorKind::Graph: return LSA_ERR_GRAPH;
    case lsa::ErrorKind::Empty: return LSA_ERR_EMPTY;
    }
    return LSA_ERR_INTERNAL;
}

template <class F>
lsa_status guarded(F&& body) {
    try {
        body();
        return LSA_OK;
    } catch (const lsa::Error& e) {
        return fail(status_of(e.kind()), e.what());
    } catch (const std::filesystem::filesystem_error& e) {
        return fail(LSA_ERR_IO, e.what());
    } catch (const std::bad_alloc&) {
        return fail(LSA_ERR_INTERNAL, "out of memory");
    } catch (const std::exception& e) {
        return fail(LSA_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(LSA_ERR_INTERNAL, "unknown failure");
    }
}

#define LSA_REQUIRE(ptr)                                                                  \
    do {                                                                                  \
        if (!(ptr)) return fail(LSA_ERR_INVALID_ARGUMENT, #ptr " must not be null");      \
    } while (0)

lsa::RunConfig run_config(const char* settings) {
    lsa::RunConfig config;
    if (settings) lsa::apply_settings(config, lsa::parse_settings(settings));
    return config;
}

lsa::GridSpec grid_spec(const lsa_grid& g) {
    if (!(g.bound > 0.0)) throw lsa::ConfigError("bound: must be > 0");
    lsa::GridSpec spec;
    spec.resolution = g.resolution;
    spec.lo = lsa::Vec3::Constant(-g.bound);
    spec.hi = lsa::Vec3::Constant(g.bound);
    spec.iso = g.iso;
    spec.validate();
    return spec;
}

void copy_report(const lsa::EvalReport& r, lsa_eval_report* out) {
    out->cd = r.cd;
    out->nc = r.nc;
    out->samples_reconstruction = r.samples_reconstruction;
    out->samples_reference = r.samples_reference;
    out->seed = r.seed;
}

lsa::EvalReport from_c(const lsa_eval_report& r) {
    lsa::EvalReport out;
    out.cd = r.cd;
    out.nc = r.nc;
    out.samples_reconstruction = r.samples_reconstruction;
    out.samples_reference = r.samples_reference;
    out.seed = r.seed;
    return out;
}

} // namespace

extern "C" {

const char* lsa_version(void) { return "0.1.0"; }

const char* lsa_status_name(lsa_status status) {
    switch (status) {
    case LSA_OK: return "ok";
    case LSA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case LSA_ERR_CONFIG: return "configuration error";
    case LSA_ERR_PARSE: return "parse error";
    case LSA_ERR_IO: return "i/o error";
    case LSA_ERR_NUMERIC: return "numeric error";
    case LSA_ERR_EMPTY: return "empty input";
    case LSA_ERR_GRAPH: return "graph error";
    case LSA_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* lsa_last_error(void) { return g_last_error.c_str(); }

lsa_status lsa_config_validate(const char* settings, char** echo) {
    LSA_REQUIRE(settings);
    return guarded([&] {
        const auto config = run_config(settings);
        config.validate();
        if (echo) {
            std::string text;
            for (const auto& [k, v] : lsa::to_settings(config)) text += k + " = " + v + "\n";
            *echo = new char[text.size() + 1];
            std::memcpy(*echo, text.c_str(), text.size() + 1);
        }
    });
}

void lsa_string_free(char* s) { delete[] s; }

lsa_status lsa_cloud_load(const char* path, lsa_cloud** out) {
    LSA_REQUIRE(path);
    LSA_REQUIRE(out);
    return guarded([&] { *out = new lsa_cloud{lsa::load_point_cloud(path)}; });
}

lsa_status lsa_cloud_from_shape(const char* shape, size_t n, uint64_t seed, lsa_cloud** out) {
    LSA_REQUIRE(shape);
    LSA_REQUIRE(out);
    if (n == 0) return fail(LSA_ERR_INVALID_ARGUMENT, "n must be >= 1");
    return guarded([&] { *out = new lsa_cloud{lsa::sample_surface(lsa::parse_shape(shape), n, seed)}; });
}

lsa_status lsa_cloud_size(const lsa_cloud* cloud, size_t* out) {
    LSA_REQUIRE(cloud);
    LSA_REQUIRE(out);
    *out = cloud->cloud.size();
    return LSA_OK;
}

lsa_status lsa_cloud_save(const lsa_cloud* cloud, const char* path) {
    LSA_REQUIRE(cloud);
    LSA_REQUIRE(path);
    return guarded([&] { lsa::save_point_cloud_xyz(path, cloud->cloud); });
}

void lsa_cloud_free(lsa_cloud* cloud) { delete cloud; }

lsa_status lsa_fit(const char* settings, lsa_log_fn log, void* user, lsa_fit_summary* summary, lsa_network** net) {
    LSA_REQUIRE(settings);
    return guarded([&] {
        const auto config = run_config(settings);
        config.validate();
        if (!config.out.empty()) {
            std::filesystem::create_directories(config.out);
            lsa::write_settings(lsa::to_settings(config), config.out / "config.txt");
        }
        const lsa::PointCloud cloud = config.load_cloud();
        const lsa::PointCloud normalized = lsa::normalize(cloud).cloud;
        lsa::Trainer trainer(normalized, config.train, config.out);
        if (log)
            trainer.on_log = [&](const lsa::HistoryRecord& r) {
                log(r.step, r.baseline, r.alignment, r.mean_beta, r.mean_consistency, user);
            };
        auto result = trainer.finish();
        if (summary) {
            const auto& last = result.history.records.back();
            summary->steps = trainer.step();
            summary->baseline = last.baseline;
            summary->alignment = last.alignment;
            summary->mean_beta = last.mean_beta;
            summary->probe_consistency = result.final_probe.mean;
            summary->alpha = result.alpha;
        }
        if (net) *net = new lsa_network{{std::move(result.network), result.normalization}};
    });
}

lsa_status lsa_network_load(const char* path, lsa_network** out) {
    LSA_REQUIRE(path);
    LSA_REQUIRE(out);
    return guarded([&] { *out = new lsa_network{lsa::load_checkpoint(path)}; });
}

lsa_status lsa_network_save(const lsa_network* net, const char* path) {
    LSA_REQUIRE(net);
    LSA_REQUIRE(path);
    return guarded([&] { lsa::save_checkpoint(path, net->checkpoint.network, net->checkpoint.normalization); });
}

lsa_status lsa_network_predict(const lsa_network* net, const double* xyz, size_t n, double* values,
                               double* gradients) {
    LSA_REQUIRE(net);
    if (n == 0) return LSA_OK;
    LSA_REQUIRE(xyz);
    LSA_REQUIRE(values);
    return guarded([&] {
        std::vector<lsa::Vec3> pts(n);
        for (size_t i = 0; i < n; ++i) pts[i] = {xyz[3 * i], xyz[3 * i + 1], xyz[3 * i + 2]};
        if (gradients) {
            const auto samples = lsa::eval_field(net->checkpoint.network, pts);
            for (size_t i = 0; i < n; ++i) {
                values[i] = samples[i].value;
                for (int k = 0; k < 3; ++k) gradients[3 * i + k] = samples[i].gradient[k];
            }
        } else {
            const auto v = lsa::eval_values(net->checkpoint.network, pts);
            std::copy(v.begin(), v.end(), values);
        }
    });
}

lsa_status lsa_network_normalization(const lsa_network* net, double center[3], double* scale) {
    LSA_REQUIRE(net);
    LSA_REQUIRE(center);
    LSA_REQUIRE(scale);
    const auto& norm = net->checkpoint.normalization;
    for (int k = 0; k < 3; ++k) center[k] = norm.center[k];
    *scale = norm.scale;
    return LSA_OK;
}

lsa_status lsa_network_parameter_count(const lsa_network* net, size_t* out) {
    LSA_REQUIRE(net);
    LSA_REQUIRE(out);
    *out = net->checkpoint.network.parameter_count();
    return LSA_OK;
}

void lsa_network_free(lsa_network* net) { delete net; }

lsa_grid lsa_grid_default(void) {
    const lsa::GridSpec spec;
    return {spec.resolution, spec.hi.x(), spec.iso};
}

lsa_status lsa_extract(const lsa_network* net, const lsa_grid* grid, lsa_mesh** out) {
    LSA_REQUIRE(net);
    LSA_REQUIRE(grid);
    LSA_REQUIRE(out);
    return guarded([&] {
        const auto spec = grid_spec(*grid);
        const double iso[1] = {spec.iso};
        auto meshes = lsa::extract_levels(net->checkpoint.network, iso, spec);
        *out = new lsa_mesh{lsa::denormalize(std::move(meshes.front()), net->checkpoint.normalization)};
    });
}

lsa_status lsa_mesh_load(const char* path, lsa_mesh** out) {
    LSA_REQUIRE(path);
    LSA_REQUIRE(out);
    return guarded([&] {
        auto mesh = lsa::load_mesh(path);
        mesh.validate();
        *out = new lsa_mesh{std::move(mesh)};
    });
}

lsa_status lsa_mesh_save(const lsa_mesh* mesh, const char* path, const char* format) {
    LSA_REQUIRE(mesh);
    LSA_REQUIRE(path);
    return guarded([&] {
        const auto f = format ? lsa::parse_mesh_format(format) : lsa::mesh_format_for(path);
        lsa::export_mesh(mesh->mesh, path, f);
    });
}

lsa_status lsa_mesh_counts(const lsa_mesh* mesh, size_t* vertices, size_t* faces) {
    LSA_REQUIRE(mesh);
    if (vertices) *vertices = mesh->mesh.vertices.size();
    if (faces) *faces = mesh->mesh.faces.size();
    return LSA_OK;
}

void lsa_mesh_free(lsa_mesh* mesh) { delete mesh; }

lsa_status lsa_evaluate_shape(const lsa_mesh* mesh, const char* shape, size_t samples, uint64_t seed,
                              lsa_eval_report* out) {
    LSA_REQUIRE(mesh);
    LSA_REQUIRE(shape);
    LSA_REQUIRE(out);
    if (samples == 0) return fail(LSA_ERR_INVALID_ARGUMENT, "samples must be >= 1");
    return guarded([&] { copy_report(lsa::evaluate(mesh->mesh, lsa::parse_shape(shape), samples, seed), out); });
}

lsa_status lsa_evaluate_mesh(const lsa_mesh* mesh, const lsa_mesh* reference, size_t samples, uint64_t seed,
                             lsa_eval_report* out) {
    LSA_REQUIRE(mesh);
    LSA_REQUIRE(reference);
    LSA_REQUIRE(out);
    if (samples == 0) return fail(LSA_ERR_INVALID_ARGUMENT, "samples must be >= 1");
    return guarded([&] { copy_report(lsa::evaluate(mesh->mesh, reference->mesh, samples, seed), out); });
}

lsa_status lsa_evaluate_cloud(const lsa_mesh* mesh, const lsa_cloud* reference, size_t samples, uint64_t seed,
                              lsa_eval_report* out) {
    LSA_REQUIRE(mesh);
    LSA_REQUIRE(reference);
    LSA_REQUIRE(out);
    if (samples == 0) return fail(LSA_ERR_INVALID_ARGUMENT, "samples must be >= 1");
    return guarded([&] {
        const auto& pc = reference->cloud;
        if (mesh->mesh.empty()) throw lsa::EmptyError("reconstruction mesh is empty");
        if (pc.has_normals()) {
            copy_report(lsa::evaluate(mesh->mesh, lsa::SurfaceSamples{pc.positions(), pc.normals()}, samples, seed),
                        out);
            return;
        }
        const auto rec = lsa::sample_mesh(mesh->mesh, samples, seed);
        lsa::EvalReport r;
        r.cd = lsa::chamfer_l1(rec.points, pc.positions());
        r.nc = std::numeric_limits<double>::quiet_NaN();
        r.samples_reconstruction = rec.points.size();
        r.samples_reference = pc.size();
        r.seed = seed;
        copy_report(r, out);
    });
}

lsa_status lsa_eval_report_write(const lsa_eval_report* report, const char* path, const char* csv_path) {
    LSA_REQUIRE(report);
    LSA_REQUIRE(path);
    return guarded([&] {
        const auto r = from_c(*report);
        lsa::write_eval_report(r, path);
        if (csv_path) {
            std::ofstream csv(csv_path);
            if (!csv) throw lsa::IoError(std::string("cannot write ") + csv_path);
            csv << lsa::eval_csv_header() << '\n' << lsa::eval_csv_row(r) << '\n';
        }
    });
}

lsa_status lsa_slice(const lsa_network* net, char axis, double offset, int resolution, const char* csv_path,
                     const char* pgm_path) {
    LSA_REQUIRE(net);
    return guarded([&] {
        const auto slice = lsa::slice_field(net->checkpoint.network, lsa::parse_axis(std::string(1, axis)), offset,
                                            resolution);
        if (csv_path) lsa::export_slice_csv(slice, csv_path);
        if (pgm_path) lsa::export_slice_pgm(slice, pgm_path);
    });
}

lsa_status lsa_ablate(const char* settings, const char* grid, lsa_ablation_fn row, void* user, size_t* rows_out) {
    LSA_REQUIRE(settings);
    return guarded([&] {
        const auto config = run_config(settings);
        config.validate();
        auto spec = lsa::AblationGrid::full();
        if (grid && std::string(grid) != "default") {
            auto parsed = lsa::parse_grid(lsa::parse_settings(grid));
            if (!parsed.alpha.empty() || !parsed.delta.empty() || !parsed.weight.empty() || !parsed.metric.empty() ||
                !parsed.target.empty())
                spec = std::move(parsed);
            else {
                spec.seeds = parsed.seeds;
                spec.mode = parsed.mode;
            }
        }
        if (!config.out.empty()) {
            std::filesystem::create_directories(config.out);
            lsa::write_settings(lsa::to_settings(config), config.out / "config.txt");
        }
        const auto rows = lsa::run_ablation(config, spec, [&](const lsa::AblationRow& r) {
            if (!row) return;
            const std::string weight(lsa::to_string(r.loss.weight_mode));
            const std::string metric(lsa::to_string(r.loss.metric));
            const std::string target(lsa::to_string(r.loss.target));
            const lsa_ablation_row c{r.variant.c_str(), r.seed,       r.loss.alpha,   r.loss.delta,
                                     weight.c_str(),    metric.c_str(), target.c_str(), r.cd,
                                     r.nc,              r.mean_consistency};
            row(&c, user);
        });
        if (rows_out) *rows_out = rows.size();
    });
}

} // extern "C"
