// lsalign: fit, extract, eval, slice and ablate from the command line.
//
// Exit codes: 0 success, 2 usage, 3 validation, 4 runtime failure.

#include "lsalign/lsalign.h"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitValidation = 3;
constexpr int kExitRuntime = 4;

struct Failure {
    int code;
    std::string message;
};

int exit_code(lsa_status s) {
    switch (s) {
    case LSA_OK: return 0;
    case LSA_ERR_CONFIG:
    case LSA_ERR_INVALID_ARGUMENT: return kExitValidation;
    default: return kExitRuntime;
    }
}

void check(lsa_status s) {
    if (s != LSA_OK) throw Failure{exit_code(s), std::string(lsa_status_name(s)) + ": " + lsa_last_error()};
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Failure{kExitUsage, "cannot read " + path};
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Settings assembled from a config file and then flags; later lines win.
struct Settings {
    std::string text;

    void add(const std::string& key, const std::string& value) { text += key + " = " + value + "\n"; }
    void add_file(const std::string& path) { text += slurp(path) + "\n"; }
    bool has(const std::string& key) const {
        std::istringstream in(text);
        std::string line;
        while (std::getline(in, line)) {
            const auto eq = line.find('=');
            if (eq == std::string::npos) continue;
            auto k = line.substr(0, eq);
            k.erase(k.find_last_not_of(" \t") + 1);
            k.erase(0, k.find_first_not_of(" \t"));
            auto v = line.substr(eq + 1);
            v.erase(0, v.find_first_not_of(" \t"));
            if (k == key && !v.empty() && v.front() != '#') return true;
        }
        return false;
    }
};

/// Flags shared by fit and ablate; each one maps to a config key.
struct RunFlags {
    std::string config;
    std::vector<std::string> sets;
    std::vector<std::pair<std::string, std::string>> values;
    std::vector<std::pair<std::string, CLI::Option*>> options;

    void attach(CLI::App& app) {
        app.add_option("--config", config, "key = value run configuration file")->check(CLI::ExistingFile);
        app.add_option("--set", sets, "extra key=value setting (repeatable)");
        static const std::vector<std::pair<std::string, std::string>> flags = {
            {"shape", "analytic shape, e.g. sphere:r=1 or torus:R=1,r=0.4"},
            {"input", "point cloud file (.xyz or .ply)"},
            {"points", "surface samples drawn from --shape"},
            {"out", "output directory"},
            {"iters", "training iterations"},
            {"batch", "queries per step"},
            {"lr", "learning rate"},
            {"seed", "seed for every random choice"},
            {"alpha", "alignment weight"},
            {"delta", "per-query weight decay"},
            {"weight", "predicted | euclidean | none"},
            {"metric", "cosine | mse | mse-normalized"},
            {"target", "projection | fixed"},
            {"projection-gradient", "through | detached"},
            {"baseline", "neural-pull | eikonal-surface"},
            {"depth", "hidden layers"},
            {"width", "hidden units"},
            {"skip-layer", "layer receiving the input again (-1 for none)"},
            {"resolution", "marching-cubes nodes per axis"},
            {"eval-samples", "points sampled per surface for metrics"},
        };
        values.resize(flags.size());
        for (std::size_t i = 0; i < flags.size(); ++i) {
            values[i].first = flags[i].first;
            options.emplace_back(flags[i].first, app.add_option("--" + flags[i].first, values[i].second, flags[i].second));
        }
    }

    Settings collect() const {
        Settings s;
        if (!config.empty()) s.add_file(config);
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (options[i].second->count() == 0) continue;
            std::string key = values[i].first;
            if (key == "iters") key = "iterations";
            for (auto& c : key)
                if (c == '-') c = '_';
            s.add(key, values[i].second);
        }
        for (const auto& kv : sets) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) throw Failure{kExitUsage, "--set expects key=value, got '" + kv + "'"};
            s.add(kv.substr(0, eq), kv.substr(eq + 1));
        }
        if (!s.has("shape") && !s.has("input"))
            throw Failure{kExitUsage, "no input: pass --shape or --input (or set one in --config)"};
        return s;
    }
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    return s.str();
}

void log_step(size_t step, double baseline, double alignment, double beta, double consistency, void*) {
    std::fprintf(stderr, "step %zu baseline %.6g alignment %.6g beta %.4g consistency %.6g\n", step, baseline,
                 alignment, beta, consistency);
}

void write_echo(const std::filesystem::path& path, const std::vector<std::pair<std::string, std::string>>& kv) {
    std::ofstream out(path);
    for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
    if (!out) throw Failure{kExitRuntime, "cannot write " + path.string()};
}

struct NetworkHandle {
    lsa_network* net = nullptr;
    ~NetworkHandle() { lsa_network_free(net); }
};

struct MeshHandle {
    lsa_mesh* mesh = nullptr;
    ~MeshHandle() { lsa_mesh_free(mesh); }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Neural signed distance fitting from point clouds"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(lsa_version()));
    bool quiet = false;
    app.add_flag("-q,--quiet", quiet, "no progress output");

    // fit
    auto* fit = app.add_subcommand("fit", "train a network on a point cloud or analytic shape");
    RunFlags fit_flags;
    fit_flags.attach(*fit);

    // extract
    auto* extract = app.add_subcommand("extract", "marching cubes on a trained network");
    std::string ex_ckpt, ex_out, ex_format;
    int ex_res = 128;
    double ex_bound = 1.0;
    std::vector<double> ex_iso{0.0};
    extract->add_option("--checkpoint", ex_ckpt, "model checkpoint")->required();
    extract->add_option("--out", ex_out, "mesh path (.obj or .ply); with several --iso values, a suffix _<i> is added")
        ->required();
    extract->add_option("--resolution", ex_res, "nodes per axis");
    extract->add_option("--bound", ex_bound, "half extent of the grid cube in normalized coordinates");
    extract->add_option("--iso", ex_iso, "level values")->delimiter(',');
    extract->add_option("--format", ex_format, "obj | ply (default: from extension)");

    // eval
    auto* eval = app.add_subcommand("eval", "Chamfer-L1 and normal consistency against ground truth");
    std::string ev_mesh, ev_ckpt, ev_shape, ev_ref_mesh, ev_ref_cloud, ev_out, ev_csv;
    std::size_t ev_samples = 30000;
    std::uint64_t ev_seed = 0;
    int ev_res = 128;
    auto* ev_mesh_opt = eval->add_option("--mesh", ev_mesh, "reconstructed mesh");
    auto* ev_ckpt_opt = eval->add_option("--checkpoint", ev_ckpt, "extract the mesh from this checkpoint");
    ev_mesh_opt->excludes(ev_ckpt_opt);
    eval->add_option("--resolution", ev_res, "grid resolution when extracting from --checkpoint");
    auto* ev_shape_opt = eval->add_option("--shape", ev_shape, "analytic reference shape");
    auto* ev_refm_opt = eval->add_option("--reference-mesh", ev_ref_mesh, "reference mesh");
    auto* ev_refc_opt = eval->add_option("--reference-cloud", ev_ref_cloud, "reference point cloud");
    ev_shape_opt->excludes(ev_refm_opt)->excludes(ev_refc_opt);
    ev_refm_opt->excludes(ev_refc_opt);
    eval->add_option("--samples", ev_samples, "points per surface");
    eval->add_option("--seed", ev_seed, "sampling seed");
    eval->add_option("--out", ev_out, "report path (key=value)")->required();
    eval->add_option("--csv", ev_csv, "also write a one-row CSV");

    // slice
    auto* slice = app.add_subcommand("slice", "signed distance on an axis-aligned cross-section");
    std::string sl_ckpt, sl_out;
    std::string sl_axis = "z";
    double sl_offset = 0.0;
    int sl_res = 256;
    slice->add_option("--checkpoint", sl_ckpt, "model checkpoint")->required();
    slice->add_option("--axis", sl_axis, "x | y | z");
    slice->add_option("--offset", sl_offset, "plane position along the axis (normalized coordinates)");
    slice->add_option("--resolution", sl_res, "samples per side");
    slice->add_option("--out", sl_out, "output prefix; writes <prefix>.csv and <prefix>.pgm")->required();

    // ablate
    auto* ablate = app.add_subcommand("ablate", "run the ablation grid and tabulate CD, NC and consistency");
    RunFlags ab_flags;
    ab_flags.attach(*ablate);
    std::string ab_grid, ab_mode;
    std::string g_alpha, g_delta, g_weight, g_metric, g_target, g_seeds;
    ablate->add_option("--grid", ab_grid, "grid file with candidate lists")->check(CLI::ExistingFile);
    ablate->add_option("--grid-alpha", g_alpha, "alpha candidates, comma separated");
    ablate->add_option("--grid-delta", g_delta, "delta candidates");
    ablate->add_option("--grid-weight", g_weight, "weight mode candidates");
    ablate->add_option("--grid-metric", g_metric, "metric candidates");
    ablate->add_option("--grid-target", g_target, "target candidates");
    ablate->add_option("--seeds", g_seeds, "seeds, comma separated");
    ablate->add_option("--mode", ab_mode, "sweep | cross");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kExitUsage;
    }

    try {
        if (fit->parsed()) {
            const Settings s = fit_flags.collect();
            lsa_fit_summary summary{};
            check(lsa_fit(s.text.c_str(), quiet ? nullptr : log_step, nullptr, &summary, nullptr));
            std::printf("steps=%zu baseline=%s alignment=%s probe_consistency=%s alpha=%s\n", summary.steps,
                        fmt(summary.baseline).c_str(), fmt(summary.alignment).c_str(),
                        fmt(summary.probe_consistency).c_str(), fmt(summary.alpha).c_str());
        } else if (extract->parsed()) {
            NetworkHandle net;
            check(lsa_network_load(ex_ckpt.c_str(), &net.net));
            const std::filesystem::path out(ex_out);
            for (std::size_t i = 0; i < ex_iso.size(); ++i) {
                const lsa_grid grid{ex_res, ex_bound, ex_iso[i]};
                MeshHandle mesh;
                check(lsa_extract(net.net, &grid, &mesh.mesh));
                std::filesystem::path path = out;
                if (ex_iso.size() > 1)
                    path = out.parent_path() / (out.stem().string() + "_" + std::to_string(i) + out.extension().string());
                if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
                check(lsa_mesh_save(mesh.mesh, path.c_str(), ex_format.empty() ? nullptr : ex_format.c_str()));
                size_t nv = 0, nf = 0;
                check(lsa_mesh_counts(mesh.mesh, &nv, &nf));
                std::printf("%s iso=%s vertices=%zu faces=%zu\n", path.c_str(), fmt(ex_iso[i]).c_str(), nv, nf);
            }
            std::string isos;
            for (double v : ex_iso) isos += (isos.empty() ? "" : ",") + fmt(v);
            write_echo(out.string() + ".config.txt", {{"command", "extract"}, {"checkpoint", ex_ckpt},
                                                      {"resolution", std::to_string(ex_res)}, {"bound", fmt(ex_bound)},
                                                      {"iso", isos}, {"out", ex_out}});
        } else if (eval->parsed()) {
            if (ev_mesh.empty() && ev_ckpt.empty()) throw Failure{kExitUsage, "eval needs --mesh or --checkpoint"};
            if (ev_shape.empty() && ev_ref_mesh.empty() && ev_ref_cloud.empty())
                throw Failure{kExitUsage, "eval needs --shape, --reference-mesh or --reference-cloud"};
            MeshHandle mesh;
            if (!ev_mesh.empty()) {
                check(lsa_mesh_load(ev_mesh.c_str(), &mesh.mesh));
            } else {
                NetworkHandle net;
                check(lsa_network_load(ev_ckpt.c_str(), &net.net));
                const lsa_grid grid{ev_res, 1.0, 0.0};
                check(lsa_extract(net.net, &grid, &mesh.mesh));
            }
            lsa_eval_report report{};
            if (!ev_shape.empty()) {
                check(lsa_evaluate_shape(mesh.mesh, ev_shape.c_str(), ev_samples, ev_seed, &report));
            } else if (!ev_ref_mesh.empty()) {
                MeshHandle ref;
                check(lsa_mesh_load(ev_ref_mesh.c_str(), &ref.mesh));
                check(lsa_evaluate_mesh(mesh.mesh, ref.mesh, ev_samples, ev_seed, &report));
            } else {
                lsa_cloud* cloud = nullptr;
                check(lsa_cloud_load(ev_ref_cloud.c_str(), &cloud));
                const auto st = lsa_evaluate_cloud(mesh.mesh, cloud, ev_samples, ev_seed, &report);
                lsa_cloud_free(cloud);
                check(st);
            }
            const std::filesystem::path out(ev_out);
            if (out.has_parent_path()) std::filesystem::create_directories(out.parent_path());
            check(lsa_eval_report_write(&report, ev_out.c_str(), ev_csv.empty() ? nullptr : ev_csv.c_str()));
            std::printf("cd=%s nc=%s\n", fmt(report.cd).c_str(), fmt(report.nc).c_str());
            write_echo(ev_out + ".config.txt",
                       {{"command", "eval"}, {"mesh", ev_mesh}, {"checkpoint", ev_ckpt},
                        {"resolution", std::to_string(ev_res)}, {"shape", ev_shape}, {"reference_mesh", ev_ref_mesh},
                        {"reference_cloud", ev_ref_cloud}, {"samples", std::to_string(ev_samples)},
                        {"seed", std::to_string(ev_seed)}});
        } else if (slice->parsed()) {
            if (sl_axis.size() != 1) throw Failure{kExitValidation, "axis: expected x, y or z"};
            NetworkHandle net;
            check(lsa_network_load(sl_ckpt.c_str(), &net.net));
            const std::filesystem::path prefix(sl_out);
            if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
            const std::string csv = sl_out + ".csv", pgm = sl_out + ".pgm";
            check(lsa_slice(net.net, sl_axis[0], sl_offset, sl_res, csv.c_str(), pgm.c_str()));
            std::printf("%s %s\n", csv.c_str(), pgm.c_str());
            write_echo(sl_out + ".config.txt", {{"command", "slice"}, {"checkpoint", sl_ckpt}, {"axis", sl_axis},
                                                {"offset", fmt(sl_offset)}, {"resolution", std::to_string(sl_res)}});
        } else if (ablate->parsed()) {
            const Settings s = ab_flags.collect();
            std::string grid;
            if (!ab_grid.empty()) grid += slurp(ab_grid) + "\n";
            auto axis = [&](const char* key, const std::string& v) {
                if (!v.empty()) grid += std::string(key) + " = " + v + "\n";
            };
            axis("alpha", g_alpha);
            axis("delta", g_delta);
            axis("weight", g_weight);
            axis("metric", g_metric);
            axis("target", g_target);
            axis("seeds", g_seeds);
            axis("mode", ab_mode);
            std::printf("variant,seed,cd,nc,mean_consistency\n");
            size_t rows = 0;
            check(lsa_ablate(
                s.text.c_str(), grid.c_str(),
                [](const lsa_ablation_row* r, void*) {
                    std::printf("%s,%llu,%s,%s,%s\n", r->variant, static_cast<unsigned long long>(r->seed),
                                fmt(r->cd).c_str(), fmt(r->nc).c_str(), fmt(r->mean_consistency).c_str());
                    std::fflush(stdout);
                },
                nullptr, &rows));
        }
    } catch (const Failure& f) {
        std::fprintf(stderr, "lsalign: %s\n", f.message.c_str());
        return f.code;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "lsalign: %s\n", e.what());
        return kExitRuntime;
    }
    return 0;
}
