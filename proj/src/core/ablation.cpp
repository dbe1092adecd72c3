#include "ablation.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace lsa {

namespace {

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string item;
    while (std::getline(in, item, ',')) {
        const auto b = item.find_first_not_of(' ');
        const auto e = item.find_last_not_of(' ');
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& value, F&& parse) {
    std::vector<T> out;
    for (const auto& item : split_list(value)) {
        try {
            out.push_back(parse(item));
        } catch (const std::exception& e) {
            throw ConfigError(key + ": bad candidate '" + item + "'");
        }
    }
    if (out.empty()) throw ConfigError(key + ": empty candidate list");
    return out;
}

double parse_real(const std::string& s) {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError("trailing characters");
    return v;
}

std::uint64_t parse_seed(const std::string& s) {
    std::size_t used = 0;
    if (!s.empty() && s.front() == '-') throw ConfigError("negative seed");
    const auto v = std::stoull(s, &used);
    if (used != s.size()) throw ConfigError("trailing characters");
    return v;
}

} // namespace

AblationGrid AblationGrid::full() {
    AblationGrid g;
    g.alpha = {0.0, 0.001, 0.01, 0.1, 1.0};
    g.delta = {0.0, 1.0, 10.0, 100.0};
    g.weight = {WeightMode::PredictedDistance, WeightMode::EuclideanDistance};
    g.metric = {ConsistencyMetric::Cosine, ConsistencyMetric::Mse, ConsistencyMetric::MseNormalized};
    g.target = {ConsistencyTarget::Projection, ConsistencyTarget::FixedNearest};
    return g;
}

AblationGrid parse_grid(const std::vector<Setting>& settings) {
    AblationGrid g;
    for (const auto& [key, value] : settings) {
        if (key == "alpha") g.alpha = parse_list<double>(key, value, parse_real);
        else if (key == "delta") g.delta = parse_list<double>(key, value, parse_real);
        else if (key == "weight") g.weight = parse_list<WeightMode>(key, value, [](auto& s) { return parse_weight_mode(s); });
        else if (key == "metric") g.metric = parse_list<ConsistencyMetric>(key, value, [](auto& s) { return parse_metric(s); });
        else if (key == "target") g.target = parse_list<ConsistencyTarget>(key, value, [](auto& s) { return parse_target(s); });
        else if (key == "seeds") g.seeds = parse_list<std::uint64_t>(key, value, parse_seed);
        else if (key == "mode") {
            if (value == "sweep") g.mode = AblationMode::Sweep;
            else if (value == "cross") g.mode = AblationMode::Cross;
            else throw ConfigError("mode: expected sweep or cross (got '" + value + "')");
        } else throw ConfigError(key + ": unknown grid axis");
    }
    for (double a : g.alpha)
        if (!(a >= 0.0)) throw ConfigError("alpha: candidates must be >= 0");
    for (double d : g.delta)
        if (!(d >= 0.0)) throw ConfigError("delta: candidates must be >= 0");
    return g;
}

AblationGrid read_grid(const std::filesystem::path& path) { return parse_grid(read_settings(path)); }

std::string variant_label(const LossConfig& loss) {
    return "alpha=" + format_real(loss.alpha) + ";delta=" + format_real(loss.delta) +
           ";weight=" + std::string(to_string(loss.weight_mode)) + ";metric=" + std::string(to_string(loss.metric)) +
           ";target=" + std::string(to_string(loss.target));
}

std::vector<AblationVariant> expand(const AblationGrid& grid, const LossConfig& base) {
    std::vector<LossConfig> configs;
    if (grid.mode == AblationMode::Cross) {
        auto or_base = [](const auto& list, auto base_value) {
            using T = decltype(base_value);
            return list.empty() ? std::vector<T>{base_value} : std::vector<T>(list.begin(), list.end());
        };
        for (double a : or_base(grid.alpha, base.alpha))
            for (double d : or_base(grid.delta, base.delta))
                for (auto w : or_base(grid.weight, base.weight_mode))
                    for (auto m : or_base(grid.metric, base.metric))
                        for (auto t : or_base(grid.target, base.target)) {
                            LossConfig c = base;
                            c.alpha = a;
                            c.delta = d;
                            c.weight_mode = w;
                            c.metric = m;
                            c.target = t;
                            configs.push_back(c);
                        }
    } else {
        auto vary = [&](const auto& list, auto member) {
            for (const auto& v : list) {
                LossConfig c = base;
                c.*member = v;
                configs.push_back(c);
            }
        };
        vary(grid.alpha, &LossConfig::alpha);
        vary(grid.delta, &LossConfig::delta);
        vary(grid.weight, &LossConfig::weight_mode);
        vary(grid.metric, &LossConfig::metric);
        vary(grid.target, &LossConfig::target);
        if (configs.empty()) configs.push_back(base);
    }
    std::vector<AblationVariant> out;
    std::set<std::string> seen;
    for (const auto& c : configs) {
        auto label = variant_label(c);
        if (seen.insert(label).second) out.push_back({std::move(label), c});
    }
    return out;
}

RunEvaluation fit_and_evaluate(const RunConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    const PointCloud cloud = config.load_cloud();
    FitResult result = fit(cloud, config.train, out_dir);
    GridSpec grid = config.grid;
    const std::vector<double> isos{grid.iso};
    TriangleMesh mesh = denormalize(std::move(extract_levels(result.network, isos, grid).front()), result.normalization);

    EvalReport report;
    report.seed = config.train.seed;
    if (mesh.empty()) {
        report.cd = report.nc = std::numeric_limits<double>::quiet_NaN();
    } else if (const auto shape = config.reference_shape()) {
        report = evaluate(mesh, *shape, config.eval_samples, config.train.seed);
    } else {
        SurfaceSamples ref{cloud.positions(), cloud.normals()};
        if (ref.normals.empty()) {
            const auto rec = sample_mesh(mesh, config.eval_samples, config.train.seed);
            report.cd = chamfer_l1(rec.points, ref.points);
            report.nc = std::numeric_limits<double>::quiet_NaN();
            report.samples_reconstruction = rec.points.size();
            report.samples_reference = ref.points.size();
        } else {
            report = evaluate(mesh, ref, config.eval_samples, config.train.seed);
        }
    }
    if (!out_dir.empty()) {
        export_mesh(mesh, out_dir / "mesh.obj", MeshFormat::Obj);
        write_eval_report(report, out_dir / "eval.txt");
    }
    return {std::move(result), std::move(mesh), report};
}

std::vector<AblationRow> run_ablation(const RunConfig& base, const AblationGrid& grid,
                                      const std::function<void(const AblationRow&)>& progress) {
    base.validate();
    const auto variants = expand(grid, base.train.loss);
    const std::vector<std::uint64_t> seeds = grid.seeds.empty() ? std::vector<std::uint64_t>{base.train.seed} : grid.seeds;
    std::vector<AblationRow> rows;
    std::size_t run = 0;
    for (const auto& v : variants) {
        for (auto seed : seeds) {
            RunConfig cfg = base;
            cfg.train.loss = v.loss;
            cfg.train.seed = seed;
            std::filesystem::path dir;
            if (!base.out.empty()) {
                dir = base.out / "runs" / std::to_string(run);
                cfg.out = dir;
                std::filesystem::create_directories(dir);
                write_settings(to_settings(cfg), dir / "config.txt");
            }
            const auto eval = fit_and_evaluate(cfg, dir);
            AblationRow row{v.label, seed, v.loss, eval.report.cd, eval.report.nc, eval.fit.final_probe.mean};
            rows.push_back(row);
            if (progress) progress(row);
            ++run;
        }
    }
    if (!base.out.empty()) write_ablation_csv(rows, base.out / "ablation.csv");
    return rows;
}

std::string ablation_csv_header() { return "variant,seed,alpha,delta,weight,metric,target,cd,nc,mean_consistency"; }

std::string ablation_csv_row(const AblationRow& r) {
    std::ostringstream s;
    s << r.variant << ',' << r.seed << ',' << format_real(r.loss.alpha) << ',' << format_real(r.loss.delta) << ','
      << to_string(r.loss.weight_mode) << ',' << to_string(r.loss.metric) << ',' << to_string(r.loss.target) << ','
      << format_real(r.cd) << ',' << format_real(r.nc) << ',' << format_real(r.mean_consistency);
    return s.str();
}

void write_ablation_csv(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << ablation_csv_header() << '\n';
    for (const auto& r : rows) out << ablation_csv_row(r) << '\n';
    if (!out) throw IoError("short write to " + path.string());
}

} // namespace lsa
