#include "config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace lsa {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* expected) {
    throw ConfigError(key + ": expected " + expected + " (got '" + value + "')");
}

double as_real(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "a number");
    return out;
}

std::size_t as_count(const std::string& key, const std::string& v) {
    std::size_t out = 0;
    if (!v.empty() && v.front() == '-') throw ConfigError(key + ": must be >= 0 (got " + v + ")");
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "a non-negative integer");
    return out;
}

int as_int(const std::string& key, const std::string& v) {
    int out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) bad(key, v, "an integer");
    return out;
}

bool as_bool(const std::string& key, const std::string& v) {
    if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
    if (v == "0" || v == "false" || v == "no" || v == "off") return false;
    bad(key, v, "a boolean");
}

template <class F>
auto wrap(const std::string& key, F&& parse) {
    try {
        return parse();
    } catch (const ConfigError& e) {
        const std::string what = e.what();
        if (what.rfind(key + ":", 0) == 0) throw;
        throw ConfigError(key + ": " + what);
    }
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"input", [](RunConfig& c, const auto&, const auto& v) { c.input = v; }},
        {"shape", [](RunConfig& c, const auto&, const auto& v) { c.shape = v; }},
        {"points", [](RunConfig& c, const auto& k, const auto& v) { c.points = as_count(k, v); }},
        {"out", [](RunConfig& c, const auto&, const auto& v) { c.out = v; }},
        {"eval_samples", [](RunConfig& c, const auto& k, const auto& v) { c.eval_samples = as_count(k, v); }},
        {"iterations", [](RunConfig& c, const auto& k, const auto& v) { c.train.iterations = as_count(k, v); }},
        {"batch", [](RunConfig& c, const auto& k, const auto& v) { c.train.batch_size = as_count(k, v); }},
        {"lr", [](RunConfig& c, const auto& k, const auto& v) { c.train.learning_rate = as_real(k, v); }},
        {"beta1", [](RunConfig& c, const auto& k, const auto& v) { c.train.beta1 = as_real(k, v); }},
        {"beta2", [](RunConfig& c, const auto& k, const auto& v) { c.train.beta2 = as_real(k, v); }},
        {"adam_eps", [](RunConfig& c, const auto& k, const auto& v) { c.train.epsilon = as_real(k, v); }},
        {"cosine_decay", [](RunConfig& c, const auto& k, const auto& v) { c.train.cosine_decay = as_bool(k, v); }},
        {"seed", [](RunConfig& c, const auto& k, const auto& v) { c.train.seed = as_count(k, v); }},
        {"log_every", [](RunConfig& c, const auto& k, const auto& v) { c.train.log_every = as_count(k, v); }},
        {"checkpoint_every",
         [](RunConfig& c, const auto& k, const auto& v) { c.train.checkpoint_every = as_count(k, v); }},
        {"probe", [](RunConfig& c, const auto& k, const auto& v) { c.train.probe_size = as_count(k, v); }},
        {"sigma_neighbor",
         [](RunConfig& c, const auto& k, const auto& v) { c.train.sigma_neighbor = as_count(k, v); }},
        {"depth", [](RunConfig& c, const auto& k, const auto& v) { c.train.architecture.depth = as_int(k, v); }},
        {"width", [](RunConfig& c, const auto& k, const auto& v) { c.train.architecture.width = as_int(k, v); }},
        {"skip_layer",
         [](RunConfig& c, const auto& k, const auto& v) { c.train.architecture.skip_layer = as_int(k, v); }},
        {"activation",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.architecture.activation = wrap(k, [&] { return parse_activation(v); });
         }},
        {"sharpness",
         [](RunConfig& c, const auto& k, const auto& v) { c.train.architecture.sharpness = as_real(k, v); }},
        {"geometric_init",
         [](RunConfig& c, const auto& k, const auto& v) { c.train.architecture.geometric_init = as_bool(k, v); }},
        {"init_radius",
         [](RunConfig& c, const auto& k, const auto& v) { c.train.architecture.init_radius = as_real(k, v); }},
        {"baseline",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.loss.baseline = wrap(k, [&] { return parse_baseline(v); });
         }},
        {"alpha", [](RunConfig& c, const auto& k, const auto& v) { c.train.loss.alpha = as_real(k, v); }},
        {"delta", [](RunConfig& c, const auto& k, const auto& v) { c.train.loss.delta = as_real(k, v); }},
        {"weight",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.loss.weight_mode = wrap(k, [&] { return parse_weight_mode(v); });
         }},
        {"metric",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.loss.metric = wrap(k, [&] { return parse_metric(v); });
         }},
        {"target",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.loss.target = wrap(k, [&] { return parse_target(v); });
         }},
        {"projection_gradient",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.loss.projection_gradient = wrap(k, [&] { return parse_projection_gradient(v); });
         }},
        {"projection_form",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.loss.projection_form = wrap(k, [&] { return parse_projection_form(v); });
         }},
        {"reduction",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.loss.reduction = wrap(k, [&] { return parse_reduction(v); });
         }},
        {"auto_balance",
         [](RunConfig& c, const auto& k, const auto& v) { c.train.loss.auto_balance = as_bool(k, v); }},
        {"independent_alignment_batch",
         [](RunConfig& c, const auto& k, const auto& v) {
             c.train.loss.independent_alignment_batch = as_bool(k, v);
         }},
        {"eikonal_weight",
         [](RunConfig& c, const auto& k, const auto& v) { c.train.loss.eikonal_weight = as_real(k, v); }},
        {"resolution", [](RunConfig& c, const auto& k, const auto& v) { c.grid.resolution = as_int(k, v); }},
        {"iso", [](RunConfig& c, const auto& k, const auto& v) { c.grid.iso = as_real(k, v); }},
        {"bound",
         [](RunConfig& c, const auto& k, const auto& v) {
             const double b = as_real(k, v);
             if (!(b > 0.0)) throw ConfigError(k + ": must be > 0 (got " + v + ")");
             c.grid.lo = Vec3::Constant(-b);
             c.grid.hi = Vec3::Constant(b);
         }},
    };
    return table;
}

} // namespace

std::string format_real(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

void RunConfig::validate() const {
    if (input.empty() == shape.empty()) throw ConfigError("input: give exactly one of input and shape");
    if (!shape.empty()) {
        parse_shape(shape);
        if (points < 1) throw ConfigError("points: must be >= 1");
    }
    train.validate();
    grid.validate();
    if (eval_samples < 1) throw ConfigError("eval_samples: must be >= 1");
}

PointCloud RunConfig::load_cloud() const {
    validate();
    if (!shape.empty()) return sample_surface(parse_shape(shape), points, train.seed);
    return load_point_cloud(input);
}

std::optional<AnalyticShape> RunConfig::reference_shape() const {
    if (shape.empty()) return std::nullopt;
    return parse_shape(shape);
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
    const auto& table = setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError(key + ": unknown setting");
    it->second(config, key, value);
}

void apply_settings(RunConfig& config, const std::vector<Setting>& settings) {
    for (const auto& [k, v] : settings) apply_setting(config, k, v);
}

std::vector<Setting> parse_settings(const std::string& text) {
    std::vector<Setting> out;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
        std::string key = trim(std::string_view(t).substr(0, eq));
        if (key.empty()) throw ParseError("missing key", lineno);
        out.emplace_back(std::move(key), trim(std::string_view(t).substr(eq + 1)));
    }
    return out;
}

std::vector<Setting> read_settings(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    std::ostringstream s;
    s << in.rdbuf();
    return parse_settings(s.str());
}

std::vector<Setting> to_settings(const RunConfig& c) {
    const auto& a = c.train.architecture;
    const auto& l = c.train.loss;
    auto b = [](bool v) { return std::string(v ? "true" : "false"); };
    auto n = [](auto v) { return std::to_string(v); };
    std::vector<Setting> s = {
        {"input", c.input.string()},
        {"shape", c.shape},
        {"points", n(c.points)},
        {"out", c.out.string()},
        {"eval_samples", n(c.eval_samples)},
        {"iterations", n(c.train.iterations)},
        {"batch", n(c.train.batch_size)},
        {"lr", format_real(c.train.learning_rate)},
        {"beta1", format_real(c.train.beta1)},
        {"beta2", format_real(c.train.beta2)},
        {"adam_eps", format_real(c.train.epsilon)},
        {"cosine_decay", b(c.train.cosine_decay)},
        {"seed", n(c.train.seed)},
        {"log_every", n(c.train.log_every)},
        {"checkpoint_every", n(c.train.checkpoint_every)},
        {"probe", n(c.train.probe_size)},
        {"sigma_neighbor", n(c.train.sigma_neighbor)},
        {"depth", n(a.depth)},
        {"width", n(a.width)},
        {"skip_layer", n(a.skip_layer)},
        {"activation", std::string(to_string(a.activation))},
        {"sharpness", format_real(a.sharpness)},
        {"geometric_init", b(a.geometric_init)},
        {"init_radius", format_real(a.init_radius)},
        {"baseline", std::string(to_string(l.baseline))},
        {"alpha", format_real(l.alpha)},
        {"delta", format_real(l.delta)},
        {"weight", std::string(to_string(l.weight_mode))},
        {"metric", std::string(to_string(l.metric))},
        {"target", std::string(to_string(l.target))},
        {"projection_gradient", std::string(to_string(l.projection_gradient))},
        {"projection_form", std::string(to_string(l.projection_form))},
        {"reduction", std::string(to_string(l.reduction))},
        {"auto_balance", b(l.auto_balance)},
        {"independent_alignment_batch", b(l.independent_alignment_batch)},
        {"eikonal_weight", format_real(l.eikonal_weight)},
        {"resolution", n(c.grid.resolution)},
        {"iso", format_real(c.grid.iso)},
    };
    // Only cubic bounds are expressible; they are all the CLI produces.
    if (c.grid.hi == Vec3::Constant(c.grid.hi.x()) && c.grid.lo == -c.grid.hi)
        s.emplace_back("bound", format_real(c.grid.hi.x()));
    return s;
}

void write_settings(const std::vector<Setting>& settings, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write config " + path.string());
    for (const auto& [k, v] : settings) out << k << " = " << v << '\n';
    if (!out) throw IoError("short write to " + path.string());
}

} // namespace lsa
