#include "network.hpp"

#include "diffcore.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace lsa {

static_assert(std::endian::native == std::endian::little, "checkpoint payload assumes a little-endian host");

std::string_view to_string(Activation a) {
    switch (a) {
    case Activation::Softplus: return "softplus";
    case Activation::Sine: return "sine";
    case Activation::Relu: return "relu";
    }
    return "?";
}

Activation parse_activation(std::string_view name) {
    if (name == "softplus") return Activation::Softplus;
    if (name == "sine") return Activation::Sine;
    if (name == "relu") return Activation::Relu;
    throw ConfigError("activation: unknown kind '" + std::string(name) + "'");
}

bool is_twice_differentiable(Activation a) { return a != Activation::Relu; }

void Architecture::validate() const {
    if (depth < 2) throw ConfigError("depth: must be >= 2 (got " + std::to_string(depth) + ")");
    if (width < 8) throw ConfigError("width: must be >= 8 (got " + std::to_string(width) + ")");
    if (skip_layer != -1 && (skip_layer < 1 || skip_layer >= depth))
        throw ConfigError("skip_layer: must be -1 or in [1, depth)");
    if (!is_twice_differentiable(activation))
        throw ConfigError("activation: '" + std::string(to_string(activation)) +
                          "' is not twice differentiable");
    if (!(sharpness > 0.0) || !std::isfinite(sharpness)) throw ConfigError("sharpness: must be > 0");
    if (geometric_init && !(init_radius > 0.0)) throw ConfigError("init_radius: must be > 0");
}

std::vector<LayerShape> layer_shapes(const Architecture& arch) {
    std::vector<LayerShape> shapes;
    std::size_t offset = 0;
    int prev = 3;
    auto push = [&](int in, int out, bool skip) {
        LayerShape s;
        s.in = in;
        s.out = out;
        s.skip_input = skip;
        s.weight_offset = offset;
        offset += static_cast<std::size_t>(in) * static_cast<std::size_t>(out);
        s.bias_offset = offset;
        offset += static_cast<std::size_t>(out);
        shapes.push_back(s);
    };
    for (int l = 0; l < arch.depth; ++l) {
        const bool skip = l == arch.skip_layer && l > 0;
        push(prev + (skip ? 3 : 0), arch.width, skip);
        prev = arch.width;
    }
    push(prev, 1, false);
    return shapes;
}

std::size_t parameter_count(const Architecture& arch) {
    const auto shapes = layer_shapes(arch);
    return shapes.back().bias_offset + 1;
}

SdfNetwork::SdfNetwork(const Architecture& arch, Eigen::VectorXd params, std::uint64_t seed)
    : arch_(arch), layers_(layer_shapes(arch)), params_(std::move(params)), seed_(seed) {
    const std::size_t expected = layers_.back().bias_offset + 1;
    if (static_cast<std::size_t>(params_.size()) != expected)
        throw ConfigError("parameters: expected " + std::to_string(expected) + " values, got " +
                          std::to_string(params_.size()));
    if (!is_twice_differentiable(arch_.activation) && arch_.depth > 0)
        throw ConfigError("activation: '" + std::string(to_string(arch_.activation)) +
                          "' is not twice differentiable");
}

SdfNetwork SdfNetwork::linear(const Vec3& w, double b) {
    Architecture arch;
    arch.depth = 0;
    arch.width = 0;
    arch.skip_layer = -1;
    arch.geometric_init = false;
    Eigen::VectorXd params(4);
    params << w.x(), w.y(), w.z(), b;
    return SdfNetwork(arch, std::move(params));
}

Eigen::Map<const Eigen::MatrixXd> SdfNetwork::weight(int l) const {
    const auto& s = layer(l);
    return {params_.data() + s.weight_offset, s.out, s.in};
}

Eigen::Map<const Eigen::VectorXd> SdfNetwork::bias(int l) const {
    const auto& s = layer(l);
    return {params_.data() + s.bias_offset, s.out};
}

std::ptrdiff_t SdfNetwork::first_nonfinite_parameter() const {
    for (Eigen::Index i = 0; i < params_.size(); ++i)
        if (!std::isfinite(params_[i])) return i;
    return -1;
}

SdfNetwork init_network(const Architecture& arch, std::uint64_t seed) {
    arch.validate();
    const auto shapes = layer_shapes(arch);
    Eigen::VectorXd params = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shapes.back().bias_offset + 1));
    std::mt19937_64 rng(seed);

    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const auto& s = shapes[l];
        const bool output = l + 1 == shapes.size();
        double* w = params.data() + s.weight_offset;
        double* b = params.data() + s.bias_offset;
        const auto n_w = static_cast<std::size_t>(s.in) * static_cast<std::size_t>(s.out);

        if (arch.activation == Activation::Sine) {
            // Frequency-aware uniform init; the first layer spans several periods.
            const double bound = l == 0 ? 1.0 / s.in : std::sqrt(6.0 / s.in) / arch.sharpness;
            std::uniform_real_distribution<double> uw(-bound, bound);
            std::uniform_real_distribution<double> ub(-1.0 / std::sqrt(s.in), 1.0 / std::sqrt(s.in));
            for (std::size_t i = 0; i < n_w; ++i) w[i] = uw(rng);
            for (int i = 0; i < s.out; ++i) b[i] = ub(rng);
        } else if (arch.geometric_init) {
            if (output) {
                // Output ~ |q| - r for a ReLU-like MLP.
                std::normal_distribution<double> nw(std::sqrt(std::numbers::pi) / std::sqrt(s.in), 1e-4);
                for (std::size_t i = 0; i < n_w; ++i) w[i] = nw(rng);
                b[0] = -arch.init_radius;
            } else {
                std::normal_distribution<double> nw(0.0, std::sqrt(2.0) / std::sqrt(s.out));
                for (std::size_t i = 0; i < n_w; ++i) w[i] = nw(rng);
            }
        } else {
            const double bound = 1.0 / std::sqrt(s.in);
            std::uniform_real_distribution<double> u(-bound, bound);
            for (std::size_t i = 0; i < n_w; ++i) w[i] = u(rng);
            for (int i = 0; i < s.out; ++i) b[i] = u(rng);
        }
    }
    SdfNetwork net(arch, std::move(params), seed);
    if (arch.geometric_init && arch.activation == Activation::Softplus) {
        // Softplus exceeds ReLU by up to log(2)/sharpness per unit. After the
        // shift, f averages zero over the init sphere.
        constexpr int kDirections = 64;
        std::vector<Vec3> ring;
        ring.reserve(kDirections);
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int i = 0; i < kDirections; ++i) {
            const double z = 1.0 - (2.0 * i + 1.0) / kDirections;
            const double rho = std::sqrt(1.0 - z * z);
            ring.emplace_back(arch.init_radius * rho * std::cos(golden * i), arch.init_radius * rho * std::sin(golden * i),
                              arch.init_radius * z);
        }
        const auto values = eval_values(net, ring);
        double mean = 0.0;
        for (double v : values) mean += v;
        mean /= kDirections;
        net.mutable_parameters()[static_cast<Eigen::Index>(shapes.back().bias_offset)] -= mean;
    }
    return net;
}

double predict(const SdfNetwork& net, const Vec3& q) {
    const Vec3 pts[1] = {q};
    return eval_field(net, pts).front().value;
}

FieldSample NetworkField::sample(const Vec3& q) const {
    const Vec3 pts[1] = {q};
    return eval_field(net_, pts).front();
}

double NetworkField::value(const Vec3& q) const { return predict(net_, q); }

namespace {

constexpr std::string_view kMagic = "lsalign-checkpoint 1";

std::string hexfloat(double v) {
    std::ostringstream os;
    os << std::hexfloat << v;
    return os.str();
}

double parse_hexfloat(const std::string& s) {
    // operator>> does not accept hexfloat input on every standard library.
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw ParseError("bad number '" + s + "'", 0);
    return v;
}

} // namespace

void save_checkpoint(const std::filesystem::path& path, const SdfNetwork& net, const Normalization& norm) {
    const auto& a = net.architecture();
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out << kMagic << '\n'
            << "depth " << a.depth << '\n'
            << "width " << a.width << '\n'
            << "skip_layer " << a.skip_layer << '\n'
            << "activation " << to_string(a.activation) << '\n'
            << "sharpness " << hexfloat(a.sharpness) << '\n'
            << "geometric_init " << (a.geometric_init ? 1 : 0) << '\n'
            << "init_radius " << hexfloat(a.init_radius) << '\n'
            << "seed " << net.seed() << '\n'
            << "center " << hexfloat(norm.center.x()) << ' ' << hexfloat(norm.center.y()) << ' '
            << hexfloat(norm.center.z()) << '\n'
            << "scale " << hexfloat(norm.scale) << '\n'
            << "parameters " << net.parameter_count() << '\n'
            << "data\n";
        out.write(reinterpret_cast<const char*>(net.parameters().data()),
                  static_cast<std::streamsize>(net.parameter_count() * sizeof(double)));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::string line;
    std::getline(in, line);
    if (line != kMagic) throw ParseError("not a checkpoint file: " + path.string(), 1);

    Architecture arch;
    Normalization norm;
    std::uint64_t seed = 0;
    std::size_t count = 0;
    bool have_count = false;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line == "data") break;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        std::string v1, v2, v3;
        ls >> v1 >> v2 >> v3;
        try {
            if (key == "depth") arch.depth = std::stoi(v1);
            else if (key == "width") arch.width = std::stoi(v1);
            else if (key == "skip_layer") arch.skip_layer = std::stoi(v1);
            else if (key == "activation") arch.activation = parse_activation(v1);
            else if (key == "sharpness") arch.sharpness = parse_hexfloat(v1);
            else if (key == "geometric_init") arch.geometric_init = v1 == "1";
            else if (key == "init_radius") arch.init_radius = parse_hexfloat(v1);
            else if (key == "seed") seed = std::stoull(v1);
            else if (key == "center") norm.center = {parse_hexfloat(v1), parse_hexfloat(v2), parse_hexfloat(v3)};
            else if (key == "scale") norm.scale = parse_hexfloat(v1);
            else if (key == "parameters") { count = std::stoull(v1); have_count = true; }
            else throw ParseError("unknown checkpoint key '" + key + "'", lineno);
        } catch (const std::invalid_argument&) {
            throw ParseError("bad value for '" + key + "'", lineno);
        } catch (const std::out_of_range&) {
            throw ParseError("bad value for '" + key + "'", lineno);
        }
    }
    if (line != "data" || !have_count) throw ParseError("truncated checkpoint header", lineno);
    if (count != parameter_count(arch) && arch.depth > 0)
        throw ParseError("parameter count does not match architecture", lineno);

    Eigen::VectorXd params(static_cast<Eigen::Index>(count));
    in.read(reinterpret_cast<char*>(params.data()), static_cast<std::streamsize>(count * sizeof(double)));
    if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
        throw ParseError("truncated checkpoint payload", lineno);
    return {SdfNetwork(arch, std::move(params), seed), norm};
}

} // namespace lsa
