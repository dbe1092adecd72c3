#include "diffcore.hpp"

#include <cmath>
#include <numbers>

namespace lsa {

namespace {

constexpr double kInvSqrt2 = 1.0 / std::numbers::sqrt2;
constexpr Eigen::Index kChunk = 1024;

// Per-layer state kept for the reverse sweep. Columns are laid out as
// [values | d/dx | d/dy | d/dz], each block B wide.
struct LayerCache {
    Eigen::MatrixXd input;  // in x 4B
    Eigen::MatrixXd pre;    // out x 4B
};

struct ForwardResult {
    std::vector<LayerCache> layers;
    Eigen::RowVectorXd value;  // 1 x B
    Eigen::MatrixXd gradient;  // 3 x B
};

// sigma(z), sigma'(z), sigma''(z)
inline void activation_derivs(Activation act, double k, double z, double& s0, double& s1, double& s2) {
    if (act == Activation::Sine) {
        const double s = std::sin(k * z);
        const double c = std::cos(k * z);
        s0 = s;
        s1 = k * c;
        s2 = -k * k * s;
        return;
    }
    // softplus with sharpness k: log(1 + exp(kz)) / k
    const double t = k * z;
    const double e = std::exp(-std::abs(t));
    const double sig = t >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
    s0 = (std::max(t, 0.0) + std::log1p(e)) / k;
    s1 = sig;
    s2 = k * sig * (1.0 - sig);
}

Eigen::MatrixXd input_block(const Eigen::MatrixXd& x) {
    const Eigen::Index b = x.cols();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(3, 4 * b);
    h.leftCols(b) = x;
    for (int c = 0; c < 3; ++c) h.row(c).segment((c + 1) * b, b).setOnes();
    return h;
}

ForwardResult run_forward(const SdfNetwork& net, const Eigen::MatrixXd& x, bool keep) {
    const auto& arch = net.architecture();
    const Eigen::Index b = x.cols();
    const int n_layers = net.layer_count();
    ForwardResult res;
    if (keep) res.layers.resize(static_cast<std::size_t>(n_layers));

    const Eigen::MatrixXd xin = input_block(x);
    Eigen::MatrixXd h = xin;
    for (int l = 0; l < n_layers; ++l) {
        const auto& shape = net.layer(l);
        if (shape.skip_input) {
            Eigen::MatrixXd cat(h.rows() + 3, h.cols());
            cat.topRows(h.rows()) = h * kInvSqrt2;
            cat.bottomRows(3) = xin * kInvSqrt2;
            h = std::move(cat);
        }
        Eigen::MatrixXd pre(shape.out, 4 * b);
        pre.noalias() = net.weight(l) * h;
        pre.leftCols(b).colwise() += net.bias(l);

        if (l + 1 == n_layers) {
            res.value = pre.leftCols(b);
            res.gradient.resize(3, b);
            for (int c = 0; c < 3; ++c) res.gradient.row(c) = pre.block(0, (c + 1) * b, 1, b);
        } else {
            Eigen::MatrixXd next(shape.out, 4 * b);
            for (Eigen::Index j = 0; j < b; ++j) {
                for (Eigen::Index i = 0; i < shape.out; ++i) {
                    double s0, s1, s2;
                    activation_derivs(arch.activation, arch.sharpness, pre(i, j), s0, s1, s2);
                    next(i, j) = s0;
                    next(i, b + j) = s1 * pre(i, b + j);
                    next(i, 2 * b + j) = s1 * pre(i, 2 * b + j);
                    next(i, 3 * b + j) = s1 * pre(i, 3 * b + j);
                }
            }
            if (keep) {
                res.layers[static_cast<std::size_t>(l)].input = std::move(h);
                res.layers[static_cast<std::size_t>(l)].pre = std::move(pre);
            }
            h = std::move(next);
            continue;
        }
        if (keep) {
            res.layers[static_cast<std::size_t>(l)].input = std::move(h);
            res.layers[static_cast<std::size_t>(l)].pre = std::move(pre);
        }
    }
    return res;
}

// Vector-Jacobian product of (theta, x) -> (f, grad f) at a cached batch.
// Accumulates into theta_bar and x_bar (3 x B).
void run_backward(const SdfNetwork& net, const std::vector<LayerCache>& cache, const Eigen::RowVectorXd& f_bar,
                  const Eigen::MatrixXd& g_bar, Eigen::VectorXd& theta_bar, Eigen::MatrixXd& x_bar) {
    const auto& arch = net.architecture();
    const Eigen::Index b = f_bar.cols();
    const int n_layers = net.layer_count();

    // Adjoint of the output layer's pre-activation block.
    Eigen::MatrixXd pre_bar(1, 4 * b);
    pre_bar.leftCols(b) = f_bar;
    for (int c = 0; c < 3; ++c) pre_bar.block(0, (c + 1) * b, 1, b) = g_bar.row(c);

    for (int l = n_layers - 1; l >= 0; --l) {
        const auto& shape = net.layer(l);
        const auto& lc = cache[static_cast<std::size_t>(l)];
        Eigen::Map<Eigen::MatrixXd> w_bar(theta_bar.data() + shape.weight_offset, shape.out, shape.in);
        Eigen::Map<Eigen::VectorXd> b_bar(theta_bar.data() + shape.bias_offset, shape.out);
        w_bar.noalias() += pre_bar * lc.input.transpose();
        b_bar += pre_bar.leftCols(b).rowwise().sum();

        Eigen::MatrixXd h_bar(shape.in, 4 * b);
        h_bar.noalias() = net.weight(l).transpose() * pre_bar;

        if (shape.skip_input) {
            const Eigen::Index prev = shape.in - 3;
            x_bar += h_bar.block(prev, 0, 3, b) * kInvSqrt2;
            Eigen::MatrixXd top = h_bar.topRows(prev) * kInvSqrt2;
            h_bar = std::move(top);
        }
        if (l == 0) {
            x_bar += h_bar.leftCols(b);
            break;
        }

        // h_bar is the adjoint of layer l-1's activated output block.
        const auto& prev_pre = cache[static_cast<std::size_t>(l - 1)].pre;
        const Eigen::Index out = prev_pre.rows();
        pre_bar.resize(out, 4 * b);
        for (Eigen::Index j = 0; j < b; ++j) {
            for (Eigen::Index i = 0; i < out; ++i) {
                double s0, s1, s2;
                activation_derivs(arch.activation, arch.sharpness, prev_pre(i, j), s0, s1, s2);
                double acc = 0.0;
                for (int c = 1; c <= 3; ++c) {
                    const double t_bar = h_bar(i, c * b + j);
                    pre_bar(i, c * b + j) = s1 * t_bar;
                    acc += t_bar * prev_pre(i, c * b + j);
                }
                pre_bar(i, j) = s1 * h_bar(i, j) + s2 * acc;
            }
        }
    }
}

void check_network(const SdfNetwork& net) {
    if (net.architecture().depth > 0 && !is_twice_differentiable(net.architecture().activation))
        throw ConfigError("activation: non-smooth activation cannot be used in gradient paths");
    if (auto i = net.first_nonfinite_parameter(); i >= 0)
        throw NumericError("non-finite network parameter at index " + std::to_string(i));
}

Tape* common_tape(const Var& a, const Var& b) {
    if (a.tape() && b.tape() && a.tape() != b.tape())
        throw GraphError("operands recorded on different tapes");
    return a.tape() ? a.tape() : b.tape();
}

} // namespace

struct Tape::Block {
    std::vector<std::int32_t> inputs;  // 3 per point, -1 for constants
    std::int32_t out_start = 0;
    Eigen::Index size = 0;
    std::vector<LayerCache> cache;
};

Tape::Tape(const SdfNetwork& net) : net_(net) { check_network(net); }

Tape::~Tape() = default;

Var Tape::unary(double value, const Var& a, double da) {
    if (a.is_constant()) return Var(value);
    check_owner(a);
    nodes_.push_back({a.index(), -1, da, 0.0});
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1), value);
}

Var Tape::binary(double value, const Var& a, double da, const Var& b, double db) {
    if (a.is_constant()) return unary(value, b, db);
    if (b.is_constant()) return unary(value, a, da);
    check_owner(a);
    check_owner(b);
    nodes_.push_back({a.index(), b.index(), da, db});
    return Var(this, static_cast<std::int32_t>(nodes_.size() - 1), value);
}

void Tape::check_owner(const Var& v) const {
    if (v.tape() != this) throw GraphError("variable belongs to a different tape");
}

std::vector<FieldVars> Tape::eval(std::span<const Var3> points) {
    const auto b = static_cast<Eigen::Index>(points.size());
    std::vector<FieldVars> out;
    if (b == 0) return out;

    auto block = std::make_unique<Block>();
    block->inputs.reserve(3 * points.size());
    Eigen::MatrixXd x(3, b);
    for (Eigen::Index j = 0; j < b; ++j) {
        const Var3& p = points[static_cast<std::size_t>(j)];
        const Var* coords[3] = {&p.x, &p.y, &p.z};
        for (int c = 0; c < 3; ++c) {
            const Var& v = *coords[c];
            if (!v.is_constant()) check_owner(v);
            block->inputs.push_back(v.is_constant() ? -1 : v.index());
            x(c, j) = v.value();
        }
    }
    if (!x.allFinite()) {
        for (Eigen::Index j = 0; j < b; ++j)
            if (!x.col(j).allFinite()) throw NumericError("non-finite input point at index " + std::to_string(j));
    }

    ForwardResult fwd = run_forward(net_, x, true);
    block->cache = std::move(fwd.layers);
    block->size = b;
    block->out_start = static_cast<std::int32_t>(nodes_.size());
    nodes_.resize(nodes_.size() + static_cast<std::size_t>(4 * b));

    out.reserve(points.size());
    for (Eigen::Index j = 0; j < b; ++j) {
        const std::int32_t base = block->out_start + static_cast<std::int32_t>(4 * j);
        FieldVars fv;
        fv.value = Var(this, base, fwd.value(j));
        fv.gradient = Var3(Var(this, base + 1, fwd.gradient(0, j)), Var(this, base + 2, fwd.gradient(1, j)),
                           Var(this, base + 3, fwd.gradient(2, j)));
        out.push_back(fv);
    }
    blocks_.push_back(std::move(block));
    return out;
}

std::vector<FieldVars> Tape::eval(std::span<const Vec3> points) {
    std::vector<Var3> vars;
    vars.reserve(points.size());
    for (const auto& p : points) vars.emplace_back(p);
    return eval(vars);
}

ParamGradient Tape::gradient(const Var& loss) const {
    ParamGradient theta_bar = ParamGradient::Zero(static_cast<Eigen::Index>(net_.parameter_count()));
    if (loss.is_constant()) return theta_bar;
    if (loss.tape() != this) throw GraphError("loss was recorded on a different tape");

    std::vector<double> adj(nodes_.size(), 0.0);
    adj[static_cast<std::size_t>(loss.index())] = 1.0;

    auto bi = static_cast<std::ptrdiff_t>(blocks_.size()) - 1;
    for (std::ptrdiff_t i = loss.index(); i >= 0;) {
        while (bi >= 0 && blocks_[static_cast<std::size_t>(bi)]->out_start > i) --bi;
        if (bi >= 0) {
            const Block& blk = *blocks_[static_cast<std::size_t>(bi)];
            if (i < blk.out_start + 4 * blk.size) {
                Eigen::RowVectorXd f_bar(blk.size);
                Eigen::MatrixXd g_bar(3, blk.size);
                for (Eigen::Index j = 0; j < blk.size; ++j) {
                    const auto base = static_cast<std::size_t>(blk.out_start + 4 * j);
                    f_bar(j) = adj[base];
                    for (int c = 0; c < 3; ++c) g_bar(c, j) = adj[base + 1 + static_cast<std::size_t>(c)];
                }
                if (!f_bar.isZero(0.0) || !g_bar.isZero(0.0)) {
                    Eigen::MatrixXd x_bar = Eigen::MatrixXd::Zero(3, blk.size);
                    run_backward(net_, blk.cache, f_bar, g_bar, theta_bar, x_bar);
                    for (Eigen::Index j = 0; j < blk.size; ++j)
                        for (int c = 0; c < 3; ++c) {
                            const auto in = blk.inputs[static_cast<std::size_t>(3 * j + c)];
                            if (in >= 0) adj[static_cast<std::size_t>(in)] += x_bar(c, j);
                        }
                }
                i = blk.out_start - 1;
                --bi;
                continue;
            }
        }
        const double a = adj[static_cast<std::size_t>(i)];
        if (a != 0.0) {
            const Node& n = nodes_[static_cast<std::size_t>(i)];
            if (n.a >= 0) adj[static_cast<std::size_t>(n.a)] += a * n.da;
            if (n.b >= 0) adj[static_cast<std::size_t>(n.b)] += a * n.db;
        }
        --i;
    }
    return theta_bar;
}

Var operator+(const Var& a, const Var& b) {
    Tape* t = common_tape(a, b);
    const double v = a.value() + b.value();
    return t ? t->binary(v, a, 1.0, b, 1.0) : Var(v);
}

Var operator-(const Var& a, const Var& b) {
    Tape* t = common_tape(a, b);
    const double v = a.value() - b.value();
    return t ? t->binary(v, a, 1.0, b, -1.0) : Var(v);
}

Var operator*(const Var& a, const Var& b) {
    Tape* t = common_tape(a, b);
    const double v = a.value() * b.value();
    return t ? t->binary(v, a, b.value(), b, a.value()) : Var(v);
}

Var operator/(const Var& a, const Var& b) {
    Tape* t = common_tape(a, b);
    const double v = a.value() / b.value();
    return t ? t->binary(v, a, 1.0 / b.value(), b, -v / b.value()) : Var(v);
}

Var operator-(const Var& a) { return a.tape() ? a.tape()->unary(-a.value(), a, -1.0) : Var(-a.value()); }

Var sqrt(const Var& a) {
    const double v = std::sqrt(a.value());
    return a.tape() ? a.tape()->unary(v, a, 0.5 / v) : Var(v);
}

Var exp(const Var& a) {
    const double v = std::exp(a.value());
    return a.tape() ? a.tape()->unary(v, a, v) : Var(v);
}

Var abs(const Var& a) {
    const double x = a.value();
    const double d = x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0);
    return a.tape() ? a.tape()->unary(std::abs(x), a, d) : Var(std::abs(x));
}

Var square(const Var& a) {
    const double x = a.value();
    return a.tape() ? a.tape()->unary(x * x, a, 2.0 * x) : Var(x * x);
}

Var3 operator+(const Var3& a, const Var3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
Var3 operator-(const Var3& a, const Var3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
Var3 operator*(const Var3& a, const Var& s) { return {a.x * s, a.y * s, a.z * s}; }
Var dot(const Var3& a, const Var3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
Var squared_norm(const Var3& a) { return dot(a, a); }
Var norm(const Var3& a) { return sqrt(squared_norm(a)); }

std::vector<FieldSample> eval_field(const SdfNetwork& net, std::span<const Vec3> points) {
    check_network(net);
    for (std::size_t i = 0; i < points.size(); ++i)
        if (!points[i].allFinite()) throw NumericError("non-finite input point at index " + std::to_string(i));

    std::vector<FieldSample> out;
    out.reserve(points.size());
    const auto n = static_cast<Eigen::Index>(points.size());
    for (Eigen::Index start = 0; start < n; start += kChunk) {
        const Eigen::Index b = std::min(kChunk, n - start);
        Eigen::MatrixXd x(3, b);
        for (Eigen::Index j = 0; j < b; ++j) x.col(j) = points[static_cast<std::size_t>(start + j)];
        const ForwardResult fwd = run_forward(net, x, false);
        for (Eigen::Index j = 0; j < b; ++j) out.push_back({fwd.value(j), fwd.gradient.col(j)});
    }
    return out;
}

std::vector<double> eval_values(const SdfNetwork& net, std::span<const Vec3> points) {
    check_network(net);
    const auto& arch = net.architecture();
    std::vector<double> out;
    out.reserve(points.size());
    const auto n = static_cast<Eigen::Index>(points.size());
    for (Eigen::Index start = 0; start < n; start += kChunk) {
        const Eigen::Index b = std::min(kChunk, n - start);
        Eigen::MatrixXd x(3, b);
        for (Eigen::Index j = 0; j < b; ++j) {
            x.col(j) = points[static_cast<std::size_t>(start + j)];
            if (!x.col(j).allFinite())
                throw NumericError("non-finite input point at index " + std::to_string(start + j));
        }
        Eigen::MatrixXd h = x;
        for (int l = 0; l < net.layer_count(); ++l) {
            if (net.layer(l).skip_input) {
                Eigen::MatrixXd cat(h.rows() + 3, b);
                cat.topRows(h.rows()) = h * kInvSqrt2;
                cat.bottomRows(3) = x * kInvSqrt2;
                h = std::move(cat);
            }
            Eigen::MatrixXd pre(net.layer(l).out, b);
            pre.noalias() = net.weight(l) * h;
            pre.colwise() += net.bias(l);
            if (l + 1 < net.layer_count()) {
                pre = pre.unaryExpr([&](double z) {
                    double s0, s1, s2;
                    activation_derivs(arch.activation, arch.sharpness, z, s0, s1, s2);
                    return s0;
                });
            }
            h = std::move(pre);
        }
        for (Eigen::Index j = 0; j < b; ++j) out.push_back(h(0, j));
    }
    return out;
}

ParamGradient loss_param_gradients(const SdfNetwork& net, const Var& loss) {
    if (loss.is_constant()) return ParamGradient::Zero(static_cast<Eigen::Index>(net.parameter_count()));
    if (&loss.tape()->network() != &net) throw GraphError("loss graph references a different network instance");
    return loss.tape()->gradient(loss);
}

} // namespace lsa
