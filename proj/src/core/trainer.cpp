#include "trainer.hpp"

#include "diffcore.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

namespace lsa {

namespace {

constexpr const char* kStateMagic = "lsalign-trainer 1";

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

std::uint64_t batch_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x5EEDBA7C4ULL); }

std::string hex(double v) {
    std::ostringstream s;
    s << std::hexfloat << v;
    return s.str();
}

double parse_hex(const std::string& tok, std::size_t lineno) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') throw ParseError("bad number '" + tok + "'", lineno);
    return v;
}

void write_vector(std::ostream& out, const Eigen::VectorXd& v) {
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

Eigen::VectorXd read_vector(std::istream& in, std::size_t n, const std::filesystem::path& path) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(n));
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw ParseError("truncated trainer state " + path.string(), 0);
    return v;
}

void write_atomically(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write " + tmp.string());
        body(out);
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot rename " + tmp.string() + ": " + ec.message());
}

const PointCloud& validated(const PointCloud& pc, const TrainConfig& config) {
    config.validate();
    if (pc.empty()) throw EmptyError("cannot train on an empty point cloud");
    return pc;
}

} // namespace

std::uint64_t probe_seed(std::uint64_t seed) { return splitmix64(seed ^ 0x9B0BE5E7ULL); }

void TrainConfig::validate() const {
    if (iterations < 1) throw ConfigError("iterations: must be >= 1 (got " + std::to_string(iterations) + ")");
    if (batch_size < 1) throw ConfigError("batch: must be >= 1 (got " + std::to_string(batch_size) + ")");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("lr: must be a finite value >= 0 (got " + std::to_string(learning_rate) + ")");
    if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1: must lie in (0,1)");
    if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2: must lie in (0,1)");
    if (!(epsilon > 0.0)) throw ConfigError("adam_eps: must be > 0");
    if (log_every < 1) throw ConfigError("log_every: must be >= 1");
    if (probe_size < 1) throw ConfigError("probe: must be >= 1");
    if (sigma_neighbor < 1) throw ConfigError("sigma_neighbor: must be >= 1");
    architecture.validate();
    loss.validate();
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
    write_atomically(path, [&](std::ostream& out) {
        out << "step,baseline,alignment,mean_beta,mean_consistency\n" << std::setprecision(17);
        for (const auto& r : records)
            out << r.step << ',' << r.baseline << ',' << r.alignment << ',' << r.mean_beta << ','
                << r.mean_consistency << '\n';
    });
}

TrainHistory TrainHistory::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open history " + path.string());
    TrainHistory h;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (lineno == 1) {
            if (line != "step,baseline,alignment,mean_beta,mean_consistency")
                throw ParseError("unexpected history header", lineno);
            continue;
        }
        if (line.empty()) continue;
        std::istringstream s(line);
        std::string field;
        std::vector<std::string> f;
        while (std::getline(s, field, ',')) f.push_back(field);
        if (f.size() != 5) throw ParseError("history row needs 5 fields", lineno);
        HistoryRecord r;
        r.step = std::stoull(f[0]);
        r.baseline = std::strtod(f[1].c_str(), nullptr);
        r.alignment = std::strtod(f[2].c_str(), nullptr);
        r.mean_beta = std::strtod(f[3].c_str(), nullptr);
        r.mean_consistency = std::strtod(f[4].c_str(), nullptr);
        h.records.push_back(r);
    }
    return h;
}

Adam::Adam(std::size_t n, double beta1, double beta2, double epsilon)
    : m_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      v_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
      beta1_(beta1), beta2_(beta2), epsilon_(epsilon) {}

void Adam::update(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr) {
    if (grad.size() != params.size() || m_.size() != params.size())
        throw ConfigError("optimizer: gradient size does not match parameters");
    ++t_;
    m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
    v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + epsilon_);
}

void Adam::restore(Eigen::VectorXd m, Eigen::VectorXd v, std::uint64_t t) {
    m_ = std::move(m);
    v_ = std::move(v);
    t_ = t;
}

double learning_rate_at(const TrainConfig& config, std::size_t step) {
    if (!config.cosine_decay) return config.learning_rate;
    const double progress = static_cast<double>(step) / static_cast<double>(config.iterations);
    return config.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

LossReport train_step(SdfNetwork& net, Adam& optimizer, const QuerySampler& sampler, const LossConfig& loss,
                      std::size_t batch_size, double lr, std::mt19937_64& rng, std::size_t step_index) {
    const QueryBatch batch = sampler.sample(batch_size, rng);
    std::optional<QueryBatch> second;
    if (loss.independent_alignment_batch) second = sampler.sample(batch_size, rng);

    LossReport report;
    ParamGradient grad;
    try {
        Tape tape(net);
        const TotalLoss total = total_loss(tape, batch, sampler.cloud(), loss, second ? &*second : nullptr);
        if (!std::isfinite(total.report.total)) throw NumericError("non-finite loss");
        grad = tape.gradient(total.loss);
        if (!grad.allFinite()) throw NumericError("non-finite gradient");
        report = total.report;
    } catch (const NumericError& e) {
        throw NumericError(std::string(e.what()) + " at step " + std::to_string(step_index));
    }
    optimizer.update(net.mutable_parameters(), grad, lr);
    return report;
}

Trainer::Trainer(const PointCloud& normalized, const TrainConfig& config, std::filesystem::path out_dir)
    : pc_(&normalized),
      config_(config),
      out_dir_(std::move(out_dir)),
      sampler_(validated(normalized, config), config.sigma_neighbor),
      net_(init_network(config.architecture, config.seed)),
      adam_(net_.parameter_count(), config.beta1, config.beta2, config.epsilon),
      rng_(batch_seed(config.seed)),
      alpha_(config.loss.alpha) {
    std::mt19937_64 probe_rng(probe_seed(config.seed));
    probe_ = sampler_.sample(config.probe_size, probe_rng).queries;
    if (!out_dir_.empty()) std::filesystem::create_directories(out_dir_);
}

void Trainer::write_checkpoint() const {
    if (out_dir_.empty()) return;
    save_checkpoint(out_dir_ / "model.ckpt", net_, pc_->normalization());
    write_atomically(out_dir_ / "trainer.state", [&](std::ostream& out) {
        out << kStateMagic << '\n'
            << "step " << step_ << '\n'
            << "alpha " << hex(alpha_) << '\n'
            << "balanced " << (balanced_ ? 1 : 0) << '\n'
            << "adam_steps " << adam_.steps() << '\n'
            << "parameters " << net_.parameter_count() << '\n'
            << "rng " << rng_ << '\n'
            << "data\n";
        write_vector(out, adam_.first_moment());
        write_vector(out, adam_.second_moment());
    });
    history_.write_csv(out_dir_ / "history.csv");
}

Trainer Trainer::resume(const PointCloud& normalized, const TrainConfig& config, const std::filesystem::path& out_dir) {
    Trainer t(normalized, config, out_dir);
    Checkpoint ck = load_checkpoint(out_dir / "model.ckpt");
    if (ck.network.parameter_count() != t.net_.parameter_count())
        throw ConfigError("resume: checkpoint architecture does not match the configuration");

    const auto state_path = out_dir / "trainer.state";
    std::ifstream in(state_path, std::ios::binary);
    if (!in) throw IoError("cannot open trainer state " + state_path.string());
    std::string line;
    std::getline(in, line);
    if (line != kStateMagic) throw ParseError("not a trainer state file: " + state_path.string(), 1);
    std::size_t lineno = 1, count = 0;
    std::uint64_t adam_steps = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line == "data") break;
        const auto sp = line.find(' ');
        const std::string key = line.substr(0, sp);
        const std::string val = sp == std::string::npos ? "" : line.substr(sp + 1);
        if (key == "step") t.step_ = std::stoull(val);
        else if (key == "alpha") t.alpha_ = parse_hex(val, lineno);
        else if (key == "balanced") t.balanced_ = val == "1";
        else if (key == "adam_steps") adam_steps = std::stoull(val);
        else if (key == "parameters") count = std::stoull(val);
        else if (key == "rng") {
            std::istringstream s(val);
            s >> t.rng_;
            if (!s) throw ParseError("bad rng state", lineno);
        } else throw ParseError("unknown trainer state key '" + key + "'", lineno);
    }
    if (count != t.net_.parameter_count()) throw ParseError("trainer state parameter count mismatch", lineno);
    auto m = read_vector(in, count, state_path);
    auto v = read_vector(in, count, state_path);
    t.adam_.restore(std::move(m), std::move(v), adam_steps);
    t.net_ = std::move(ck.network);

    const auto hist_path = out_dir / "history.csv";
    if (std::filesystem::exists(hist_path)) {
        for (const auto& r : TrainHistory::read_csv(hist_path).records)
            if (r.step < t.step_) t.history_.records.push_back(r);
    }
    return t;
}

void Trainer::run(std::optional<std::size_t> until) {
    const std::size_t stop = std::min(until.value_or(config_.iterations), config_.iterations);
    LossConfig loss = config_.loss;
    try {
        while (step_ < stop) {
            if (config_.loss.auto_balance && !balanced_) {
                // Measure both terms once and weight them equally from here on.
                LossConfig probe_loss = loss;
                probe_loss.alpha = 0.0;
                const QueryBatch batch = sampler_.sample(config_.batch_size, rng_);
                Tape tape(net_);
                const auto measured = total_loss(tape, batch, *pc_, probe_loss);
                if (measured.report.alignment > 0.0 && std::isfinite(measured.report.alignment))
                    alpha_ = measured.report.baseline / measured.report.alignment;
                balanced_ = true;
            }
            loss.alpha = alpha_;

            const bool log = step_ % config_.log_every == 0;
            double probe_mean = 0.0;
            if (log) probe_mean = consistency_stats(net_, probe_).mean;
            const LossReport report = train_step(net_, adam_, sampler_, loss, config_.batch_size,
                                                 learning_rate_at(config_, step_), rng_, step_);
            if (log) {
                history_.records.push_back({step_, report.baseline, report.alignment, report.mean_beta, probe_mean});
                if (on_log) on_log(history_.records.back());
            }
            ++step_;
            if (config_.checkpoint_every > 0 && step_ % config_.checkpoint_every == 0) write_checkpoint();
        }
    } catch (const NumericError&) {
        if (!out_dir_.empty()) history_.write_csv(out_dir_ / "history.csv");
        throw;
    }
}

FitResult Trainer::finish() {
    run();
    LossConfig loss = config_.loss;
    loss.alpha = alpha_;
    const QueryBatch batch = sampler_.sample(config_.batch_size, rng_);
    std::optional<QueryBatch> second;
    if (loss.independent_alignment_batch) second = sampler_.sample(config_.batch_size, rng_);
    Tape tape(net_);
    const auto final_loss = total_loss(tape, batch, *pc_, loss, second ? &*second : nullptr);
    const auto probe = consistency_stats(net_, probe_);
    if (history_.records.empty() || history_.records.back().step < step_) {
        history_.records.push_back({step_, final_loss.report.baseline, final_loss.report.alignment,
                                    final_loss.report.mean_beta, probe.mean});
        if (on_log) on_log(history_.records.back());
    }
    write_checkpoint();
    return {net_, pc_->normalization(), history_, probe, alpha_};
}

FitResult fit(const PointCloud& pc, const TrainConfig& config, const std::filesystem::path& out_dir) {
    config.validate();
    if (pc.empty()) throw EmptyError("cannot fit an empty point cloud");
    const PointCloud normalized = normalize(pc).cloud;
    Trainer trainer(normalized, config, out_dir);
    return trainer.finish();
}

} // namespace lsa
