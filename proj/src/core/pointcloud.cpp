#include "pointcloud.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace lsa {

PointCloud::PointCloud(std::vector<Vec3> positions, std::vector<Vec3> normals, const Normalization& normalization)
    : positions_(std::move(positions)), normals_(std::move(normals)), normalization_(normalization) {
    if (!normals_.empty() && normals_.size() != positions_.size())
        throw ConfigError("normals: count does not match positions");
    index_ = std::make_shared<KdTree>(positions_);
}

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        const std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) out.push_back(line.substr(start, i - start));
    }
    return out;
}

double parse_real(std::string_view tok, std::size_t lineno) {
    double v = 0.0;
    const char* first = tok.data();
    if (!tok.empty() && tok.front() == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
    if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
        throw ParseError("expected a real number, got '" + std::string(tok) + "'", lineno);
    return v;
}

Vec3 unit_normal(const Vec3& n, std::size_t lineno) {
    const double len = n.norm();
    if (!(len > 0.0)) throw ParseError("zero-length normal", lineno);
    return n / len;
}

PointCloud load_xyz(std::istream& in) {
    std::vector<Vec3> pos, nrm;
    std::string line;
    std::size_t lineno = 0;
    std::size_t columns = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto tok = split_ws(line);
        if (tok.empty() || tok.front().front() == '#') continue;
        if (tok.size() != 3 && tok.size() != 6)
            throw ParseError("expected 3 or 6 columns, got " + std::to_string(tok.size()), lineno);
        if (columns == 0) columns = tok.size();
        if (tok.size() != columns) throw ParseError("inconsistent column count", lineno);
        pos.emplace_back(parse_real(tok[0], lineno), parse_real(tok[1], lineno), parse_real(tok[2], lineno));
        if (columns == 6)
            nrm.push_back(unit_normal(
                {parse_real(tok[3], lineno), parse_real(tok[4], lineno), parse_real(tok[5], lineno)}, lineno));
    }
    if (pos.empty()) throw EmptyError("point cloud is empty");
    return PointCloud(std::move(pos), std::move(nrm));
}

PointCloud load_ply_ascii(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    auto next = [&]() -> bool {
        if (!std::getline(in, line)) return false;
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        return true;
    };
    if (!next() || line != "ply") throw ParseError("missing 'ply' magic", 1);

    struct Element {
        std::string name;
        std::size_t count = 0;
        std::vector<std::string> props;
        bool has_list = false;
    };
    std::vector<Element> elements;
    bool ascii = false;
    for (;;) {
        if (!next()) throw ParseError("unterminated header", lineno);
        const auto tok = split_ws(line);
        if (tok.empty() || tok[0] == "comment" || tok[0] == "obj_info") continue;
        if (tok[0] == "end_header") break;
        if (tok[0] == "format") {
            if (tok.size() < 2) throw ParseError("bad format line", lineno);
            if (tok[1] != "ascii") throw ParseError("only ascii PLY is supported", lineno);
            ascii = true;
        } else if (tok[0] == "element") {
            if (tok.size() != 3) throw ParseError("bad element line", lineno);
            Element e;
            e.name = std::string(tok[1]);
            e.count = static_cast<std::size_t>(parse_real(tok[2], lineno));
            elements.push_back(std::move(e));
        } else if (tok[0] == "property") {
            if (elements.empty() || tok.size() < 3) throw ParseError("property outside element", lineno);
            if (tok[1] == "list") {
                elements.back().has_list = true;
                elements.back().props.emplace_back(tok.back());
            } else {
                elements.back().props.emplace_back(tok[2]);
            }
        } else {
            throw ParseError("unexpected header line '" + line + "'", lineno);
        }
    }
    if (!ascii) throw ParseError("missing format line", lineno);

    std::vector<Vec3> pos, nrm;
    for (const auto& e : elements) {
        if (e.name != "vertex") {
            for (std::size_t i = 0; i < e.count; ++i)
                if (!next()) throw ParseError("unexpected end of file in element '" + e.name + "'", lineno);
            continue;
        }
        if (e.has_list) throw ParseError("list properties on vertices are not supported", lineno);
        auto find = [&](const char* name) -> int {
            const auto it = std::find(e.props.begin(), e.props.end(), name);
            return it == e.props.end() ? -1 : static_cast<int>(it - e.props.begin());
        };
        const int ix = find("x"), iy = find("y"), iz = find("z");
        const int inx = find("nx"), iny = find("ny"), inz = find("nz");
        if (ix < 0 || iy < 0 || iz < 0) throw ParseError("vertex element lacks x/y/z", lineno);
        const bool normals = inx >= 0 && iny >= 0 && inz >= 0;
        for (std::size_t i = 0; i < e.count; ++i) {
            if (!next()) throw ParseError("unexpected end of file in vertex data", lineno);
            const auto tok = split_ws(line);
            if (tok.size() != e.props.size())
                throw ParseError("expected " + std::to_string(e.props.size()) + " values, got " +
                                     std::to_string(tok.size()),
                                 lineno);
            auto at = [&](int k) { return parse_real(tok[static_cast<std::size_t>(k)], lineno); };
            pos.emplace_back(at(ix), at(iy), at(iz));
            if (normals) nrm.push_back(unit_normal({at(inx), at(iny), at(inz)}, lineno));
        }
    }
    if (pos.empty()) throw EmptyError("point cloud is empty");
    return PointCloud(std::move(pos), std::move(nrm));
}

} // namespace

CloudFormat cloud_format_for(const std::filesystem::path& path) {
    auto ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    if (ext == ".ply") return CloudFormat::PlyAscii;
    return CloudFormat::Xyz;
}

CloudFormat parse_cloud_format(std::string_view name) {
    if (name == "xyz") return CloudFormat::Xyz;
    if (name == "ply" || name == "ply-ascii") return CloudFormat::PlyAscii;
    throw ConfigError("format: unknown point cloud format '" + std::string(name) + "'");
}

PointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open point cloud " + path.string());
    return format == CloudFormat::Xyz ? load_xyz(in) : load_ply_ascii(in);
}

PointCloud load_point_cloud(const std::filesystem::path& path) {
    return load_point_cloud(path, cloud_format_for(path));
}

void save_point_cloud_xyz(const std::filesystem::path& path, const PointCloud& pc) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << std::setprecision(17);
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const auto& p = pc.positions()[i];
        out << p.x() << ' ' << p.y() << ' ' << p.z();
        if (pc.has_normals()) {
            const auto& n = pc.normals()[i];
            out << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
        }
        out << '\n';
    }
}

NormalizeResult normalize(const PointCloud& pc) {
    if (pc.empty()) throw EmptyError("cannot normalize an empty point cloud");
    Vec3 lo = pc.positions().front(), hi = lo;
    for (const auto& p : pc.positions()) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0.0)) throw ConfigError("point cloud is degenerate (all points identical)");

    Normalization step;
    step.center = 0.5 * (lo + hi);
    step.scale = kNormalizedExtent / extent;
    std::vector<Vec3> pos;
    pos.reserve(pc.size());
    for (const auto& p : pc.positions()) pos.push_back(step.apply(p));
    return {PointCloud(std::move(pos), pc.normals(), pc.normalization().then(step)), step};
}

PointCloud denormalize(const PointCloud& pc) {
    std::vector<Vec3> pos;
    pos.reserve(pc.size());
    for (const auto& p : pc.positions()) pos.push_back(pc.normalization().invert(p));
    return PointCloud(std::move(pos), pc.normals());
}

std::vector<Neighbor> knn(const PointCloud& pc, const Vec3& q, std::size_t k) {
    if (k > pc.size())
        throw ConfigError("k: requested " + std::to_string(k) + " neighbours from " + std::to_string(pc.size()) +
                          " points");
    return pc.index().knn(q, k);
}

QuerySampler::QuerySampler(const PointCloud& pc, std::size_t neighbor) : pc_(&pc) {
    if (pc.empty()) throw EmptyError("cannot sample queries around an empty point cloud");
    const std::size_t k = std::min(neighbor, pc.size() - 1);
    sigmas_.resize(pc.size());
    for (std::size_t i = 0; i < pc.size(); ++i) {
        // k + 1 neighbours include the point itself.
        const auto nn = pc.index().knn(pc.positions()[i], k + 1);
        // sigma > 0 even for duplicate or single-point clouds.
        sigmas_[i] = std::max(nn.back().distance, 1e-6);
    }
}

QueryBatch QuerySampler::sample(std::size_t n, std::mt19937_64& rng) const {
    if (n == 0) throw ConfigError("batch_size: must be >= 1");
    QueryBatch batch;
    batch.queries.reserve(n);
    batch.anchors.reserve(n);
    batch.sigmas.reserve(n);
    std::uniform_int_distribution<std::size_t> pick(0, pc_->size() - 1);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t src = pick(rng);
        const double sigma = sigmas_[src];
        const double dx = gauss(rng), dy = gauss(rng), dz = gauss(rng);
        const Vec3 q = pc_->positions()[src] + sigma * Vec3(dx, dy, dz);
        batch.queries.push_back(q);
        batch.anchors.push_back(pc_->index().nearest(q).index);
        batch.sigmas.push_back(sigma);
    }
    return batch;
}

QueryBatch sample_queries(const PointCloud& pc, std::size_t n, std::uint64_t seed) {
    QuerySampler sampler(pc);
    std::mt19937_64 rng(seed);
    return sampler.sample(n, rng);
}

} // namespace lsa
