#include "sdrem/dataio.hpp"

#include "sdrem/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>
#include <unordered_set>

namespace sdrem {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::vector<std::string_view> fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t p = 0;
    while (p < line.size()) {
        while (p < line.size() && (line[p] == ' ' || line[p] == '\t' || line[p] == '\r')) ++p;
        const std::size_t start = p;
        while (p < line.size() && line[p] != ' ' && line[p] != '\t' && line[p] != '\r') ++p;
        if (p > start) out.push_back(line.substr(start, p - start));
    }
    return out;
}

bool skip_line(std::string_view line)
{
    const auto first = line.find_first_not_of(" \t\r");
    return first == std::string_view::npos || line[first] == '#';
}

std::uint64_t parse_id(std::string_view s, const std::string& path, std::size_t line, const char* what)
{
    std::uint64_t v = 0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec == std::errc::result_out_of_range || (ec == std::errc{} && v >= std::numeric_limits<NodeId>::max()))
        throw ParseError(path, line, std::string(what) + " index overflow: '" + std::string(s) + "'");
    if (ec != std::errc{} || end != s.data() + s.size())
        throw ParseError(path, line, std::string("expected a non-negative integer ") + what + ", got '" +
                                         std::string(s) + "'");
    return v;
}

double parse_value(std::string_view s, const std::string& path, std::size_t line)
{
    const std::string text(s);
    char* end = nullptr;
    const double v = std::strtod(text.c_str(), &end);
    if (end != text.c_str() + text.size() || !std::isfinite(v))
        throw ParseError(path, line, "expected a finite number, got '" + text + "'");
    return v;
}

std::ifstream open_input(const fs::path& path)
{
    std::ifstream in(path);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    return in;
}

} // namespace

std::string format_number(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw std::runtime_error("cannot write " + path.string());
}

std::string read_text(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path.string(), 0, "cannot open file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

EdgeFile read_edge_file(const fs::path& path)
{
    auto in = open_input(path);
    const std::string p = path.string();
    EdgeFile out;
    std::string line;
    std::size_t lineno = 0;
    std::uint64_t max_id = 0;
    bool any = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        const auto f = fields(line);
        if (f.size() != 2) throw ParseError(p, lineno, "expected 'src<TAB>dst', got " + std::to_string(f.size()) + " fields");
        const auto src = parse_id(f[0], p, lineno, "node");
        const auto dst = parse_id(f[1], p, lineno, "node");
        max_id = std::max({max_id, src, dst});
        any = true;
        if (src == dst) {
            ++out.self_loops;
            continue;
        }
        out.edges.push_back({static_cast<NodeId>(src), static_cast<NodeId>(dst)});
    }
    out.n_nodes = any ? static_cast<std::size_t>(max_id) + 1 : 0;
    return out;
}

SparseGraph load_edges(const fs::path& path, bool undirected, std::size_t n_nodes, std::size_t* self_loops)
{
    EdgeFile f = read_edge_file(path);
    if (n_nodes != 0 && f.n_nodes > n_nodes)
        throw ParseError(path.string(), 0, "node id " + std::to_string(f.n_nodes - 1) + " >= n_nodes " +
                                               std::to_string(n_nodes));
    if (self_loops) *self_loops = f.self_loops;
    return SparseGraph(n_nodes ? n_nodes : f.n_nodes, std::move(f.edges), !undirected);
}

void save_edges(const fs::path& path, const SparseGraph& graph)
{
    std::string text;
    for (const Dyad& d : graph.edges()) text += std::to_string(d.src) + "\t" + std::to_string(d.dst) + "\n";
    write_text(path, text);
}

FeatureMatrix load_features(const fs::path& path, std::size_t n_nodes)
{
    auto in = open_input(path);
    const std::string p = path.string();
    std::vector<FeatureTriplet> triplets;
    std::set<std::pair<NodeId, std::uint32_t>> seen;
    std::size_t n_features = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (skip_line(line)) continue;
        const auto f = fields(line);
        if (f.size() != 3)
            throw ParseError(p, lineno, "expected 'node<TAB>feature<TAB>value', got " + std::to_string(f.size()) +
                                            " fields");
        const auto node = parse_id(f[0], p, lineno, "node");
        const auto feat = parse_id(f[1], p, lineno, "feature");
        const double value = parse_value(f[2], p, lineno);
        if (node >= n_nodes)
            throw ParseError(p, lineno, "node " + std::to_string(node) + " >= n_nodes " + std::to_string(n_nodes));
        if (value < 0.0) throw ParseError(p, lineno, "negative feature value " + std::string(f[2]));
        if (!seen.insert({static_cast<NodeId>(node), static_cast<std::uint32_t>(feat)}).second)
            throw ParseError(p, lineno, "repeated (node, feature) entry");
        n_features = std::max<std::size_t>(n_features, feat + 1);
        triplets.push_back({static_cast<NodeId>(node), static_cast<std::uint32_t>(feat), value});
    }
    if (triplets.empty()) return FeatureMatrix(n_nodes);
    return FeatureMatrix(n_nodes, n_features, std::move(triplets));
}

void save_features(const fs::path& path, const FeatureMatrix& features)
{
    std::string text;
    for (NodeId i = 0; i < features.n_nodes(); ++i)
        for (const auto& f : features.row(i))
            text += std::to_string(i) + "\t" + std::to_string(f.feature) + "\t" + format_number(f.value) + "\n";
    write_text(path, text);
}

Split make_split(const SparseGraph& graph, double train_ratio, int negatives_per_positive, Rng& rng)
{
    if (!(train_ratio > 0.0 && train_ratio <= 1.0)) throw std::invalid_argument("train_ratio must lie in (0, 1]");
    if (negatives_per_positive < 0) throw std::invalid_argument("negatives_per_positive must be >= 0");
    const std::size_t N = graph.n_nodes();
    const bool undirected = !graph.directed();

    std::vector<Dyad> train_edges;
    std::vector<Dyad> mask;
    Split split;
    std::vector<NodeId> row;
    std::unordered_set<NodeId> taken;

    for (NodeId i = 0; i < N; ++i) {
        row.clear();
        for (NodeId j : graph.out_neighbors(i))
            if (!undirected || j > i) row.push_back(j);
        const auto deg = static_cast<double>(row.size());
        auto n_test = static_cast<std::size_t>(std::ceil((1.0 - train_ratio) * deg - 1e-9));
        n_test = std::min(n_test, row.size());
        // Partial Fisher-Yates: the first n_test entries become the test positives.
        for (std::size_t t = 0; t < n_test; ++t) std::swap(row[t], row[t + rng.below(row.size() - t)]);
        for (std::size_t t = n_test; t < row.size(); ++t) train_edges.push_back({i, row[t]});
        if (n_test == 0) continue;

        std::vector<LabeledDyad> negatives;
        taken.clear();
        const std::size_t wanted = n_test * static_cast<std::size_t>(negatives_per_positive);
        const std::size_t degree = graph.out_neighbors(i).size();
        const std::size_t available = N - 1 - degree;
        const std::size_t n_neg = std::min(wanted, available);
        if (n_neg * 2 >= available) {
            std::vector<NodeId> pool;
            for (NodeId j = 0; j < N; ++j)
                if (j != i && !graph.has_edge(i, j)) pool.push_back(j);
            for (std::size_t t = 0; t < n_neg; ++t) {
                std::swap(pool[t], pool[t + rng.below(pool.size() - t)]);
                negatives.push_back({{i, pool[t]}, 0});
            }
        } else {
            while (negatives.size() < n_neg) {
                const auto j = static_cast<NodeId>(rng.below(N));
                if (j == i || graph.has_edge(i, j) || !taken.insert(j).second) continue;
                negatives.push_back({{i, j}, 0});
            }
        }
        for (std::size_t t = 0; t < n_test; ++t) {
            split.test.push_back({{i, row[t]}, 1});
            mask.push_back({i, row[t]});
        }
        for (const auto& n : negatives) {
            split.test.push_back(n);
            mask.push_back(n.dyad);
        }
    }
    // Undirected negatives drawn from two rows can name the same pair.
    if (undirected) {
        std::set<std::pair<NodeId, NodeId>> pairs;
        std::vector<LabeledDyad> unique;
        for (const auto& t : split.test)
            if (pairs.insert(std::minmax(t.dyad.src, t.dyad.dst)).second) unique.push_back(t);
        split.test = std::move(unique);
    }
    split.train = SparseGraph(N, std::move(train_edges), graph.directed(), std::move(mask));
    return split;
}

void RunConfig::validate() const
{
    hp.validate();
    if (!(train_ratio > 0.0 && train_ratio <= 1.0)) throw ConfigError("train_ratio: must lie in (0, 1]");
    if (negatives_per_positive < 0) throw ConfigError("negatives_per_positive: must be >= 0");
    if (threads < 1) throw ConfigError("threads: must be >= 1");
}

namespace {

template <typename T>
T get_as(const json& v, const std::string& key, const std::string& source)
{
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!v.is_boolean()) throw ConfigError("");
        } else if constexpr (std::is_same_v<T, std::string>) {
            if (!v.is_string()) throw ConfigError("");
        } else if constexpr (std::is_integral_v<T>) {
            if (!v.is_number_integer()) throw ConfigError("");
            if constexpr (std::is_unsigned_v<T>) {
                if (v.is_number_unsigned()) return v.get<T>();
                if (v.get<std::int64_t>() < 0) throw ConfigError("");
            }
        } else {
            if (!v.is_number()) throw ConfigError("");
        }
        return v.get<T>();
    } catch (const std::exception&) {
        throw ConfigError(source + ": key '" + key + "' has the wrong type or value: " + v.dump());
    }
}

} // namespace

RunConfig parse_config(const std::string& text, const std::string& source)
{
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(source + ": invalid JSON: " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(source + ": top level must be a JSON object");

    RunConfig c;
    auto& hp = c.hp;
    for (const auto& [key, v] : doc.items()) {
        auto num = [&](double& dst) { dst = get_as<double>(v, key, source); };
        if (key == "edges") c.edges = get_as<std::string>(v, key, source);
        else if (key == "features") c.features = get_as<std::string>(v, key, source);
        else if (key == "out") c.out = get_as<std::string>(v, key, source);
        else if (key == "K") hp.K = get_as<int>(v, key, source);
        else if (key == "L") hp.L = get_as<int>(v, key, source);
        else if (key == "mode") {
            try {
                hp.mode = parse_mode(get_as<std::string>(v, key, source));
            } catch (const ConfigError& e) {
                throw ConfigError(source + ": " + e.what());
            }
        }
        else if (key == "e0") num(hp.e0);
        else if (key == "f0") num(hp.f0);
        else if (key == "g0") num(hp.g0);
        else if (key == "h0") num(hp.h0);
        else if (key == "k_M") {
            if (v.is_null()) hp.k_M.reset();
            else hp.k_M = get_as<double>(v, key, source);
        }
        else if (key == "theta_M") num(hp.theta_M);
        else if (key == "k_alpha") num(hp.k_alpha);
        else if (key == "theta_alpha") num(hp.theta_alpha);
        else if (key == "k2") num(hp.k2);
        else if (key == "theta2") num(hp.theta2);
        else if (key == "k3") num(hp.k3);
        else if (key == "theta3") num(hp.theta3);
        else if (key == "iterations") hp.iterations = get_as<int>(v, key, source);
        else if (key == "burn_in") hp.burn_in = get_as<int>(v, key, source);
        else if (key == "thin") hp.thin = get_as<int>(v, key, source);
        else if (key == "seed") hp.seed = get_as<std::uint64_t>(v, key, source);
        else if (key == "split_seed") {
            if (v.is_null()) c.split_seed.reset();
            else c.split_seed = get_as<std::uint64_t>(v, key, source);
        }
        else if (key == "threads") c.threads = get_as<int>(v, key, source);
        else if (key == "train_ratio") c.train_ratio = get_as<double>(v, key, source);
        else if (key == "negatives_per_positive") c.negatives_per_positive = get_as<int>(v, key, source);
        else if (key == "undirected") c.undirected = get_as<bool>(v, key, source);
        else if (key == "keep_draws") c.keep_draws = get_as<bool>(v, key, source);
        else throw ConfigError(source + ": unknown key '" + key + "'");
    }
    return c;
}

RunConfig load_config(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError(path.string() + ": cannot open config file");
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

namespace {

json config_json(const RunConfig& c)
{
    const auto& hp = c.hp;
    json j;
    j["edges"] = c.edges;
    j["features"] = c.features;
    j["out"] = c.out;
    j["K"] = hp.K;
    j["L"] = hp.L;
    j["mode"] = std::string(to_string(hp.mode));
    j["e0"] = hp.e0;
    j["f0"] = hp.f0;
    j["g0"] = hp.g0;
    j["h0"] = hp.h0;
    j["k_M"] = hp.k_M ? json(*hp.k_M) : json(nullptr);
    j["theta_M"] = hp.theta_M;
    j["k_alpha"] = hp.k_alpha;
    j["theta_alpha"] = hp.theta_alpha;
    j["k2"] = hp.k2;
    j["theta2"] = hp.theta2;
    j["k3"] = hp.k3;
    j["theta3"] = hp.theta3;
    j["iterations"] = hp.iterations;
    j["burn_in"] = hp.burn_in;
    j["thin"] = hp.thin;
    j["seed"] = hp.seed;
    j["split_seed"] = c.split_seed ? json(*c.split_seed) : json(nullptr);
    j["threads"] = c.threads;
    j["train_ratio"] = c.train_ratio;
    j["negatives_per_positive"] = c.negatives_per_positive;
    j["undirected"] = c.undirected;
    j["keep_draws"] = c.keep_draws;
    return j;
}

} // namespace

std::string dump_config(const RunConfig& c) { return config_json(c).dump(2); }

std::string metrics_json(const EvalResult& eval, const PosteriorTrace& trace, const RunConfig& config)
{
    json j;
    if (eval.auc_defined) {
        j["auc"] = eval.auc;
    } else {
        j["auc"] = nullptr;
        j["auc_note"] = "test set lacks positive or negative dyads; AUC undefined";
    }
    if (eval.n_test_pos + eval.n_test_neg > 0)
        j["mean_nll"] = eval.mean_nll;
    else
        j["mean_nll"] = nullptr;
    j["n_retained"] = trace.n_retained;
    j["n_test_pos"] = eval.n_test_pos;
    j["n_test_neg"] = eval.n_test_neg;
    j["nll_clamp"] = kNllClamp;
    j["seed"] = config.hp.seed;
    j["split_seed"] = config.effective_split_seed();
    j["mean_latent_counts"] = trace.mean_latent_counts();
    // Output location and thread count never change results; leaving them
    // out keeps metrics of equivalent runs byte-identical.
    json cfg = config_json(config);
    cfg.erase("threads");
    cfg.erase("out");
    cfg["split_seed"] = config.effective_split_seed();
    j["config"] = cfg;
    return j.dump(2) + "\n";
}

namespace {

template <typename T>
void write_csv(const fs::path& path, const Matrix<T>& m)
{
    std::string text;
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t c = 0; c < m.cols(); ++c) {
            if (c) text += ',';
            if constexpr (std::is_floating_point_v<T>)
                text += format_number(m(r, c));
            else
                text += std::to_string(m(r, c));
        }
        text += '\n';
    }
    write_text(path, text);
}

} // namespace

void write_matrix_csv(const fs::path& path, const Matrix<double>& m) { write_csv(path, m); }
void write_matrix_csv(const fs::path& path, const Matrix<Count>& m) { write_csv(path, m); }

// ---------------------------------------------------------------------------
// state.bin: "SDREMBIN" magic, u32 version, then tagged sections
// (4-byte tag, u64 payload length, payload). Integers and doubles are stored
// in host byte order.

namespace {

constexpr char kMagic[8] = {'S', 'D', 'R', 'E', 'M', 'B', 'I', 'N'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    template <typename T>
    void pod(const T& v)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        const auto* p = reinterpret_cast<const char*>(&v);
        buf_.append(p, sizeof(T));
    }
    template <typename T>
    void vec(const std::vector<T>& v)
    {
        pod<std::uint64_t>(v.size());
        if (!v.empty()) buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
    }
    template <typename T>
    void mat(const Matrix<T>& m)
    {
        pod<std::uint64_t>(m.rows());
        pod<std::uint64_t>(m.cols());
        buf_.append(reinterpret_cast<const char*>(m.data().data()), m.size() * sizeof(T));
    }
    void str(const std::string& s)
    {
        pod<std::uint64_t>(s.size());
        buf_ += s;
    }
    std::string& bytes() { return buf_; }

private:
    std::string buf_;
};

class Reader {
public:
    Reader(std::string_view data, std::string path) : data_(data), path_(std::move(path)) {}

    template <typename T>
    T pod()
    {
        T v;
        need(sizeof(T));
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    template <typename T>
    std::vector<T> vec()
    {
        const auto n = pod<std::uint64_t>();
        need_elems(n, sizeof(T));
        std::vector<T> v(n);
        if (n) std::memcpy(v.data(), data_.data() + pos_, n * sizeof(T));
        pos_ += n * sizeof(T);
        return v;
    }
    template <typename T>
    Matrix<T> mat()
    {
        const auto r = pod<std::uint64_t>();
        const auto c = pod<std::uint64_t>();
        if (c != 0 && r > std::numeric_limits<std::uint64_t>::max() / c) fail("matrix size overflow");
        need_elems(r * c, sizeof(T));
        Matrix<T> m(r, c);
        if (m.size()) std::memcpy(m.data().data(), data_.data() + pos_, m.size() * sizeof(T));
        pos_ += m.size() * sizeof(T);
        return m;
    }
    std::string str()
    {
        const auto n = pod<std::uint64_t>();
        need(n);
        std::string s(data_.substr(pos_, n));
        pos_ += n;
        return s;
    }
    std::string_view bytes(std::size_t n)
    {
        need(n);
        auto v = data_.substr(pos_, n);
        pos_ += n;
        return v;
    }
    bool done() const { return pos_ == data_.size(); }
    [[noreturn]] void fail(const std::string& what) const { throw ParseError(path_, 0, what); }

private:
    void need(std::uint64_t n) const
    {
        if (n > data_.size() - pos_) fail("truncated state file");
    }
    void need_elems(std::uint64_t n, std::size_t size) const
    {
        if (n > (data_.size() - pos_) / size) fail("truncated state file");
    }

    std::string_view data_;
    std::string path_;
    std::size_t pos_ = 0;
};

void write_model(Writer& w, const ModelState& s)
{
    w.pod<std::int32_t>(s.K);
    w.pod<std::int32_t>(s.L);
    w.pod<std::int32_t>(static_cast<std::int32_t>(s.mode));
    w.pod<std::uint64_t>(s.N);
    w.pod<std::uint64_t>(s.D);
    w.mat(s.T);
    w.pod<std::uint64_t>(s.pi.size());
    for (const auto& p : s.pi) w.mat(p);
    w.pod<std::uint64_t>(s.support.n_nodes);
    w.vec(s.support.col_ptr);
    w.vec(s.support.source);
    w.vec(s.support.diag);
    w.pod<std::uint64_t>(s.B.size());
    for (const auto& b : s.B) w.vec(b);
    w.mat(s.Lambda);
    w.mat(s.X);
    w.mat(s.z_row);
    w.mat(s.z_col);
    w.mat(s.z_block);
    w.vec(s.z_edge_total);
    w.pod(s.M);
    w.pod(s.alpha);
    w.vec(s.gamma1);
    w.vec(s.gamma0);
    w.vec(s.c);
    w.vec(s.gamma_feat);
    w.pod(s.k_Lambda);
    w.pod(s.theta_Lambda);
    w.pod(s.sweeps_done);
}

ModelState read_model(Reader& r)
{
    ModelState s;
    s.K = r.pod<std::int32_t>();
    s.L = r.pod<std::int32_t>();
    const auto mode = r.pod<std::int32_t>();
    if (mode < 0 || mode > static_cast<std::int32_t>(Mode::mmsb)) r.fail("unknown mode tag");
    s.mode = static_cast<Mode>(mode);
    s.N = r.pod<std::uint64_t>();
    s.D = r.pod<std::uint64_t>();
    s.T = r.mat<double>();
    const auto n_pi = r.pod<std::uint64_t>();
    if (n_pi > 1'000'000) r.fail("implausible layer count");
    for (std::uint64_t l = 0; l < n_pi; ++l) s.pi.push_back(r.mat<double>());
    s.support.n_nodes = r.pod<std::uint64_t>();
    s.support.col_ptr = r.vec<std::size_t>();
    s.support.source = r.vec<NodeId>();
    s.support.diag = r.vec<std::size_t>();
    const auto n_b = r.pod<std::uint64_t>();
    if (n_b > 1'000'000) r.fail("implausible layer count");
    for (std::uint64_t b = 0; b < n_b; ++b) s.B.push_back(r.vec<double>());
    s.Lambda = r.mat<double>();
    s.X = r.mat<Count>();
    s.z_row = r.mat<Count>();
    s.z_col = r.mat<Count>();
    s.z_block = r.mat<Count>();
    s.z_edge_total = r.vec<Count>();
    s.M = r.pod<double>();
    s.alpha = r.pod<double>();
    s.gamma1 = r.vec<double>();
    s.gamma0 = r.vec<double>();
    s.c = r.vec<double>();
    s.gamma_feat = r.vec<double>();
    s.k_Lambda = r.pod<double>();
    s.theta_Lambda = r.pod<double>();
    s.sweeps_done = r.pod<std::uint64_t>();
    return s;
}

void write_trace(Writer& w, const PosteriorTrace& t)
{
    w.vec(t.dyads);
    w.vec(t.prob_sum);
    w.pod<std::uint64_t>(t.n_retained);
    w.vec(t.latent_count_sum);
    w.pod<std::uint8_t>(t.keep_draws ? 1 : 0);
    w.pod(t.rng_seed);
    w.pod<std::uint64_t>(t.draws.size());
    for (const auto& d : t.draws) {
        w.mat(d.X);
        w.mat(d.Lambda);
    }
}

PosteriorTrace read_trace(Reader& r)
{
    PosteriorTrace t;
    t.dyads = r.vec<Dyad>();
    t.prob_sum = r.vec<double>();
    t.n_retained = r.pod<std::uint64_t>();
    t.latent_count_sum = r.vec<double>();
    t.keep_draws = r.pod<std::uint8_t>() != 0;
    t.rng_seed = r.pod<std::uint64_t>();
    const auto n = r.pod<std::uint64_t>();
    for (std::uint64_t d = 0; d < n; ++d) {
        PosteriorTrace::Draw draw;
        draw.X = r.mat<Count>();
        draw.Lambda = r.mat<double>();
        t.draws.push_back(std::move(draw));
    }
    return t;
}

void section(Writer& out, const char (&tag)[5], const std::string& payload)
{
    out.bytes().append(tag, 4);
    out.pod<std::uint64_t>(payload.size());
    out.bytes() += payload;
}

} // namespace

void save_state(const fs::path& path, const Snapshot& snap)
{
    Writer out;
    out.bytes().append(kMagic, sizeof kMagic);
    out.pod(kVersion);

    RunConfig config = snap.config;
    config.out.clear();
    config.threads = 1;
    section(out, "CONF", dump_config(config));
    Writer model;
    write_model(model, snap.state);
    section(out, "STAT", model.bytes());
    Writer trace;
    write_trace(trace, snap.trace);
    section(out, "TRAC", trace.bytes());
    write_text(path, out.bytes());
}

Snapshot load_state(const fs::path& path)
{
    const std::string data = read_text(path);
    Reader r(data, path.string());
    if (data.size() < sizeof kMagic || std::memcmp(data.data(), kMagic, sizeof kMagic) != 0)
        r.fail("not a state file (bad magic)");
    r.bytes(sizeof kMagic);
    const auto version = r.pod<std::uint32_t>();
    if (version != kVersion) r.fail("unsupported state file version " + std::to_string(version));

    Snapshot snap;
    bool conf = false, stat = false, trac = false;
    while (!r.done()) {
        const std::string tag(r.bytes(4));
        const auto len = r.pod<std::uint64_t>();
        const std::string_view payload = r.bytes(len);
        Reader sub(payload, path.string());
        if (tag == "CONF") {
            snap.config = parse_config(std::string(payload), path.string());
            conf = true;
        } else if (tag == "STAT") {
            snap.state = read_model(sub);
            stat = true;
        } else if (tag == "TRAC") {
            snap.trace = read_trace(sub);
            trac = true;
        }
        // Unknown sections are skipped so newer writers stay readable.
    }
    if (!conf || !stat || !trac) r.fail("state file lacks a required section");
    return snap;
}

void save_outputs(const fs::path& out_dir, const Snapshot& snap, const EvalResult& eval,
                  const std::vector<LabeledDyad>& test)
{
    fs::create_directories(out_dir);
    write_text(out_dir / "metrics.json", metrics_json(eval, snap.trace, snap.config));

    std::string pred = "i,j,prob\n";
    if (snap.trace.n_retained > 0)
        for (const auto& t : test)
            pred += std::to_string(t.dyad.src) + "," + std::to_string(t.dyad.dst) + "," +
                    format_number(posterior_link_prob(snap.trace, t.dyad)) + "\n";
    write_text(out_dir / "predictions.csv", pred);

    for (std::size_t l = 0; l < snap.state.pi.size(); ++l)
        write_matrix_csv(out_dir / ("pi_layer_" + std::to_string(l + 1) + ".csv"), snap.state.pi[l]);
    write_matrix_csv(out_dir / "lambda.csv", snap.state.Lambda);

    std::string counts = "layer,mean_count\n";
    const auto mean = snap.trace.mean_latent_counts();
    for (std::size_t l = mean.size(); l-- > 0;) counts += std::to_string(l + 1) + "," + format_number(mean[l]) + "\n";
    write_text(out_dir / "latent_counts.csv", counts);

    save_state(out_dir / "state.bin", snap);
}

} // namespace sdrem
