#include "sdrem/cli.hpp"

#include "sdrem/errors.hpp"
#include "sdrem/synthgen.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>

namespace sdrem {

namespace fs = std::filesystem;

FeatureMatrix features_for_mode(Mode mode, const FeatureMatrix& given, std::size_t n_nodes)
{
    if (mode == Mode::plain) return FeatureMatrix::identity(n_nodes);
    if (mode == Mode::mmsb) return FeatureMatrix(n_nodes);
    if (given.n_nodes() == 0) return FeatureMatrix(n_nodes);
    return given;
}

std::size_t audit_test_support(const PropagationSupport& support, const std::vector<LabeledDyad>& test,
                               bool undirected)
{
    auto in_support = [&](NodeId src, NodeId dst) {
        for (std::size_t e = support.begin(dst); e < support.end(dst); ++e)
            if (support.source[e] == src) return true;
        return false;
    };
    std::size_t bad = 0;
    for (const auto& t : test) {
        if (in_support(t.dyad.src, t.dyad.dst)) ++bad;
        if (undirected && in_support(t.dyad.dst, t.dyad.src)) ++bad;
    }
    return bad;
}

FitResult fit_model(const RunConfig& config, const SparseGraph& graph, const FeatureMatrix& given,
                    const FitOptions& options)
{
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    const HyperParams& hp = config.hp;
    const FeatureMatrix features = features_for_mode(hp.mode, given, graph.n_nodes());

    FitResult r;
    Rng split_rng = RngStream{config.effective_split_seed()}.substream(0, Phase::split);
    r.split = make_split(graph, config.train_ratio, config.negatives_per_positive, split_rng);
    const SparseGraph& train = r.split.train;

    const RngStream streams{hp.seed};
    ModelState state = init_state(train, features, hp, streams);

    std::vector<Dyad> tracked;
    for (const auto& t : r.split.test) tracked.push_back(t.dyad);
    PosteriorTrace trace(std::move(tracked), state.L, config.keep_draws, hp.seed);

    std::ostream* log = options.log;
    if (log)
        *log << "fit: N=" << graph.n_nodes() << " train edges=" << train.n_edges()
             << " test dyads=" << r.split.test.size() << " K=" << hp.K << " L=" << state.L
             << " mode=" << to_string(hp.mode) << " D=" << features.n_features() << "\n";

    for (int t = 1; t <= hp.iterations; ++t) {
        SweepContext ctx{streams, static_cast<std::uint64_t>(t), config.threads, {}};
        const SweepReport report = sweep(state, train, features, hp, ctx);
        if (t > hp.burn_in && (t - hp.burn_in) % hp.thin == 0) trace.record(state, report.latent_counts);
        if (options.on_sweep) options.on_sweep(state, report);
        if (log && options.progress_every > 0 && t % options.progress_every == 0) {
            *log << "iter " << t << "/" << hp.iterations << "  latent counts per node (layer " << state.L
                 << " -> 1):";
            for (std::size_t l = report.latent_counts.size(); l-- > 0;) {
                char buf[32];
                std::snprintf(buf, sizeof buf, " %.1f", report.latent_counts[l]);
                *log << buf;
            }
            *log << "  M=" << state.M << " alpha=" << state.alpha << "\n";
        }
    }

    r.eval = trace.n_retained > 0 ? evaluate(trace, r.split.test) : EvalResult{};
    r.audit_violations = audit_test_support(state.support, r.split.test, !graph.directed());
    if (log)
        *log << "audit: " << r.audit_violations << " of " << r.split.test.size()
             << " test dyads found in the propagation support\n";
    r.snapshot = Snapshot{std::move(state), std::move(trace), config};
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return r;
}

namespace {

struct ExitError : std::runtime_error {
    int code;
    ExitError(int c, const std::string& what) : std::runtime_error(what), code(c) {}
};

int cmd_fit(const std::string& config_path, RunConfig flags, const std::vector<std::string>& given)
{
    RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
    auto set = [&](const char* name) { return std::find(given.begin(), given.end(), name) != given.end(); };
    if (set("--edges")) config.edges = flags.edges;
    if (set("--features")) config.features = flags.features;
    if (set("--out")) config.out = flags.out;
    if (set("--seed")) config.hp.seed = flags.hp.seed;
    if (set("--mode")) config.hp.mode = flags.hp.mode;
    if (set("--threads")) config.threads = flags.threads;
    if (config.edges.empty()) throw ConfigError("edges: no edge file given (--edges or config key 'edges')");
    if (config.out.empty()) throw ConfigError("out: no output directory given (--out or config key 'out')");
    if (config.hp.mode == Mode::mmsb) config.hp.L = 1;
    config.validate();

    std::size_t loops = 0;
    const SparseGraph graph = load_edges(config.edges, config.undirected, 0, &loops);
    if (loops) std::cerr << "warning: dropped " << loops << " self-loops from " << config.edges << "\n";
    FeatureMatrix features(graph.n_nodes());
    if (!config.features.empty()) {
        if (config.hp.mode == Mode::plain || config.hp.mode == Mode::mmsb)
            std::cerr << "warning: mode " << to_string(config.hp.mode) << " ignores " << config.features << "\n";
        features = load_features(config.features, graph.n_nodes());
        std::cerr << "features: D=" << features.n_features() << " density=" << features.density() << "\n";
    }

    FitOptions options;
    options.log = &std::cerr;
    const FitResult r = fit_model(config, graph, features, options);
    save_outputs(config.out, r.snapshot, r.eval, r.split.test);
    std::cerr << "wrote " << config.out << " in " << r.seconds << " s\n";
    if (r.audit_violations) throw std::runtime_error("test dyads leaked into the propagation support");
    return 0;
}

int cmd_eval(const std::string& state_path, const std::string& edges, const std::optional<std::uint64_t>& split_seed)
{
    Snapshot snap = load_state(state_path);
    const SparseGraph graph = load_edges(edges, snap.config.undirected);
    if (graph.n_nodes() != snap.state.N)
        throw ConfigError("edge file " + edges + " has " + std::to_string(graph.n_nodes()) +
                          " nodes but the state was fitted to " + std::to_string(snap.state.N));
    if (split_seed) snap.config.split_seed = *split_seed;
    Rng rng = RngStream{snap.config.effective_split_seed()}.substream(0, Phase::split);
    const Split split = make_split(graph, snap.config.train_ratio, snap.config.negatives_per_positive, rng);
    for (const auto& t : split.test)
        if (!snap.trace.find(t.dyad))
            throw ConfigError("the reconstructed split does not match the fitted run (dyad " +
                              std::to_string(t.dyad.src) + "," + std::to_string(t.dyad.dst) +
                              " untracked); check --edges and --split-seed");
    const EvalResult eval = snap.trace.n_retained > 0 ? evaluate(snap.trace, split.test) : EvalResult{};
    const fs::path out = fs::path(state_path).parent_path() / "metrics.json";
    write_text(out, metrics_json(eval, snap.trace, snap.config));
    std::cerr << "wrote " << out.string() << "\n";
    return 0;
}

struct GenerateArgs {
    std::size_t n = 100;
    int k = 4;
    int l = 2;
    std::size_t d = 0;
    std::uint64_t seed = 0;
    std::string out;
    bool lambda_zero = false;
    std::optional<double> lambda_diag, lambda_off, alpha, m;
};

int cmd_generate(const GenerateArgs& a)
{
    SynthSpec spec;
    spec.N = a.n;
    spec.K = a.k;
    spec.L = a.l;
    spec.D = a.d;
    spec.seed = a.seed;
    spec.alpha = a.alpha;
    spec.M = a.m;
    if (a.lambda_zero)
        spec.Lambda = Matrix<double>(static_cast<std::size_t>(a.k), static_cast<std::size_t>(a.k), 0.0);
    else if (a.lambda_diag || a.lambda_off)
        spec.Lambda = block_lambda(a.k, a.lambda_diag.value_or(1.0), a.lambda_off.value_or(0.0));
    try {
        spec.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("generate: ") + e.what());
    }

    const SynthResult r = generate(spec);
    const fs::path out(a.out);
    fs::create_directories(out);
    save_edges(out / "edges.tsv", r.graph);
    save_features(out / "features.tsv", r.features);
    for (std::size_t l = 0; l < r.truth.pi.size(); ++l)
        write_matrix_csv(out / ("truth_pi_layer_" + std::to_string(l + 1) + ".csv"), r.truth.pi[l]);
    write_matrix_csv(out / "truth_lambda.csv", r.truth.Lambda);
    write_matrix_csv(out / "truth_x.csv", r.truth.X);
    nlohmann::json j;
    j["N"] = spec.N;
    j["K"] = spec.K;
    j["L"] = r.truth.L;
    j["D"] = r.truth.D;
    j["seed"] = spec.seed;
    j["n_edges"] = r.graph.n_edges();
    j["M"] = r.truth.M;
    j["alpha"] = r.truth.alpha;
    j["k_Lambda"] = r.truth.k_Lambda;
    j["theta_Lambda"] = r.truth.theta_Lambda;
    write_text(out / "truth.json", j.dump(2) + "\n");
    std::cerr << "generated N=" << spec.N << " edges=" << r.graph.n_edges() << " into " << out.string() << "\n";
    return 0;
}

int cmd_geweke(const GewekeSpec& spec, std::size_t samples, bool identity, bool mutation)
{
    if (spec.N < 2 || spec.N > 10) throw ConfigError("geweke: --n must lie in [2, 10]");
    SweepFn fn = identity ? prior_redraw_fn() : gibbs_sweep_fn(mutation ? SweepFaults{0.5} : SweepFaults{});
    const GewekeResult r = geweke_pair(spec, samples, fn);
    std::printf("%-14s %14s %14s %9s\n", "statistic", "forward", "successive", "z");
    for (const auto& s : r.stats)
        std::printf("%-14s %14.6f %14.6f %9.3f\n", s.name.c_str(), s.mean_forward, s.mean_successive, s.z);
    const bool ok = r.max_abs_z() < 4.0;
    std::printf("max |z| = %.3f (%s)\n", r.max_abs_z(), ok ? "pass" : "FAIL");
    return ok ? 0 : 2;
}

int cmd_report(const std::vector<std::string>& runs, const std::string& csv_path)
{
    struct Row {
        std::string dir;
        int K = 0, L = 0;
        std::string mode;
        std::string auc, nll;
        std::size_t retained = 0;
        std::vector<double> counts; // layer L..1
    };
    std::vector<Row> rows;
    for (const auto& dir : runs) {
        const fs::path metrics = fs::path(dir) / "metrics.json";
        if (!fs::exists(metrics)) throw ConfigError("report: " + dir + " has no metrics.json");
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(read_text(metrics));
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("report: " + metrics.string() + ": " + e.what());
        }
        Row r;
        r.dir = dir;
        const auto& cfg = j.at("config");
        r.K = cfg.at("K").get<int>();
        r.L = cfg.at("mode").get<std::string>() == "mmsb" ? 1 : cfg.at("L").get<int>();
        r.mode = cfg.at("mode").get<std::string>();
        r.auc = j.at("auc").is_null() ? "null" : format_number(j.at("auc").get<double>());
        r.nll = j.at("mean_nll").is_null() ? "null" : format_number(j.at("mean_nll").get<double>());
        r.retained = j.at("n_retained").get<std::size_t>();
        const auto counts = j.at("mean_latent_counts").get<std::vector<double>>();
        r.counts.assign(counts.rbegin(), counts.rend());
        rows.push_back(std::move(r));
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const Row& a, const Row& b) { return a.K != b.K ? a.K < b.K : a.L < b.L; });

    std::printf("%-24s %4s %4s %-9s %10s %10s %9s  %s\n", "run", "K", "L", "mode", "auc", "nll", "retained",
                "latent counts per node (layer L -> 1)");
    for (const auto& r : rows) {
        std::string c;
        for (double v : r.counts) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%s%.1f", c.empty() ? "" : " ", v);
            c += buf;
        }
        std::printf("%-24s %4d %4d %-9s %10.10s %10.10s %9zu  %s\n", r.dir.c_str(), r.K, r.L, r.mode.c_str(),
                    r.auc.c_str(), r.nll.c_str(), r.retained, c.c_str());
    }
    if (!csv_path.empty()) {
        std::size_t max_layers = 0;
        for (const auto& r : rows) max_layers = std::max(max_layers, r.counts.size());
        std::string text = "K,L,mode,auc,mean_nll,n_retained";
        for (std::size_t l = max_layers; l >= 1; --l) text += ",latent_layer_" + std::to_string(l);
        text += ",run\n";
        for (const auto& r : rows) {
            text += std::to_string(r.K) + "," + std::to_string(r.L) + "," + r.mode + "," + r.auc + "," + r.nll + "," +
                    std::to_string(r.retained);
            for (std::size_t l = max_layers; l >= 1; --l) {
                text += ",";
                if (l <= r.counts.size()) text += format_number(r.counts[r.counts.size() - l]);
            }
            text += "," + r.dir + "\n";
        }
        write_text(csv_path, text);
    }
    return 0;
}

} // namespace

int run_cli(int argc, const char* const* argv)
{
    CLI::App app{"Deep generative relational model: fitting, evaluation and diagnostics"};
    app.require_subcommand(1, 1);

    auto* fit = app.add_subcommand("fit", "fit the model to an edge list and write posterior summaries");
    std::string config_path;
    RunConfig flags;
    std::string mode_name;
    fit->add_option("--config", config_path, "JSON run configuration");
    fit->add_option("--edges", flags.edges, "edge list (src<TAB>dst per line)");
    fit->add_option("--features", flags.features, "feature triplets (node<TAB>feature<TAB>value)");
    fit->add_option("--out", flags.out, "output directory");
    fit->add_option("--seed", flags.hp.seed, "random seed");
    fit->add_option("--mode", mode_name, "standard|plain|inde|full|mmsb");
    fit->add_option("--threads", flags.threads, "worker threads within a sweep")->check(CLI::PositiveNumber);

    auto* eval = app.add_subcommand("eval", "recompute metrics.json from a saved state");
    std::string state_path, eval_edges;
    std::optional<std::uint64_t> split_seed;
    eval->add_option("--state", state_path, "state.bin written by fit")->required();
    eval->add_option("--edges", eval_edges, "the edge list the state was fitted to")->required();
    eval->add_option("--split-seed", split_seed, "seed of the train/test split");

    auto* gen = app.add_subcommand("generate", "draw a synthetic dataset from the generative model");
    GenerateArgs ga;
    gen->add_option("--n", ga.n, "nodes")->check(CLI::Range(2, 1 << 30));
    gen->add_option("--k", ga.k, "communities")->check(CLI::PositiveNumber);
    gen->add_option("--l", ga.l, "layers")->check(CLI::PositiveNumber);
    gen->add_option("--d", ga.d, "binary features");
    gen->add_option("--seed", ga.seed, "random seed");
    gen->add_option("--out", ga.out, "output directory")->required();
    gen->add_flag("--lambda-zero", ga.lambda_zero, "force Lambda = 0 (no edges)");
    gen->add_option("--lambda-diag", ga.lambda_diag, "fixed block Lambda: diagonal value");
    gen->add_option("--lambda-off", ga.lambda_off, "fixed block Lambda: off-diagonal value");
    gen->add_option("--alpha", ga.alpha, "fixed alpha");
    gen->add_option("--m", ga.m, "fixed M");

    auto* gw = app.add_subcommand("geweke", "joint-distribution test of the sampler");
    GewekeSpec gspec;
    std::size_t samples = 50000;
    bool identity = false, mutation = false;
    gw->add_option("--n", gspec.N, "nodes (<= 10)");
    gw->add_option("--k", gspec.K, "communities")->check(CLI::PositiveNumber);
    gw->add_option("--l", gspec.L, "layers")->check(CLI::PositiveNumber);
    gw->add_option("--samples", samples, "samples per arm");
    gw->add_option("--seed", gspec.seed, "random seed");
    gw->add_flag("--identity-selftest", identity, "replace the sweep with an exact prior redraw");
    gw->add_flag("--mutation-selftest", mutation, "halve the X rate; the test must fail");

    auto* rep = app.add_subcommand("report", "summarise run directories");
    std::vector<std::string> runs;
    std::string csv_path;
    rep->add_option("--run", runs, "run directory (repeatable)")->required();
    rep->add_option("--csv", csv_path, "also write a CSV sorted by K, L");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (*fit) {
            if (!mode_name.empty()) flags.hp.mode = parse_mode(mode_name);
            std::vector<std::string> given;
            for (const char* name : {"--edges", "--features", "--out", "--seed", "--mode", "--threads"})
                if (fit->count(name)) given.emplace_back(name);
            return cmd_fit(config_path, flags, given);
        }
        if (*eval) return cmd_eval(state_path, eval_edges, split_seed);
        if (*gen) return cmd_generate(ga);
        if (*gw) {
            gspec.hp = geweke_hyperparams(gspec.K, gspec.L);
            return cmd_geweke(gspec, samples, identity, mutation);
        }
        if (*rep) return cmd_report(runs, csv_path);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

} // namespace sdrem
