#include "sdrem/synthgen.hpp"

#include "sdrem/randkit.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sdrem {

void SynthSpec::validate() const
{
    if (N < 2) throw std::invalid_argument("synthetic graphs need N >= 2");
    if (K < 1 || L < 1) throw std::invalid_argument("K and L must be >= 1");
    if (!(feature_density >= 0.0 && feature_density <= 1.0)) throw std::invalid_argument("feature_density outside [0,1]");
    if (!(support_density >= 0.0 && support_density <= 1.0)) throw std::invalid_argument("support_density outside [0,1]");
    if (alpha && !(*alpha > 0.0)) throw std::invalid_argument("alpha must be positive");
    if (M && !(*M > 0.0)) throw std::invalid_argument("M must be positive");
    if (Lambda) {
        if (Lambda->rows() != static_cast<std::size_t>(K) || Lambda->cols() != static_cast<std::size_t>(K))
            throw std::invalid_argument("Lambda must be K x K");
        for (double v : Lambda->data())
            if (!(v >= 0.0)) throw std::invalid_argument("Lambda entries must be non-negative");
    }
}

Matrix<double> block_lambda(int K, double diag, double off)
{
    const auto k = static_cast<std::size_t>(K);
    Matrix<double> m(k, k, off);
    for (std::size_t a = 0; a < k; ++a) m(a, a) = diag;
    return m;
}

SparseGraph random_graph(std::size_t n, double density, Rng& rng)
{
    std::vector<Dyad> edges;
    if (density > 0.0)
        for (NodeId i = 0; i < n; ++i)
            for (NodeId j = 0; j < n; ++j)
                if (i != j && rng.uniform() < density) edges.push_back({i, j});
    return SparseGraph(n, std::move(edges), true);
}

std::vector<Dyad> draw_relation(const ModelState& s, Rng& rng)
{
    const auto K = static_cast<std::size_t>(s.K);
    // LX_j = Lambda X_j, so rate_ij = X_i . LX_j
    Matrix<double> lx(s.N, K);
    for (NodeId j = 0; j < s.N; ++j)
        for (std::size_t a = 0; a < K; ++a) {
            double v = 0.0;
            for (std::size_t b = 0; b < K; ++b) v += s.Lambda(a, b) * static_cast<double>(s.X(j, b));
            lx(j, a) = v;
        }
    std::vector<Dyad> edges;
    for (NodeId i = 0; i < s.N; ++i) {
        const auto xi = s.X.row(i);
        if (std::all_of(xi.begin(), xi.end(), [](Count x) { return x == 0; })) continue;
        for (NodeId j = 0; j < s.N; ++j) {
            if (j == i) continue;
            double rate = 0.0;
            for (std::size_t a = 0; a < K; ++a) rate += static_cast<double>(xi[a]) * lx(j, a);
            if (rate > 0.0 && rng.uniform() < -std::expm1(-rate)) edges.push_back({i, j});
        }
    }
    return edges;
}

SynthResult generate(const SynthSpec& spec)
{
    spec.validate();
    HyperParams hp = spec.hp;
    hp.K = spec.K;
    hp.L = spec.mode == Mode::mmsb ? 1 : spec.L;
    hp.mode = spec.mode;

    const RngStream streams{spec.seed};
    Rng rng = streams.substream(0, Phase::synth, 0);

    FeatureMatrix features(spec.N);
    if (spec.mode == Mode::plain) {
        features = FeatureMatrix::identity(spec.N);
    } else if (spec.D > 0 && spec.mode != Mode::mmsb) {
        std::vector<FeatureTriplet> t;
        for (NodeId i = 0; i < spec.N; ++i)
            for (std::uint32_t d = 0; d < spec.D; ++d)
                if (rng.uniform() < spec.feature_density) t.push_back({i, d, 1.0});
        features = FeatureMatrix(spec.N, spec.D, std::move(t));
    }

    PriorOverrides fixed{spec.alpha, spec.M, spec.Lambda};
    const SparseGraph provisional = random_graph(spec.N, spec.support_density, rng);
    ModelState first = make_skeleton(provisional, features, hp);
    sample_prior(first, features, hp, rng, fixed);

    SparseGraph graph(spec.N, draw_relation(first, rng), true);

    ModelState truth = make_skeleton(graph, features, hp);
    truth.T = first.T;
    truth.pi[0] = first.pi[0];
    truth.Lambda = first.Lambda;
    truth.X = first.X;
    truth.M = first.M;
    truth.alpha = first.alpha;
    truth.gamma1 = first.gamma1;
    truth.gamma0 = first.gamma0;
    truth.c = first.c;
    truth.gamma_feat = first.gamma_feat;
    truth.k_Lambda = first.k_Lambda;
    truth.theta_Lambda = first.theta_Lambda;
    sample_propagation(truth, rng);

    SweepContext ctx{RngStream{derive_seed(spec.seed, 3)}, 0, 1, {}};
    update_Z(truth, graph, ctx);
    return {std::move(graph), std::move(features), std::move(truth)};
}

// ---------------------------------------------------------------------------

HyperParams geweke_hyperparams(int K, int L)
{
    HyperParams hp;
    hp.K = K;
    hp.L = L;
    hp.e0 = 2.0;
    hp.f0 = 2.0;
    hp.g0 = 10.0;
    hp.h0 = 10.0;
    hp.k_M = 8.0;
    hp.theta_M = 4.0;
    hp.k_alpha = 2.0;
    hp.theta_alpha = 2.0;
    hp.k2 = 2.0;
    hp.theta2 = 2.0;
    hp.k3 = 30.0;
    hp.theta3 = 10.0;
    return hp;
}

SweepFn gibbs_sweep_fn(SweepFaults faults)
{
    return [faults](ModelState& s, const SparseGraph& data, const FeatureMatrix& f, const HyperParams& hp,
                    const SweepContext& ctx) {
        SweepContext c = ctx;
        c.faults = faults;
        sweep(s, data, f, hp, c);
    };
}

SweepFn prior_redraw_fn()
{
    return [](ModelState& s, const SparseGraph&, const FeatureMatrix& f, const HyperParams& hp,
              const SweepContext& ctx) {
        Rng rng = ctx.rng(Phase::geweke, 7);
        sample_prior(s, f, hp, rng);
    };
}

double GewekeResult::max_abs_z() const
{
    double m = 0.0;
    for (const auto& s : stats) m = std::max(m, std::abs(s.z));
    return m;
}

std::vector<std::string> geweke_stat_names(int L)
{
    std::vector<std::string> names{"pi_L_sq", "X_mean", "X_sq", "Lambda_mean", "Lambda_diag", "k_Lambda",
                                   "theta_Lambda", "M", "alpha", "edges"};
    if (L >= 2) {
        names.push_back("pi_1_sq");
        names.push_back("B_offdiag");
        names.push_back("B_diag");
        names.push_back("c_2");
    }
    return names;
}

namespace {

// Label-invariant summaries only: community labels switch slowly in the
// successive chain, so label-specific statistics would need far longer runs.
double mean_square(const Matrix<double>& p)
{
    double sq = 0.0;
    for (double v : p.data()) sq += v * v;
    return sq / static_cast<double>(p.rows());
}

std::vector<double> geweke_stats(const ModelState& s, std::size_t n_edges)
{
    const auto K = static_cast<std::size_t>(s.K);
    double x_sq = 0.0;
    for (Count x : s.X.data()) x_sq += static_cast<double>(x) * static_cast<double>(x);
    double diag = 0.0;
    for (std::size_t k = 0; k < K; ++k) diag += s.Lambda(k, k);
    std::vector<double> out{mean_square(s.pi[static_cast<std::size_t>(s.L - 1)]),
                            static_cast<double>(s.X.sum()) / static_cast<double>(s.X.size()),
                            x_sq / static_cast<double>(s.X.size()),
                            s.Lambda.sum() / static_cast<double>(s.Lambda.size()),
                            diag / static_cast<double>(K),
                            s.k_Lambda,
                            s.theta_Lambda,
                            s.M,
                            s.alpha,
                            static_cast<double>(n_edges)};
    if (s.L >= 2) {
        out.push_back(mean_square(s.pi[0]));
        const auto& b = s.B[0];
        double on = 0.0, off = 0.0;
        for (NodeId i = 0; i < s.N; ++i)
            for (std::size_t e = s.support.begin(i); e < s.support.end(i); ++e)
                (e == s.support.diag[i] ? on : off) += b[e];
        out.push_back(s.support.n_offdiag() ? off / static_cast<double>(s.support.n_offdiag()) : 0.0);
        out.push_back(on / static_cast<double>(s.N));
        out.push_back(s.c[1]);
    }
    return out;
}

SparseGraph redraw_data(ModelState& s, Rng& rng, const SweepContext& ctx)
{
    SparseGraph data(s.N, draw_relation(s, rng), true);
    s.z_edge_total.assign(data.n_edges(), 0);
    update_Z(s, data, ctx);
    return data;
}

} // namespace

GewekeResult geweke_pair(const GewekeSpec& spec, std::size_t n_samples, const SweepFn& sweep_fn)
{
    if (n_samples < 2 * spec.batches) throw std::invalid_argument("geweke_pair: too few samples for the batch count");
    HyperParams hp = spec.hp;
    hp.K = spec.K;
    hp.L = spec.L;
    hp.mode = Mode::standard;

    const RngStream streams{spec.seed};
    Rng support_rng = streams.substream(0, Phase::geweke, 0);
    const SparseGraph support = random_graph(spec.N, spec.support_density, support_rng);
    const FeatureMatrix features(spec.N);
    const ModelState skeleton = make_skeleton(support, features, hp);
    const auto names = geweke_stat_names(hp.L);
    const std::size_t n_stats = names.size();

    // Marginal-conditional arm.
    std::vector<double> f_sum(n_stats, 0.0), f_sq(n_stats, 0.0);
    ModelState s = skeleton;
    for (std::size_t t = 0; t < n_samples; ++t) {
        Rng rng = streams.substream(t, Phase::geweke, 1);
        sample_prior(s, features, hp, rng);
        const auto edges = draw_relation(s, rng);
        const auto v = geweke_stats(s, edges.size());
        for (std::size_t k = 0; k < n_stats; ++k) {
            f_sum[k] += v[k];
            f_sq[k] += v[k] * v[k];
        }
    }

    // Successive-conditional arm.
    const RngStream sweep_streams{derive_seed(spec.seed, 1)};
    const RngStream data_streams{derive_seed(spec.seed, 2)};
    s = skeleton;
    {
        Rng rng = streams.substream(0, Phase::geweke, 2);
        sample_prior(s, features, hp, rng);
    }
    SparseGraph data;
    {
        Rng rng = data_streams.substream(0, Phase::geweke, 3);
        data = redraw_data(s, rng, SweepContext{data_streams, 0, 1, {}});
    }
    const std::size_t batch = n_samples / spec.batches;
    const std::size_t used = batch * spec.batches;
    std::vector<double> s_sum(n_stats, 0.0), batch_sum(n_stats, 0.0);
    std::vector<std::vector<double>> batch_means(n_stats);
    for (std::size_t t = 0; t < used; ++t) {
        const SweepContext ctx{sweep_streams, t + 1, 1, {}};
        sweep_fn(s, data, features, hp, ctx);
        Rng rng = data_streams.substream(t + 1, Phase::geweke, 3);
        data = redraw_data(s, rng, SweepContext{data_streams, t + 1, 1, {}});
        const auto v = geweke_stats(s, data.n_edges());
        for (std::size_t k = 0; k < n_stats; ++k) {
            s_sum[k] += v[k];
            batch_sum[k] += v[k];
        }
        if ((t + 1) % batch == 0)
            for (std::size_t k = 0; k < n_stats; ++k) {
                batch_means[k].push_back(batch_sum[k] / static_cast<double>(batch));
                batch_sum[k] = 0.0;
            }
    }

    GewekeResult result;
    const auto nf = static_cast<double>(n_samples);
    const auto ns = static_cast<double>(used);
    for (std::size_t k = 0; k < n_stats; ++k) {
        GewekeStat st;
        st.name = names[k];
        st.mean_forward = f_sum[k] / nf;
        st.mean_successive = s_sum[k] / ns;
        const double var_f = std::max(0.0, f_sq[k] / nf - st.mean_forward * st.mean_forward) * nf / (nf - 1.0);
        double bm_var = 0.0;
        for (double m : batch_means[k]) bm_var += (m - st.mean_successive) * (m - st.mean_successive);
        const auto nb = static_cast<double>(batch_means[k].size());
        bm_var /= (nb - 1.0);
        const double se2 = var_f / nf + bm_var / nb;
        st.z = se2 > 0.0 ? (st.mean_forward - st.mean_successive) / std::sqrt(se2) : 0.0;
        result.stats.push_back(st);
    }
    return result;
}

} // namespace sdrem
