#include "sdrem/model.hpp"

#include "sdrem/errors.hpp"
#include "sdrem/gibbs.hpp"
#include "sdrem/predictor.hpp"
#include "sdrem/randkit.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace sdrem {

std::string_view to_string(Mode mode) noexcept
{
    switch (mode) {
    case Mode::standard: return "standard";
    case Mode::plain: return "plain";
    case Mode::inde: return "inde";
    case Mode::full: return "full";
    case Mode::mmsb: return "mmsb";
    }
    return "standard";
}

Mode parse_mode(std::string_view name)
{
    for (Mode m : {Mode::standard, Mode::plain, Mode::inde, Mode::full, Mode::mmsb})
        if (to_string(m) == name) return m;
    throw ConfigError("mode: unknown value '" + std::string(name) + "' (expected standard|plain|inde|full|mmsb)");
}

void HyperParams::validate() const
{
    auto positive = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + ": must be positive and finite");
    };
    if (K < 1) throw ConfigError("K: must be >= 1");
    if (L < 1) throw ConfigError("L: must be >= 1");
    positive(e0, "e0");
    positive(f0, "f0");
    positive(g0, "g0");
    positive(h0, "h0");
    if (k_M) positive(*k_M, "k_M");
    positive(theta_M, "theta_M");
    positive(k_alpha, "k_alpha");
    positive(theta_alpha, "theta_alpha");
    positive(k2, "k2");
    positive(theta2, "theta2");
    positive(k3, "k3");
    positive(theta3, "theta3");
    if (iterations < 1) throw ConfigError("iterations: must be >= 1");
    if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn_in: must satisfy 0 <= burn_in < iterations");
    if (thin < 1) throw ConfigError("thin: must be >= 1");
}

PropagationSupport PropagationSupport::build(const SparseGraph& graph, Mode mode)
{
    PropagationSupport s;
    s.n_nodes = graph.n_nodes();
    s.col_ptr.assign(s.n_nodes + 1, 0);
    s.diag.assign(s.n_nodes, 0);
    for (NodeId i = 0; i < s.n_nodes; ++i) {
        std::vector<NodeId> sources{i};
        if (mode == Mode::full) {
            for (NodeId j = 0; j < s.n_nodes; ++j)
                if (j != i && !graph.is_masked(j, i)) sources.push_back(j);
        } else if (mode != Mode::inde) {
            const auto in = graph.in_neighbors(i);
            sources.insert(sources.end(), in.begin(), in.end());
        }
        std::sort(sources.begin(), sources.end());
        for (NodeId src : sources) {
            if (src == i) s.diag[i] = s.source.size();
            s.source.push_back(src);
        }
        s.col_ptr[i + 1] = s.source.size();
    }
    return s;
}

double AugmentedCounts::q(int layer, NodeId i) const
{
    return std::exp(log_q[static_cast<std::size_t>(layer - 1)][i]);
}

PosteriorTrace::PosteriorTrace(std::vector<Dyad> tracked, int layers, bool keep, std::uint64_t seed)
    : dyads(std::move(tracked)), latent_count_sum(static_cast<std::size_t>(layers), 0.0), keep_draws(keep),
      rng_seed(seed)
{
    std::sort(dyads.begin(), dyads.end());
    dyads.erase(std::unique(dyads.begin(), dyads.end()), dyads.end());
    prob_sum.assign(dyads.size(), 0.0);
}

void PosteriorTrace::record(const ModelState& state, std::span<const double> latent_counts)
{
    for (std::size_t d = 0; d < dyads.size(); ++d)
        prob_sum[d] += link_prob(state.X, state.Lambda, dyads[d].src, dyads[d].dst);
    for (std::size_t l = 0; l < latent_count_sum.size() && l < latent_counts.size(); ++l)
        latent_count_sum[l] += latent_counts[l];
    if (keep_draws) draws.push_back({state.X, state.Lambda});
    ++n_retained;
}

std::optional<std::size_t> PosteriorTrace::find(Dyad d) const noexcept
{
    const auto it = std::lower_bound(dyads.begin(), dyads.end(), d);
    if (it == dyads.end() || *it != d) return std::nullopt;
    return static_cast<std::size_t>(it - dyads.begin());
}

std::vector<double> PosteriorTrace::mean_latent_counts() const
{
    std::vector<double> out(latent_count_sum.size(), 0.0);
    if (n_retained == 0) return out;
    for (std::size_t l = 0; l < out.size(); ++l) out[l] = latent_count_sum[l] / static_cast<double>(n_retained);
    return out;
}

void input_concentration(const ModelState& state, const FeatureMatrix& features, NodeId i, std::span<double> out)
{
    std::fill(out.begin(), out.end(), state.alpha);
    if (state.D > 0) {
        for (const FeatureEntry& f : features.row(i)) {
            const auto t = state.T.row(f.feature);
            for (int k = 0; k < state.K; ++k) out[k] += f.value * t[k];
        }
    }
    for (double& v : out) v = std::max(v, kMinConcentration);
}

void propagated_concentration(const ModelState& state, int layer, NodeId i, std::span<double> out)
{
    std::fill(out.begin(), out.end(), 0.0);
    const auto& sup = state.support;
    const auto& b = state.B[static_cast<std::size_t>(layer - 2)];
    const auto& prev = state.pi[static_cast<std::size_t>(layer - 2)];
    for (std::size_t e = sup.begin(i); e < sup.end(i); ++e) {
        const auto p = prev.row(sup.source[e]);
        for (int k = 0; k < state.K; ++k) out[k] += b[e] * p[k];
    }
    for (double& v : out) v = std::max(v, kMinConcentration);
}

std::vector<Violation> validate_state(const ModelState& s, const SparseGraph& graph, const FeatureMatrix& features)
{
    std::vector<Violation> out;
    auto fail = [&out](const char* rule, const std::string& detail) { out.push_back({rule, detail}); };
    const auto K = static_cast<std::size_t>(s.K);
    const auto L = static_cast<std::size_t>(s.L);

    if (s.K < 1 || s.L < 1) {
        fail("shape", "K and L must be >= 1");
        return out;
    }
    if (s.N != graph.n_nodes() || s.N != features.n_nodes())
        fail("shape", "node count " + std::to_string(s.N) + " disagrees with graph/features");
    if (s.D != features.n_features()) fail("shape", "feature count disagrees with feature matrix");
    if (s.T.rows() != s.D || (s.D > 0 && s.T.cols() != K)) fail("shape", "T must be D x K");
    if (s.pi.size() != L) fail("shape", "pi must hold L layers");
    if (s.B.size() != L - 1) fail("shape", "B must hold L-1 layers");
    if (s.Lambda.rows() != K || s.Lambda.cols() != K) fail("shape", "Lambda must be K x K");
    if (s.X.rows() != s.N || s.X.cols() != K) fail("shape", "X must be N x K");
    if (s.z_row.rows() != s.N || s.z_col.rows() != s.N || s.z_block.rows() != K)
        fail("shape", "Z aggregates have wrong shape");
    if (s.z_edge_total.size() != graph.n_edges())
        fail("shape", "z_edge_total must have one entry per training edge");
    if (s.gamma1.size() != L || s.gamma0.size() != L || s.c.size() != L || s.gamma_feat.size() != s.D)
        fail("shape", "hyper-parameter vectors have wrong length");
    if (s.support.n_nodes != s.N) fail("shape", "B support node count disagrees");
    if (!out.empty()) return out;

    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t i = 0; i < s.N; ++i) {
            double sum = 0.0;
            bool positive = true;
            for (double v : s.pi[l].row(i)) {
                sum += v;
                positive = positive && v > 0.0 && std::isfinite(v);
            }
            if (!positive || std::abs(sum - 1.0) > 1e-9) {
                std::ostringstream msg;
                msg << "pi layer " << l + 1 << " node " << i << " sums to " << sum
                    << (positive ? "" : " or has a non-positive entry");
                fail("pi-simplex", msg.str());
            }
        }
    }

    for (NodeId i = 0; i < s.N; ++i) {
        for (std::size_t e = s.support.begin(i); e < s.support.end(i); ++e) {
            const NodeId src = s.support.source[e];
            bool allowed = src == i;
            if (!allowed && s.mode != Mode::inde)
                allowed = s.mode == Mode::full ? !graph.is_masked(src, i) : graph.has_edge(src, i);
            if (!allowed)
                fail("B-support", "B entry (" + std::to_string(src) + "," + std::to_string(i) +
                                      ") lies off the training edges and diagonal; it must be 0");
        }
    }
    for (std::size_t b = 0; b + 1 < L; ++b) {
        if (s.B[b].size() != s.support.nnz()) {
            fail("shape", "B layer " + std::to_string(b + 1) + " does not match its support");
            continue;
        }
        for (std::size_t e = 0; e < s.B[b].size(); ++e)
            if (!(s.B[b][e] >= 0.0) || !std::isfinite(s.B[b][e]))
                fail("B-value", "B layer " + std::to_string(b + 1) + " entry " + std::to_string(e) + " invalid");
    }

    for (double v : s.T.data())
        if (!(v >= 0.0) || !std::isfinite(v)) {
            fail("T-value", "T has a negative or non-finite entry");
            break;
        }
    for (double v : s.Lambda.data())
        if (!(v >= 0.0) || !std::isfinite(v)) {
            fail("Lambda-value", "Lambda has a negative or non-finite entry");
            break;
        }
    for (Count v : s.X.data())
        if (v < 0) {
            fail("X-value", "X has a negative entry");
            break;
        }

    Count edge_total = 0;
    for (std::size_t e = 0; e < s.z_edge_total.size(); ++e) {
        if (s.z_edge_total[e] < 1) {
            const Dyad d = graph.edges()[e];
            fail("Z-positive", "training edge (" + std::to_string(d.src) + "," + std::to_string(d.dst) +
                                   ") carries no latent count");
        }
        edge_total += s.z_edge_total[e];
    }
    const Count block_total = s.z_block.sum();
    const Count row_total = s.z_row.sum();
    const Count col_total = s.z_col.sum();
    if (block_total != edge_total || row_total != edge_total || col_total != edge_total)
        fail("Z-marginals", "Z aggregates disagree: block " + std::to_string(block_total) + ", edges " +
                                std::to_string(edge_total) + ", rows " + std::to_string(row_total) + ", cols " +
                                std::to_string(col_total));
    for (Count v : s.z_row.data())
        if (v < 0) fail("Z-marginals", "negative z_row entry");

    auto scalar = [&](double v, const std::string& name) {
        if (!(v > 0.0) || !std::isfinite(v)) fail("scalar", name + " must be positive and finite");
    };
    scalar(s.M, "M");
    scalar(s.alpha, "alpha");
    scalar(s.k_Lambda, "k_Lambda");
    scalar(s.theta_Lambda, "theta_Lambda");
    scalar(s.c[0], "c(1)");
    for (std::size_t l = 1; l < L; ++l) {
        scalar(s.gamma1[l], "gamma1(" + std::to_string(l + 1) + ")");
        scalar(s.gamma0[l], "gamma0(" + std::to_string(l + 1) + ")");
        scalar(s.c[l], "c(" + std::to_string(l + 1) + ")");
    }
    for (double g : s.gamma_feat) scalar(g, "gamma_feat");
    return out;
}

ModelState make_skeleton(const SparseGraph& support_graph, const FeatureMatrix& features, const HyperParams& hp)
{
    hp.validate();
    if (features.n_nodes() != support_graph.n_nodes())
        throw StateError("feature matrix has " + std::to_string(features.n_nodes()) + " nodes but the graph has " +
                         std::to_string(support_graph.n_nodes()));
    if (hp.mode == Mode::mmsb && !features.empty()) throw StateError("mmsb mode takes no features");

    ModelState s;
    s.K = hp.K;
    s.L = hp.layers();
    s.mode = hp.mode;
    s.N = support_graph.n_nodes();
    s.D = features.n_features();
    const auto K = static_cast<std::size_t>(s.K);
    const auto L = static_cast<std::size_t>(s.L);

    s.T = Matrix<double>(s.D, K);
    s.pi.assign(L, Matrix<double>(s.N, K, 1.0 / static_cast<double>(K)));
    s.support = PropagationSupport::build(support_graph, hp.mode);
    s.B.assign(L - 1, std::vector<double>(s.support.nnz(), 0.0));
    s.Lambda = Matrix<double>(K, K);
    s.X = Matrix<Count>(s.N, K);
    s.z_row = Matrix<Count>(s.N, K);
    s.z_col = Matrix<Count>(s.N, K);
    s.z_block = Matrix<Count>(K, K);
    s.z_edge_total.assign(support_graph.n_edges(), 0);
    s.gamma1.assign(L, 1.0);
    s.gamma0.assign(L, 1.0);
    s.c.assign(L, 1.0);
    s.gamma_feat.assign(s.D, 1.0);
    return s;
}

void sample_propagation(ModelState& s, Rng& rng)
{
    std::vector<double> psi(static_cast<std::size_t>(s.K));
    for (std::size_t b = 1; b < static_cast<std::size_t>(s.L); ++b) {
        auto& values = s.B[b - 1];
        for (NodeId i = 0; i < s.N; ++i)
            for (std::size_t e = s.support.begin(i); e < s.support.end(i); ++e) {
                const double shape = s.support.source[e] == i ? s.gamma0[b] : s.gamma1[b];
                values[e] = randkit::gamma_sample(shape, 1.0 / s.c[b], rng);
            }
        for (NodeId i = 0; i < s.N; ++i) {
            propagated_concentration(s, static_cast<int>(b) + 1, i, psi);
            randkit::dirichlet_sample(psi, s.pi[b].row(i), rng);
        }
    }
}

void sample_prior(ModelState& s, const FeatureMatrix& features, const HyperParams& hp, Rng& rng,
                  const PriorOverrides& fixed)
{
    using randkit::gamma_sample;
    const auto K = static_cast<std::size_t>(s.K);
    const auto L = static_cast<std::size_t>(s.L);

    s.k_Lambda = gamma_sample(hp.k2, 1.0 / hp.theta2, rng);
    s.theta_Lambda = gamma_sample(hp.k3, 1.0 / hp.theta3, rng);
    s.alpha = gamma_sample(hp.k_alpha, 1.0 / hp.theta_alpha, rng);
    s.M = gamma_sample(hp.k_M_for(s.N), 1.0 / hp.theta_M, rng);
    if (fixed.alpha) s.alpha = *fixed.alpha;
    if (fixed.M) s.M = *fixed.M;
    s.c[0] = gamma_sample(hp.g0, 1.0 / hp.h0, rng);
    for (std::size_t l = 1; l < L; ++l) {
        s.gamma1[l] = gamma_sample(hp.e0, 1.0 / hp.f0, rng);
        s.gamma0[l] = gamma_sample(hp.e0, 1.0 / hp.f0, rng);
        s.c[l] = gamma_sample(hp.g0, 1.0 / hp.h0, rng);
    }
    for (std::size_t d = 0; d < s.D; ++d) {
        s.gamma_feat[d] = gamma_sample(hp.e0, 1.0 / hp.f0, rng);
        for (std::size_t k = 0; k < K; ++k) s.T(d, k) = gamma_sample(s.gamma_feat[d], 1.0 / s.c[0], rng);
    }

    std::vector<double> psi(K);
    for (NodeId i = 0; i < s.N; ++i) {
        input_concentration(s, features, i, psi);
        randkit::dirichlet_sample(psi, s.pi[0].row(i), rng);
    }
    sample_propagation(s, rng);
    for (double& v : s.Lambda.data()) v = gamma_sample(s.k_Lambda, 1.0 / s.theta_Lambda, rng);
    if (fixed.Lambda) {
        if (fixed.Lambda->rows() != K || fixed.Lambda->cols() != K) throw StateError("fixed Lambda must be K x K");
        s.Lambda = *fixed.Lambda;
    }
    const auto& top = s.pi[L - 1];
    for (NodeId i = 0; i < s.N; ++i)
        for (std::size_t k = 0; k < K; ++k) s.X(i, k) = randkit::poisson_sample(s.M * top(i, k), rng);
}

ModelState init_state(const SparseGraph& graph, const FeatureMatrix& features, const HyperParams& hp,
                      const RngStream& streams)
{
    ModelState s = make_skeleton(graph, features, hp);
    Rng rng = streams.substream(0, Phase::init);
    sample_prior(s, features, hp, rng);

    // Under the default priors (M ~ N) a prior draw puts O(N^2) latent counts
    // on every edge. Start the chain at a sane scale instead: one scalar on
    // Lambda so the expected link count matches the observed one.
    const double pairs = static_cast<double>(s.N) * static_cast<double>(s.N - 1) -
                         static_cast<double>(graph.test_mask().size());
    if (graph.n_edges() > 0 && pairs > 0.0) {
        const Matrix<double> exposure = pair_exposure(s, graph);
        double total = 0.0;
        for (std::size_t t = 0; t < exposure.size(); ++t) total += s.Lambda.data()[t] * exposure.data()[t];
        const double density = std::min(static_cast<double>(graph.n_edges()) / pairs, 1.0 - 0.5 / pairs);
        if (total > 0.0) {
            const double scale = -std::log1p(-density) * pairs / total;
            for (double& v : s.Lambda.data()) v *= scale;
        }
    }

    SweepContext ctx{streams, 0, 1, {}};
    update_Z(s, graph, ctx);
    return s;
}

} // namespace sdrem
