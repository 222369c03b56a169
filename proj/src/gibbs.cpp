#include "sdrem/gibbs.hpp"

#include "sdrem/errors.hpp"
#include "sdrem/parallel.hpp"
#include "sdrem/randkit.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

namespace sdrem {

using randkit::crt_sample;
using randkit::gamma_sample;

namespace {

std::uint64_t key(std::uint64_t hi, std::uint64_t lo) { return (hi << 32) | lo; }

// s_d = -sum_i F_id log q_i^(1)
std::vector<double> feature_exposure(const ModelState& s, const AugmentedCounts& counts, const FeatureMatrix& features)
{
    std::vector<double> out(s.D, 0.0);
    for (NodeId i = 0; i < s.N; ++i) {
        const double lq = counts.log_q[0][i];
        if (lq == 0.0) continue;
        for (const auto& f : features.row(i)) out[f.feature] -= f.value * lq;
    }
    return out;
}

double log_gamma_density(double x, double shape, double rate)
{
    return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double log_dirichlet_density(std::span<const double> p, std::span<const double> conc)
{
    double sum = 0.0, out = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
        sum += conc[k];
        out += (conc[k] - 1.0) * std::log(p[k]) - std::lgamma(conc[k]);
    }
    return out + std::lgamma(sum);
}

double edge_rate(const ModelState& s, NodeId i, NodeId j)
{
    const auto K = static_cast<std::size_t>(s.K);
    double rate = 0.0;
    for (std::size_t a = 0; a < K; ++a) {
        if (s.X(i, a) == 0) continue;
        double inner = 0.0;
        for (std::size_t b = 0; b < K; ++b) inner += s.Lambda(a, b) * static_cast<double>(s.X(j, b));
        rate += static_cast<double>(s.X(i, a)) * inner;
    }
    return rate;
}

class PhaseClock {
public:
    explicit PhaseClock(SweepReport& r) : report_(r), start_(std::chrono::steady_clock::now()) {}
    void lap(const char* name)
    {
        const auto now = std::chrono::steady_clock::now();
        report_.timings.emplace_back(name, std::chrono::duration<double>(now - start_).count());
        start_ = now;
    }

private:
    SweepReport& report_;
    std::chrono::steady_clock::time_point start_;
};

} // namespace

void update_feature_shapes(ModelState& s, const AugmentedCounts& counts, const FeatureMatrix& features,
                           const HyperParams& hp, const SweepContext& ctx)
{
    if (s.D == 0) return;
    Rng rng = ctx.rng(Phase::feature_hypers, 0);
    const auto exposure = feature_exposure(s, counts, features);
    const double c1 = s.c[0];
    for (std::size_t d = 0; d < s.D; ++d) {
        Count tables = 0;
        for (std::size_t k = 0; k < static_cast<std::size_t>(s.K); ++k)
            tables += crt_sample(counts.h_feat(d, k), s.gamma_feat[d], rng);
        const double rate = hp.f0 + static_cast<double>(s.K) * std::log1p(exposure[d] / c1);
        s.gamma_feat[d] = gamma_sample(hp.e0 + static_cast<double>(tables), 1.0 / rate, rng);
    }
}

void update_T(ModelState& s, const AugmentedCounts& counts, const FeatureMatrix& features, const SweepContext& ctx)
{
    if (s.D == 0) return;
    const auto exposure = feature_exposure(s, counts, features);
    parallel_for(s.D, ctx.threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t d = lo; d < hi; ++d) {
            Rng rng = ctx.rng(Phase::T, d);
            const double scale = 1.0 / (s.c[0] + exposure[d]);
            for (std::size_t k = 0; k < static_cast<std::size_t>(s.K); ++k)
                s.T(d, k) = gamma_sample(s.gamma_feat[d] + static_cast<double>(counts.h_feat(d, k)), scale, rng);
        }
    });
}

void update_c1(ModelState& s, const HyperParams& hp, const SweepContext& ctx)
{
    Rng rng = ctx.rng(Phase::feature_hypers, 1);
    if (s.D == 0) {
        // c^(1) governs nothing without features; keep it at a prior draw.
        s.c[0] = gamma_sample(hp.g0, 1.0 / hp.h0, rng);
        return;
    }
    const double shapes = std::accumulate(s.gamma_feat.begin(), s.gamma_feat.end(), 0.0);
    const double t_sum = s.T.sum();
    s.c[0] = gamma_sample(hp.g0 + static_cast<double>(s.K) * shapes, 1.0 / (hp.h0 + t_sum), rng);
}

void update_alpha(ModelState& s, const AugmentedCounts& counts, const HyperParams& hp, const SweepContext& ctx)
{
    Rng rng = ctx.rng(Phase::alpha);
    double log_q_sum = 0.0;
    for (double lq : counts.log_q[0]) log_q_sum += lq;
    const double rate = hp.theta_alpha - static_cast<double>(s.K) * log_q_sum;
    s.alpha = gamma_sample(hp.k_alpha + static_cast<double>(counts.h_alpha), 1.0 / rate, rng);
}

void update_B_shapes(ModelState& s, const AugmentedCounts& counts, int b, const HyperParams& hp,
                     const SweepContext& ctx)
{
    const auto bi = static_cast<std::size_t>(b);
    Rng rng = ctx.rng(Phase::B_hypers, key(bi, 0));
    const auto& h = counts.h_edge[bi - 1];
    const auto& log_q = counts.log_q[bi];
    const double c = s.c[bi];
    Count tables1 = 0, tables0 = 0;
    double n1 = 0.0, n0 = 0.0;
    for (NodeId i = 0; i < s.N; ++i) {
        const double term = std::log1p(-log_q[i] / c);
        for (std::size_t e = s.support.begin(i); e < s.support.end(i); ++e) {
            if (e == s.support.diag[i]) {
                tables0 += crt_sample(h[e], s.gamma0[bi], rng);
                n0 += term;
            } else {
                tables1 += crt_sample(h[e], s.gamma1[bi], rng);
                n1 += term;
            }
        }
    }
    s.gamma1[bi] = gamma_sample(hp.e0 + static_cast<double>(tables1), 1.0 / (hp.f0 + n1), rng);
    s.gamma0[bi] = gamma_sample(hp.e0 + static_cast<double>(tables0), 1.0 / (hp.f0 + n0), rng);
}

void update_B(ModelState& s, const AugmentedCounts& counts, int b, const SweepContext& ctx)
{
    const auto bi = static_cast<std::size_t>(b);
    auto& values = s.B[bi - 1];
    const auto& h = counts.h_edge[bi - 1];
    const auto& log_q = counts.log_q[bi];
    parallel_for(s.N, ctx.threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
        for (std::size_t ii = lo; ii < hi; ++ii) {
            const auto i = static_cast<NodeId>(ii);
            Rng rng = ctx.rng(Phase::B, key(bi, i));
            const double scale = 1.0 / (s.c[bi] - log_q[i]);
            for (std::size_t e = s.support.begin(i); e < s.support.end(i); ++e) {
                const double shape = e == s.support.diag[i] ? s.gamma0[bi] : s.gamma1[bi];
                values[e] = gamma_sample(shape + static_cast<double>(h[e]), scale, rng);
            }
        }
    });
}

void update_B_rate(ModelState& s, int b, const HyperParams& hp, const SweepContext& ctx)
{
    const auto bi = static_cast<std::size_t>(b);
    Rng rng = ctx.rng(Phase::B_hypers, key(bi, 1));
    const auto& values = s.B[bi - 1];
    const double total = std::accumulate(values.begin(), values.end(), 0.0);
    const double shape = hp.g0 + static_cast<double>(s.N) * s.gamma0[bi] +
                         static_cast<double>(s.support.n_offdiag()) * s.gamma1[bi];
    s.c[bi] = gamma_sample(shape, 1.0 / (hp.h0 + total), rng);
}

void update_pi(ModelState& s, const AugmentedCounts& counts, const FeatureMatrix& features, int layer,
               const SweepContext& ctx)
{
    const auto li = static_cast<std::size_t>(layer - 1);
    const auto& m = counts.m[li];
    parallel_for(s.N, ctx.threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
        std::vector<double> conc(static_cast<std::size_t>(s.K));
        for (std::size_t ii = lo; ii < hi; ++ii) {
            const auto i = static_cast<NodeId>(ii);
            if (layer == 1)
                input_concentration(s, features, i, conc);
            else
                propagated_concentration(s, layer, i, conc);
            for (std::size_t k = 0; k < conc.size(); ++k) conc[k] += static_cast<double>(m(i, k));
            Rng rng = ctx.rng(Phase::pi, key(static_cast<std::uint64_t>(layer), i));
            randkit::dirichlet_sample(conc, s.pi[li].row(i), rng);
        }
    });
}

std::uint64_t update_X(ModelState& s, const SparseGraph& graph, const SweepContext& ctx)
{
    const auto K = static_cast<std::size_t>(s.K);
    const auto& top = s.pi[static_cast<std::size_t>(s.L - 1)];
    const double log_scale = std::log(s.M * ctx.faults.x_rate_scale);
    std::uint64_t masked = 0;

    std::vector<Count> col(K, 0);
    for (NodeId i = 0; i < s.N; ++i)
        for (std::size_t k = 0; k < K; ++k) col[k] += s.X(i, k);

    std::vector<double> others(K), exponent(K);
    for (NodeId i = 0; i < s.N; ++i) {
        auto xi = s.X.row(i);
        for (std::size_t k = 0; k < K; ++k) others[k] = static_cast<double>(col[k] - xi[k]);
        // exponent_k = sum_k2 Lambda(k,k2) others_k2 + sum_k1 Lambda(k1,k) others_k1
        for (std::size_t k = 0; k < K; ++k) {
            double e = 0.0;
            for (std::size_t t = 0; t < K; ++t) e += (s.Lambda(k, t) + s.Lambda(t, k)) * others[t];
            exponent[k] = e;
        }
        for (NodeId j : graph.masked_out(i)) {
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t t = 0; t < K; ++t) exponent[k] -= s.Lambda(k, t) * static_cast<double>(s.X(j, t));
            ++masked;
        }
        for (NodeId j : graph.masked_in(i)) {
            for (std::size_t k = 0; k < K; ++k)
                for (std::size_t t = 0; t < K; ++t) exponent[k] -= s.Lambda(t, k) * static_cast<double>(s.X(j, t));
            ++masked;
        }

        Rng rng = ctx.rng(Phase::X, i);
        for (std::size_t k = 0; k < K; ++k) {
            const Count n = s.z_row(i, k) + s.z_col(i, k);
            const double log_lam = log_scale + std::log(top(i, k)) - std::max(exponent[k], 0.0);
            const Count x = randkit::touchard_conditional_sample_log(log_lam, n, rng);
            col[k] += x - xi[k];
            xi[k] = x;
        }
    }
    return masked;
}

std::uint64_t update_Z(ModelState& s, const SparseGraph& graph, const SweepContext& ctx)
{
    const auto K = static_cast<std::size_t>(s.K);
    const auto edges = graph.edges();
    if (s.z_edge_total.size() != edges.size())
        throw StateError("update_Z: state holds " + std::to_string(s.z_edge_total.size()) +
                         " edge totals but the graph has " + std::to_string(edges.size()) + " edges");

    const std::size_t chunks = chunk_count(edges.size(), ctx.threads);
    struct Partial {
        Matrix<Count> row, col, block;
    };
    std::vector<Partial> parts(chunks);
    for (auto& p : parts) p = {Matrix<Count>(s.N, K), Matrix<Count>(s.N, K), Matrix<Count>(K, K)};

    parallel_for(edges.size(), ctx.threads, [&](std::size_t lo, std::size_t hi, std::size_t chunk) {
        Partial& p = parts[chunk];
        std::vector<double> w(K * K);
        std::vector<Count> cells(K * K);
        for (std::size_t e = lo; e < hi; ++e) {
            const auto [i, j] = edges[e];
            Rng rng = ctx.rng(Phase::Z, e);
            double rate = 0.0;
            for (std::size_t a = 0; a < K; ++a)
                for (std::size_t b = 0; b < K; ++b) {
                    const double v = static_cast<double>(s.X(i, a)) * s.Lambda(a, b) * static_cast<double>(s.X(j, b));
                    w[a * K + b] = v;
                    rate += v;
                }
            Count total;
            if (rate > 0.0) {
                total = randkit::ztp_sample(rate, rng);
                randkit::multinomial_split(total, w, cells, rng);
            } else {
                total = 1;
                std::fill(cells.begin(), cells.end(), 0);
                cells[rng.below(K * K)] = 1;
            }
            s.z_edge_total[e] = total;
            for (std::size_t a = 0; a < K; ++a)
                for (std::size_t b = 0; b < K; ++b) {
                    const Count c = cells[a * K + b];
                    if (c == 0) continue;
                    p.row(i, a) += c;
                    p.col(j, b) += c;
                    p.block(a, b) += c;
                }
        }
    });

    s.z_row = std::move(parts[0].row);
    s.z_col = std::move(parts[0].col);
    s.z_block = std::move(parts[0].block);
    for (std::size_t c = 1; c < chunks; ++c) {
        auto add = [](Matrix<Count>& dst, const Matrix<Count>& src) {
            auto d = dst.data();
            auto v = src.data();
            for (std::size_t t = 0; t < d.size(); ++t) d[t] += v[t];
        };
        add(s.z_row, parts[c].row);
        add(s.z_col, parts[c].col);
        add(s.z_block, parts[c].block);
    }
    return edges.size();
}

Matrix<double> pair_exposure(const ModelState& s, const SparseGraph& graph, std::uint64_t* masked)
{
    const auto K = static_cast<std::size_t>(s.K);
    std::vector<Count> col(K, 0);
    Matrix<Count> self(K, K);
    for (NodeId i = 0; i < s.N; ++i) {
        const auto xi = s.X.row(i);
        for (std::size_t a = 0; a < K; ++a) {
            col[a] += xi[a];
            if (xi[a] == 0) continue;
            for (std::size_t b = 0; b < K; ++b) self(a, b) += xi[a] * xi[b];
        }
    }
    Matrix<Count> p(K, K);
    for (std::size_t a = 0; a < K; ++a)
        for (std::size_t b = 0; b < K; ++b) p(a, b) = col[a] * col[b] - self(a, b);
    for (const Dyad& d : graph.test_mask()) {
        for (std::size_t a = 0; a < K; ++a) {
            const Count xa = s.X(d.src, a);
            if (xa == 0) continue;
            for (std::size_t b = 0; b < K; ++b) p(a, b) -= xa * s.X(d.dst, b);
        }
    }
    if (masked) *masked = graph.test_mask().size();
    Matrix<double> out(K, K);
    for (std::size_t t = 0; t < out.size(); ++t) out.data()[t] = static_cast<double>(p.data()[t]);
    return out;
}

void update_Lambda_shape(ModelState& s, const Matrix<double>& exposure, const HyperParams& hp,
                         const SweepContext& ctx)
{
    Rng rng = ctx.rng(Phase::Lambda, 0);
    Count tables = 0;
    double rate = hp.theta2;
    for (std::size_t t = 0; t < exposure.size(); ++t) {
        tables += crt_sample(s.z_block.data()[t], s.k_Lambda, rng);
        rate += std::log1p(exposure.data()[t] / s.theta_Lambda);
    }
    s.k_Lambda = gamma_sample(hp.k2 + static_cast<double>(tables), 1.0 / rate, rng);
}

void update_Lambda(ModelState& s, const Matrix<double>& exposure, const SweepContext& ctx)
{
    Rng rng = ctx.rng(Phase::Lambda, 1);
    for (std::size_t t = 0; t < s.Lambda.size(); ++t)
        s.Lambda.data()[t] = gamma_sample(s.k_Lambda + static_cast<double>(s.z_block.data()[t]),
                                          1.0 / (s.theta_Lambda + exposure.data()[t]), rng);
}

void update_Lambda_rate(ModelState& s, const HyperParams& hp, const SweepContext& ctx)
{
    Rng rng = ctx.rng(Phase::Lambda, 2);
    const double shape = hp.k3 + static_cast<double>(s.K) * static_cast<double>(s.K) * s.k_Lambda;
    s.theta_Lambda = gamma_sample(shape, 1.0 / (hp.theta3 + s.Lambda.sum()), rng);
}

void update_M(ModelState& s, const HyperParams& hp, const SweepContext& ctx)
{
    Rng rng = ctx.rng(Phase::M);
    const double shape = hp.k_M_for(s.N) + static_cast<double>(s.X.sum());
    s.M = gamma_sample(shape, 1.0 / (hp.theta_M + static_cast<double>(s.N)), rng);
}

void update_M_alpha(ModelState& s, const AugmentedCounts& counts, const HyperParams& hp, const SweepContext& ctx)
{
    update_M(s, hp, ctx);
    update_alpha(s, counts, hp, ctx);
}

void update_hypers(ModelState& s, const AugmentedCounts& counts, const SparseGraph& graph,
                   const FeatureMatrix& features, const HyperParams& hp, const SweepContext& ctx)
{
    update_feature_shapes(s, counts, features, hp, ctx);
    update_c1(s, hp, ctx);
    for (int b = 1; b < s.L; ++b) {
        update_B_shapes(s, counts, b, hp, ctx);
        update_B_rate(s, b, hp, ctx);
    }
    const auto exposure = pair_exposure(s, graph);
    update_Lambda_shape(s, exposure, hp, ctx);
    update_Lambda_rate(s, hp, ctx);
}

double log_joint(const ModelState& s, const SparseGraph& graph, const FeatureMatrix& features)
{
    const auto K = static_cast<std::size_t>(s.K);
    double lp = 0.0;

    const auto exposure = pair_exposure(s, graph);
    double total_rate = 0.0;
    for (std::size_t t = 0; t < exposure.size(); ++t) total_rate += s.Lambda.data()[t] * exposure.data()[t];
    for (const Dyad& d : graph.edges()) {
        const double r = edge_rate(s, d.src, d.dst);
        total_rate -= r;
        lp += std::log(std::max(-std::expm1(-r), 1e-300));
    }
    lp -= total_rate;

    const auto& top = s.pi[K > 0 ? static_cast<std::size_t>(s.L - 1) : 0];
    for (NodeId i = 0; i < s.N; ++i)
        for (std::size_t k = 0; k < K; ++k) {
            const double rate = s.M * top(i, k);
            const auto x = static_cast<double>(s.X(i, k));
            lp += x * std::log(rate) - rate - std::lgamma(x + 1.0);
        }

    std::vector<double> conc(K);
    for (int l = 1; l <= s.L; ++l)
        for (NodeId i = 0; i < s.N; ++i) {
            if (l == 1)
                input_concentration(s, features, i, conc);
            else
                propagated_concentration(s, l, i, conc);
            lp += log_dirichlet_density(s.pi[static_cast<std::size_t>(l - 1)].row(i), conc);
        }

    for (int b = 1; b < s.L; ++b) {
        const auto bi = static_cast<std::size_t>(b);
        for (NodeId i = 0; i < s.N; ++i)
            for (std::size_t e = s.support.begin(i); e < s.support.end(i); ++e) {
                const double shape = e == s.support.diag[i] ? s.gamma0[bi] : s.gamma1[bi];
                lp += log_gamma_density(s.B[bi - 1][e], shape, s.c[bi]);
            }
    }
    for (std::size_t d = 0; d < s.D; ++d)
        for (std::size_t k = 0; k < K; ++k) lp += log_gamma_density(s.T(d, k), s.gamma_feat[d], s.c[0]);
    for (double v : s.Lambda.data()) lp += log_gamma_density(v, s.k_Lambda, s.theta_Lambda);
    return lp;
}

SweepReport sweep(ModelState& s, const SparseGraph& graph, const FeatureMatrix& features, const HyperParams& hp,
                  const SweepContext& ctx)
{
    SweepReport report;
    report.iteration = ctx.iteration;
    PhaseClock clock(report);

    const AugmentedCounts counts = backward_counts(s, features, ctx.streams, ctx.iteration, ctx.threads);
    report.latent_counts = latent_count_report(counts);
    clock.lap("backward");

    update_feature_shapes(s, counts, features, hp, ctx);
    update_T(s, counts, features, ctx);
    update_c1(s, hp, ctx);
    update_alpha(s, counts, hp, ctx);
    clock.lap("T");

    for (int b = 1; b < s.L; ++b) {
        update_B_shapes(s, counts, b, hp, ctx);
        update_B(s, counts, b, ctx);
        update_B_rate(s, b, hp, ctx);
    }
    clock.lap("B");

    for (int l = 1; l <= s.L; ++l) update_pi(s, counts, features, l, ctx);
    clock.lap("pi");

    report.masked_dyads_touched += update_X(s, graph, ctx);
    clock.lap("X");

    report.dyads_touched = update_Z(s, graph, ctx);
    clock.lap("Z");

    std::uint64_t masked = 0;
    const auto exposure = pair_exposure(s, graph, &masked);
    report.masked_dyads_touched += masked;
    update_Lambda_shape(s, exposure, hp, ctx);
    update_Lambda(s, exposure, ctx);
    update_Lambda_rate(s, hp, ctx);
    update_M(s, hp, ctx);
    clock.lap("Lambda");

    if (ctx.log_joint) report.log_joint = log_joint(s, graph, features);
    ++s.sweeps_done;
    return report;
}

} // namespace sdrem
