#include "oracles.hpp"

#include "sdrem/errors.hpp"
#include "sdrem/gibbs.hpp"
#include "sdrem/synthgen.hpp"

#include <doctest.h>

#include <cmath>

using namespace sdrem;

namespace {

HyperParams hp_of(int K, int L, Mode mode = Mode::standard)
{
    HyperParams hp;
    hp.K = K;
    hp.L = L;
    hp.mode = mode;
    return hp;
}

AugmentedCounts empty_counts(const ModelState& s)
{
    const auto K = static_cast<std::size_t>(s.K);
    const auto L = static_cast<std::size_t>(s.L);
    AugmentedCounts c;
    c.m.assign(L, Matrix<Count>(s.N, K));
    c.y.assign(L, Matrix<Count>(s.N, K));
    c.log_q.assign(L, std::vector<double>(s.N, 0.0));
    c.h_edge.assign(L - 1, std::vector<Count>(s.support.nnz(), 0));
    c.h_feat = Matrix<Count>(s.D, K);
    return c;
}

SweepContext ctx_at(std::uint64_t seed, std::uint64_t it, int threads = 1)
{
    return SweepContext{RngStream{seed}, it, threads, {}};
}

constexpr int kDraws = 100'000;

} // namespace

TEST_SUITE("gibbs") {

TEST_CASE("T posterior plug-in")
{
    // F_11 = 1, q = e^-1, h_feat = 3, gamma = c = 1: Gam(4, 1/2).
    const SparseGraph g(1, {}, true);
    const FeatureMatrix f(1, 1, {{0, 0, 1.0}});
    auto s = make_skeleton(g, f, hp_of(1, 1));
    auto c = empty_counts(s);
    c.log_q[0][0] = -1.0;
    c.h_feat(0, 0) = 3;
    s.gamma_feat[0] = 1.0;
    s.c[0] = 1.0;
    std::vector<double> xs;
    for (int t = 0; t < kDraws; ++t) {
        update_T(s, c, f, ctx_at(1, t));
        xs.push_back(s.T(0, 0));
    }
    const auto sm = oracle::summarize(xs);
    CHECK(oracle::within(sm.mean, 2.0, sm.se));

    SUBCASE("no data gives the prior")
    {
        c.log_q[0][0] = 0.0;
        c.h_feat(0, 0) = 0;
        s.gamma_feat[0] = 2.0;
        s.c[0] = 4.0;
        xs.clear();
        for (int t = 0; t < kDraws; ++t) {
            update_T(s, c, f, ctx_at(2, t));
            xs.push_back(s.T(0, 0));
        }
        const auto p = oracle::summarize(xs);
        CHECK(oracle::within(p.mean, 0.5, p.se));
    }
}

TEST_CASE("T is untouched without features")
{
    const SparseGraph g(2, {}, true);
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(2, 1));
    const auto before = s;
    update_T(s, empty_counts(s), f, ctx_at(1, 1));
    CHECK(s == before);
}

TEST_CASE("pi posterior plug-in")
{
    // psi = (1, 1), m = (8, 0): Dirichlet(9, 1), first component mean 0.9.
    const SparseGraph g(1, {}, true);
    const FeatureMatrix f(1);
    auto s = make_skeleton(g, f, hp_of(2, 1));
    s.alpha = 1.0;
    auto c = empty_counts(s);
    c.m[0](0, 0) = 8;
    std::vector<double> xs;
    for (int t = 0; t < kDraws; ++t) {
        update_pi(s, c, f, 1, ctx_at(3, t));
        xs.push_back(s.pi[0](0, 0));
    }
    const auto sm = oracle::summarize(xs);
    CHECK(oracle::within(sm.mean, 0.9, sm.se));
}

TEST_CASE("B posterior plug-in")
{
    // gamma1 = c = 1, h_edge = 4, log q = -1: Gam(5, 1/2), mean 2.5.
    const SparseGraph g(2, {{0, 1}}, true);
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(1, 2));
    s.gamma1[1] = 1.0;
    s.gamma0[1] = 1.0;
    s.c[1] = 1.0;
    auto c = empty_counts(s);
    std::size_t off = 0;
    for (std::size_t e = s.support.begin(1); e < s.support.end(1); ++e)
        if (s.support.source[e] == 0) off = e;
    c.h_edge[0][off] = 4;
    c.log_q[1][1] = -1.0;
    std::vector<double> xs;
    for (int t = 0; t < kDraws; ++t) {
        update_B(s, c, 1, ctx_at(4, t));
        xs.push_back(s.B[0][off]);
    }
    const auto sm = oracle::summarize(xs);
    CHECK(oracle::within(sm.mean, 2.5, sm.se));
}

TEST_CASE("inde updates only the diagonal")
{
    const SparseGraph g(3, {{0, 1}, {1, 2}}, true);
    const FeatureMatrix f(3);
    auto s = init_state(g, f, hp_of(2, 3, Mode::inde), RngStream{1});
    CHECK(s.support.nnz() == 3);
    update_B(s, empty_counts(s), 1, ctx_at(5, 1));
    for (NodeId i = 0; i < 3; ++i) CHECK(s.support.source[s.support.diag[i]] == i);
}

TEST_CASE("B shape update sees the CRT table mean")
{
    // One off-diagonal entry with sum_k h = 5, gamma1 = 2, q = 1:
    // gamma1' ~ Gam(e0 + J, 1/f0) with E J = 2.9, so E gamma1' = 3.9.
    const SparseGraph g(2, {{0, 1}}, true);
    const FeatureMatrix f(2);
    auto hp = hp_of(1, 2);
    auto s = make_skeleton(g, f, hp);
    auto c = empty_counts(s);
    for (std::size_t e = s.support.begin(1); e < s.support.end(1); ++e)
        if (s.support.source[e] == 0) c.h_edge[0][e] = 5;
    std::vector<double> xs;
    for (int t = 0; t < kDraws; ++t) {
        s.gamma1[1] = 2.0;
        update_B_shapes(s, c, 1, hp, ctx_at(6, t));
        xs.push_back(s.gamma1[1]);
    }
    const auto sm = oracle::summarize(xs);
    CHECK(oracle::within(sm.mean, 3.9, sm.se));
}

TEST_CASE("X conditional matches the brute-force pmf")
{
    // N = 2, K = 1, M = pi = Lambda = 1, Z_12 = 1, X_2 = 1: node 1 sees
    // lam = e^-2 and n = 1.
    const SparseGraph g(2, {{0, 1}}, true);
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(1, 1));
    s.M = 1.0;
    s.Lambda(0, 0) = 1.0;
    s.z_row(0, 0) = 1;
    s.z_col(1, 0) = 1;
    s.z_block(0, 0) = 1;
    s.z_edge_total[0] = 1;
    std::vector<std::int64_t> xs;
    for (int t = 0; t < kDraws; ++t) {
        s.X(0, 0) = 3;
        s.X(1, 0) = 1;
        update_X(s, g, ctx_at(7, t));
        xs.push_back(s.X(0, 0));
    }
    const auto pmf = oracle::touchard_pmf(std::exp(-2.0), 1);
    const auto h = oracle::histogram(xs, 200);
    CHECK(oracle::total_variation(h, pmf) < 0.01);
    CHECK(oracle::chi_square_p(h, pmf) > 0.001);
    CHECK(h[0] == 0.0);
}

TEST_CASE("held-out pairs drop out of the X exponent")
{
    // Same instance with (2,1) held out: only the pair (1,2) remains, so the
    // exponent is Lambda X_2 = 1 and lam = e^-1.
    const SparseGraph g(2, {{0, 1}}, true, {{1, 0}});
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(1, 1));
    s.M = 1.0;
    s.Lambda(0, 0) = 1.0;
    s.z_row(0, 0) = 1;
    s.z_col(1, 0) = 1;
    s.z_block(0, 0) = 1;
    s.z_edge_total[0] = 1;
    std::vector<std::int64_t> xs;
    std::uint64_t masked = 0;
    for (int t = 0; t < kDraws; ++t) {
        s.X(0, 0) = 3;
        s.X(1, 0) = 1;
        masked = update_X(s, g, ctx_at(8, t));
        xs.push_back(s.X(0, 0));
    }
    CHECK(masked == 2);
    const auto h = oracle::histogram(xs, 200);
    CHECK(oracle::total_variation(h, oracle::touchard_pmf(std::exp(-1.0), 1)) < 0.01);
}

TEST_CASE("X without interactions is Poisson(M pi)")
{
    const SparseGraph g(2, {}, true);
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(1, 1));
    s.M = 3.0;
    std::vector<std::int64_t> xs;
    for (int t = 0; t < kDraws; ++t) {
        update_X(s, g, ctx_at(9, t));
        xs.push_back(s.X(1, 0));
    }
    CHECK(oracle::chi_square_p(oracle::histogram(xs, 25), oracle::poisson_pmf(3.0, 25)) > 0.001);
}

TEST_CASE("Z total is zero-truncated Poisson")
{
    const SparseGraph g(2, {{0, 1}}, true);
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(1, 1));
    s.X.fill(1);
    s.Lambda(0, 0) = 1.0;
    std::vector<std::int64_t> xs;
    for (int t = 0; t < kDraws; ++t) {
        CHECK(update_Z(s, g, ctx_at(10, t)) == 1);
        xs.push_back(s.z_edge_total[0]);
    }
    auto pmf = oracle::poisson_pmf(1.0, 15);
    pmf[0] = 0.0;
    for (double& p : pmf) p /= 1.0 - std::exp(-1.0);
    CHECK(oracle::chi_square_p(oracle::histogram(xs, 15), pmf) > 0.001);
}

TEST_CASE("Z cells are uniform under equal weights")
{
    const SparseGraph g(2, {{0, 1}}, true);
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(2, 1));
    s.X.fill(1);
    s.Lambda.fill(0.5);
    std::vector<double> cells(4, 0.0);
    for (int t = 0; t < 20'000; ++t) {
        update_Z(s, g, ctx_at(11, t));
        for (std::size_t c = 0; c < 4; ++c) cells[c] += static_cast<double>(s.z_block.data()[c]);
    }
    CHECK(oracle::chi_square_p(cells, {0.25, 0.25, 0.25, 0.25}) > 0.001);
}

TEST_CASE("zero-rate positive edge gets one count")
{
    const SparseGraph g(2, {{0, 1}}, true);
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(2, 1));
    s.Lambda.fill(1.0);
    s.X(1, 0) = 2;
    update_Z(s, g, ctx_at(12, 0));
    CHECK(s.z_edge_total[0] == 1);
    CHECK(s.z_block.sum() == 1);
    CHECK(validate_state(s, g, f).empty());
    auto mismatched = s;
    mismatched.z_edge_total.clear();
    CHECK_THROWS_AS(update_Z(mismatched, g, ctx_at(12, 0)), StateError);
}

TEST_CASE("Lambda posterior plug-in")
{
    // N = 2, K = 1, X = (1, 1), z_block = 3, k = theta = 1: Gam(4, 1/3).
    const SparseGraph g(2, {{0, 1}}, true);
    const FeatureMatrix f(2);
    auto s = make_skeleton(g, f, hp_of(1, 1));
    s.X.fill(1);
    s.z_block(0, 0) = 3;
    s.k_Lambda = 1.0;
    s.theta_Lambda = 1.0;
    const auto exposure = pair_exposure(s, g);
    CHECK(exposure(0, 0) == 2.0);
    std::vector<double> xs;
    for (int t = 0; t < kDraws; ++t) {
        update_Lambda(s, exposure, ctx_at(13, t));
        xs.push_back(s.Lambda(0, 0));
    }
    const auto sm = oracle::summarize(xs);
    CHECK(oracle::within(sm.mean, 4.0 / 3.0, sm.se));
}

TEST_CASE("pair exposure against a direct double loop")
{
    Rng rng(14);
    const auto g0 = random_graph(12, 0.2, rng);
    const SparseGraph g = g0.with_mask({{0, 5}, {3, 2}, {11, 4}});
    const FeatureMatrix f(12);
    auto s = make_skeleton(g, f, hp_of(3, 1));
    for (auto& x : s.X.data()) x = static_cast<Count>(rng.below(4));
    std::uint64_t masked = 0;
    const auto got = pair_exposure(s, g, &masked);
    CHECK(masked == 3);
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            double want = 0.0;
            for (NodeId i = 0; i < 12; ++i)
                for (NodeId j = 0; j < 12; ++j)
                    if (i != j && !g.is_masked(i, j)) want += static_cast<double>(s.X(i, a) * s.X(j, b));
            CHECK(got(a, b) == want);
        }
    auto doubled = s;
    for (auto& x : doubled.X.data()) x *= 2;
    const auto twice = pair_exposure(doubled, g);
    for (std::size_t t = 0; t < got.size(); ++t) CHECK(twice.data()[t] == 4.0 * got.data()[t]);
}

TEST_CASE("M and alpha posteriors")
{
    const SparseGraph g(4, {}, true);
    const FeatureMatrix f(4);
    auto hp = hp_of(2, 1);
    hp.k_M = 4.0;
    hp.theta_M = 1.0;
    auto s = make_skeleton(g, f, hp);
    s.X(0, 0) = 4;
    s.X(2, 1) = 6;
    std::vector<double> ms, as;
    auto c = empty_counts(s);
    c.h_alpha = 5;
    c.log_q[0][1] = -0.5; // alpha rate 1 + K * 0.5 = 2
    for (int t = 0; t < kDraws; ++t) {
        update_M_alpha(s, c, hp, ctx_at(15, t));
        ms.push_back(s.M);
        as.push_back(s.alpha);
    }
    const auto sm = oracle::summarize(ms);
    CHECK(oracle::within(sm.mean, 2.8, sm.se));
    const auto sa = oracle::summarize(as);
    CHECK(oracle::within(sa.mean, 3.0, sa.se));
}

TEST_CASE("hyper-parameters with no data follow their priors")
{
    const SparseGraph g(3, {{0, 1}}, true);
    const FeatureMatrix f(3);
    auto hp = hp_of(2, 2);
    hp.e0 = 2.0;
    hp.f0 = 3.0;
    hp.g0 = 3.0;
    hp.h0 = 2.0;
    auto s = init_state(g, f, hp, RngStream{16});
    const auto c = empty_counts(s);
    std::vector<double> g1, c1;
    for (int t = 0; t < 40'000; ++t) {
        update_B_shapes(s, c, 1, hp, ctx_at(16, t));
        update_c1(s, hp, ctx_at(16, t));
        g1.push_back(s.gamma1[1]);
        c1.push_back(s.c[0]);
    }
    const auto a = oracle::summarize(g1), b = oracle::summarize(c1);
    CHECK(oracle::within(a.mean, 2.0 / 3.0, a.se));
    CHECK(oracle::within(b.mean, 1.5, b.se));
}

TEST_CASE("sweeps keep every invariant and respect the mask")
{
    Rng rng(17);
    const auto full = random_graph(25, 0.12, rng);
    std::vector<Dyad> held(full.edges().begin(), full.edges().begin() + 6);
    std::vector<Dyad> kept(full.edges().begin() + 6, full.edges().end());
    held.push_back({0, 24});
    if (full.has_edge(0, 24)) held.pop_back();
    const SparseGraph g(25, kept, true, held);
    const FeatureMatrix f(25, 5, {{0, 0, 1.0}, {3, 1, 1.0}, {9, 4, 2.0}, {17, 2, 1.0}});
    auto hp = hp_of(3, 3);
    auto s = init_state(g, f, hp, RngStream{17});
    for (std::uint64_t it = 1; it <= 60; ++it) {
        SweepContext ctx = ctx_at(17, it);
        ctx.log_joint = true;
        const auto counts = backward_counts(s, f, ctx.streams, it);
        REQUIRE(validate_counts(counts, s, f).empty());
        const auto r = sweep(s, g, f, hp, ctx);
        REQUIRE(validate_state(s, g, f).empty());
        CHECK(r.dyads_touched == g.n_edges());
        CHECK(r.masked_dyads_touched == 3 * held.size());
        REQUIRE(r.log_joint.has_value());
        CHECK(std::isfinite(*r.log_joint));
        for (const auto& [name, secs] : r.timings) CHECK(secs >= 0.0);
        CHECK(r.latent_counts.size() == 3);
    }
    CHECK(s.sweeps_done == 60);
    for (NodeId i = 0; i < 25; ++i)
        for (std::size_t e = s.support.begin(i); e < s.support.end(i); ++e)
            CHECK_FALSE(g.is_masked(s.support.source[e], i));
}

TEST_CASE("sweeps are deterministic and thread-count independent")
{
    Rng rng(18);
    const auto g = random_graph(80, 0.05, rng);
    const FeatureMatrix f = FeatureMatrix::identity(80);
    auto hp = hp_of(4, 3, Mode::plain);
    const auto start = init_state(g, f, hp, RngStream{18});
    auto a = start, b = start, c = start;
    for (std::uint64_t it = 1; it <= 5; ++it) {
        sweep(a, g, f, hp, ctx_at(18, it, 1));
        sweep(b, g, f, hp, ctx_at(18, it, 1));
        sweep(c, g, f, hp, ctx_at(18, it, 4));
    }
    CHECK(a == b);
    CHECK(a == c);
}

TEST_CASE("mmsb sweep has no propagation layers")
{
    Rng rng(19);
    const auto g = random_graph(20, 0.1, rng);
    const FeatureMatrix f(20);
    auto hp = hp_of(3, 4, Mode::mmsb);
    auto s = init_state(g, f, hp, RngStream{19});
    for (std::uint64_t it = 1; it <= 10; ++it) {
        const auto r = sweep(s, g, f, hp, ctx_at(19, it));
        CHECK(r.latent_counts.size() == 1);
    }
    CHECK(s.L == 1);
    CHECK(s.B.empty());
    CHECK(validate_state(s, g, f).empty());
}

}
