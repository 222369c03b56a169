#include "oracles.hpp"

#include "sdrem/synthgen.hpp"

#include <doctest.h>

#include <cmath>

using namespace sdrem;

namespace {

SynthSpec spec_of(std::uint64_t seed)
{
    SynthSpec s;
    s.N = 40;
    s.K = 3;
    s.L = 2;
    s.D = 6;
    s.feature_density = 0.2;
    s.seed = seed;
    return s;
}

} // namespace

TEST_SUITE("synthgen") {

TEST_CASE("generated truth is consistent with its graph")
{
    for (Mode mode : {Mode::standard, Mode::plain, Mode::inde, Mode::full, Mode::mmsb}) {
        auto spec = spec_of(1);
        spec.mode = mode;
        const auto r = generate(spec);
        CHECK(validate_state(r.truth, r.graph, r.features).empty());
        CHECK(r.graph.n_nodes() == 40);
    }
}

TEST_CASE("generation is deterministic per seed")
{
    const auto a = generate(spec_of(5));
    const auto b = generate(spec_of(5));
    const auto c = generate(spec_of(6));
    CHECK(a.graph == b.graph);
    CHECK(a.features == b.features);
    CHECK(a.truth == b.truth);
    CHECK_FALSE(a.truth == c.truth);
}

TEST_CASE("zero Lambda gives no edges")
{
    auto spec = spec_of(2);
    spec.Lambda = Matrix<double>(3, 3, 0.0);
    const auto r = generate(spec);
    CHECK(r.graph.n_edges() == 0);
}

TEST_CASE("edge frequency matches the Bernoulli-Poisson marginal")
{
    ModelState s;
    s.K = 2;
    s.N = 3;
    s.X = Matrix<Count>(3, 2);
    s.X(0, 0) = 1;
    s.X(0, 1) = 2;
    s.X(1, 0) = 0;
    s.X(1, 1) = 1;
    s.X(2, 0) = 3;
    s.Lambda = Matrix<double>(2, 2);
    s.Lambda(0, 0) = 0.2;
    s.Lambda(0, 1) = 0.05;
    s.Lambda(1, 0) = 0.1;
    s.Lambda(1, 1) = 0.3;
    // rate(0,1) = 1*0.05 + 2*0.3 = 0.65; rate(2,0) = 3*(0.2*1 + 0.05*2) = 0.9
    const double p01 = 1.0 - std::exp(-0.65), p20 = 1.0 - std::exp(-0.9);
    Rng rng(3);
    const int n = 100'000;
    int c01 = 0, c20 = 0, c10 = 0;
    for (int t = 0; t < n; ++t)
        for (const Dyad& d : draw_relation(s, rng)) {
            c01 += d.src == 0 && d.dst == 1;
            c20 += d.src == 2 && d.dst == 0;
            c10 += d.src == 1 && d.dst == 0;
        }
    CHECK(oracle::within(static_cast<double>(c01) / n, p01, std::sqrt(p01 * (1 - p01) / n)));
    CHECK(oracle::within(static_cast<double>(c20) / n, p20, std::sqrt(p20 * (1 - p20) / n)));
    const double p10 = 1.0 - std::exp(-(1 * 0.1 * 1 + 1 * 0.3 * 2));
    CHECK(oracle::within(static_cast<double>(c10) / n, p10, std::sqrt(p10 * (1 - p10) / n)));
}

TEST_CASE("more mass means more edges")
{
    double low = 0.0, high = 0.0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
        auto spec = spec_of(100 + seed);
        spec.Lambda = block_lambda(3, 0.05, 0.01);
        spec.M = 2.0;
        low += static_cast<double>(generate(spec).graph.n_edges());
        spec.M = 20.0;
        high += static_cast<double>(generate(spec).graph.n_edges());
    }
    CHECK(high > low);
}

TEST_CASE("helpers")
{
    const auto b = block_lambda(3, 0.5, 0.1);
    CHECK(b(1, 1) == 0.5);
    CHECK(b(0, 2) == 0.1);
    Rng rng(4);
    const auto g = random_graph(100, 0.1, rng);
    const double density = static_cast<double>(g.n_edges()) / (100.0 * 99.0);
    CHECK(std::abs(density - 0.1) < 3.0 * std::sqrt(0.1 * 0.9 / 9900.0));
    auto bad = spec_of(1);
    bad.N = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad = spec_of(1);
    bad.Lambda = Matrix<double>(2, 2, 1.0);
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("geweke harness with an exact transition")
{
    GewekeSpec gs;
    gs.seed = 11;
    const auto r = geweke_pair(gs, 5000, prior_redraw_fn());
    CHECK(r.stats.size() == geweke_stat_names(2).size());
    CHECK(r.max_abs_z() < 4.0);
    CHECK(geweke_stat_names(1).size() < geweke_stat_names(2).size());
}

TEST_CASE("geweke harness flags a broken transition")
{
    GewekeSpec gs;
    gs.seed = 12;
    const auto r = geweke_pair(gs, 5000, gibbs_sweep_fn(SweepFaults{0.5}));
    CHECK(r.max_abs_z() > 6.0);
}

}
