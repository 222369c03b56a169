#include "sdrem/countprop.hpp"

#include "sdrem/parallel.hpp"
#include "sdrem/randkit.hpp"

#include <cmath>
#include <numeric>

namespace sdrem {

LayerConcentration compute_psi(const ModelState& state, const FeatureMatrix& features, int layer)
{
    LayerConcentration out{layer, Matrix<double>(state.N, static_cast<std::size_t>(state.K))};
    for (NodeId i = 0; i < state.N; ++i) {
        if (layer == 1)
            input_concentration(state, features, i, out.psi.row(i));
        else
            propagated_concentration(state, layer, i, out.psi.row(i));
    }
    return out;
}

namespace {

std::uint64_t key(int layer, NodeId i) { return (static_cast<std::uint64_t>(layer) << 32) | i; }

} // namespace

AugmentedCounts backward_counts(const ModelState& state, const FeatureMatrix& features, const RngStream& streams,
                                std::uint64_t iteration, int threads)
{
    const int L = state.L;
    const auto K = static_cast<std::size_t>(state.K);
    const std::size_t N = state.N;
    const auto& sup = state.support;

    AugmentedCounts c;
    c.m.assign(static_cast<std::size_t>(L), Matrix<Count>(N, K));
    c.y.assign(static_cast<std::size_t>(L), Matrix<Count>(N, K));
    c.log_q.assign(static_cast<std::size_t>(L), std::vector<double>(N, 0.0));
    c.h_edge.assign(static_cast<std::size_t>(L - 1), std::vector<Count>(sup.nnz(), 0));
    c.h_feat = Matrix<Count>(state.D, K);
    c.m[static_cast<std::size_t>(L - 1)] = state.X;

    // Per-(source entry, k) split results, reduced serially after each layer.
    std::vector<Count> h_entry;
    std::vector<Count> h_alpha_node(N, 0);

    for (int l = L; l >= 1; --l) {
        const auto li = static_cast<std::size_t>(l - 1);
        const Matrix<Count>& m = c.m[li];
        Matrix<Count>& y = c.y[li];
        std::vector<double>& log_q = c.log_q[li];

        const std::size_t entries = l >= 2 ? sup.nnz() : features.nnz();
        h_entry.assign(entries * K, 0);
        if (l == 1) std::fill(h_alpha_node.begin(), h_alpha_node.end(), 0);

        // Feature entry offsets so each node writes its own slice.
        std::vector<std::size_t> feat_ptr;
        if (l == 1) {
            feat_ptr.assign(N + 1, 0);
            for (NodeId i = 0; i < N; ++i) feat_ptr[i + 1] = feat_ptr[i] + features.row(i).size();
        }

        parallel_for(N, threads, [&](std::size_t lo, std::size_t hi, std::size_t) {
            std::vector<double> psi(K), weights;
            std::vector<Count> split;
            for (std::size_t ii = lo; ii < hi; ++ii) {
                const auto i = static_cast<NodeId>(ii);
                const auto mi = m.row(i);
                const Count total = std::accumulate(mi.begin(), mi.end(), Count{0});
                if (total == 0) continue; // q = 1, y = 0, nothing to split

                if (l == 1)
                    input_concentration(state, features, i, psi);
                else
                    propagated_concentration(state, l, i, psi);
                Rng rng = streams.substream(iteration, Phase::backward, key(l, i));
                const double psi_sum = std::accumulate(psi.begin(), psi.end(), 0.0);
                log_q[i] = randkit::log_beta_sample(psi_sum, static_cast<double>(total), rng);

                auto yi = y.row(i);
                for (std::size_t k = 0; k < K; ++k) yi[k] = randkit::crt_sample(mi[k], psi[k], rng);

                if (l >= 2) {
                    const auto& b = state.B[static_cast<std::size_t>(l - 2)];
                    const auto& prev = state.pi[static_cast<std::size_t>(l - 2)];
                    const std::size_t first = sup.begin(i), last = sup.end(i);
                    weights.resize(last - first);
                    split.resize(last - first);
                    for (std::size_t k = 0; k < K; ++k) {
                        if (yi[k] == 0) continue;
                        for (std::size_t e = first; e < last; ++e) weights[e - first] = b[e] * prev(sup.source[e], k);
                        randkit::multinomial_split(yi[k], weights, split, rng);
                        for (std::size_t e = first; e < last; ++e) h_entry[e * K + k] = split[e - first];
                    }
                } else {
                    const auto row = features.row(i);
                    weights.resize(row.size() + 1);
                    split.resize(row.size() + 1);
                    for (std::size_t k = 0; k < K; ++k) {
                        if (yi[k] == 0) continue;
                        for (std::size_t f = 0; f < row.size(); ++f)
                            weights[f] = row[f].value * state.T(row[f].feature, k);
                        weights[row.size()] = state.alpha;
                        randkit::multinomial_split(yi[k], weights, split, rng);
                        for (std::size_t f = 0; f < row.size(); ++f) h_entry[(feat_ptr[i] + f) * K + k] = split[f];
                        h_alpha_node[i] += split[row.size()];
                    }
                }
            }
        });

        if (l >= 2) {
            Matrix<Count>& below = c.m[static_cast<std::size_t>(l - 2)];
            auto& h_edge = c.h_edge[static_cast<std::size_t>(l - 2)];
            for (NodeId i = 0; i < N; ++i)
                for (std::size_t e = sup.begin(i); e < sup.end(i); ++e) {
                    const auto src = sup.source[e];
                    for (std::size_t k = 0; k < K; ++k) {
                        const Count h = h_entry[e * K + k];
                        below(src, k) += h;
                        h_edge[e] += h;
                    }
                }
        } else {
            for (NodeId i = 0; i < N; ++i) {
                const auto row = features.row(i);
                for (std::size_t f = 0; f < row.size(); ++f)
                    for (std::size_t k = 0; k < K; ++k) c.h_feat(row[f].feature, k) += h_entry[(feat_ptr[i] + f) * K + k];
                c.h_alpha += h_alpha_node[i];
            }
        }
    }
    return c;
}

std::vector<double> latent_count_report(const AugmentedCounts& counts)
{
    std::vector<double> out;
    out.reserve(counts.m.size());
    for (const auto& m : counts.m)
        out.push_back(m.rows() == 0 ? 0.0 : static_cast<double>(m.sum()) / static_cast<double>(m.rows()));
    return out;
}

std::vector<Violation> validate_counts(const AugmentedCounts& c, const ModelState& s, const FeatureMatrix& features)
{
    std::vector<Violation> out;
    auto fail = [&out](const char* rule, const std::string& detail) { out.push_back({rule, detail}); };
    const auto L = static_cast<std::size_t>(s.L);
    if (c.m.size() != L || c.y.size() != L || c.log_q.size() != L || c.h_edge.size() != L - 1) {
        fail("shape", "counts do not hold L layers");
        return out;
    }
    if (c.m[L - 1] != s.X) fail("output-layer", "m^(L) differs from X");

    for (std::size_t l = 0; l < L; ++l) {
        const auto& m = c.m[l];
        const auto& y = c.y[l];
        for (std::size_t i = 0; i < s.N; ++i) {
            Count row = 0;
            for (std::size_t k = 0; k < static_cast<std::size_t>(s.K); ++k) {
                const Count mv = m(i, k), yv = y(i, k);
                row += mv;
                if (yv < 0 || yv > mv || (mv > 0) != (yv > 0))
                    fail("crt-range", "layer " + std::to_string(l + 1) + " node " + std::to_string(i) + " k " +
                                          std::to_string(k) + ": y=" + std::to_string(yv) + " m=" + std::to_string(mv));
            }
            const double lq = c.log_q[l][i];
            if (!(lq <= 0.0) || (row == 0 && lq != 0.0))
                fail("q-range", "layer " + std::to_string(l + 1) + " node " + std::to_string(i) + " log q=" +
                                    std::to_string(lq));
        }
    }
    for (std::size_t l = 1; l < L; ++l) {
        const Count y_total = c.y[l].sum();
        const Count below = c.m[l - 1].sum();
        const Count split = std::accumulate(c.h_edge[l - 1].begin(), c.h_edge[l - 1].end(), Count{0});
        if (below != y_total || split != y_total)
            fail("conservation", "layer " + std::to_string(l + 1) + ": y total " + std::to_string(y_total) +
                                     ", split total " + std::to_string(split) + ", m below " + std::to_string(below));
        if (below > c.m[l].sum()) fail("monotonicity", "counts grow toward the input at layer " + std::to_string(l));
        if (c.h_edge[l - 1].size() != s.support.nnz()) fail("support", "h_edge not aligned with B support");
    }
    const Count input = c.h_feat.sum() + c.h_alpha;
    if (input != c.y[0].sum())
        fail("conservation", "layer 1: y total " + std::to_string(c.y[0].sum()) + ", split total " +
                                 std::to_string(input));
    std::vector<bool> used(c.h_feat.rows(), false);
    for (NodeId i = 0; i < s.N; ++i)
        for (const auto& f : features.row(i))
            if (f.feature < used.size()) used[f.feature] = true;
    for (std::size_t d = 0; d < c.h_feat.rows(); ++d)
        if (!used[d])
            for (std::size_t k = 0; k < c.h_feat.cols(); ++k)
                if (c.h_feat(d, k) != 0) fail("support", "h_feat mass on unused feature " + std::to_string(d));
    return out;
}

} // namespace sdrem
