#pragma once

// Every random variable and fixed constant of the model, with invariant
// checking. Sampling logic lives in countprop and gibbs.

#include "sdrem/graph.hpp"
#include "sdrem/matrix.hpp"
#include "sdrem/rng.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sdrem {

using Count = std::int64_t;

/// Lower bound applied to Dirichlet concentrations so they stay strictly
/// positive in floating point.
inline constexpr double kMinConcentration = 1e-300;

/// Architecture variant.
///  - standard: propagation over training edges, features as given.
///  - plain:    identity features (F = I).
///  - inde:     each node propagates only to itself (diagonal B).
///  - full:     dense propagation support (every off-diagonal pair), Gamma
///              prior on all entries.
///  - mmsb:     one layer, no features; reduces to an MMSB-style prior.
enum class Mode { standard, plain, inde, full, mmsb };

std::string_view to_string(Mode mode) noexcept;
/// Throws ConfigError on unknown names.
Mode parse_mode(std::string_view name);

struct HyperParams {
    int K = 20;
    int L = 4;
    Mode mode = Mode::standard;

    // gamma_1, gamma_0, gamma_d ~ Gam(e0, 1/f0);  c ~ Gam(g0, 1/h0)
    double e0 = 1.0, f0 = 1.0;
    double g0 = 1.0, h0 = 1.0;
    // M ~ Gam(k_M, 1/theta_M); k_M defaults to the node count.
    std::optional<double> k_M;
    double theta_M = 1.0;
    double k_alpha = 1.0, theta_alpha = 1.0;
    // k_Lambda ~ Gam(k2, 1/theta2);  theta_Lambda ~ Gam(k3, 1/theta3)
    double k2 = 1.0, theta2 = 1.0;
    double k3 = 1.0, theta3 = 1.0;

    int iterations = 2000;
    int burn_in = 1000;
    int thin = 1;
    std::uint64_t seed = 0;

    /// Throws ConfigError naming the offending field.
    void validate() const;
    double k_M_for(std::size_t n_nodes) const noexcept { return k_M.value_or(static_cast<double>(n_nodes)); }
    /// Number of layers actually used (mmsb forces one).
    int layers() const noexcept { return mode == Mode::mmsb ? 1 : L; }
};

/// Sparsity pattern of every propagation matrix B^(l): for each receiving
/// node i, the sources i' with B_{i'i} allowed to be non-zero. The diagonal is
/// always present. Shared by all layers.
struct PropagationSupport {
    std::size_t n_nodes = 0;
    std::vector<std::size_t> col_ptr{0};
    std::vector<NodeId> source;
    std::vector<std::size_t> diag;  // position of (i, i) in column i

    std::size_t nnz() const noexcept { return source.size(); }
    std::size_t n_offdiag() const noexcept { return source.size() - n_nodes; }
    std::size_t begin(NodeId i) const noexcept { return col_ptr[i]; }
    std::size_t end(NodeId i) const noexcept { return col_ptr[i + 1]; }

    /// Support implied by `graph` under `mode`: in-neighbours plus self for
    /// standard/plain/mmsb, self only for inde, every unmasked pair for full.
    static PropagationSupport build(const SparseGraph& graph, Mode mode);

    friend bool operator==(const PropagationSupport&, const PropagationSupport&) = default;
};

/// All latent variables of the joint distribution.
///
/// Layers are 1-based in comments and 0-based in storage: pi[l-1] is layer l.
/// B[b-1] (b = 1..L-1) maps layer b to layer b+1 and uses the layer-(b+1)
/// hyper-parameters gamma1[b], gamma0[b], c[b]. c[0] and gamma_feat are the
/// rate and shapes of the feature transition matrix T.
///
/// Z is never stored per cell: only its per-edge totals and three marginals.
struct ModelState {
    int K = 0;
    int L = 0;
    Mode mode = Mode::standard;
    std::size_t N = 0;
    std::size_t D = 0;

    Matrix<double> T;                   // D x K
    std::vector<Matrix<double>> pi;     // L of N x K
    PropagationSupport support;
    std::vector<std::vector<double>> B; // L-1 value arrays aligned with support
    Matrix<double> Lambda;              // K x K
    Matrix<Count> X;                    // N x K

    Matrix<Count> z_row;                // sum_{j,k2} Z_{ij,k k2}
    Matrix<Count> z_col;                // sum_{j,k1} Z_{ji,k1 k}
    Matrix<Count> z_block;              // sum_{ij} Z_{ij,k1 k2}
    std::vector<Count> z_edge_total;    // aligned with graph.edges()

    double M = 1.0;
    double alpha = 1.0;
    std::vector<double> gamma1;         // size L, index 0 unused
    std::vector<double> gamma0;         // size L, index 0 unused
    std::vector<double> c;              // size L
    std::vector<double> gamma_feat;     // size D
    double k_Lambda = 1.0;
    double theta_Lambda = 1.0;

    std::uint64_t sweeps_done = 0;

    friend bool operator==(const ModelState&, const ModelState&) = default;
};

/// Counts produced by the backward pass. Layer vectors are 0-based as in
/// ModelState. h_edge[b-1] belongs to B^(b) and comes from the split at
/// layer b+1.
struct AugmentedCounts {
    std::vector<Matrix<Count>> m;            // L of N x K
    std::vector<Matrix<Count>> y;            // L of N x K
    std::vector<std::vector<double>> log_q;  // L of N; log q_i^(l) <= 0
    std::vector<std::vector<Count>> h_edge;  // L-1, aligned with support
    Matrix<Count> h_feat;                    // D x K
    Count h_alpha = 0;

    double q(int layer, NodeId i) const;
};

/// Running Monte Carlo summaries retained after burn-in.
struct PosteriorTrace {
    struct Draw {
        Matrix<Count> X;
        Matrix<double> Lambda;
        friend bool operator==(const Draw&, const Draw&) = default;
    };

    std::vector<Dyad> dyads;            // tracked dyads, sorted
    std::vector<double> prob_sum;       // aligned with dyads
    std::size_t n_retained = 0;
    std::vector<double> latent_count_sum; // per layer (0-based), sum of per-node averages
    std::vector<Draw> draws;            // optional retained (X, Lambda)
    bool keep_draws = false;
    std::uint64_t rng_seed = 0;

    PosteriorTrace() = default;
    PosteriorTrace(std::vector<Dyad> tracked, int layers, bool keep, std::uint64_t seed);

    /// Add one retained draw: link probabilities for every tracked dyad and
    /// the per-layer latent-count averages of that sweep.
    void record(const ModelState& state, std::span<const double> latent_counts);

    /// Index of `d` in dyads, if tracked.
    std::optional<std::size_t> find(Dyad d) const noexcept;
    /// Per-layer averages over retained draws (0-based layer index).
    std::vector<double> mean_latent_counts() const;

    friend bool operator==(const PosteriorTrace&, const PosteriorTrace&) = default;
};

struct Violation {
    std::string rule;
    std::string detail;
};

/// Every invariant of `state` against the graph it was fitted to. Empty when
/// the state is consistent. Never mutates.
std::vector<Violation> validate_state(const ModelState& state, const SparseGraph& graph,
                                      const FeatureMatrix& features);

/// Concentrations of layer 1: psi_ik = sum_d F_id T_dk + alpha.
void input_concentration(const ModelState& state, const FeatureMatrix& features, NodeId i, std::span<double> out);

/// Concentrations of layer l >= 2 for node i: sum_{i'} B^(l-1)_{i'i} pi^(l-1)_{i'}.
void propagated_concentration(const ModelState& state, int layer, NodeId i, std::span<double> out);

/// Allocates a state with the right shapes and B support, all values zero.
ModelState make_skeleton(const SparseGraph& support_graph, const FeatureMatrix& features, const HyperParams& hp);

/// Forward draw of every variable except Z from its prior, in generative order:
/// hyper-parameters, T, pi^(1), B and pi layer by layer, Lambda, M, then
/// X_ik ~ Poisson(M pi_ik^(L)).
struct PriorOverrides {
    std::optional<double> alpha;
    std::optional<double> M;
    std::optional<Matrix<double>> Lambda;
};
void sample_prior(ModelState& state, const FeatureMatrix& features, const HyperParams& hp, Rng& rng,
                  const PriorOverrides& fixed = {});

/// B^(1..L-1) and pi^(2..L) from their priors given pi^(1) and the
/// hyper-parameters, on the state's current support.
void sample_propagation(ModelState& state, Rng& rng);

/// Prior draw, Lambda rescaled by one scalar so the expected link count
/// matches the training edges, then one draw of the edge latent counts given X
/// and Lambda. Throws StateError when dimensions disagree.
ModelState init_state(const SparseGraph& graph, const FeatureMatrix& features, const HyperParams& hp,
                      const RngStream& streams);

} // namespace sdrem
