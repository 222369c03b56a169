#pragma once

// Full-conditional updates and the Gibbs sweep.
//
// Sweep order (one sweep = one call to sweep()):
//   backward count pass
//   gamma_d (T integrated out), T, c^(1)
//   alpha
//   per propagation layer: gamma1/gamma0 (B integrated out), B, c^(l)
//   pi^(1..L), concentrations recomputed layer by layer
//   X, Z, k_Lambda (Lambda integrated out), Lambda, theta_Lambda, M
// Updates that integrate out pi (T, alpha, B and their hypers) all run before
// pi is redrawn, so every conditional sees counts drawn from the current pi.

#include "sdrem/countprop.hpp"
#include "sdrem/model.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sdrem {

/// Deliberate defects for sampler self-tests. Defaults leave the kernel exact.
struct SweepFaults {
    double x_rate_scale = 1.0; // multiplies the Poisson rate in update_X
};

struct SweepContext {
    RngStream streams;
    std::uint64_t iteration = 0;
    int threads = 1;
    SweepFaults faults{};
    bool log_joint = false;

    Rng rng(Phase phase, std::uint64_t index = 0) const { return streams.substream(iteration, phase, index); }
};

struct SweepReport {
    std::uint64_t iteration = 0;
    std::optional<double> log_joint;
    std::vector<double> latent_counts;                     // per layer, index 0 = layer 1
    std::vector<std::pair<std::string, double>> timings;   // seconds per phase
    std::uint64_t dyads_touched = 0;                       // training positives visited by update_Z
    std::uint64_t masked_dyads_touched = 0;                // held-out pair corrections
};

/// gamma_d ~ Gam(e0 + sum_k J_dk, 1/(f0 + K log((c1 + s_d)/c1))) with
/// J_dk ~ CRT(h_feat_dk, gamma_d) and s_d = -sum_i F_id log q_i^(1).
void update_feature_shapes(ModelState& state, const AugmentedCounts& counts, const FeatureMatrix& features,
                           const HyperParams& hp, const SweepContext& ctx);

/// T_dk ~ Gam(gamma_d + h_feat_dk, 1/(c1 + s_d)). No-op without features.
void update_T(ModelState& state, const AugmentedCounts& counts, const FeatureMatrix& features,
              const SweepContext& ctx);

/// c^(1) ~ Gam(g0 + K sum_d gamma_d, 1/(h0 + sum T)). No-op without features.
void update_c1(ModelState& state, const HyperParams& hp, const SweepContext& ctx);

/// alpha ~ Gam(k_alpha + h_alpha, 1/(theta_alpha - K sum_i log q_i^(1))).
void update_alpha(ModelState& state, const AugmentedCounts& counts, const HyperParams& hp, const SweepContext& ctx);

/// gamma1^(b+1), gamma0^(b+1) for propagation layer b (1-based) with B^(b)
/// integrated out: J_e ~ CRT(h_edge_e, gamma), gamma ~ Gam(e0 + sum J,
/// 1/(f0 + sum_e log((c - log q_i)/c))) over off-diagonal resp. diagonal
/// entries, q_i of the receiving node at layer b+1.
void update_B_shapes(ModelState& state, const AugmentedCounts& counts, int b, const HyperParams& hp,
                     const SweepContext& ctx);

/// B^(b)_{i'i} ~ Gam(gamma + h_edge, 1/(c - log q_i^(b+1))), gamma = gamma0 on
/// the diagonal and gamma1 elsewhere.
void update_B(ModelState& state, const AugmentedCounts& counts, int b, const SweepContext& ctx);

/// c^(b+1) ~ Gam(g0 + N gamma0 + n_offdiag gamma1, 1/(h0 + sum B^(b))).
void update_B_rate(ModelState& state, int b, const HyperParams& hp, const SweepContext& ctx);

/// pi_i^(l) ~ Dirichlet(psi_i^(l) + m_i^(l)) for every node; psi from the
/// current state, so layers must be updated in ascending order.
void update_pi(ModelState& state, const AugmentedCounts& counts, const FeatureMatrix& features, int layer,
               const SweepContext& ctx);

/// X_ik from P(x) proportional to lam^x x^n / x! with n = z_row_ik + z_col_ik
/// and lam = M pi_ik^(L) exp(-sum over observed pairs (i,j), (j,i), j != i, of
/// X_j Lambda). Nodes in ascending order. Returns the number of held-out pairs
/// corrected for.
std::uint64_t update_X(ModelState& state, const SparseGraph& graph, const SweepContext& ctx);

/// Redraws the latent counts of every training positive: total ~ ZTP(X_i^T
/// Lambda X_j), split over the K^2 cells; the aggregates are rebuilt. A
/// positive edge with zero rate gets one count in a uniformly chosen cell.
/// Returns the number of dyads visited.
std::uint64_t update_Z(ModelState& state, const SparseGraph& graph, const SweepContext& ctx);

/// sum over observed ordered pairs i != j of X_{ik1} X_{jk2}, as a K x K matrix.
/// Also reports the number of held-out pairs subtracted.
Matrix<double> pair_exposure(const ModelState& state, const SparseGraph& graph, std::uint64_t* masked = nullptr);

/// k_Lambda with Lambda integrated out (l ~ CRT(z_block, k_Lambda)).
void update_Lambda_shape(ModelState& state, const Matrix<double>& exposure, const HyperParams& hp,
                         const SweepContext& ctx);
/// Lambda_{k1k2} ~ Gam(k_Lambda + z_block, 1/(theta_Lambda + exposure)).
void update_Lambda(ModelState& state, const Matrix<double>& exposure, const SweepContext& ctx);
/// theta_Lambda ~ Gam(k3 + K^2 k_Lambda, 1/(theta3 + sum Lambda)).
void update_Lambda_rate(ModelState& state, const HyperParams& hp, const SweepContext& ctx);

/// M ~ Gam(k_M + sum X, 1/(theta_M + N)).
void update_M(ModelState& state, const HyperParams& hp, const SweepContext& ctx);

/// M followed by alpha.
void update_M_alpha(ModelState& state, const AugmentedCounts& counts, const HyperParams& hp, const SweepContext& ctx);

/// Every hyper-parameter draw in sweep order: gamma_d, c^(1), the B shapes
/// and rates of every layer, k_Lambda, theta_Lambda. Each shape update
/// integrates out the variable it governs.
void update_hypers(ModelState& state, const AugmentedCounts& counts, const SparseGraph& graph,
                   const FeatureMatrix& features, const HyperParams& hp, const SweepContext& ctx);

/// log p(R, X, pi, B, T, Lambda | hyper-parameters) up to constants, Z
/// summed out. Monitoring only.
double log_joint(const ModelState& state, const SparseGraph& graph, const FeatureMatrix& features);

/// One full sweep; increments state.sweeps_done.
SweepReport sweep(ModelState& state, const SparseGraph& graph, const FeatureMatrix& features, const HyperParams& hp,
                  const SweepContext& ctx);

} // namespace sdrem
