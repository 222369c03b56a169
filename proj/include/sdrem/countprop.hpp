#pragma once

// Backward propagation of latent counts from the output layer to the input
// layer. Produces the sufficient statistics every Gamma/Dirichlet posterior
// of the sweep consumes.

#include "sdrem/model.hpp"

#include <cstdint>
#include <vector>

namespace sdrem {

/// Dirichlet concentrations of one layer (1-based `layer`).
struct LayerConcentration {
    int layer = 1;
    Matrix<double> psi; // N x K, every entry > 0
};

/// Layer 1: psi_ik = sum_d F_id T_dk + alpha.
/// Layer l >= 2: psi_i = sum over sources i' of B^(l-1)_{i'i} pi^(l-1)_{i'}.
LayerConcentration compute_psi(const ModelState& state, const FeatureMatrix& features, int layer);

/// One backward pass. For l = L..1: q_i ~ Beta(sum_k psi_ik, sum_k m_ik),
/// y_ik ~ CRT(m_ik, psi_ik), then y_ik is split over the sources of psi_ik
/// (propagation entries for l >= 2, features and alpha for l = 1).
/// Node i at layer l draws from substream (iteration, backward, l << 32 | i),
/// so the result does not depend on `threads`.
AugmentedCounts backward_counts(const ModelState& state, const FeatureMatrix& features, const RngStream& streams,
                                std::uint64_t iteration, int threads = 1);

/// sum_{i,k} m^(l) / N for each layer, index 0 = layer 1.
std::vector<double> latent_count_report(const AugmentedCounts& counts);

/// Checks the conservation, monotonicity and support rules of a backward
/// pass against the state it was computed from. Empty when consistent.
std::vector<Violation> validate_counts(const AugmentedCounts& counts, const ModelState& state,
                                       const FeatureMatrix& features);

} // namespace sdrem
