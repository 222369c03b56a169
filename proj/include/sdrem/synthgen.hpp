#pragma once

// Forward simulation of the full generative process, and the Geweke
// joint-distribution test built on it.

#include "sdrem/gibbs.hpp"
#include "sdrem/model.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sdrem {

struct SynthSpec {
    std::size_t N = 100;
    int K = 4;
    int L = 2;
    std::size_t D = 0;
    double feature_density = 0.05;     // Bernoulli rate of binary features
    double support_density = 0.05;     // off-diagonal density of the provisional propagation support
    Mode mode = Mode::standard;
    HyperParams hp;                    // priors for everything not fixed below
    std::optional<double> alpha;       // fixed alpha
    std::optional<double> M;           // fixed M
    std::optional<Matrix<double>> Lambda; // fixed K x K Lambda
    std::uint64_t seed = 0;

    /// Throws std::invalid_argument.
    void validate() const;
};

struct SynthResult {
    SparseGraph graph;      // realised relation, directed, no mask
    FeatureMatrix features;
    ModelState truth;       // consistent with `graph` (validate_state passes)
};

/// Draws a graph in two passes. First pass: hyper-parameters, T, pi, B on a
/// provisional random support, Lambda, M, X, then R_ij ~ Bernoulli(1 -
/// exp(-X_i^T Lambda X_j)) for every ordered pair. Second pass: keeping
/// hyper-parameters, T, pi^(1), Lambda, M and X, B is redrawn on the support
/// implied by the realised R and pi^(2..L) are redrawn; Z is drawn given R.
SynthResult generate(const SynthSpec& spec);

/// R_ij ~ Bernoulli(1 - exp(-X_i^T Lambda X_j)) over every ordered pair i != j.
std::vector<Dyad> draw_relation(const ModelState& state, Rng& rng);

/// Block-structured Lambda: `diag` on the diagonal, `off` elsewhere.
Matrix<double> block_lambda(int K, double diag, double off);

/// Random directed graph with every ordered off-diagonal pair present with
/// probability `density`.
SparseGraph random_graph(std::size_t n, double density, Rng& rng);

// ---------------------------------------------------------------------------
// Geweke test

/// Hyper-priors for the Geweke test. Tighter than the Gam(1,1) fitting
/// defaults so every monitored statistic has finite variance (the defaults
/// give 1/c and 1/theta_Lambda infinite means).
HyperParams geweke_hyperparams(int K, int L);

struct GewekeSpec {
    std::size_t N = 8;
    int K = 3;
    int L = 2;
    double support_density = 0.3;
    HyperParams hp = geweke_hyperparams(3, 2); // K and L are taken from the fields above
    std::uint64_t seed = 0;
    std::size_t batches = 50;
};


/// One transition of the successive-conditional chain's parameter step.
using SweepFn = std::function<void(ModelState&, const SparseGraph& data, const FeatureMatrix&, const HyperParams&,
                                   const SweepContext&)>;

/// The real sampler, optionally with faults.
SweepFn gibbs_sweep_fn(SweepFaults faults = {});
/// Replaces every parameter with a fresh prior draw; both Geweke arms then
/// sample the same distribution exactly.
SweepFn prior_redraw_fn();

struct GewekeStat {
    std::string name;
    double mean_forward = 0.0;
    double mean_successive = 0.0;
    double z = 0.0;
};

struct GewekeResult {
    std::vector<GewekeStat> stats;
    double max_abs_z() const;
};

/// Statistic names, in the order geweke_pair reports them.
std::vector<std::string> geweke_stat_names(int L);

/// Marginal-conditional arm: n_samples independent forward draws of
/// (parameters, R). Successive-conditional arm: from one forward draw,
/// alternate sweep_fn and a fresh draw of (R, Z) given the parameters.
/// z = (mean_f - mean_s) / sqrt(var_f / n + batch-means variance of mean_s).
GewekeResult geweke_pair(const GewekeSpec& spec, std::size_t n_samples, const SweepFn& sweep_fn);

} // namespace sdrem
