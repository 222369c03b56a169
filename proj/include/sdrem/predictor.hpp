#pragma once

#include "sdrem/graph.hpp"
#include "sdrem/matrix.hpp"
#include "sdrem/model.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sdrem {

/// Probabilities are clamped to [kNllClamp, 1 - kNllClamp] before taking logs.
inline constexpr double kNllClamp = 1e-12;

struct EvalResult {
    double auc = 0.5;
    double mean_nll = 0.0;
    std::size_t n_test_pos = 0;
    std::size_t n_test_neg = 0;
    bool auc_defined = false;
};

struct LabeledDyad {
    Dyad dyad;
    int label = 0;
    friend bool operator==(const LabeledDyad&, const LabeledDyad&) = default;
};

/// 1 - exp(-X_i^T Lambda X_j). Throws std::invalid_argument when i == j.
double link_prob(const Matrix<Count>& X, const Matrix<double>& Lambda, NodeId i, NodeId j);

/// Mean of link_prob over retained draws. Throws std::invalid_argument when
/// the trace is empty or the dyad is not tracked.
double posterior_link_prob(const PosteriorTrace& trace, Dyad d);

/// Mann-Whitney U / (n+ n-) with midranks for ties. Throws
/// std::invalid_argument unless both classes are present.
double auc(std::span<const double> scores, std::span<const int> labels);

/// -(1/n) sum log p_hat, p_hat the posterior probability of the observed label.
double mean_nll(const PosteriorTrace& trace, std::span<const LabeledDyad> test);

/// AUC (when both labels are present) and mean NLL over `test`.
EvalResult evaluate(const PosteriorTrace& trace, std::span<const LabeledDyad> test);

} // namespace sdrem
