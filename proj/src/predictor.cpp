#include "sdrem/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sdrem {

double link_prob(const Matrix<Count>& X, const Matrix<double>& Lambda, NodeId i, NodeId j)
{
    if (i == j) throw std::invalid_argument("link_prob: self dyad");
    const std::size_t K = Lambda.rows();
    const auto xi = X.row(i);
    const auto xj = X.row(j);
    double rate = 0.0;
    for (std::size_t a = 0; a < K; ++a) {
        if (xi[a] == 0) continue;
        double inner = 0.0;
        for (std::size_t b = 0; b < K; ++b) inner += Lambda(a, b) * static_cast<double>(xj[b]);
        rate += static_cast<double>(xi[a]) * inner;
    }
    return -std::expm1(-rate);
}

double posterior_link_prob(const PosteriorTrace& trace, Dyad d)
{
    if (trace.n_retained == 0) throw std::invalid_argument("posterior_link_prob: no retained draws");
    const auto idx = trace.find(d);
    if (!idx) throw std::invalid_argument("posterior_link_prob: dyad not tracked");
    const double p = trace.prob_sum[*idx] / static_cast<double>(trace.n_retained);
    return std::clamp(p, 0.0, 1.0);
}

double auc(std::span<const double> scores, std::span<const int> labels)
{
    if (scores.size() != labels.size()) throw std::invalid_argument("auc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    double rank_sum = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t a = 0; a < n;) {
        std::size_t b = a;
        while (b < n && scores[order[b]] == scores[order[a]]) ++b;
        const double midrank = 0.5 * static_cast<double>(a + 1 + b);
        for (std::size_t t = a; t < b; ++t)
            if (labels[order[t]] != 0) {
                rank_sum += midrank;
                ++n_pos;
            }
        a = b;
    }
    const std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0) throw std::invalid_argument("auc: needs at least one positive and one negative");
    const double np = static_cast<double>(n_pos);
    const double u = rank_sum - np * (np + 1.0) / 2.0;
    return u / (np * static_cast<double>(n_neg));
}

double mean_nll(const PosteriorTrace& trace, std::span<const LabeledDyad> test)
{
    if (test.empty()) throw std::invalid_argument("mean_nll: empty test set");
    double total = 0.0;
    for (const auto& t : test) {
        const double p = posterior_link_prob(trace, t.dyad);
        const double p_label = std::clamp(t.label ? p : 1.0 - p, kNllClamp, 1.0 - kNllClamp);
        total -= std::log(p_label);
    }
    return total / static_cast<double>(test.size());
}

EvalResult evaluate(const PosteriorTrace& trace, std::span<const LabeledDyad> test)
{
    EvalResult r;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& t : test) {
        scores.push_back(posterior_link_prob(trace, t.dyad));
        labels.push_back(t.label);
        (t.label ? r.n_test_pos : r.n_test_neg)++;
    }
    if (r.n_test_pos > 0 && r.n_test_neg > 0) {
        r.auc = auc(scores, labels);
        r.auc_defined = true;
    }
    if (!test.empty()) r.mean_nll = mean_nll(trace, test);
    return r;
}

} // namespace sdrem
