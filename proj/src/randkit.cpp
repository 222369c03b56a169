#include "sdrem/randkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace sdrem::randkit {

namespace {

bool positive_finite(double v) { return v > 0.0 && std::isfinite(v); }

} // namespace

double log_add_exp(double a, double b) noexcept
{
    if (a < b) std::swap(a, b);
    if (b == -std::numeric_limits<double>::infinity()) return a;
    return a + std::log1p(std::exp(b - a));
}

double log_gamma_sample(double shape, Rng& rng)
{
    if (!positive_finite(shape)) throw std::invalid_argument("log_gamma_sample: shape must be positive and finite");
    if (shape >= 1.0) {
        std::gamma_distribution<double> dist(shape, 1.0);
        return std::log(dist(rng));
    }
    // Gamma(a) = Gamma(a + 1) * U^(1/a), evaluated on the log scale.
    std::gamma_distribution<double> dist(shape + 1.0, 1.0);
    const double g = dist(rng);
    return std::log(g) + std::log(rng.uniform()) / shape;
}

double gamma_sample(double shape, double scale, Rng& rng)
{
    if (!positive_finite(shape) || !positive_finite(scale))
        throw std::invalid_argument("gamma_sample: shape and scale must be positive and finite (shape=" +
                                    std::to_string(shape) + ", scale=" + std::to_string(scale) + ")");
    double g;
    if (shape >= 1.0) {
        std::gamma_distribution<double> dist(shape, 1.0);
        g = dist(rng) * scale;
    } else {
        g = std::exp(log_gamma_sample(shape, rng) + std::log(scale));
    }
    if (!(g >= kGammaFloor)) g = kGammaFloor;
    if (std::isinf(g)) g = std::numeric_limits<double>::max();
    return g;
}

double log_beta_sample(double a, double b, Rng& rng)
{
    if (b == 0.0) return 0.0;
    if (!positive_finite(a) || !positive_finite(b))
        throw std::invalid_argument("log_beta_sample: parameters must be positive and finite");
    const double la = log_gamma_sample(a, rng);
    const double lb = log_gamma_sample(b, rng);
    return std::min(0.0, la - log_add_exp(la, lb));
}

void dirichlet_sample(std::span<const double> concentration, std::span<double> out, Rng& rng)
{
    if (concentration.size() != out.size()) throw std::invalid_argument("dirichlet_sample: size mismatch");
    if (concentration.empty()) throw std::invalid_argument("dirichlet_sample: empty concentration");
    for (double c : concentration)
        if (!positive_finite(c)) throw std::invalid_argument("dirichlet_sample: concentration entries must be > 0");
    if (out.size() == 1) {
        out[0] = 1.0;
        return;
    }
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < out.size(); ++k) {
        out[k] = log_gamma_sample(concentration[k], rng);
        top = std::max(top, out[k]);
    }
    double total = 0.0;
    for (double& v : out) {
        v = std::exp(v - top);
        total += v;
    }
    constexpr double tiny = std::numeric_limits<double>::min();
    for (double& v : out) v = std::max(v / total, tiny);
}

std::vector<double> dirichlet_sample(std::span<const double> concentration, Rng& rng)
{
    std::vector<double> out(concentration.size());
    dirichlet_sample(concentration, out, rng);
    return out;
}

std::int64_t poisson_sample(double rate, Rng& rng)
{
    if (!(rate >= 0.0) || !std::isfinite(rate)) throw std::invalid_argument("poisson_sample: rate must be >= 0");
    if (rate == 0.0) return 0;
    std::poisson_distribution<std::int64_t> dist(rate);
    return dist(rng);
}

std::int64_t binomial_sample(std::int64_t trials, double p, Rng& rng)
{
    if (trials <= 0 || p <= 0.0) return 0;
    if (p >= 1.0) return trials;
    std::binomial_distribution<std::int64_t> dist(trials, p);
    return dist(rng);
}

std::int64_t crt_sample(std::int64_t m, double r, Rng& rng)
{
    if (m < 0) throw std::invalid_argument("crt_sample: negative customer count");
    if (!positive_finite(r)) throw std::invalid_argument("crt_sample: concentration must be > 0");
    if (m > kCrtMaxCustomers) throw std::domain_error("crt_sample: customer count " + std::to_string(m) +
                                                      " exceeds the exact-sampling limit");
    if (m == 0) return 0;
    std::int64_t tables = 1;
    for (std::int64_t t = 1; t < m; ++t)
        if (rng.uniform() * (r + static_cast<double>(t)) < r) ++tables;
    return tables;
}

std::int64_t ztp_sample(double rate, Rng& rng)
{
    if (!positive_finite(rate)) throw std::invalid_argument("ztp_sample: rate must be positive and finite");
    if (rate < 30.0) {
        // Invert the truncated CDF; `target` is on the untruncated scale.
        const double target = rng.uniform() * -std::expm1(-rate);
        std::int64_t z = 1;
        double p = rate * std::exp(-rate);
        double cum = p;
        while (cum < target) {
            ++z;
            p *= rate / static_cast<double>(z);
            if (p <= 0.0) break;
            cum += p;
        }
        return z;
    }
    std::poisson_distribution<std::int64_t> dist(rate);
    for (;;) {
        const std::int64_t z = dist(rng);
        if (z > 0) return z;
    }
}

std::int64_t touchard_conditional_sample(double lam, std::int64_t n, Rng& rng)
{
    if (!(lam >= 0.0) || !std::isfinite(lam))
        throw std::invalid_argument("touchard_conditional_sample: lam must be finite and >= 0");
    return touchard_conditional_sample_log(std::log(lam), n, rng);
}

std::int64_t touchard_conditional_sample_log(double log_lam, std::int64_t n, Rng& rng)
{
    if (std::isnan(log_lam) || log_lam == std::numeric_limits<double>::infinity())
        throw std::invalid_argument("touchard_conditional_sample: lam must be finite");
    if (n < 0) throw std::invalid_argument("touchard_conditional_sample: negative exponent");
    if (log_lam == -std::numeric_limits<double>::infinity()) {
        if (n == 0) return 0;
        throw std::domain_error("touchard_conditional_sample: zero rate with positive exponent " + std::to_string(n));
    }
    const double lam = std::exp(log_lam);
    if (n == 0) return poisson_sample(lam, rng);

    const double spread = lam + static_cast<double>(n);
    const auto x_max = static_cast<std::int64_t>(std::ceil(spread + 12.0 * std::sqrt(spread) + 20.0));
    const double dn = static_cast<double>(n);

    thread_local std::vector<double> logw;
    logw.resize(static_cast<std::size_t>(x_max));
    // logw[x - 1] = x log(lam) + n log(x) - log(x!)
    double lw = log_lam;  // x = 1
    double prev_log_x = 0.0;
    double top = lw;
    logw[0] = lw;
    for (std::int64_t x = 2; x <= x_max; ++x) {
        const double log_x = std::log(static_cast<double>(x));
        lw += log_lam + dn * (log_x - prev_log_x) - log_x;
        prev_log_x = log_x;
        logw[static_cast<std::size_t>(x - 1)] = lw;
        top = std::max(top, lw);
    }
    double total = 0.0;
    for (double& v : logw) {
        v = std::exp(v - top);
        total += v;
    }
    const double target = rng.uniform() * total;
    double cum = 0.0;
    for (std::int64_t x = 1; x <= x_max; ++x) {
        cum += logw[static_cast<std::size_t>(x - 1)];
        if (cum >= target) return x;
    }
    return x_max;
}

void multinomial_split(std::int64_t total, std::span<const double> weights, std::span<std::int64_t> out, Rng& rng)
{
    if (weights.size() != out.size()) throw std::invalid_argument("multinomial_split: size mismatch");
    if (total < 0) throw std::invalid_argument("multinomial_split: negative total");
    std::fill(out.begin(), out.end(), 0);
    if (total == 0) return;

    double sum = 0.0;
    std::size_t last = weights.size();
    for (std::size_t k = 0; k < weights.size(); ++k) {
        if (weights[k] < 0.0 || !std::isfinite(weights[k]))
            throw std::invalid_argument("multinomial_split: weights must be finite and >= 0");
        if (weights[k] > 0.0) {
            sum += weights[k];
            last = k;
        }
    }
    if (!(sum > 0.0)) throw std::invalid_argument("multinomial_split: positive total with all-zero weights");

    if (total <= 8) {
        // Few units: categorical draws by linear search.
        for (std::int64_t u = 0; u < total; ++u) {
            double target = rng.uniform() * sum;
            std::size_t pick = last;
            for (std::size_t k = 0; k < weights.size(); ++k) {
                target -= weights[k];
                if (target < 0.0 && weights[k] > 0.0) {
                    pick = k;
                    break;
                }
            }
            ++out[pick];
        }
        return;
    }

    // Sequential conditional binomials.
    std::int64_t remaining = total;
    double remaining_weight = sum;
    for (std::size_t k = 0; k < weights.size() && remaining > 0; ++k) {
        if (weights[k] <= 0.0) continue;
        if (k == last) {
            out[k] = remaining;
            break;
        }
        const double p = std::min(1.0, weights[k] / remaining_weight);
        const std::int64_t x = binomial_sample(remaining, p, rng);
        out[k] = x;
        remaining -= x;
        remaining_weight -= weights[k];
        if (remaining_weight <= 0.0) {
            // Rounding drift; hand the rest to the final positive component.
            out[last] += remaining;
            break;
        }
    }
}

std::vector<std::int64_t> multinomial_split(std::int64_t total, std::span<const double> weights, Rng& rng)
{
    std::vector<std::int64_t> out(weights.size());
    multinomial_split(total, weights, out, rng);
    return out;
}

} // namespace sdrem::randkit
