#pragma once

// Exact samplers for the non-standard distributions the Gibbs sweep needs.
// Every function is stateless apart from the engine it is handed.

#include "sdrem/rng.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sdrem::randkit {

/// Smallest value returned by gamma_sample.
inline constexpr double kGammaFloor = 1e-300;

/// Largest customer count crt_sample accepts.
inline constexpr std::int64_t kCrtMaxCustomers = 1'000'000;

/// Gamma(shape, scale), mean shape*scale. Result is floored at kGammaFloor.
double gamma_sample(double shape, double scale, Rng& rng);

/// log of a Gamma(shape, 1) draw, finite even for very small shapes.
double log_gamma_sample(double shape, Rng& rng);

/// log of a Beta(a, b) draw. b == 0 is accepted and returns 0 (q = 1), the
/// convention used for nodes that carry no counts.
double log_beta_sample(double a, double b, Rng& rng);

/// Dirichlet draw into `out`; entries > 0 and summing to 1.
void dirichlet_sample(std::span<const double> concentration, std::span<double> out, Rng& rng);
std::vector<double> dirichlet_sample(std::span<const double> concentration, Rng& rng);

std::int64_t poisson_sample(double rate, Rng& rng);
std::int64_t binomial_sample(std::int64_t trials, double p, Rng& rng);

/// Chinese restaurant table count for m customers with concentration r:
/// sum over t = 1..m of Bernoulli(r / (r + t - 1)).
std::int64_t crt_sample(std::int64_t m, double r, Rng& rng);

/// Poisson(rate) conditioned on a strictly positive outcome.
std::int64_t ztp_sample(double rate, Rng& rng);

/// Draw x with P(x) proportional to lam^x x^n / x!.
///
/// Inverts the cumulative sum over x in [min(n,1), x_max] with
/// x_max = ceil(lam + n + 12 sqrt(lam + n) + 20); weights are evaluated in log
/// space. Because x^n / x! expands into Stirling-weighted falling factorials,
/// the target is a mixture of k + Poisson(lam) with k <= n, so the mass beyond
/// x_max is far below 1e-10.
///
/// Throws std::domain_error for lam == 0 with n >= 1 (no support) and
/// std::invalid_argument for negative or non-finite lam.
std::int64_t touchard_conditional_sample(double lam, std::int64_t n, Rng& rng);

/// Same target, parametrised by log(lam) so tiny rates do not underflow.
std::int64_t touchard_conditional_sample_log(double log_lam, std::int64_t n, Rng& rng);

/// Multinomial(total; weights / sum(weights)) written into `out`
/// (same length as `weights`). Zero-weight components always receive zero.
void multinomial_split(std::int64_t total, std::span<const double> weights, std::span<std::int64_t> out,
                       Rng& rng);
std::vector<std::int64_t> multinomial_split(std::int64_t total, std::span<const double> weights, Rng& rng);

/// log(exp(a) + exp(b)) without overflow.
double log_add_exp(double a, double b) noexcept;

} // namespace sdrem::randkit
