#pragma once

#include <span>
#include <vector>

#include "kgntm/generative.hpp"

// Reference computations that avoid the closed forms used by the model:
// explicit enumeration of discrete latents and Monte Carlo estimates built
// directly from log densities. Used by the tests and by `kgntm verify`.
namespace kgntm::oracle {

// Σ over t ∈ {0,1}, z ∈ [K], x ∈ {0,1} of p(t) p(z|t) p(x|z) p(w|z,x).
double comment_word_prob(TokenId w, std::span<const double> theta, double eta, const ModelState& state);
// Σ over z̃ ∈ [K], x̃ ∈ {0,1} of p(z̃|θ̃) p(x̃|z̃) p(w|z̃,x̃).
double transcript_word_prob(TokenId w, std::span<const double> theta_t, const ModelState& state, bool tilde = true);

// E[θ̃] under I_k ~ Bernoulli(h_k), by enumerating all 2^K masks.
std::vector<double> theta_tilde_expectation(std::span<const double> h);
// E over masks of the per-mask transcript word probability, with h = βθ.
double transcript_marginal(TokenId w, std::span<const double> theta, const ModelState& state, const HyperParams& hp,
                           bool tilde = true);

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
};

// KL(N(mu, diag sigma^2) || N(0, prior_var I)).
McEstimate mc_kl_normal(std::span<const double> mu, std::span<const double> sigma, double prior_var, std::size_t n,
                        Rng& rng);
// KL(Beta(a, b) || Beta(a0, b0)).
McEstimate mc_kl_beta(double a, double b, double a0, double b0, std::size_t n, Rng& rng);
// KL(LogNormal(mu, sigma) || LogNormal(mu0, sigma0)), one element.
McEstimate mc_kl_lognormal(double mu, double sigma, double mu0, double sigma0, std::size_t n, Rng& rng);

double normal_logpdf(double x, double mean, double sd);
double beta_logpdf(double x, double a, double b);
double lognormal_logpdf(double x, double mu, double sigma);

// Random point on the simplex with strictly positive entries.
std::vector<double> random_simplex(std::size_t n, Rng& rng);

// Random small ModelState. Every seed word maps to a distinct regular word
// unless `all_seeds_in_V` is false, in which case the last seed word may be
// missing from V.
ModelState random_state(std::size_t K, std::size_t V, std::size_t U, Rng& rng, bool all_seeds_in_V = true);

} // namespace kgntm::oracle
