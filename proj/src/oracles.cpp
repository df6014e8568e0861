#include "kgntm/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>

namespace kgntm::oracle {

namespace {

// p(w | z, x): regular topic row when x = 1, seed topic mapped into V when x = 0.
double word_given(TokenId w, std::size_t z, int x, const Tensor& phi_regular, const ModelState& s)
{
    if (x == 1) return phi_regular(z, w);
    double p = 0.0;
    for (std::size_t u = 0; u < s.U; ++u) {
        if (s.seed_regular[u] == static_cast<std::int64_t>(w)) p += s.phi_S(z, u);
    }
    return p;
}

McEstimate summarize(double sum, double sumsq, std::size_t n)
{
    const double m = sum / static_cast<double>(n);
    const double var = std::max(0.0, sumsq / static_cast<double>(n) - m * m);
    return {m, std::sqrt(var / static_cast<double>(n))};
}

} // namespace

double comment_word_prob(TokenId w, std::span<const double> theta, double eta, const ModelState& s)
{
    double total = 0.0;
    for (int t = 0; t <= 1; ++t) {
        const double pt = t == 1 ? eta : 1.0 - eta;
        for (std::size_t z = 0; z < s.K; ++z) {
            const double pz = t == 1 ? theta[z] : s.assoc[z];
            for (int x = 0; x <= 1; ++x) {
                const double px = x == 1 ? s.pi[z] : 1.0 - s.pi[z];
                total += pt * pz * px * word_given(w, z, x, s.phi_R, s);
            }
        }
    }
    return total;
}

double transcript_word_prob(TokenId w, std::span<const double> theta_t, const ModelState& s, bool tilde)
{
    const Tensor& pi = tilde ? s.pi_t : s.pi;
    const Tensor& phi = tilde ? s.phi_R_t : s.phi_R;
    double total = 0.0;
    for (std::size_t z = 0; z < s.K; ++z) {
        for (int x = 0; x <= 1; ++x) {
            const double px = x == 1 ? pi[z] : 1.0 - pi[z];
            total += theta_t[z] * px * word_given(w, z, x, phi, s);
        }
    }
    return total;
}

std::vector<double> theta_tilde_expectation(std::span<const double> h)
{
    const std::size_t K = h.size();
    if (K > 20) throw std::invalid_argument("theta_tilde_expectation: K too large to enumerate");
    std::vector<double> e(K, 0.0);
    for (std::uint32_t m = 1; m < (1u << K); ++m) {
        double prob = 1.0, s = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            const bool on = (m >> k) & 1u;
            prob *= on ? h[k] : 1.0 - h[k];
            if (on) s += h[k];
        }
        for (std::size_t k = 0; k < K; ++k) {
            if ((m >> k) & 1u) e[k] += prob * h[k] / s;
        }
    }
    return e;
}

double transcript_marginal(TokenId w, std::span<const double> theta, const ModelState& s, const HyperParams& hp,
                           bool tilde)
{
    std::vector<double> h(theta.size());
    for (std::size_t k = 0; k < h.size(); ++k) h[k] = hp.beta_ratio * theta[k];
    const auto e = theta_tilde_expectation(h);
    // The per-mask probability is linear in θ̃, so averaging θ̃ first is exact.
    return oracle::transcript_word_prob(w, e, s, tilde);
}

double normal_logpdf(double x, double mean, double sd)
{
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

double beta_logpdf(double x, double a, double b)
{
    return (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) + std::lgamma(a + b) - std::lgamma(a) -
           std::lgamma(b);
}

double lognormal_logpdf(double x, double mu, double sigma)
{
    return normal_logpdf(std::log(x), mu, sigma) - std::log(x);
}

McEstimate mc_kl_normal(std::span<const double> mu, std::span<const double> sigma, double prior_var, std::size_t n,
                        Rng& rng)
{
    const double prior_sd = std::sqrt(prior_var);
    double sum = 0.0, sumsq = 0.0;
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        double lr = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) {
            const double x = mu[k] + sigma[k] * nd(rng);
            lr += normal_logpdf(x, mu[k], sigma[k]) - normal_logpdf(x, 0.0, prior_sd);
        }
        sum += lr;
        sumsq += lr * lr;
    }
    return summarize(sum, sumsq, n);
}

McEstimate mc_kl_beta(double a, double b, double a0, double b0, std::size_t n, Rng& rng)
{
    double sum = 0.0, sumsq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double x = beta_draw(rng, a, b);
        x = std::clamp(x, 1e-300, 1.0 - 1e-16);
        const double lr = beta_logpdf(x, a, b) - beta_logpdf(x, a0, b0);
        sum += lr;
        sumsq += lr * lr;
    }
    return summarize(sum, sumsq, n);
}

McEstimate mc_kl_lognormal(double mu, double sigma, double mu0, double sigma0, std::size_t n, Rng& rng)
{
    double sum = 0.0, sumsq = 0.0;
    std::normal_distribution<double> nd(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        const double x = std::exp(mu + sigma * nd(rng));
        const double lr = lognormal_logpdf(x, mu, sigma) - lognormal_logpdf(x, mu0, sigma0);
        sum += lr;
        sumsq += lr * lr;
    }
    return summarize(sum, sumsq, n);
}

std::vector<double> random_simplex(std::size_t n, Rng& rng)
{
    std::gamma_distribution<double> g(1.0, 1.0);
    std::vector<double> v(n);
    double s = 0.0;
    for (auto& x : v) s += (x = g(rng) + 1e-3);
    for (auto& x : v) x /= s;
    return v;
}

ModelState random_state(std::size_t K, std::size_t V, std::size_t U, Rng& rng, bool all_seeds_in_V)
{
    ModelState s;
    s.K = K;
    s.V = V;
    s.U = U;
    s.phi_S = Tensor::matrix(K, U);
    s.phi_R = Tensor::matrix(K, V);
    s.phi_R_t = Tensor::matrix(K, V);
    s.pi = Tensor::matrix(1, K);
    s.pi_t = Tensor::matrix(1, K);
    s.assoc = Tensor::matrix(1, K, 1.0 / static_cast<double>(K));
    std::uniform_real_distribution<double> unit(0.02, 0.98);
    for (std::size_t k = 0; k < K; ++k) {
        auto r = random_simplex(V, rng), rt = random_simplex(V, rng), ss = random_simplex(U, rng);
        for (std::size_t v = 0; v < V; ++v) {
            s.phi_R(k, v) = r[v];
            s.phi_R_t(k, v) = rt[v];
        }
        for (std::size_t u = 0; u < U; ++u) s.phi_S(k, u) = ss[u];
        s.pi[k] = unit(rng);
        s.pi_t[k] = unit(rng);
    }
    std::vector<std::int64_t> perm(V);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    s.seed_regular.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(U));
    if (!all_seeds_in_V && rng() % 2 == 0) s.seed_regular.back() = -1;
    s.B_R = s.phi_R;
    s.B_S = s.phi_S;
    return s;
}

} // namespace kgntm::oracle
