#pragma once

#include "json.hpp"
#include "kgntm/generative.hpp"
#include "kgntm/inference.hpp"

namespace kgntm {

struct ElboBreakdown {
    double recon_transcript = 0.0, recon_comment = 0.0, recon_label = 0.0;
    double recon_img = 0.0, recon_mot = 0.0, recon_aud = 0.0;
    double kl_theta = 0.0, kl_pi_t = 0.0, kl_pi = 0.0, kl_eta = 0.0;
    double kl_phiS = 0.0, kl_phiR = 0.0, kl_phiR_t = 0.0;
    double total = 0.0;

    double recon_sum() const;
    double kl_sum() const;
    nlohmann::json to_json() const;
    static ElboBreakdown from_json(const nlohmann::json& j);
    ElboBreakdown& operator+=(const ElboBreakdown& o);
    ElboBreakdown scaled(double s) const;
};

// Model structure switches, all on for the full model.
struct ElboOptions {
    bool multi_origin = true;      // off: η fixed to 1, transcripts use θ directly
    bool two_sets = true;          // off: seed topics only, π = π̃ = 0
    bool auto_supervision = true;  // off: π = π̃ = 0.5 constants
    bool tilde_variant = true;     // transcript term uses π̃ and φ̃^R
    std::size_t corpus_size = 0;   // global KLs scaled by batch/corpus_size; 0 means no scaling
    bool track_inference = true;   // inference nets as differentiable leaves
    bool track_model = true;       // NN^L, NN^I, NN^M, NN^A as differentiable leaves
};

// Pre-drawn noise for one evaluation, so a computation can be replayed.
struct ElboNoise {
    Tensor eps_theta; // B x K standard normal
    Tensor u_eta;     // B x 1 uniform
    Tensor u_pi;      // 1 x K
    Tensor u_pi_t;    // 1 x K
    Tensor eps_phiR;  // K x V
    Tensor eps_phiRt; // K x V
    Tensor eps_phiS;  // K x U

    static ElboNoise draw(std::size_t batch, std::size_t K, std::size_t V, std::size_t U, Rng& rng);
};

// ---- closed-form KL divergences ------------------------------------------

// Σ_rows KL(N(mu, diag sigma²) || N(0, prior_var I)).
double kl_normal_topic(const Tensor& mu, const Tensor& sigma, double prior_var);
double kl_normal_topic(const Tensor& mu, const Tensor& sigma, const HyperParams& hp);
// KL(Beta(a, b) || Beta(a0, b0)).
double kl_beta(double a, double b, double a0, double b0);
// Σ_elements KL(LogNormal(mu, sigma) || LogNormal(loc0, scale0)).
double kl_lognormal(const Tensor& mu, const Tensor& sigma, const Tensor& loc0, double scale0);

// Taped forms (scalar outputs).
Var kl_normal_topic(const Var& mu, const Var& sigma, double prior_var);
Var kl_beta(const Var& a, const Var& b, double a0, double b0);
Var kl_lognormal(const Var& mu, const Var& sigma, const Tensor& loc0, double scale0);

// KL between diagonal Gaussians, summed over rows: Σ KL(N(mu_p, sp²) || N(mu_q, sq²)).
double kl_gaussian_diag(const Tensor& mu_p, const Tensor& sigma_p, const Tensor& mu_q, const Tensor& sigma_q);
Var kl_gaussian_diag(const Var& mu_p, const Var& sigma_p, const Var& mu_q, const Var& sigma_q);

// ---- objective ----------------------------------------------------------

struct ElboGraph {
    Var total;
    ElboBreakdown breakdown;
    Var theta; // B x K sampled topic proportions
};

// Records one reparameterized ELBO evaluation on `tape`.
ElboGraph elbo_graph(Tape& tape, const BatchEncoding& batch, const ModelState& state, const VariationalState& vs,
                     const HyperParams& hp, const ElboOptions& opts, const ElboNoise& noise);

// Evaluates the ELBO once with fresh noise, no gradients.
ElboBreakdown elbo_total(const BatchEncoding& batch, const ModelState& state, const VariationalState& vs,
                         const HyperParams& hp, const ElboOptions& opts, Rng& rng);

// Reconstruction terms of one batch for fixed topic proportions and
// point-valued topics taken from `state` (π, π̃, φ's as stored). `eta` is
// B x 1. Used for checks against the generative module.
ElboBreakdown recon_lower_bound(const BatchEncoding& batch, const Tensor& theta, const Tensor& eta,
                                const ModelState& state, const HyperParams& hp, const ElboOptions& opts);

} // namespace kgntm
