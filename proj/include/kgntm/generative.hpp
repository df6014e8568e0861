#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kgntm/corpus.hpp"
#include "kgntm/nn.hpp"

namespace kgntm {

struct HyperParams {
    double alpha = 1.0;
    double beta_ratio = 0.6;
    double tau1 = 1.0, tau2 = 1.0;
    double delta1 = 1.0, delta2 = 1.0;
    double delta1_t = 1.0, delta2_t = 1.0;
    // Zero means "use the default" (V-1)/V or (U-1)/U; see resolve().
    double gamma1 = 0.0, gamma2 = 0.0, gamma3 = 0.0;
    std::size_t K = 40;
    double xi_img = 1.0, xi_mot = 1.0, xi_aud = 1.0;
    double learning_rate = 1e-3;

    // Fills unset gammas from the vocabulary sizes.
    void resolve(std::size_t V, std::size_t U);
    void validate() const;
    // Prior variance of each coordinate of r_d: (K-1)/(alpha K).
    double prior_variance() const { return static_cast<double>(K - 1) / (alpha * static_cast<double>(K)); }

    nlohmann::json to_json() const;
    // Reads known keys from `j`, rejecting unknown ones.
    static HyperParams from_json(const nlohmann::json& j, HyperParams base);
    static HyperParams from_json(const nlohmann::json& j);
};

// Generative-side quantities. phi_* are point values (planted truth, or the
// posterior means of a trained model).
struct ModelState {
    std::size_t K = 0, V = 0, U = 0;
    Tensor phi_S;   // K x U
    Tensor phi_R;   // K x V
    Tensor phi_R_t; // K x V
    Tensor pi;      // 1 x K, probability that a word comes from the regular topic
    Tensor pi_t;    // 1 x K
    Tensor assoc;   // 1 x K, always uniform
    Tensor B_R;     // K x V
    Tensor B_S;     // K x U
    // Regular index of each seed word, -1 when the seed word is not in V.
    std::vector<std::int64_t> seed_regular;
    MlpNet net_label, net_img, net_mot, net_aud;

    void validate() const;
    // U x V 0/1 matrix placing seed word u at its regular index.
    Tensor seed_embedding() const;
    // phi_S row k embedded into V-space.
    std::vector<double> phi_S_regular(std::size_t k) const;
    FeatureDims feature_dims() const;
};

std::vector<std::int64_t> seed_regular_map(const Vocabulary& vocab);

struct ModelNetShape {
    std::vector<std::size_t> label_hidden{128, 128};
    std::vector<std::size_t> feature_hidden{128, 128};
};

// Uniform topics, pi = pi_t = 0.5, B = uniform, freshly initialized nets.
ModelState make_model_state(std::size_t K, const Vocabulary& vocab, const FeatureDims& dims,
                            const ModelNetShape& shape, Rng& rng);

struct DocSizes {
    std::size_t transcript_words = 30; // 0 for a transcript-free video
    std::size_t comment_words = 60;
    std::size_t comment_length = 6;    // words per comment (last one may be shorter)
    double flag_scale = 0.0;           // comment flag ~ Bernoulli(flag_scale * p(y=1)); 0 = no flags
    double feature_noise = 0.0;        // stddev of Gaussian noise added to features
};

struct SampleOverrides {
    std::optional<std::vector<double>> theta;
    std::optional<std::vector<std::uint8_t>> mask;
    std::optional<double> eta;
};

struct LatentDraw {
    std::vector<double> r, theta, h;
    std::vector<std::uint8_t> mask;
    std::vector<double> theta_t;
    double eta = 0.0;
    std::size_t mask_resamples = 0;
    bool transcript_dropped = false; // mask stayed all-zero after 100 resamples
    std::vector<std::uint8_t> t;     // comment word from the video (1) or associated thought (0)
    std::vector<std::uint32_t> z;    // comment word topic
    std::vector<std::uint8_t> x;     // comment word from regular (1) or seed (0) topic
    std::vector<std::uint32_t> z_t;  // transcript word topic
    std::vector<std::uint8_t> x_t;
    double label_prob = 0.0;
};

// Runs the full generative process for one video. Seed words emitted by a
// seed topic are mapped to their regular-vocabulary index; a seed word
// outside V makes this throw.
std::pair<VideoDoc, LatentDraw> sample_document(const ModelState& state, const HyperParams& hp, const DocSizes& sizes,
                                                Rng& rng, const SampleOverrides& overrides = {});

// Word-level probabilities. `w` is a regular-vocabulary index.
double comment_word_prob(TokenId w, std::span<const double> theta, double eta, const ModelState& state);
double comment_word_logprob(TokenId w, std::span<const double> theta, double eta, const ModelState& state);

std::vector<double> b_prime(std::span<const double> theta, double beta_ratio);
// Normalize(h ∘ mask); the zero vector when the masked sum is zero.
std::vector<double> theta_tilde(std::span<const double> h, std::span<const std::uint8_t> mask);

// Transcript word probability given θ̃ (the exact per-mask form). `tilde`
// selects π̃/φ̃^R (default) or π/φ^R.
double transcript_word_prob(TokenId w, std::span<const double> theta_t, const ModelState& state, bool tilde = true);
// log of the lower bound with θ̃ replaced by b'(θ).
double transcript_word_logprob_lb(TokenId w, std::span<const double> theta, const ModelState& state,
                                  const HyperParams& hp, bool tilde = true);

// h_k^2 / (h_k + Σ_{i≠k} h_i^2).
std::vector<double> theorem_bound(std::span<const double> h);

struct TheoremEstimate {
    std::vector<double> mean, stderr_, bound;
};
TheoremEstimate theorem_oracle(std::span<const double> h, std::size_t n_samples, Rng& rng);

struct Modalities {
    std::vector<double> img, mot, aud;
};
Modalities generate_modalities(const ModelState& state, std::span<const double> theta);
double generate_label_prob(const ModelState& state, std::span<const double> theta);

// Number of probabilities clamped at 1e-300 by the *_logprob functions.
std::size_t likelihood_clamp_count();
void reset_likelihood_clamp_count();

std::vector<double> softmax(std::span<const double> r);

} // namespace kgntm
