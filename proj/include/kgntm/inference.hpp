#pragma once

#include <span>
#include <vector>

#include "json.hpp"
#include "kgntm/corpus.hpp"
#include "kgntm/nn.hpp"

namespace kgntm {

// Floor added after the softplus of every positive head.
inline constexpr double kPositiveFloor = 1e-6;

// Dense batch view of documents: normalized bag-of-words inputs for the
// networks, raw counts for the likelihood.
struct BatchEncoding {
    std::vector<std::size_t> doc_index;
    Tensor bow_transcript; // B x V, counts / transcript length (zero row if absent)
    Tensor bow_comments;   // B x V
    Tensor cnt_transcript; // B x V raw counts
    Tensor cnt_comments;   // B x V
    Tensor f_img, f_mot, f_aud;
    Tensor label;          // B x 1 (0 where unlabeled)
    Tensor has_transcript; // B x 1 in {0, 1}
    Tensor has_label;      // B x 1 in {0, 1}

    std::size_t size() const noexcept { return doc_index.size(); }
    Tensor features() const; // [f_img, f_mot, f_aud]
};

BatchEncoding encode_batch(const Corpus& corpus, std::span<const std::size_t> docs);
BatchEncoding encode_docs(const std::vector<const VideoDoc*>& docs, std::size_t V, const FeatureDims& dims);

// Corpus-level inputs of the global networks.
struct CorpusStats {
    Tensor mean_bow_transcript; // 1 x V, over documents with a transcript
    Tensor mean_bow_comments;   // 1 x V, over documents with comments
    std::size_t docs = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);

enum class IncompleteVariant { with_transcript, without_transcript };

struct InferenceShape {
    std::vector<std::size_t> theta_hidden{128, 128};
    std::vector<std::size_t> global_hidden{128, 128};
    std::vector<std::size_t> eta_hidden{128, 128};
};

struct VariationalState {
    std::size_t K = 0, V = 0, U = 0;
    FeatureDims dims;
    CorpusStats stats;

    MlpNet theta_mean, theta_std;   // NN^mean, NN^std
    MlpNet pi_t_a, pi_t_b;          // NN^{δ̃1}, NN^{δ̃2}
    MlpNet pi_a, pi_b;              // NN^{δ1}, NN^{δ2}
    MlpNet eta_a, eta_b;            // NN^{τ1}, NN^{τ2}
    MlpNet phiRt_mu, phiRt_sigma;   // NN^{μ̃}, NN^{σ̃}
    MlpNet phiR_mu, phiR_sigma;     // NN^μ, NN^σ
    MlpNet phiS_mu, phiS_sigma;     // NN^{s1}, NN^{s2}
    MlpNet inc1, inc2;              // with transcript: mean, std
    MlpNet inc3, inc4;              // without transcript: mean, std

    std::vector<MlpNet*> complete_nets();
    std::vector<const MlpNet*> complete_nets() const;
    std::vector<MlpNet*> incomplete_nets(IncompleteVariant v);
    std::vector<const MlpNet*> all_nets() const;
    std::vector<MlpNet*> all_nets();

    std::size_t theta_input_width() const { return 2 * V + dims.img + dims.mot + dims.aud + 1; }
};

// Builds every network. Location heads of the φ posteriors start at the
// row-centered log B (final weights scaled by 0.01) and scale heads near
// `sigma_init`, so the first φ samples are close to the pretrained matrices.
VariationalState make_variational_state(std::size_t K, std::size_t V, std::size_t U, const FeatureDims& dims,
                                        const CorpusStats& stats, const Tensor& B_R, const Tensor& B_S,
                                        const InferenceShape& shape, Rng& rng, double sigma_init = 0.1);

// Copies every complete-network layer whose shape matches into the
// incomplete networks; input projections are freshly initialized.
void init_incomplete_from_complete(VariationalState& vs, Rng& rng);

struct GaussianParams {
    Var mu, sigma;
};
struct BetaParams {
    Var a, b;
};

// Taped evaluations. `track` records the networks' parameters as
// differentiable leaves; otherwise they are constants.
GaussianParams theta_complete(Tape& tape, const VariationalState& vs, const BatchEncoding& batch, bool track);
GaussianParams theta_incomplete(Tape& tape, const VariationalState& vs, const BatchEncoding& batch,
                                IncompleteVariant variant, bool track);
BetaParams pi_posterior(Tape& tape, const VariationalState& vs, bool track);
BetaParams pi_t_posterior(Tape& tape, const VariationalState& vs, bool track);
BetaParams eta_posterior(Tape& tape, const VariationalState& vs, const BatchEncoding& batch, bool track);
GaussianParams phiR_posterior(Tape& tape, const VariationalState& vs, bool track);  // K x V
GaussianParams phiRt_posterior(Tape& tape, const VariationalState& vs, bool track); // K x V
GaussianParams phiS_posterior(Tape& tape, const VariationalState& vs, bool track);  // K x U

// Plain-value forms.
struct GaussianValues {
    Tensor mu, sigma;
};
struct BetaValues {
    Tensor a, b;
};
GaussianValues infer_theta_complete(const VariationalState& vs, const BatchEncoding& batch);
GaussianValues infer_theta_incomplete(const VariationalState& vs, const BatchEncoding& batch, IncompleteVariant v);
BetaValues infer_pi(const VariationalState& vs);
BetaValues infer_pi_t(const VariationalState& vs);
BetaValues infer_eta(const VariationalState& vs, const BatchEncoding& batch);
struct PhiValues {
    GaussianValues phiR, phiRt, phiS;
};
PhiValues infer_phis(const VariationalState& vs);

// Row-normalized exp(mu + sigma ∘ eps).
Tensor sample_phi(const GaussianValues& g, const Tensor& eps);
// Row-normalized LogNormal means exp(mu + sigma²/2).
Tensor phi_posterior_mean(const GaussianValues& g);

} // namespace kgntm
