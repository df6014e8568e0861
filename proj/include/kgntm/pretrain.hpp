#pragma once

#include <vector>

#include "json.hpp"
#include "kgntm/corpus.hpp"
#include "kgntm/tensor.hpp"

namespace kgntm {

struct GibbsConfig {
    std::size_t iterations = 500;
    double doc_topic_prior = 0.1;
    double topic_word_prior = 0.1;
    double seed_boost = 5.0;
    std::size_t chains = 1;
    std::size_t threads = 1;
    bool use_transcripts = true;
    bool use_comments = true;

    nlohmann::json to_json() const;
    static GibbsConfig from_json(const nlohmann::json& j, GibbsConfig base);
};

struct PretrainResult {
    Tensor B_R; // K x V
    Tensor B_S; // K x U
    std::size_t iterations = 0;
    std::size_t chain = 0;                // index of the chain that was kept
    std::vector<double> loglik_trace;     // complete-data log-likelihood per iteration
    std::vector<std::vector<std::uint32_t>> topic_word_counts; // K x V, final state
};

// Rows k < K_s: uniform over category k's seed words, plus `smoothing` on
// every entry, renormalized. Rows k >= K_s: uniform over the seed lexicon.
Tensor build_seed_init(const SeedOntology& ontology, const Vocabulary& vocab, std::size_t K, double smoothing = 1e-6);

// Collapsed Gibbs sampling for LDA over transcript+comment tokens of each
// video, where the topic-word factor of topic k < K_s is multiplied by
// `seed_boost` for the seed words of category k. Returns B_R as the
// posterior mean of topic-word counts under the symmetric prior. B_S is
// filled from build_seed_init.
PretrainResult seeded_lda_gibbs(const Corpus& corpus, const SeedOntology& ontology, std::size_t K,
                                const GibbsConfig& cfg, std::uint64_t seed);

// Complete-data log-likelihood log p(w, z) of an LDA state.
double lda_complete_loglik(const std::vector<std::vector<std::uint32_t>>& doc_topic,
                           const std::vector<std::vector<std::uint32_t>>& topic_word, double alpha, double beta);

} // namespace kgntm
