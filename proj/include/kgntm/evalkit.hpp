#pragma once

#include <set>
#include <vector>

#include "json.hpp"
#include "kgntm/predictor.hpp"
#include "kgntm/synthetic.hpp"

namespace kgntm {

struct MetricsRow {
    double f1 = 0.0, precision = 0.0, recall = 0.0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    std::size_t positives = 0, n = 0;

    nlohmann::json to_json() const;
};

// Positive class is 1. Throws std::invalid_argument on length mismatch or
// empty input.
MetricsRow classification_metrics(const std::vector<int>& predicted, const std::vector<int>& labels);

// Document word sets of a reference corpus (transcript and comment tokens).
std::vector<std::set<TokenId>> document_word_sets(const Corpus& corpus);

// UMass coherence of one ordered top-word list:
// Σ_{m≥2} Σ_{l<m} log((D(w_m, w_l) + 1) / D(w_l)). Pairs of identical words
// are skipped; words with zero document frequency are dropped with a warning.
double umass_coherence(const std::vector<TokenId>& top_words, const std::vector<std::set<TokenId>>& docs);

struct CoherenceResult {
    std::vector<double> top10, top20;
    double mean10 = 0.0, mean20 = 0.0;

    nlohmann::json to_json() const;
};

// Coherence of every topic at 10 and 20 words. With `pooled`, comment and
// transcript topics are merged by summing probabilities; otherwise the
// comment-side topics are used.
CoherenceResult model_coherence(const TrainedModel& m, const Corpus& reference, bool pooled = true);

// Minimum-cost assignment of rows to columns of a square cost matrix.
// Returns assignment[row] = column.
std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost);

double cosine(std::span<const double> a, std::span<const double> b);

struct RecoveryResult {
    double mean_cosine = 0.0;
    std::vector<double> per_topic;        // indexed by planted topic
    std::vector<std::size_t> assignment;  // planted topic -> learned topic

    nlohmann::json to_json() const;
};

// Hungarian-matched cosine similarity between rows of two K x V matrices.
RecoveryResult topic_recovery(const Tensor& learned, const Tensor& planted);

// Labels each document by its comment flags at every cutoff and scores the
// given predictions against those labels. Documents without flags are an
// error.
struct CutoffRow {
    double cutoff = 0.0;
    MetricsRow metrics;
};
std::vector<CutoffRow> cutoff_sweep(const Corpus& corpus, const std::vector<Prediction>& predictions,
                                    const std::vector<double>& cutoffs);
const std::vector<double>& default_cutoffs();

struct SplitIndices {
    std::vector<std::size_t> train, val, test;
};
// Seeded shuffle then 70/15/15 split.
SplitIndices split_70_15_15(std::size_t n, std::uint64_t seed);
Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& idx);

struct ExperimentConfig {
    PlantedSpec planted;
    SyntheticCorpusSpec corpus;
    std::uint64_t seed = 1;
    double threshold = 0.5;
    bool pooled_coherence = true;

    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j, ExperimentConfig base);
};

struct ExperimentResult {
    nlohmann::json report;
    TrainedModel model;
    Corpus train, val, test;
    PlantedWorld world;
};

// Samples a planted corpus, splits it, trains, distills, predicts and
// scores. The report holds metrics, recovery, coherence, seed weights, the
// config echo and the seed.
ExperimentResult run_synthetic_experiment(const ExperimentConfig& gen, const TrainConfig& cfg);

// Mean of the first and last `window` epoch totals.
std::pair<double, double> elbo_window_means(const TrainReport& r, std::size_t window = 10);

} // namespace kgntm
