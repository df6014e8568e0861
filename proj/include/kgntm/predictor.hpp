#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "kgntm/trainer.hpp"

namespace kgntm {

struct Prediction {
    std::string id;
    double probability = 0.0;
    std::vector<double> theta;
    int label = 0;

    nlohmann::json to_json() const;
};

// θ = softmax(μ′) from the incomplete network matching the document's
// transcript presence; probability = NN^L(θ); label 1 iff probability
// exceeds the threshold (ties go to 0). Comments and labels are ignored.
Prediction predict(const VideoDoc& doc, const TrainedModel& m, double threshold = 0.5);
std::vector<Prediction> predict_all(const Corpus& corpus, const TrainedModel& m, double threshold = 0.5);

struct WordWeight {
    std::string word;
    TokenId id = 0;
    double probability = 0.0;
};

struct TopicEntry {
    std::size_t topic = 0;
    std::vector<WordWeight> comment_words;    // top words of E[φ^R_k]
    std::vector<WordWeight> transcript_words; // top words of E[φ̃^R_k]
    double seed_topic_weight = 0.0;           // 1 − E[π_k]
};

struct TopicReport {
    std::vector<TopicEntry> topics;
    std::vector<Prediction> documents; // per-video topic distributions, when documents were given

    nlohmann::json to_json() const;
    std::string to_text() const;
};

// Indices of the n largest entries, by value descending then index.
std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t n);

TopicReport topic_report(const TrainedModel& m, std::size_t top_n, const Corpus* docs = nullptr);

} // namespace kgntm
