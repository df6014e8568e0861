#pragma once

#include <vector>

#include "json.hpp"
#include "kgntm/generative.hpp"

namespace kgntm {

// Planted ground truth for synthetic experiments: block-structured regular
// topics, an ontology whose seed words sit inside the matching blocks, a
// sharp logistic label head and linear feature heads.
struct PlantedSpec {
    std::size_t K = 8;
    std::size_t V = 200;
    std::size_t seeded_topics = 4;    // first topics carrying an ontology category
    std::size_t seeds_per_topic = 5;
    double block_mass = 0.85;         // share of a regular topic on its own word block
    double pi_seeded = 0.7;
    double pi_unseeded = 0.9;
    double seed_own_mass = 0.95;      // share of a seeded phi_S row on its own category
    std::vector<std::size_t> risk_topics{0, 1, 4};
    double label_sharpness = 40.0;
    double label_threshold = 0.5;
    std::size_t feature_dim = 16;
    double alpha = 0.2;

    nlohmann::json to_json() const;
    static PlantedSpec from_json(const nlohmann::json& j, PlantedSpec base);
};

struct PlantedWorld {
    Vocabulary vocab;
    SeedOntology ontology;
    ModelState state;
    HyperParams hp;
};

PlantedWorld make_planted_world(const PlantedSpec& spec, Rng& rng);

struct SyntheticCorpusSpec {
    std::size_t docs = 500;
    DocSizes sizes{};
    double transcript_free_share = 0.3;
};

// Samples a labeled corpus from the planted world. Latents are returned in
// document order.
Corpus sample_corpus(const PlantedWorld& world, const SyntheticCorpusSpec& spec, Rng& rng,
                     std::vector<LatentDraw>* latents = nullptr);

} // namespace kgntm
