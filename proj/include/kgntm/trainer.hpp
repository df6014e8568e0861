#pragma once

#include <string>
#include <vector>

#include "json.hpp"
#include "kgntm/elbo.hpp"
#include "kgntm/optim.hpp"
#include "kgntm/pretrain.hpp"

namespace kgntm {

struct Ablations {
    bool multi_origin = true;
    bool two_sets_of_topics = true;
    bool auto_supervision = true;
    bool pretrained_init = true;

    nlohmann::json to_json() const;
    static Ablations from_json(const nlohmann::json& j, Ablations base);
    // Turns off each flag named in a comma-separated list.
    static Ablations disabling(const std::string& list);
    static const std::vector<std::string>& names();
    bool operator==(const Ablations&) const = default;
};

struct NetworkShape {
    ModelNetShape model;
    InferenceShape inference;
    double sigma_init = 0.1;

    nlohmann::json to_json() const;
    static NetworkShape from_json(const nlohmann::json& j, NetworkShape base);
};

struct TrainConfig {
    HyperParams hp;
    std::size_t batch_size = 64;
    std::size_t max_epochs = 200;
    std::size_t min_epochs = 20;
    // Stop once |ΔELBO| between consecutive epochs < convergence_rel * |ELBO|.
    double convergence_rel = 1e-3;
    std::uint64_t seed = 1;
    Ablations ablations;
    bool transcript_tilde_variant = true; // transcript words use their own π̃ and φ̃^R
    GibbsConfig gibbs;
    NetworkShape network;
    std::size_t distill_epochs = 100;
    double distill_convergence_rel = 1e-4;
    std::string metrics_path; // JSON lines, one record per epoch; empty = none

    void validate() const;
    ElboOptions elbo_options(std::size_t corpus_size) const;
    nlohmann::json to_json() const;
    static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
};

struct TrainReport {
    std::vector<ElboBreakdown> epochs; // E-step pass, summed over batches
    bool converged = false;
    double seconds = 0.0;
    std::string checkpoint_path;

    nlohmann::json to_json() const;
};

// Everything needed to predict and report: generative and variational
// states plus the vocabulary, ontology and the config that produced them.
struct TrainedModel {
    Vocabulary vocab;
    SeedOntology ontology;
    FeatureDims dims;
    TrainConfig cfg;
    ModelState model;
    VariationalState vs;
    bool distilled = false;
};

struct TrainResult {
    TrainedModel model;
    TrainReport report;
};

// Checks the training preconditions: K >= 2, every document labeled and
// with comments, consistent feature dimensions.
void check_trainable(const Corpus& corpus, const TrainConfig& cfg);

// B^R, B^S from seeded LDA, or random-uniform rows when pretrained_init is off.
std::pair<Tensor, Tensor> initial_topic_matrices(const Corpus& corpus, const SeedOntology& ontology,
                                                 const TrainConfig& cfg);

TrainedModel init_model(const Corpus& corpus, const SeedOntology& ontology, const TrainConfig& cfg);

// Variational EM: per epoch one E-step pass (inference networks only) and
// one M-step pass (NN^L, NN^I, NN^M, NN^A only).
TrainResult train(const Corpus& corpus, const SeedOntology& ontology, const TrainConfig& cfg);

// One E-step or M-step pass over `order` in batches. Returns the summed
// breakdown of the evaluated batches (values before each update).
enum class Phase { e_step, m_step };
ElboBreakdown run_pass(TrainedModel& m, const Corpus& corpus, const std::vector<std::size_t>& order, Phase phase,
                       Adam& opt, Rng& rng);

// Copies posterior means into the point-valued fields of the ModelState
// (φ's, π, π̃), honoring the ablation switches.
void finalize_point_estimates(TrainedModel& m);

struct DistillReport {
    std::vector<double> trace_with;    // mean KL per epoch, variant with transcript
    std::vector<double> trace_without; // variant without transcript
    double initial_with = 0.0, final_with = 0.0;
    double initial_without = 0.0, final_without = 0.0;
    std::size_t docs_with = 0, docs_without = 0;

    nlohmann::json to_json() const;
};

// Mean KL(complete ‖ incomplete) over the given documents for one variant.
double distill_objective(const TrainedModel& m, const Corpus& corpus, const std::vector<std::size_t>& docs,
                         IncompleteVariant v);

// Initializes the incomplete networks from the trained complete ones and
// fine-tunes them. Documents with a transcript train the with-transcript
// variant, the rest train the without-transcript variant.
DistillReport distill_incomplete(const Corpus& corpus, TrainedModel& m);

void save_model(const TrainedModel& m, const std::string& path);
TrainedModel load_model(const std::string& path);
std::string encode_model(const TrainedModel& m);

} // namespace kgntm
