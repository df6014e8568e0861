#include "kgntm/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <stdexcept>

namespace kgntm {

using nlohmann::json;

json PlantedSpec::to_json() const
{
    return {{"K", K},
            {"V", V},
            {"seeded_topics", seeded_topics},
            {"seeds_per_topic", seeds_per_topic},
            {"block_mass", block_mass},
            {"pi_seeded", pi_seeded},
            {"pi_unseeded", pi_unseeded},
            {"seed_own_mass", seed_own_mass},
            {"risk_topics", risk_topics},
            {"label_sharpness", label_sharpness},
            {"label_threshold", label_threshold},
            {"feature_dim", feature_dim},
            {"alpha", alpha}};
}

PlantedSpec PlantedSpec::from_json(const json& j, PlantedSpec s)
{
    for (const auto& [key, v] : j.items()) {
        if (key == "K") s.K = v.get<std::size_t>();
        else if (key == "V") s.V = v.get<std::size_t>();
        else if (key == "seeded_topics") s.seeded_topics = v.get<std::size_t>();
        else if (key == "seeds_per_topic") s.seeds_per_topic = v.get<std::size_t>();
        else if (key == "block_mass") s.block_mass = v.get<double>();
        else if (key == "pi_seeded") s.pi_seeded = v.get<double>();
        else if (key == "pi_unseeded") s.pi_unseeded = v.get<double>();
        else if (key == "seed_own_mass") s.seed_own_mass = v.get<double>();
        else if (key == "risk_topics") s.risk_topics = v.get<std::vector<std::size_t>>();
        else if (key == "label_sharpness") s.label_sharpness = v.get<double>();
        else if (key == "label_threshold") s.label_threshold = v.get<double>();
        else if (key == "feature_dim") s.feature_dim = v.get<std::size_t>();
        else if (key == "alpha") s.alpha = v.get<double>();
        else throw SchemaError("unknown planted-world key '" + key + "'");
    }
    return s;
}

namespace {

// Random distribution with `inside` of its mass spread over [lo, hi) and the
// rest over the remaining entries; weights within each part are Gamma(2)
// draws so rows are distinct but not spiky.
std::vector<double> block_row(std::size_t n, std::size_t lo, std::size_t hi, double inside, Rng& rng)
{
    std::gamma_distribution<double> g(2.0, 1.0);
    std::vector<double> w(n);
    double s_in = 0.0, s_out = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        w[i] = g(rng);
        (i >= lo && i < hi ? s_in : s_out) += w[i];
    }
    const bool all_inside = (hi - lo) == n;
    for (std::size_t i = 0; i < n; ++i) {
        if (i >= lo && i < hi) w[i] *= (all_inside ? 1.0 : inside) / s_in;
        else w[i] *= (1.0 - inside) / s_out;
    }
    return w;
}

std::string word_name(std::size_t i)
{
    std::string s = std::to_string(i);
    return "w" + std::string(s.size() < 3 ? 3 - s.size() : 0, '0') + s;
}

} // namespace

PlantedWorld make_planted_world(const PlantedSpec& spec, Rng& rng)
{
    const std::size_t K = spec.K, V = spec.V;
    if (K < 2 || V < K) throw std::invalid_argument("planted world needs K >= 2 and V >= K");
    if (spec.seeded_topics > K) throw std::invalid_argument("more seeded topics than topics");
    const std::size_t block = V / K;
    if (spec.seeds_per_topic > block) throw std::invalid_argument("seeds_per_topic exceeds the block size");

    PlantedWorld w;
    for (std::size_t i = 0; i < V; ++i) w.vocab.add_regular(word_name(i));

    // Seed words: the first words of each seeded topic's block.
    for (std::size_t k = 0; k < spec.seeded_topics; ++k) {
        SeedCategory cat{"category_" + std::to_string(k), {}};
        for (std::size_t j = 0; j < spec.seeds_per_topic; ++j) cat.seeds.push_back(w.vocab.add_seed(word_name(k * block + j)));
        w.ontology.categories.push_back(std::move(cat));
    }
    if (w.vocab.U() == 0) w.vocab.add_seed(word_name(0));

    w.hp.K = K;
    w.hp.alpha = spec.alpha;
    w.hp.resolve(V, w.vocab.U());

    FeatureDims dims{spec.feature_dim, spec.feature_dim, spec.feature_dim};
    ModelState& s = w.state;
    s = make_model_state(K, w.vocab, dims, {{}, {}}, rng);
    const std::size_t U = s.U;

    for (std::size_t k = 0; k < K; ++k) {
        const std::size_t lo = k * block, hi = k + 1 == K ? V : (k + 1) * block;
        auto r = block_row(V, lo, hi, spec.block_mass, rng);
        auto rt = block_row(V, lo, hi, spec.block_mass, rng);
        for (std::size_t v = 0; v < V; ++v) {
            s.phi_R(k, v) = r[v];
            s.phi_R_t(k, v) = rt[v];
        }
        if (k < spec.seeded_topics) {
            const auto& seeds = w.ontology.categories[k].seeds;
            const double own = seeds.size() == U ? 1.0 : spec.seed_own_mass;
            for (std::size_t u = 0; u < U; ++u) {
                const bool mine = std::find(seeds.begin(), seeds.end(), u) != seeds.end();
                s.phi_S(k, u) = mine ? own / static_cast<double>(seeds.size())
                                     : (1.0 - own) / static_cast<double>(U - seeds.size());
            }
        } else {
            for (std::size_t u = 0; u < U; ++u) s.phi_S(k, u) = 1.0 / static_cast<double>(U);
        }
        const double p = k < spec.seeded_topics ? spec.pi_seeded : spec.pi_unseeded;
        s.pi[k] = p;
        s.pi_t[k] = p;
    }
    s.B_R = s.phi_R;
    s.B_S = s.phi_S;

    // Label head: sigmoid(sharpness * (Σ_{risk} θ_k - threshold)).
    auto& lw = s.net_label.layers().front();
    lw.weight.value.fill(0.0);
    for (auto k : spec.risk_topics) {
        if (k >= K) throw std::invalid_argument("risk topic index out of range");
        lw.weight.value(k, 0) = spec.label_sharpness;
    }
    lw.bias.value.fill(-spec.label_sharpness * spec.label_threshold);

    // Linear feature heads with standard normal weights.
    for (MlpNet* net : {&s.net_img, &s.net_mot, &s.net_aud}) {
        for (auto& layer : net->layers()) {
            for (auto& v : layer.weight.value.values()) v = standard_normal(rng);
            layer.bias.value.fill(0.0);
        }
    }
    s.validate();
    return w;
}

Corpus sample_corpus(const PlantedWorld& world, const SyntheticCorpusSpec& spec, Rng& rng,
                     std::vector<LatentDraw>* latents)
{
    Corpus c;
    c.vocab = world.vocab;
    c.dims = world.state.feature_dims();
    if (latents) latents->clear();
    for (std::size_t d = 0; d < spec.docs; ++d) {
        DocSizes sizes = spec.sizes;
        if (uniform_open(rng) < spec.transcript_free_share) sizes.transcript_words = 0;
        auto [doc, lat] = sample_document(world.state, world.hp, sizes, rng);
        char buf[32];
        std::snprintf(buf, sizeof buf, "doc%05zu", d);
        doc.id = buf;
        c.docs.push_back(std::move(doc));
        if (latents) latents->push_back(std::move(lat));
    }
    return c;
}

} // namespace kgntm
