#include "kgntm/pretrain.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "kgntm/log.hpp"
#include "kgntm/rng.hpp"

namespace kgntm {

using nlohmann::json;

json GibbsConfig::to_json() const
{
    return {{"iterations", iterations},         {"doc_topic_prior", doc_topic_prior},
            {"topic_word_prior", topic_word_prior}, {"seed_boost", seed_boost},
            {"chains", chains},                 {"use_transcripts", use_transcripts},
            {"use_comments", use_comments}};
}

GibbsConfig GibbsConfig::from_json(const json& j, GibbsConfig c)
{
    for (const auto& [key, v] : j.items()) {
        if (key == "iterations") c.iterations = v.get<std::size_t>();
        else if (key == "doc_topic_prior") c.doc_topic_prior = v.get<double>();
        else if (key == "topic_word_prior") c.topic_word_prior = v.get<double>();
        else if (key == "seed_boost") c.seed_boost = v.get<double>();
        else if (key == "chains") c.chains = v.get<std::size_t>();
        else if (key == "use_transcripts") c.use_transcripts = v.get<bool>();
        else if (key == "use_comments") c.use_comments = v.get<bool>();
        else throw SchemaError("unknown pretrain key '" + key + "'");
    }
    return c;
}

Tensor build_seed_init(const SeedOntology& ontology, const Vocabulary& vocab, std::size_t K, double smoothing)
{
    const std::size_t U = vocab.U();
    if (K < ontology.size()) throw std::invalid_argument("build_seed_init: K is smaller than the number of categories");
    if (U == 0) throw std::invalid_argument("build_seed_init: empty seed lexicon");
    if (smoothing < 0.0) throw std::invalid_argument("build_seed_init: smoothing must be >= 0");
    auto B = Tensor::matrix(K, U);
    for (std::size_t k = 0; k < K; ++k) {
        if (k < ontology.size()) {
            const auto& seeds = ontology.categories[k].seeds;
            for (auto u : seeds) B(k, u) = 1.0 / static_cast<double>(seeds.size());
            double s = 0.0;
            for (std::size_t u = 0; u < U; ++u) s += (B(k, u) += smoothing);
            for (std::size_t u = 0; u < U; ++u) B(k, u) /= s;
        } else {
            for (std::size_t u = 0; u < U; ++u) B(k, u) = 1.0 / static_cast<double>(U);
        }
    }
    return B;
}

double lda_complete_loglik(const std::vector<std::vector<std::uint32_t>>& doc_topic,
                           const std::vector<std::vector<std::uint32_t>>& topic_word, double alpha, double beta)
{
    const std::size_t K = topic_word.size();
    const std::size_t V = K ? topic_word[0].size() : 0;
    const double Kd = static_cast<double>(K), Vd = static_cast<double>(V);
    double ll = 0.0;
    for (const auto& row : topic_word) {
        double n = 0.0;
        ll += std::lgamma(Vd * beta) - Vd * std::lgamma(beta);
        for (auto c : row) {
            ll += std::lgamma(c + beta);
            n += c;
        }
        ll -= std::lgamma(n + Vd * beta);
    }
    for (const auto& row : doc_topic) {
        double n = 0.0;
        ll += std::lgamma(Kd * alpha) - Kd * std::lgamma(alpha);
        for (auto c : row) {
            ll += std::lgamma(c + alpha);
            n += c;
        }
        ll -= std::lgamma(n + Kd * alpha);
    }
    return ll;
}

namespace {

struct Chain {
    std::vector<std::vector<std::uint32_t>> ndk, nkw;
    std::vector<std::uint32_t> nk;
    std::vector<double> trace;
};

Chain run_chain(const std::vector<std::vector<TokenId>>& docs, std::size_t K, std::size_t V,
                const std::vector<std::vector<double>>& boost, const GibbsConfig& cfg, std::uint64_t seed)
{
    Rng rng(seed);
    Chain ch;
    ch.ndk.assign(docs.size(), std::vector<std::uint32_t>(K, 0));
    ch.nkw.assign(K, std::vector<std::uint32_t>(V, 0));
    ch.nk.assign(K, 0);
    std::vector<std::vector<std::uint32_t>> z(docs.size());
    for (std::size_t d = 0; d < docs.size(); ++d) {
        z[d].resize(docs[d].size());
        for (std::size_t i = 0; i < docs[d].size(); ++i) {
            const auto k = std::min<std::size_t>(K - 1, static_cast<std::size_t>(uniform_open(rng) * K));
            z[d][i] = static_cast<std::uint32_t>(k);
            ++ch.ndk[d][k];
            ++ch.nkw[k][docs[d][i]];
            ++ch.nk[k];
        }
    }
    const double alpha = cfg.doc_topic_prior, beta = cfg.topic_word_prior, Vbeta = beta * static_cast<double>(V);
    std::vector<double> p(K);
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        for (std::size_t d = 0; d < docs.size(); ++d) {
            for (std::size_t i = 0; i < docs[d].size(); ++i) {
                const TokenId w = docs[d][i];
                const auto old = z[d][i];
                --ch.ndk[d][old];
                --ch.nkw[old][w];
                --ch.nk[old];
                double total = 0.0;
                for (std::size_t k = 0; k < K; ++k) {
                    total += (p[k] = (ch.ndk[d][k] + alpha) * (ch.nkw[k][w] + beta) / (ch.nk[k] + Vbeta) * boost[k][w]);
                }
                double u = uniform_open(rng) * total;
                std::size_t k = 0;
                for (; k + 1 < K; ++k) {
                    u -= p[k];
                    if (u <= 0.0) break;
                }
                z[d][i] = static_cast<std::uint32_t>(k);
                ++ch.ndk[d][k];
                ++ch.nkw[k][w];
                ++ch.nk[k];
            }
        }
        ch.trace.push_back(lda_complete_loglik(ch.ndk, ch.nkw, alpha, beta));
    }
    return ch;
}

} // namespace

PretrainResult seeded_lda_gibbs(const Corpus& corpus, const SeedOntology& ontology, std::size_t K,
                                const GibbsConfig& cfg, std::uint64_t seed)
{
    if (corpus.docs.empty()) throw std::invalid_argument("seeded_lda_gibbs: empty corpus");
    if (cfg.iterations < 1) throw std::invalid_argument("seeded_lda_gibbs: iterations must be >= 1");
    if (cfg.chains < 1) throw std::invalid_argument("seeded_lda_gibbs: chains must be >= 1");
    if (!(cfg.doc_topic_prior > 0.0 && cfg.topic_word_prior > 0.0 && cfg.seed_boost > 0.0)) {
        throw std::invalid_argument("seeded_lda_gibbs: priors and seed boost must be > 0");
    }
    if (K < ontology.size()) throw std::invalid_argument("seeded_lda_gibbs: K is smaller than the number of categories");
    const std::size_t V = corpus.vocab.V();

    std::vector<std::vector<TokenId>> docs;
    std::size_t skipped = 0;
    for (const auto& d : corpus.docs) {
        std::vector<TokenId> toks;
        if (cfg.use_transcripts && d.transcript) toks.insert(toks.end(), d.transcript->begin(), d.transcript->end());
        if (cfg.use_comments) toks.insert(toks.end(), d.comments.begin(), d.comments.end());
        if (toks.empty()) {
            ++skipped;
            continue;
        }
        docs.push_back(std::move(toks));
    }
    if (skipped) log_info("seeded LDA: skipped " + std::to_string(skipped) + " empty document(s)");
    if (docs.empty()) throw std::invalid_argument("seeded_lda_gibbs: every document is empty");

    std::vector<std::vector<double>> boost(K, std::vector<double>(V, 1.0));
    const auto seed_map = corpus.vocab.seed_to_regular();
    for (std::size_t k = 0; k < ontology.size(); ++k) {
        for (auto u : ontology.categories[k].seeds) {
            if (u < seed_map.size() && seed_map[u]) boost[k][*seed_map[u]] = cfg.seed_boost;
        }
    }

    std::vector<Chain> chains(cfg.chains);
    auto run = [&](std::size_t c) { chains[c] = run_chain(docs, K, V, boost, cfg, derive_seed(seed, c)); };
    if (cfg.threads > 1 && cfg.chains > 1) {
        std::vector<std::thread> pool;
        for (std::size_t start = 0; start < cfg.chains; start += cfg.threads) {
            pool.clear();
            for (std::size_t c = start; c < std::min(cfg.chains, start + cfg.threads); ++c) pool.emplace_back(run, c);
            for (auto& t : pool) t.join();
        }
    } else {
        for (std::size_t c = 0; c < cfg.chains; ++c) run(c);
    }

    std::size_t best = 0;
    for (std::size_t c = 1; c < chains.size(); ++c) {
        if (chains[c].trace.back() > chains[best].trace.back()) best = c;
    }
    const Chain& ch = chains[best];

    PretrainResult res;
    res.B_R = Tensor::matrix(K, V);
    const double beta = cfg.topic_word_prior;
    for (std::size_t k = 0; k < K; ++k) {
        const double denom = ch.nk[k] + beta * static_cast<double>(V);
        for (std::size_t v = 0; v < V; ++v) res.B_R(k, v) = (ch.nkw[k][v] + beta) / denom;
    }
    res.B_S = build_seed_init(ontology, corpus.vocab, K);
    res.iterations = cfg.iterations;
    res.chain = best;
    res.loglik_trace = ch.trace;
    res.topic_word_counts = ch.nkw;
    return res;
}

} // namespace kgntm
