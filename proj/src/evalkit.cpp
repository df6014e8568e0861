#include "kgntm/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "kgntm/log.hpp"

namespace kgntm {

using nlohmann::json;

json MetricsRow::to_json() const
{
    return {{"f1", f1}, {"precision", precision}, {"recall", recall}, {"tp", tp},
            {"fp", fp}, {"fn", fn},               {"tn", tn},         {"positives", positives}, {"n", n}};
}

MetricsRow classification_metrics(const std::vector<int>& predicted, const std::vector<int>& labels)
{
    if (predicted.size() != labels.size()) {
        throw std::invalid_argument("classification_metrics: " + std::to_string(predicted.size()) +
                                    " predictions for " + std::to_string(labels.size()) + " labels");
    }
    if (labels.empty()) throw std::invalid_argument("classification_metrics: no examples");
    MetricsRow m;
    m.n = labels.size();
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool p = predicted[i] == 1, y = labels[i] == 1;
        m.tp += p && y;
        m.fp += p && !y;
        m.fn += !p && y;
        m.tn += !p && !y;
    }
    m.positives = m.tp + m.fn;
    m.precision = m.tp + m.fp ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp) : 0.0;
    m.recall = m.tp + m.fn ? static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn) : 0.0;
    m.f1 = m.precision + m.recall > 0.0 ? 2.0 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
    return m;
}

// ---------------------------------------------------------------------------

std::vector<std::set<TokenId>> document_word_sets(const Corpus& corpus)
{
    std::vector<std::set<TokenId>> out;
    out.reserve(corpus.docs.size());
    for (const auto& d : corpus.docs) {
        std::set<TokenId> s(d.comments.begin(), d.comments.end());
        if (d.transcript) s.insert(d.transcript->begin(), d.transcript->end());
        out.push_back(std::move(s));
    }
    return out;
}

double umass_coherence(const std::vector<TokenId>& top_words, const std::vector<std::set<TokenId>>& docs)
{
    if (top_words.size() < 2) throw std::invalid_argument("umass_coherence needs at least two words");
    auto df = [&](TokenId w) {
        std::size_t n = 0;
        for (const auto& d : docs) n += d.count(w);
        return n;
    };
    std::vector<TokenId> words;
    for (auto w : top_words) {
        if (df(w) == 0) {
            log_info("coherence: word " + std::to_string(w) + " never occurs in the reference corpus; skipped");
            continue;
        }
        words.push_back(w);
    }
    double c = 0.0;
    for (std::size_t m = 1; m < words.size(); ++m) {
        for (std::size_t l = 0; l < m; ++l) {
            if (words[m] == words[l]) continue;
            std::size_t co = 0;
            for (const auto& d : docs) co += d.count(words[m]) && d.count(words[l]);
            c += std::log((static_cast<double>(co) + 1.0) / static_cast<double>(df(words[l])));
        }
    }
    return c;
}

json CoherenceResult::to_json() const
{
    return {{"top10", top10}, {"top20", top20}, {"mean10", mean10}, {"mean20", mean20}};
}

CoherenceResult model_coherence(const TrainedModel& m, const Corpus& reference, bool pooled)
{
    auto phis = infer_phis(m.vs);
    Tensor weights = phi_posterior_mean(phis.phiR);
    if (pooled) {
        const Tensor t = phi_posterior_mean(phis.phiRt);
        for (std::size_t i = 0; i < weights.size(); ++i) weights[i] += t[i];
    }
    const auto docs = document_word_sets(reference);
    CoherenceResult r;
    for (std::size_t k = 0; k < m.model.K; ++k) {
        auto row = weights.row_vector(k);
        for (std::size_t n : {10u, 20u}) {
            std::vector<TokenId> top;
            for (auto i : top_indices(row, n)) top.push_back(static_cast<TokenId>(i));
            (n == 10 ? r.top10 : r.top20).push_back(umass_coherence(top, docs));
        }
    }
    auto mean = [](const std::vector<double>& v) {
        return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    r.mean10 = mean(r.top10);
    r.mean20 = mean(r.top20);
    return r;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> hungarian(const std::vector<std::vector<double>>& cost)
{
    const std::size_t n = cost.size();
    for (const auto& row : cost) {
        if (row.size() != n) throw std::invalid_argument("hungarian: cost matrix must be square");
    }
    if (n == 0) return {};
    // Shortest augmenting path with potentials; 1-based internally.
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
    for (std::size_t i = 1; i <= n; ++i) {
        p[0] = i;
        std::size_t j0 = 0;
        std::vector<double> minv(n + 1, inf);
        std::vector<bool> used(n + 1, false);
        do {
            used[j0] = true;
            const std::size_t i0 = p[j0];
            double delta = inf;
            std::size_t j1 = 0;
            for (std::size_t j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (std::size_t j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const std::size_t j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }
    std::vector<std::size_t> assignment(n);
    for (std::size_t j = 1; j <= n; ++j) assignment[p[j] - 1] = j - 1;
    return assignment;
}

double cosine(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) throw std::invalid_argument("cosine: length mismatch");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    return aa > 0.0 && bb > 0.0 ? ab / std::sqrt(aa * bb) : 0.0;
}

json RecoveryResult::to_json() const
{
    return {{"mean_cosine", mean_cosine}, {"per_topic", per_topic}, {"assignment", assignment}};
}

RecoveryResult topic_recovery(const Tensor& learned, const Tensor& planted)
{
    if (!learned.same_shape(planted)) {
        throw ShapeError("topic_recovery: " + learned.shape_str() + " vs " + planted.shape_str());
    }
    const std::size_t K = planted.rows();
    std::vector<std::vector<double>> cost(K, std::vector<double>(K));
    for (std::size_t i = 0; i < K; ++i)
        for (std::size_t j = 0; j < K; ++j) cost[i][j] = -cosine(planted.row_vector(i), learned.row_vector(j));
    RecoveryResult r;
    r.assignment = hungarian(cost);
    for (std::size_t i = 0; i < K; ++i) r.per_topic.push_back(-cost[i][r.assignment[i]]);
    r.mean_cosine = std::accumulate(r.per_topic.begin(), r.per_topic.end(), 0.0) / static_cast<double>(K);
    return r;
}

// ---------------------------------------------------------------------------

const std::vector<double>& default_cutoffs()
{
    static const std::vector<double> c{0.10, 0.15, 0.20, 0.30};
    return c;
}

std::vector<CutoffRow> cutoff_sweep(const Corpus& corpus, const std::vector<Prediction>& predictions,
                                    const std::vector<double>& cutoffs)
{
    if (predictions.size() != corpus.docs.size()) {
        throw std::invalid_argument("cutoff_sweep: one prediction per document required");
    }
    std::vector<int> predicted;
    for (const auto& p : predictions) predicted.push_back(p.label);
    std::vector<CutoffRow> rows;
    for (double c : cutoffs) {
        std::vector<int> labels;
        for (auto d : corpus.docs) { // copy: label_by_cutoff writes the label
            if (!d.comment_flags) throw std::invalid_argument("document '" + d.id + "' has no comment flags");
            labels.push_back(label_by_cutoff(d, c));
        }
        rows.push_back({c, classification_metrics(predicted, labels)});
    }
    return rows;
}

SplitIndices split_70_15_15(std::size_t n, std::uint64_t seed)
{
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed);
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng() % i]);
    const std::size_t n_train = n * 70 / 100, n_val = n * 15 / 100;
    SplitIndices s;
    s.train.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train),
                 idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    s.test.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), idx.end());
    for (auto* v : {&s.train, &s.val, &s.test}) std::sort(v->begin(), v->end());
    return s;
}

Corpus subset(const Corpus& corpus, const std::vector<std::size_t>& idx)
{
    Corpus c;
    c.vocab = corpus.vocab;
    c.dims = corpus.dims;
    for (auto i : idx) c.docs.push_back(corpus.docs.at(i));
    return c;
}

// ---------------------------------------------------------------------------

json ExperimentConfig::to_json() const
{
    return {{"planted", planted.to_json()},
            {"docs", corpus.docs},
            {"transcript_words", corpus.sizes.transcript_words},
            {"comment_words", corpus.sizes.comment_words},
            {"comment_length", corpus.sizes.comment_length},
            {"flag_scale", corpus.sizes.flag_scale},
            {"feature_noise", corpus.sizes.feature_noise},
            {"transcript_free_share", corpus.transcript_free_share},
            {"seed", seed},
            {"threshold", threshold},
            {"pooled_coherence", pooled_coherence}};
}

ExperimentConfig ExperimentConfig::from_json(const json& j, ExperimentConfig c)
{
    if (!j.is_object()) throw SchemaError("experiment config must be an object");
    for (const auto& [key, v] : j.items()) {
        if (key == "planted") c.planted = PlantedSpec::from_json(v, c.planted);
        else if (key == "docs") c.corpus.docs = v.get<std::size_t>();
        else if (key == "transcript_words") c.corpus.sizes.transcript_words = v.get<std::size_t>();
        else if (key == "comment_words") c.corpus.sizes.comment_words = v.get<std::size_t>();
        else if (key == "comment_length") c.corpus.sizes.comment_length = v.get<std::size_t>();
        else if (key == "flag_scale") c.corpus.sizes.flag_scale = v.get<double>();
        else if (key == "feature_noise") c.corpus.sizes.feature_noise = v.get<double>();
        else if (key == "transcript_free_share") c.corpus.transcript_free_share = v.get<double>();
        else if (key == "seed") c.seed = v.get<std::uint64_t>();
        else if (key == "threshold") c.threshold = v.get<double>();
        else if (key == "pooled_coherence") c.pooled_coherence = v.get<bool>();
        else throw SchemaError("unknown key '" + key + "' in experiment config");
    }
    return c;
}

std::pair<double, double> elbo_window_means(const TrainReport& r, std::size_t window)
{
    const std::size_t n = r.epochs.size();
    if (n == 0) return {0.0, 0.0};
    const std::size_t w = std::min(window, n);
    double first = 0.0, last = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        first += r.epochs[i].total;
        last += r.epochs[n - w + i].total;
    }
    return {first / static_cast<double>(w), last / static_cast<double>(w)};
}

namespace {

std::vector<int> labels_of(const Corpus& c)
{
    std::vector<int> y;
    for (const auto& d : c.docs) y.push_back(d.label.value_or(0));
    return y;
}

std::vector<int> predicted_of(const std::vector<Prediction>& ps)
{
    std::vector<int> y;
    for (const auto& p : ps) y.push_back(p.label);
    return y;
}

} // namespace

ExperimentResult run_synthetic_experiment(const ExperimentConfig& gen, const TrainConfig& cfg_in)
{
    ExperimentResult res;
    Rng world_rng(derive_seed(gen.seed, 10));
    res.world = make_planted_world(gen.planted, world_rng);
    Rng corpus_rng(derive_seed(gen.seed, 11));
    Corpus all = sample_corpus(res.world, gen.corpus, corpus_rng);
    auto split = split_70_15_15(all.docs.size(), derive_seed(gen.seed, 12));
    res.train = subset(all, split.train);
    res.val = subset(all, split.val);
    res.test = subset(all, split.test);

    TrainConfig cfg = cfg_in;
    if (cfg.hp.K != gen.planted.K) {
        log_info("experiment: using K=" + std::to_string(gen.planted.K) + " from the planted world");
        cfg.hp.K = gen.planted.K;
    }
    auto trained = train(res.train, res.world.ontology, cfg);
    res.model = std::move(trained.model);
    auto distill = distill_incomplete(res.train, res.model);

    auto pv = predict_all(res.val, res.model, gen.threshold);
    auto pt = predict_all(res.test, res.model, gen.threshold);
    const auto y_test = labels_of(res.test);
    const int majority = 2 * std::count(y_test.begin(), y_test.end(), 1) > static_cast<long>(y_test.size()) ? 1 : 0;

    auto rec = topic_recovery(res.model.model.phi_R, res.world.state.phi_R);
    auto rec_t = topic_recovery(res.model.model.phi_R_t, res.world.state.phi_R_t);
    auto coh = model_coherence(res.model, res.train, gen.pooled_coherence);

    // Seed weights of the learned topics matched to seeded and unseeded planted topics.
    json seeded = json::array(), unseeded = json::array();
    double mean_seeded = 0.0, mean_unseeded = 0.0;
    for (std::size_t k = 0; k < gen.planted.K; ++k) {
        const double w = 1.0 - res.model.model.pi[rec.assignment[k]];
        if (k < gen.planted.seeded_topics) {
            seeded.push_back(w);
            mean_seeded += w;
        } else {
            unseeded.push_back(w);
            mean_unseeded += w;
        }
    }
    if (!seeded.empty()) mean_seeded /= static_cast<double>(seeded.size());
    if (!unseeded.empty()) mean_unseeded /= static_cast<double>(unseeded.size());

    auto [first10, last10] = elbo_window_means(trained.report);
    json& r = res.report;
    r["seed"] = gen.seed;
    r["config"] = {{"experiment", gen.to_json()}, {"train", cfg.to_json()}};
    r["split"] = {{"train", split.train.size()}, {"val", split.val.size()}, {"test", split.test.size()}};
    r["training"] = {{"epochs", trained.report.epochs.size()},
                     {"converged", trained.report.converged},
                     {"elbo_first10", first10},
                     {"elbo_last10", last10},
                     {"final", trained.report.epochs.back().to_json()}};
    r["distill"] = distill.to_json();
    r["metrics"] = {{"val", classification_metrics(predicted_of(pv), labels_of(res.val)).to_json()},
                    {"test", classification_metrics(predicted_of(pt), y_test).to_json()},
                    {"majority_baseline_test",
                     classification_metrics(std::vector<int>(y_test.size(), majority), y_test).to_json()}};
    r["recovery"] = {{"comment", rec.to_json()}, {"transcript", rec_t.to_json()}};
    r["coherence"] = coh.to_json();
    r["seed_weights"] = {{"seeded", seeded},
                         {"unseeded", unseeded},
                         {"mean_seeded", mean_seeded},
                         {"mean_unseeded", mean_unseeded}};
    if (gen.corpus.sizes.flag_scale > 0.0) {
        json rows = json::array();
        for (const auto& row : cutoff_sweep(res.test, pt, default_cutoffs()))
            rows.push_back({{"cutoff", row.cutoff}, {"metrics", row.metrics.to_json()}});
        r["cutoff_sweep"] = rows;
    }
    return res;
}

} // namespace kgntm
