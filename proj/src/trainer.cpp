#include "kgntm/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "kgntm/checkpoint.hpp"
#include "kgntm/log.hpp"

namespace kgntm {

using nlohmann::json;

namespace {

// RNG streams derived from the run seed.
constexpr std::uint64_t kStreamPretrain = 1, kStreamInit = 2, kStreamTrain = 3, kStreamDistill = 4;

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where)
{
    if (!j.is_object()) throw SchemaError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) throw SchemaError("unknown key '" + it.key() + "' in " + where);
    }
}

std::vector<std::size_t> widths_from(const json& j, const std::string& key)
{
    auto v = j.get<std::vector<std::size_t>>();
    for (auto w : v) {
        if (w == 0) throw SchemaError("network." + key + " has a zero width");
    }
    return v;
}

void shuffle_in_place(std::vector<std::size_t>& v, Rng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = rng() % i;
        std::swap(v[i - 1], v[j]);
    }
}

std::vector<Parameter*> params_of(const std::vector<MlpNet*>& nets)
{
    std::vector<Parameter*> ps;
    for (auto* n : nets)
        for (auto* p : n->parameters()) ps.push_back(p);
    return ps;
}

std::vector<MlpNet*> model_nets(ModelState& s)
{
    std::vector<MlpNet*> nets{&s.net_label};
    for (auto* n : {&s.net_img, &s.net_mot, &s.net_aud})
        if (!n->layers().empty()) nets.push_back(n);
    return nets;
}

Tensor beta_mean(const BetaValues& b)
{
    Tensor m = b.a;
    for (std::size_t i = 0; i < m.size(); ++i) m[i] = b.a[i] / (b.a[i] + b.b[i]);
    return m;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

// ---------------------------------------------------------------------------

const std::vector<std::string>& Ablations::names()
{
    static const std::vector<std::string> n{"multi_origin", "two_sets_of_topics", "auto_supervision",
                                            "pretrained_init"};
    return n;
}

json Ablations::to_json() const
{
    return {{"multi_origin", multi_origin},
            {"two_sets_of_topics", two_sets_of_topics},
            {"auto_supervision", auto_supervision},
            {"pretrained_init", pretrained_init}};
}

Ablations Ablations::from_json(const json& j, Ablations a)
{
    reject_unknown(j, {names().begin(), names().end()}, "ablations");
    if (j.contains("multi_origin")) a.multi_origin = j.at("multi_origin").get<bool>();
    if (j.contains("two_sets_of_topics")) a.two_sets_of_topics = j.at("two_sets_of_topics").get<bool>();
    if (j.contains("auto_supervision")) a.auto_supervision = j.at("auto_supervision").get<bool>();
    if (j.contains("pretrained_init")) a.pretrained_init = j.at("pretrained_init").get<bool>();
    return a;
}

Ablations Ablations::disabling(const std::string& list)
{
    Ablations a;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        if (item == "multi_origin") a.multi_origin = false;
        else if (item == "two_sets_of_topics") a.two_sets_of_topics = false;
        else if (item == "auto_supervision") a.auto_supervision = false;
        else if (item == "pretrained_init") a.pretrained_init = false;
        else throw SchemaError("unknown ablation flag '" + item + "'");
    }
    return a;
}

json NetworkShape::to_json() const
{
    return {{"label_hidden", model.label_hidden},
            {"feature_hidden", model.feature_hidden},
            {"theta_hidden", inference.theta_hidden},
            {"global_hidden", inference.global_hidden},
            {"eta_hidden", inference.eta_hidden},
            {"sigma_init", sigma_init}};
}

NetworkShape NetworkShape::from_json(const json& j, NetworkShape s)
{
    reject_unknown(j, {"label_hidden", "feature_hidden", "theta_hidden", "global_hidden", "eta_hidden", "sigma_init"},
                   "network");
    if (j.contains("label_hidden")) s.model.label_hidden = widths_from(j.at("label_hidden"), "label_hidden");
    if (j.contains("feature_hidden")) s.model.feature_hidden = widths_from(j.at("feature_hidden"), "feature_hidden");
    if (j.contains("theta_hidden")) s.inference.theta_hidden = widths_from(j.at("theta_hidden"), "theta_hidden");
    if (j.contains("global_hidden")) s.inference.global_hidden = widths_from(j.at("global_hidden"), "global_hidden");
    if (j.contains("eta_hidden")) s.inference.eta_hidden = widths_from(j.at("eta_hidden"), "eta_hidden");
    if (j.contains("sigma_init")) s.sigma_init = j.at("sigma_init").get<double>();
    return s;
}

void TrainConfig::validate() const
{
    hp.validate();
    if (batch_size < 1) throw SchemaError("batch_size must be >= 1");
    if (max_epochs < 1) throw SchemaError("max_epochs must be >= 1");
    if (!(convergence_rel > 0.0)) throw SchemaError("convergence_rel must be > 0");
    if (!(distill_convergence_rel > 0.0)) throw SchemaError("distill_convergence_rel must be > 0");
    if (!(network.sigma_init > kPositiveFloor)) throw SchemaError("network.sigma_init must be > 1e-6");
    if (gibbs.chains < 1) throw SchemaError("gibbs.chains must be >= 1");
}

ElboOptions TrainConfig::elbo_options(std::size_t corpus_size) const
{
    ElboOptions o;
    o.multi_origin = ablations.multi_origin;
    o.two_sets = ablations.two_sets_of_topics;
    o.auto_supervision = ablations.auto_supervision;
    o.tilde_variant = transcript_tilde_variant;
    o.corpus_size = corpus_size;
    return o;
}

json TrainConfig::to_json() const
{
    return {{"hyper", hp.to_json()},
            {"batch_size", batch_size},
            {"max_epochs", max_epochs},
            {"min_epochs", min_epochs},
            {"convergence_rel", convergence_rel},
            {"seed", seed},
            {"ablations", ablations.to_json()},
            {"transcript_tilde_variant", transcript_tilde_variant},
            {"gibbs", gibbs.to_json()},
            {"network", network.to_json()},
            {"distill_epochs", distill_epochs},
            {"distill_convergence_rel", distill_convergence_rel},
            {"metrics_path", metrics_path}};
}

TrainConfig TrainConfig::from_json(const json& j, TrainConfig c)
{
    reject_unknown(j,
                   {"hyper", "batch_size", "max_epochs", "min_epochs", "convergence_rel", "seed", "ablations",
                    "transcript_tilde_variant", "gibbs", "network", "distill_epochs", "distill_convergence_rel",
                    "metrics_path"},
                   "train config");
    if (j.contains("hyper")) c.hp = HyperParams::from_json(j.at("hyper"), c.hp);
    if (j.contains("batch_size")) c.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("max_epochs")) c.max_epochs = j.at("max_epochs").get<std::size_t>();
    if (j.contains("min_epochs")) c.min_epochs = j.at("min_epochs").get<std::size_t>();
    if (j.contains("convergence_rel")) c.convergence_rel = j.at("convergence_rel").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("ablations")) c.ablations = Ablations::from_json(j.at("ablations"), c.ablations);
    if (j.contains("transcript_tilde_variant")) c.transcript_tilde_variant = j.at("transcript_tilde_variant").get<bool>();
    if (j.contains("gibbs")) c.gibbs = GibbsConfig::from_json(j.at("gibbs"), c.gibbs);
    if (j.contains("network")) c.network = NetworkShape::from_json(j.at("network"), c.network);
    if (j.contains("distill_epochs")) c.distill_epochs = j.at("distill_epochs").get<std::size_t>();
    if (j.contains("distill_convergence_rel")) c.distill_convergence_rel = j.at("distill_convergence_rel").get<double>();
    if (j.contains("metrics_path")) c.metrics_path = j.at("metrics_path").get<std::string>();
    return c;
}

json TrainReport::to_json() const
{
    json e = json::array();
    for (std::size_t i = 0; i < epochs.size(); ++i) {
        json r = epochs[i].to_json();
        r["epoch"] = i;
        e.push_back(std::move(r));
    }
    return {{"epochs", e}, {"converged", converged}, {"seconds", seconds}, {"checkpoint_path", checkpoint_path}};
}

json DistillReport::to_json() const
{
    return {{"trace_with", trace_with},       {"trace_without", trace_without}, {"initial_with", initial_with},
            {"final_with", final_with},       {"initial_without", initial_without},
            {"final_without", final_without}, {"docs_with", docs_with},       {"docs_without", docs_without}};
}

// ---------------------------------------------------------------------------

void check_trainable(const Corpus& corpus, const TrainConfig& cfg)
{
    cfg.validate();
    if (corpus.docs.empty()) throw std::invalid_argument("training corpus is empty");
    corpus.vocab.validate();
    for (const auto& d : corpus.docs) {
        if (!d.label) throw std::invalid_argument("document '" + d.id + "' has no label; training needs labels");
        if (d.comments.empty()) throw std::invalid_argument("document '" + d.id + "' has no comments");
    }
}

std::pair<Tensor, Tensor> initial_topic_matrices(const Corpus& corpus, const SeedOntology& ontology,
                                                 const TrainConfig& cfg)
{
    const std::size_t K = cfg.hp.K;
    if (cfg.ablations.pretrained_init) {
        auto pre = seeded_lda_gibbs(corpus, ontology, K, cfg.gibbs, derive_seed(cfg.seed, kStreamPretrain));
        return {pre.B_R, pre.B_S};
    }
    Rng rng(derive_seed(cfg.seed, kStreamPretrain));
    auto random_rows = [&](std::size_t cols) {
        auto t = Tensor::matrix(K, cols);
        for (std::size_t k = 0; k < K; ++k) {
            double s = 0.0;
            for (std::size_t c = 0; c < cols; ++c) s += (t(k, c) = uniform_open(rng));
            for (std::size_t c = 0; c < cols; ++c) t(k, c) /= s;
        }
        return t;
    };
    Tensor B_R = random_rows(corpus.vocab.V());
    Tensor B_S = random_rows(corpus.vocab.U());
    return {B_R, B_S};
}

TrainedModel init_model(const Corpus& corpus, const SeedOntology& ontology, const TrainConfig& cfg)
{
    check_trainable(corpus, cfg);
    TrainedModel m;
    m.vocab = corpus.vocab;
    m.ontology = ontology;
    m.dims = corpus.dims;
    m.cfg = cfg;
    m.cfg.hp.resolve(corpus.vocab.V(), corpus.vocab.U());
    const std::size_t K = cfg.hp.K;

    auto [B_R, B_S] = initial_topic_matrices(corpus, ontology, m.cfg);
    Rng rng(derive_seed(cfg.seed, kStreamInit));
    m.model = make_model_state(K, corpus.vocab, corpus.dims, cfg.network.model, rng);
    m.model.B_R = B_R;
    m.model.B_S = B_S;
    m.model.phi_R = m.model.phi_R_t = B_R;
    m.model.phi_S = B_S;
    m.vs = make_variational_state(K, corpus.vocab.V(), corpus.vocab.U(), corpus.dims, corpus_stats(corpus), B_R, B_S,
                                  cfg.network.inference, rng, cfg.network.sigma_init);
    return m;
}

ElboBreakdown run_pass(TrainedModel& m, const Corpus& corpus, const std::vector<std::size_t>& order, Phase phase,
                       Adam& opt, Rng& rng)
{
    ElboOptions o = m.cfg.elbo_options(corpus.docs.size());
    o.track_inference = phase == Phase::e_step;
    o.track_model = phase == Phase::m_step;
    const auto params = phase == Phase::e_step ? params_of(m.vs.complete_nets()) : params_of(model_nets(m.model));

    ElboBreakdown sum;
    const std::size_t bs = m.cfg.batch_size;
    for (std::size_t start = 0; start < order.size(); start += bs) {
        const std::size_t end = std::min(order.size(), start + bs);
        std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                     order.begin() + static_cast<std::ptrdiff_t>(end));
        auto batch = encode_batch(corpus, idx);
        auto noise = ElboNoise::draw(batch.size(), m.model.K, m.model.V, m.model.U, rng);
        Tape tape;
        auto g = elbo_graph(tape, batch, m.model, m.vs, m.cfg.hp, o, noise);
        if (!std::isfinite(g.breakdown.total)) throw std::runtime_error("ELBO became non-finite during training");
        auto grads = tape.backward(ad::scale(g.total, -1.0));
        opt.step(params, grads);
        sum += g.breakdown;
    }
    return sum;
}

void finalize_point_estimates(TrainedModel& m)
{
    auto phis = infer_phis(m.vs);
    auto& s = m.model;
    s.phi_S = phi_posterior_mean(phis.phiS);
    s.phi_R = phi_posterior_mean(phis.phiR);
    s.phi_R_t = phi_posterior_mean(phis.phiRt);
    const auto& ab = m.cfg.ablations;
    if (!ab.two_sets_of_topics) {
        s.pi = s.pi_t = Tensor::matrix(1, s.K, 0.0);
    } else if (!ab.auto_supervision) {
        s.pi = s.pi_t = Tensor::matrix(1, s.K, 0.5);
    } else {
        s.pi = beta_mean(infer_pi(m.vs));
        s.pi_t = beta_mean(infer_pi_t(m.vs));
    }
}

TrainResult train(const Corpus& corpus, const SeedOntology& ontology, const TrainConfig& cfg)
{
    const auto t0 = std::chrono::steady_clock::now();
    TrainResult res;
    res.model = init_model(corpus, ontology, cfg);
    TrainedModel& m = res.model;
    log_info("training: " + std::to_string(corpus.docs.size()) + " documents, K=" + std::to_string(m.model.K) +
             ", V=" + std::to_string(m.model.V) + ", U=" + std::to_string(m.model.U));

    std::ofstream metrics;
    if (!cfg.metrics_path.empty()) {
        metrics.open(cfg.metrics_path);
        if (!metrics) throw std::runtime_error("cannot open metrics file '" + cfg.metrics_path + "'");
    }

    AdamConfig ac;
    ac.lr = m.cfg.hp.learning_rate;
    Adam opt(ac);
    Rng rng(derive_seed(cfg.seed, kStreamTrain));
    std::vector<std::size_t> order(corpus.docs.size());
    std::iota(order.begin(), order.end(), 0);

    for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        shuffle_in_place(order, rng);
        auto e = run_pass(m, corpus, order, Phase::e_step, opt, rng);
        shuffle_in_place(order, rng);
        run_pass(m, corpus, order, Phase::m_step, opt, rng);
        res.report.epochs.push_back(e);
        if (metrics) {
            json r = e.to_json();
            r["epoch"] = epoch;
            metrics << r.dump() << '\n';
        }
        log_debug("epoch " + std::to_string(epoch) + " elbo " + std::to_string(e.total));
        if (epoch + 1 >= std::max<std::size_t>(cfg.min_epochs, 2)) {
            const double prev = res.report.epochs[epoch - 1].total;
            if (std::abs(e.total - prev) < cfg.convergence_rel * std::abs(e.total)) {
                res.report.converged = true;
                break;
            }
        }
    }
    finalize_point_estimates(m);
    res.report.seconds = seconds_since(t0);
    log_info("training finished after " + std::to_string(res.report.epochs.size()) + " epochs" +
             (res.report.converged ? " (converged)" : ""));
    return res;
}

// ---------------------------------------------------------------------------

namespace {

Var distill_loss(Tape& tape, const TrainedModel& m, const BatchEncoding& b, IncompleteVariant v, bool track)
{
    auto target = infer_theta_complete(m.vs, b);
    auto g = theta_incomplete(tape, m.vs, b, v, track);
    return kl_gaussian_diag(tape.constant(target.mu), tape.constant(target.sigma), g.mu, g.sigma);
}

std::vector<std::size_t> docs_with_transcript(const Corpus& c, bool with)
{
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < c.docs.size(); ++i)
        if (c.docs[i].has_transcript() == with) idx.push_back(i);
    return idx;
}

} // namespace

double distill_objective(const TrainedModel& m, const Corpus& corpus, const std::vector<std::size_t>& docs,
                         IncompleteVariant v)
{
    if (docs.empty()) return 0.0;
    double total = 0.0;
    const std::size_t bs = std::max<std::size_t>(m.cfg.batch_size, 1);
    for (std::size_t start = 0; start < docs.size(); start += bs) {
        const std::size_t end = std::min(docs.size(), start + bs);
        std::vector<std::size_t> idx(docs.begin() + static_cast<std::ptrdiff_t>(start),
                                     docs.begin() + static_cast<std::ptrdiff_t>(end));
        auto b = encode_batch(corpus, idx);
        Tape tape;
        total += distill_loss(tape, m, b, v, false).value().item();
    }
    return total / static_cast<double>(docs.size());
}

DistillReport distill_incomplete(const Corpus& corpus, TrainedModel& m)
{
    for (const auto& d : corpus.docs) {
        if (!d.label) throw std::invalid_argument("document '" + d.id + "' has no label; distillation needs labels");
    }
    Rng rng(derive_seed(m.cfg.seed, kStreamDistill));
    init_incomplete_from_complete(m.vs, rng);

    DistillReport rep;
    auto run_variant = [&](IncompleteVariant v, std::vector<std::size_t> docs, std::vector<double>& trace,
                           double& initial, double& final) {
        initial = final = distill_objective(m, corpus, docs, v);
        trace.push_back(initial);
        if (docs.empty()) return;
        AdamConfig ac;
        ac.lr = m.cfg.hp.learning_rate;
        Adam opt(ac);
        auto params = params_of(m.vs.incomplete_nets(v));
        for (std::size_t epoch = 0; epoch < m.cfg.distill_epochs; ++epoch) {
            shuffle_in_place(docs, rng);
            for (std::size_t start = 0; start < docs.size(); start += m.cfg.batch_size) {
                const std::size_t end = std::min(docs.size(), start + m.cfg.batch_size);
                std::vector<std::size_t> idx(docs.begin() + static_cast<std::ptrdiff_t>(start),
                                             docs.begin() + static_cast<std::ptrdiff_t>(end));
                auto b = encode_batch(corpus, idx);
                Tape tape;
                auto loss = distill_loss(tape, m, b, v, true);
                opt.step(params, tape.backward(loss));
            }
            const double now = distill_objective(m, corpus, docs, v);
            const double prev = trace.back();
            trace.push_back(now);
            final = now;
            if (std::abs(prev - now) < m.cfg.distill_convergence_rel * std::abs(now)) break;
        }
    };
    auto with = docs_with_transcript(corpus, true), without = docs_with_transcript(corpus, false);
    rep.docs_with = with.size();
    rep.docs_without = without.size();
    run_variant(IncompleteVariant::with_transcript, with, rep.trace_with, rep.initial_with, rep.final_with);
    run_variant(IncompleteVariant::without_transcript, without, rep.trace_without, rep.initial_without,
                rep.final_without);
    m.distilled = true;
    log_info("distillation: mean KL " + std::to_string(rep.initial_with) + " -> " + std::to_string(rep.final_with) +
             " (with transcript), " + std::to_string(rep.initial_without) + " -> " +
             std::to_string(rep.final_without) + " (without)");
    return rep;
}

// ---------------------------------------------------------------------------

namespace {

Checkpoint to_checkpoint(const TrainedModel& m)
{
    Checkpoint ck;
    ck.seed = m.cfg.seed;
    ck.meta = {{"kind", "kgntm-model"},
               {"K", m.model.K},
               {"V", m.model.V},
               {"U", m.model.U},
               {"dims", {{"img", m.dims.img}, {"mot", m.dims.mot}, {"aud", m.dims.aud}}},
               {"vocab", m.vocab.to_json()},
               {"ontology", m.ontology.to_json(m.vocab)},
               {"config", m.cfg.to_json()},
               {"stats_docs", m.vs.stats.docs},
               {"distilled", m.distilled}};
    auto add = [&](const MlpNet& n) {
        if (!n.layers().empty()) ck.nets[n.name()] = n;
    };
    const auto& s = m.model;
    for (const auto* n : {&s.net_label, &s.net_img, &s.net_mot, &s.net_aud}) add(*n);
    for (const auto* n : m.vs.all_nets()) add(*n);
    ck.tensors = {{"phi_S", s.phi_S},
                  {"phi_R", s.phi_R},
                  {"phi_R_t", s.phi_R_t},
                  {"pi", s.pi},
                  {"pi_t", s.pi_t},
                  {"assoc", s.assoc},
                  {"B_R", s.B_R},
                  {"B_S", s.B_S},
                  {"mean_bow_transcript", m.vs.stats.mean_bow_transcript},
                  {"mean_bow_comments", m.vs.stats.mean_bow_comments}};
    return ck;
}

} // namespace

std::string encode_model(const TrainedModel& m)
{
    return encode_checkpoint(to_checkpoint(m));
}

void save_model(const TrainedModel& m, const std::string& path)
{
    save_checkpoint(to_checkpoint(m), path);
}

TrainedModel load_model(const std::string& path)
{
    Checkpoint ck = load_checkpoint(path);
    if (ck.meta.value("kind", "") != "kgntm-model") throw CheckpointError("'" + path + "' is not a model checkpoint");
    TrainedModel m;
    try {
        const auto& meta = ck.meta;
        m.vocab = Vocabulary::from_json(meta.at("vocab"));
        m.ontology = parse_ontology(meta.at("ontology"), m.vocab);
        m.dims = {meta.at("dims").at("img").get<std::size_t>(), meta.at("dims").at("mot").get<std::size_t>(),
                  meta.at("dims").at("aud").get<std::size_t>()};
        m.cfg = TrainConfig::from_json(meta.at("config"), TrainConfig{});
        m.distilled = meta.at("distilled").get<bool>();

        auto& s = m.model;
        s.K = meta.at("K").get<std::size_t>();
        s.V = meta.at("V").get<std::size_t>();
        s.U = meta.at("U").get<std::size_t>();
        s.phi_S = ck.tensor("phi_S");
        s.phi_R = ck.tensor("phi_R");
        s.phi_R_t = ck.tensor("phi_R_t");
        s.pi = ck.tensor("pi");
        s.pi_t = ck.tensor("pi_t");
        s.assoc = ck.tensor("assoc");
        s.B_R = ck.tensor("B_R");
        s.B_S = ck.tensor("B_S");
        s.seed_regular = seed_regular_map(m.vocab);
        auto opt_net = [&](const std::string& name) { return ck.nets.count(name) ? ck.nets.at(name) : MlpNet(); };
        s.net_label = ck.net("NN_L");
        s.net_img = opt_net("NN_I");
        s.net_mot = opt_net("NN_M");
        s.net_aud = opt_net("NN_A");
        s.validate();

        auto& vs = m.vs;
        vs.K = s.K;
        vs.V = s.V;
        vs.U = s.U;
        vs.dims = m.dims;
        vs.stats.mean_bow_transcript = ck.tensor("mean_bow_transcript");
        vs.stats.mean_bow_comments = ck.tensor("mean_bow_comments");
        vs.stats.docs = meta.at("stats_docs").get<std::size_t>();
        vs.theta_mean = ck.net("NN_mean");
        vs.theta_std = ck.net("NN_std");
        vs.pi_t_a = ck.net("NN_delta_t1");
        vs.pi_t_b = ck.net("NN_delta_t2");
        vs.pi_a = ck.net("NN_delta1");
        vs.pi_b = ck.net("NN_delta2");
        vs.eta_a = ck.net("NN_tau1");
        vs.eta_b = ck.net("NN_tau2");
        vs.phiRt_mu = ck.net("NN_mu_t");
        vs.phiRt_sigma = ck.net("NN_sigma_t");
        vs.phiR_mu = ck.net("NN_mu");
        vs.phiR_sigma = ck.net("NN_sigma");
        vs.phiS_mu = ck.net("NN_s1");
        vs.phiS_sigma = ck.net("NN_s2");
        vs.inc1 = ck.net("NN_inc1");
        vs.inc2 = ck.net("NN_inc2");
        vs.inc3 = ck.net("NN_inc3");
        vs.inc4 = ck.net("NN_inc4");
    } catch (const json::exception& e) {
        throw CheckpointError("malformed model checkpoint '" + path + "': " + e.what());
    }
    return m;
}

} // namespace kgntm
