#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "checks.hpp"
#include "kgntm/log.hpp"

namespace kgntm::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void reject_nested_seed(const json& section, const std::string& name)
{
    if (section.is_object() && section.contains("seed")) {
        throw SchemaError("'" + name + ".seed' is not allowed; set the top-level 'seed'");
    }
}

json simulate_json(const ExperimentConfig& e)
{
    json j = e.to_json();
    j.erase("seed");
    j.erase("threshold");
    j.erase("pooled_coherence");
    return j;
}

json train_json(const TrainConfig& t)
{
    json j = t.to_json();
    j.erase("seed");
    return j;
}

} // namespace

json RunConfig::to_json() const
{
    return {{"seed", seed},
            {"threads", threads},
            {"paths", {{"corpus", corpus}, {"ontology", ontology}, {"checkpoint", checkpoint}, {"out", out}}},
            {"train", train_json(train)},
            {"simulate", simulate_json(simulate)},
            {"predict", {{"threshold", threshold}}},
            {"topics", {{"top_n", top_n}}},
            {"eval", {{"cutoffs", cutoffs}, {"pooled_coherence", pooled_coherence}}}};
}

RunConfig RunConfig::from_json(const json& j, RunConfig c)
{
    if (!j.is_object()) throw SchemaError("config must be a JSON object");
    auto section = [](const json& v, const std::string& name) -> const json& {
        if (!v.is_object()) throw SchemaError("config section '" + name + "' must be an object");
        return v;
    };
    auto only = [](const json& v, const std::string& name, std::initializer_list<const char*> keys) {
        for (const auto& [k, _] : v.items()) {
            bool known = false;
            for (const char* want : keys) known = known || k == want;
            if (!known) throw SchemaError("unknown key '" + name + "." + k + "'");
        }
    };
    for (const auto& [key, v] : j.items()) {
        if (key == "seed") {
            c.seed = v.get<std::uint64_t>();
        } else if (key == "threads") {
            c.threads = v.get<std::size_t>();
        } else if (key == "paths") {
            only(section(v, key), key, {"corpus", "ontology", "checkpoint", "out"});
            if (v.contains("corpus")) c.corpus = v["corpus"].get<std::string>();
            if (v.contains("ontology")) c.ontology = v["ontology"].get<std::string>();
            if (v.contains("checkpoint")) c.checkpoint = v["checkpoint"].get<std::string>();
            if (v.contains("out")) c.out = v["out"].get<std::string>();
        } else if (key == "train") {
            reject_nested_seed(section(v, key), key);
            c.train = TrainConfig::from_json(v, c.train);
        } else if (key == "simulate") {
            reject_nested_seed(section(v, key), key);
            for (const char* k : {"threshold", "pooled_coherence"})
                if (v.contains(k)) throw SchemaError(std::string("unknown key 'simulate.") + k + "'");
            c.simulate = ExperimentConfig::from_json(v, c.simulate);
        } else if (key == "predict") {
            only(section(v, key), key, {"threshold"});
            if (v.contains("threshold")) c.threshold = v["threshold"].get<double>();
        } else if (key == "topics") {
            only(section(v, key), key, {"top_n"});
            if (v.contains("top_n")) c.top_n = v["top_n"].get<std::size_t>();
        } else if (key == "eval") {
            only(section(v, key), key, {"cutoffs", "pooled_coherence"});
            if (v.contains("cutoffs")) c.cutoffs = v["cutoffs"].get<std::vector<double>>();
            if (v.contains("pooled_coherence")) c.pooled_coherence = v["pooled_coherence"].get<bool>();
        } else {
            throw SchemaError("unknown config key '" + key + "'");
        }
    }
    return c;
}

void RunConfig::resolve()
{
    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    train.seed = seed;
    train.gibbs.threads = threads;
    simulate.seed = seed;
    simulate.threshold = threshold;
    simulate.pooled_coherence = pooled_coherence;
    train.validate();
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw SchemaError("predict.threshold must lie in [0, 1]");
    if (top_n == 0) throw SchemaError("topics.top_n must be >= 1");
    if (cutoffs.empty()) throw SchemaError("eval.cutoffs must not be empty");
    for (double x : cutoffs)
        if (!(x > 0.0 && x < 1.0)) throw SchemaError("eval cutoff " + std::to_string(x) + " must lie in (0, 1)");
}

namespace {

struct Flags {
    std::string config, corpus, ontology, checkpoint, out, ablate, log_level;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads, top_n;
    std::optional<double> threshold;
    std::vector<double> cutoffs;
};

void require(const std::string& value, const char* flag, const std::string& command)
{
    if (value.empty()) throw UsageError(command + " requires " + flag);
}

RunConfig resolve_config(const Flags& f)
{
    RunConfig c;
    try {
        if (!f.config.empty()) {
            std::ifstream in(f.config);
            if (!in) throw SchemaError("cannot open config file '" + f.config + "'");
            json j;
            try {
                j = json::parse(in);
            } catch (const json::parse_error& e) {
                throw SchemaError("config file '" + f.config + "' is not valid JSON: " + e.what());
            }
            c = RunConfig::from_json(j, c);
        }
        if (f.seed) c.seed = *f.seed;
        if (f.threads) c.threads = *f.threads;
        if (!f.corpus.empty()) c.corpus = f.corpus;
        if (!f.ontology.empty()) c.ontology = f.ontology;
        if (!f.checkpoint.empty()) c.checkpoint = f.checkpoint;
        if (!f.out.empty()) c.out = f.out;
        if (!f.ablate.empty()) c.train.ablations = Ablations::disabling(f.ablate);
        if (f.top_n) c.top_n = *f.top_n;
        if (f.threshold) c.threshold = *f.threshold;
        if (!f.cutoffs.empty()) c.cutoffs = f.cutoffs;
        c.resolve();
    } catch (const UsageError&) {
        throw;
    } catch (const std::exception& e) {
        throw ValidationError(e.what());
    }
    return c;
}

void ensure_parent(const std::string& path)
{
    const fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
}

void write_text(const std::string& path, const std::string& text)
{
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << text;
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

void write_json(const std::string& path, const json& j)
{
    write_text(path, j.dump(2) + "\n");
}

void write_echo(const std::string& path, const std::string& command, const RunConfig& c)
{
    write_json(path, {{"command", command}, {"seed", c.seed}, {"config", c.to_json()}});
}

Corpus load_with_vocab(const std::string& path, const TrainedModel& m)
{
    LoadReport rep;
    auto corpus = load_corpus(path, VocabPolicy::given, &m.vocab, m.dims, &rep);
    if (rep.dropped_tokens > 0) {
        log_info("dropped " + std::to_string(rep.dropped_tokens) + " token(s) outside the model vocabulary");
    }
    return corpus;
}

json matrix_rows(const Tensor& t)
{
    json rows = json::array();
    for (std::size_t r = 0; r < t.rows(); ++r) {
        json row = json::array();
        for (std::size_t c = 0; c < t.cols(); ++c) row.push_back(t(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

double seconds_since(std::chrono::steady_clock::time_point t0)
{
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// simulate: planted world and a labeled corpus with comment flags.
int cmd_simulate(const RunConfig& c, std::ostream& out)
{
    require(c.out, "--out", "simulate");
    Rng wr(derive_seed(c.seed, 10));
    auto world = make_planted_world(c.simulate.planted, wr);
    Rng cr(derive_seed(c.seed, 11));
    auto corpus = sample_corpus(world, c.simulate.corpus, cr);
    fs::create_directories(c.out);
    const fs::path dir(c.out);
    save_corpus(corpus, (dir / "corpus.jsonl").string());
    save_ontology(world.ontology, corpus.vocab, (dir / "ontology.json").string());
    json regular = json::array();
    for (const auto& w : world.vocab.regular_words()) regular.push_back(w);
    write_json((dir / "planted.json").string(), {{"hyper", world.hp.to_json()},
                                                 {"vocabulary", regular},
                                                 {"phi_R", matrix_rows(world.state.phi_R)},
                                                 {"phi_R_t", matrix_rows(world.state.phi_R_t)},
                                                 {"pi", matrix_rows(world.state.pi)}});
    write_echo((dir / "config.json").string(), "simulate", c);
    out << "wrote " << corpus.docs.size() << " documents to " << (dir / "corpus.jsonl").string() << '\n';
    return ok;
}

int cmd_pretrain(const RunConfig& c, std::ostream& out)
{
    require(c.corpus, "--corpus", "pretrain");
    require(c.ontology, "--ontology", "pretrain");
    require(c.out, "--out", "pretrain");
    auto corpus = load_corpus(c.corpus, VocabPolicy::build);
    auto onto = load_ontology(c.ontology, corpus.vocab);
    auto res = seeded_lda_gibbs(corpus, onto, c.train.hp.K, c.train.gibbs, derive_seed(c.seed, 1));
    json topics = json::array();
    for (std::size_t k = 0; k < res.B_R.rows(); ++k) {
        std::vector<double> row(res.B_R.row_vector(k));
        json words = json::array();
        for (auto v : top_indices(row, c.top_n)) words.push_back(corpus.vocab.regular_word(v));
        topics.push_back(words);
    }
    write_json(c.out, {{"K", c.train.hp.K},
                       {"iterations", res.iterations},
                       {"chain", res.chain},
                       {"loglik_trace", res.loglik_trace},
                       {"top_words", topics},
                       {"B_R", matrix_rows(res.B_R)},
                       {"B_S", matrix_rows(res.B_S)}});
    write_echo(c.out + ".config.json", "pretrain", c);
    out << "pretrained " << c.train.hp.K << " topics over " << corpus.docs.size() << " documents\n";
    return ok;
}

int cmd_train(const RunConfig& c, std::ostream& out)
{
    require(c.corpus, "--corpus", "train");
    require(c.ontology, "--ontology", "train");
    require(c.checkpoint, "--checkpoint", "train");
    auto corpus = load_corpus(c.corpus, VocabPolicy::build);
    auto onto = load_ontology(c.ontology, corpus.vocab);
    ensure_parent(c.checkpoint);
    TrainConfig cfg = c.train;
    cfg.metrics_path = c.checkpoint + ".metrics.jsonl";
    const auto t0 = std::chrono::steady_clock::now();
    auto res = train(corpus, onto, cfg);
    res.report.checkpoint_path = c.checkpoint;
    save_model(res.model, c.checkpoint);
    json report = res.report.to_json();
    report.erase("seconds"); // reports stay byte-identical across runs
    write_json(c.checkpoint + ".report.json", report);
    write_echo(c.checkpoint + ".config.json", "train", c);
    log_info("train took " + std::to_string(seconds_since(t0)) + " s");
    out << "trained for " << res.report.epochs.size() << " epochs"
        << (res.report.converged ? " (converged)" : " (epoch limit)") << ", final ELBO "
        << res.report.epochs.back().total << '\n';
    return ok;
}

int cmd_distill(const RunConfig& c, std::ostream& out)
{
    require(c.corpus, "--corpus", "distill");
    require(c.checkpoint, "--checkpoint", "distill");
    auto m = load_model(c.checkpoint);
    auto corpus = load_with_vocab(c.corpus, m);
    auto rep = distill_incomplete(corpus, m);
    const std::string target = c.out.empty() ? c.checkpoint : c.out;
    ensure_parent(target);
    save_model(m, target);
    write_json(target + ".distill.json", rep.to_json());
    write_echo(target + ".distill.config.json", "distill", c);
    out << "distilled: mean KL " << rep.initial_with << " -> " << rep.final_with << " (with transcript), "
        << rep.initial_without << " -> " << rep.final_without << " (without)\n";
    return ok;
}

int cmd_predict(const RunConfig& c, std::ostream& out)
{
    require(c.corpus, "--corpus", "predict");
    require(c.checkpoint, "--checkpoint", "predict");
    require(c.out, "--out", "predict");
    auto m = load_model(c.checkpoint);
    auto corpus = load_with_vocab(c.corpus, m);
    std::ostringstream lines;
    std::size_t positives = 0;
    const auto preds = predict_all(corpus, m, c.threshold);
    for (const auto& p : preds) {
        lines << p.to_json().dump() << '\n';
        positives += p.label;
    }
    write_text(c.out, lines.str());
    write_echo(c.out + ".config.json", "predict", c);
    out << "predicted " << preds.size() << " documents, " << positives << " positive\n";
    return ok;
}

int cmd_topics(const RunConfig& c, std::ostream& out)
{
    require(c.checkpoint, "--checkpoint", "topics");
    require(c.out, "--out", "topics");
    auto m = load_model(c.checkpoint);
    std::optional<Corpus> docs;
    if (!c.corpus.empty()) docs = load_with_vocab(c.corpus, m);
    auto rep = topic_report(m, c.top_n, docs ? &*docs : nullptr);
    write_json(c.out, rep.to_json());
    write_echo(c.out + ".config.json", "topics", c);
    out << rep.to_text();
    return ok;
}

int cmd_eval(const RunConfig& c, std::ostream& out)
{
    require(c.corpus, "--corpus", "eval");
    require(c.checkpoint, "--checkpoint", "eval");
    require(c.out, "--out", "eval");
    auto m = load_model(c.checkpoint);
    auto corpus = load_with_vocab(c.corpus, m);
    const auto preds = predict_all(corpus, m, c.threshold);
    json report = {{"documents", corpus.docs.size()}, {"threshold", c.threshold}};

    bool labeled = !corpus.docs.empty(), flagged = !corpus.docs.empty();
    for (const auto& d : corpus.docs) {
        labeled = labeled && d.label.has_value();
        flagged = flagged && d.comment_flags.has_value() && !d.comment_flags->empty();
    }
    if (labeled) {
        std::vector<int> y, p;
        for (std::size_t i = 0; i < preds.size(); ++i) {
            y.push_back(*corpus.docs[i].label);
            p.push_back(preds[i].label);
        }
        auto row = classification_metrics(p, y);
        report["metrics"] = row.to_json();
        out << "labels      f1 " << row.f1 << " precision " << row.precision << " recall " << row.recall << '\n';
    }
    if (flagged) {
        json rows = json::array();
        for (const auto& row : cutoff_sweep(corpus, preds, c.cutoffs)) {
            rows.push_back({{"cutoff", row.cutoff}, {"metrics", row.metrics.to_json()}});
            out << "cutoff " << row.cutoff << " f1 " << row.metrics.f1 << " precision " << row.metrics.precision
                << " recall " << row.metrics.recall << '\n';
        }
        report["cutoff_sweep"] = rows;
    } else {
        log_info("corpus has documents without comment flags; cutoff sweep skipped");
    }
    auto coh = model_coherence(m, corpus, c.pooled_coherence);
    report["coherence"] = coh.to_json();
    out << "coherence   top10 " << coh.mean10 << " top20 " << coh.mean20 << '\n';
    write_json(c.out, report);
    write_echo(c.out + ".config.json", "eval", c);
    return ok;
}

int cmd_verify(const RunConfig& c, std::ostream& out)
{
    auto results = checks::all_module_oracles();
    out << checks::format_table(results);
    bool pass = true;
    json arr = json::array();
    for (const auto& r : results) {
        pass = pass && r.pass;
        arr.push_back(r.to_json());
    }
    if (!c.out.empty()) {
        write_json(c.out, {{"checks", arr}, {"pass", pass}});
        write_echo(c.out + ".config.json", "verify", c);
    }
    out << (pass ? "all checks passed" : "some checks FAILED") << '\n';
    return pass ? ok : runtime_failure;
}

void error_line(std::ostream& err, const char* kind, const std::string& message)
{
    err << json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Knowledge-guided neural topic model", "kgntm"};
    app.require_subcommand(1, 1);
    Flags f;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", f.config, "JSON config file");
        sub->add_option("--corpus", f.corpus, "corpus in JSON lines");
        sub->add_option("--ontology", f.ontology, "seed ontology JSON");
        sub->add_option("--checkpoint", f.checkpoint, "model checkpoint");
        sub->add_option("--out", f.out, "output path");
        sub->add_option("--seed", f.seed, "random seed");
        sub->add_option("--threads", f.threads, "worker threads (default: all cores)");
        sub->add_option("--cutoff", f.cutoffs, "flag-share cutoffs for the sweep")->delimiter(',');
        sub->add_option("--ablate", f.ablate, "comma-separated ablation switches to turn off");
        sub->add_option("--topics-top-n", f.top_n, "words per topic");
        sub->add_option("--threshold", f.threshold, "classification threshold");
        sub->add_option("--log-level", f.log_level, "error|info|debug");
    };
    const std::vector<std::pair<const char*, const char*>> commands{
        {"simulate", "sample a planted corpus"},
        {"pretrain", "seeded LDA initialization"},
        {"train", "variational EM training"},
        {"distill", "fine-tune the incomplete inference networks"},
        {"predict", "predict labels for videos"},
        {"topics", "topic report"},
        {"eval", "metrics, cutoff sweep and coherence"},
        {"verify", "run the module oracles"}};
    for (const auto& [name, help] : commands) add_common(app.add_subcommand(name, help));

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return ok;
    } catch (const CLI::ParseError& e) {
        error_line(err, "usage", e.what());
        return usage_error;
    }
    const std::string command = app.get_subcommands().front()->get_name();

    try {
        if (!f.log_level.empty()) set_log_level(parse_log_level(f.log_level));
    } catch (const std::exception& e) {
        error_line(err, "usage", e.what());
        return usage_error;
    }

    try {
        const RunConfig c = resolve_config(f);
        if (command == "simulate") return cmd_simulate(c, out);
        if (command == "pretrain") return cmd_pretrain(c, out);
        if (command == "train") return cmd_train(c, out);
        if (command == "distill") return cmd_distill(c, out);
        if (command == "predict") return cmd_predict(c, out);
        if (command == "topics") return cmd_topics(c, out);
        if (command == "eval") return cmd_eval(c, out);
        return cmd_verify(c, out);
    } catch (const UsageError& e) {
        error_line(err, "usage", e.what());
        return usage_error;
    } catch (const ValidationError& e) {
        error_line(err, "validation", e.what());
        return validation_error;
    } catch (const SchemaError& e) {
        error_line(err, "validation", e.what());
        return validation_error;
    } catch (const std::invalid_argument& e) {
        error_line(err, "validation", e.what());
        return validation_error;
    } catch (const json::exception& e) {
        error_line(err, "validation", e.what());
        return validation_error;
    } catch (const std::exception& e) {
        error_line(err, "runtime", e.what());
        return runtime_failure;
    }
}

} // namespace kgntm::cli
