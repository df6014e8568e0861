#include "kgntm/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "kgntm/log.hpp"

namespace kgntm {

using nlohmann::json;

TokenId Vocabulary::add_regular(const std::string& word)
{
    auto [it, inserted] = regular_index_.try_emplace(word, static_cast<TokenId>(regular_.size()));
    if (inserted) regular_.push_back(word);
    return it->second;
}

TokenId Vocabulary::add_seed(const std::string& word)
{
    auto [it, inserted] = seed_index_.try_emplace(word, static_cast<TokenId>(seed_.size()));
    if (inserted) seed_.push_back(word);
    return it->second;
}

std::optional<TokenId> Vocabulary::regular_id(const std::string& word) const
{
    auto it = regular_index_.find(word);
    if (it == regular_index_.end()) return std::nullopt;
    return it->second;
}

std::optional<TokenId> Vocabulary::seed_id(const std::string& word) const
{
    auto it = seed_index_.find(word);
    if (it == seed_index_.end()) return std::nullopt;
    return it->second;
}

std::vector<std::optional<TokenId>> Vocabulary::seed_to_regular() const
{
    std::vector<std::optional<TokenId>> out;
    out.reserve(seed_.size());
    for (const auto& w : seed_) out.push_back(regular_id(w));
    return out;
}

void Vocabulary::validate() const
{
    if (V() < 2) throw SchemaError("vocabulary needs at least 2 regular words, has " + std::to_string(V()));
    if (U() < 1) throw SchemaError("vocabulary needs at least 1 seed word");
}

json Vocabulary::to_json() const
{
    return {{"regular_words", regular_}, {"seed_words", seed_}};
}

Vocabulary Vocabulary::from_json(const json& j)
{
    Vocabulary v;
    for (const auto& w : j.at("regular_words")) {
        const auto s = w.get<std::string>();
        if (v.regular_id(s)) throw SchemaError("duplicate regular word '" + s + "'");
        v.add_regular(s);
    }
    for (const auto& w : j.at("seed_words")) {
        const auto s = w.get<std::string>();
        if (v.seed_id(s)) throw SchemaError("duplicate seed word '" + s + "'");
        v.add_seed(s);
    }
    return v;
}

json SeedOntology::to_json(const Vocabulary& vocab) const
{
    json cats = json::array();
    for (const auto& c : categories) {
        json words = json::array();
        for (auto s : c.seeds) words.push_back(vocab.seed_word(s));
        cats.push_back({{"name", c.name}, {"seed_words", std::move(words)}});
    }
    return {{"categories", std::move(cats)}};
}

// ---------------------------------------------------------------------------

namespace {

const std::set<std::string> kDocKeys = {"id", "transcript", "comments", "f_img", "f_mot", "f_aud", "label",
                                        "comment_flags"};

std::string where(std::size_t line)
{
    return "line " + std::to_string(line) + ": ";
}

const json& require(const json& obj, const char* key, std::size_t line)
{
    auto it = obj.find(key);
    if (it == obj.end()) throw SchemaError(where(line) + "missing required field '" + key + "'");
    return *it;
}

bool present(const json& obj, const char* key)
{
    auto it = obj.find(key);
    return it != obj.end() && !it->is_null();
}

std::vector<double> read_features(const json& obj, const char* key, std::size_t line)
{
    const json& arr = require(obj, key, line);
    if (!arr.is_array()) throw SchemaError(where(line) + "field '" + key + "' must be an array of numbers");
    std::vector<double> out;
    out.reserve(arr.size());
    for (const auto& v : arr) {
        if (!v.is_number()) throw SchemaError(where(line) + "field '" + key + "' must contain only numbers");
        out.push_back(v.get<double>());
    }
    return out;
}

struct TokenMapper {
    VocabPolicy policy;
    Vocabulary* vocab;
    std::size_t dropped = 0;

    void append(const json& words, std::vector<TokenId>& out, const char* field, std::size_t line)
    {
        if (!words.is_array()) throw SchemaError(where(line) + "field '" + field + "' must be an array of strings");
        for (const auto& w : words) {
            if (!w.is_string()) throw SchemaError(where(line) + "field '" + field + "' must contain only strings");
            const auto& s = w.get_ref<const std::string&>();
            if (policy == VocabPolicy::build) {
                out.push_back(vocab->add_regular(s));
            } else if (auto id = vocab->regular_id(s)) {
                out.push_back(*id);
            } else {
                ++dropped;
            }
        }
    }
};

void check_dims(const VideoDoc& d, const FeatureDims& dims, std::size_t line)
{
    auto one = [&](const std::vector<double>& f, std::size_t want, const char* key) {
        if (f.size() != want) {
            throw SchemaError(where(line) + "feature '" + key + "' has dimension " + std::to_string(f.size()) +
                              ", expected " + std::to_string(want));
        }
    };
    one(d.f_img, dims.img, "f_img");
    one(d.f_mot, dims.mot, "f_mot");
    one(d.f_aud, dims.aud, "f_aud");
}

} // namespace

Corpus parse_corpus(std::istream& in, VocabPolicy policy, const Vocabulary* vocab, std::optional<FeatureDims> dims,
                    LoadReport* report)
{
    Corpus corpus;
    if (policy == VocabPolicy::given) {
        if (!vocab) throw std::invalid_argument("load_corpus: vocab_policy=given requires a vocabulary");
        corpus.vocab = *vocab;
    }
    TokenMapper mapper{policy, &corpus.vocab};
    std::set<std::string> ids;

    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); })) continue;
        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(where(line) + "malformed JSON: " + e.what(), line);
        }
        if (!obj.is_object()) throw SchemaError(where(line) + "each line must be a JSON object");
        for (const auto& [key, _] : obj.items()) {
            if (!kDocKeys.count(key)) throw SchemaError(where(line) + "unknown field '" + key + "'");
        }

        VideoDoc d;
        const json& id = require(obj, "id", line);
        if (!id.is_string()) throw SchemaError(where(line) + "field 'id' must be a string");
        d.id = id.get<std::string>();
        if (!ids.insert(d.id).second) throw SchemaError(where(line) + "duplicate document id '" + d.id + "'");

        if (present(obj, "transcript")) {
            std::vector<TokenId> t;
            mapper.append(obj["transcript"], t, "transcript", line);
            if (!t.empty()) d.transcript = std::move(t);
        }

        const json& comments = require(obj, "comments", line);
        if (!comments.is_array()) throw SchemaError(where(line) + "field 'comments' must be an array of arrays");
        for (const auto& c : comments) {
            d.comment_offsets.push_back(d.comments.size());
            mapper.append(c, d.comments, "comments", line);
        }

        d.f_img = read_features(obj, "f_img", line);
        d.f_mot = read_features(obj, "f_mot", line);
        d.f_aud = read_features(obj, "f_aud", line);
        if (!dims) dims = FeatureDims{d.f_img.size(), d.f_mot.size(), d.f_aud.size()};
        check_dims(d, *dims, line);

        if (present(obj, "label")) {
            const json& l = obj["label"];
            if (!l.is_number_integer() || (l.get<int>() != 0 && l.get<int>() != 1)) {
                throw SchemaError(where(line) + "field 'label' must be 0, 1 or null");
            }
            d.label = l.get<int>();
        }
        if (present(obj, "comment_flags")) {
            const json& f = obj["comment_flags"];
            if (!f.is_array()) throw SchemaError(where(line) + "field 'comment_flags' must be an array of 0/1");
            std::vector<std::uint8_t> flags;
            for (const auto& v : f) {
                if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
                    throw SchemaError(where(line) + "field 'comment_flags' must contain only 0 or 1");
                }
                flags.push_back(static_cast<std::uint8_t>(v.get<int>()));
            }
            if (flags.size() != d.num_comments()) {
                throw SchemaError(where(line) + "comment_flags has " + std::to_string(flags.size()) +
                                  " entries for " + std::to_string(d.num_comments()) + " comments");
            }
            d.comment_flags = std::move(flags);
        }
        corpus.docs.push_back(std::move(d));
    }
    corpus.dims = dims.value_or(FeatureDims{});
    if (mapper.dropped > 0) {
        log_info("dropped " + std::to_string(mapper.dropped) + " token(s) not in the given vocabulary");
    }
    if (report) {
        report->lines = line;
        report->dropped_tokens = mapper.dropped;
    }
    return corpus;
}

Corpus load_corpus(const std::string& path, VocabPolicy policy, const Vocabulary* vocab,
                   std::optional<FeatureDims> dims, LoadReport* report)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open corpus '" + path + "'");
    return parse_corpus(in, policy, vocab, dims, report);
}

json doc_to_json(const VideoDoc& d, const Vocabulary& vocab)
{
    json j;
    j["id"] = d.id;
    if (d.has_transcript()) {
        json t = json::array();
        for (auto w : *d.transcript) t.push_back(vocab.regular_word(w));
        j["transcript"] = std::move(t);
    } else {
        j["transcript"] = nullptr;
    }
    json cs = json::array();
    for (std::size_t c = 0; c < d.num_comments(); ++c) {
        const std::size_t lo = d.comment_offsets[c];
        const std::size_t hi = c + 1 < d.num_comments() ? d.comment_offsets[c + 1] : d.comments.size();
        json words = json::array();
        for (std::size_t i = lo; i < hi; ++i) words.push_back(vocab.regular_word(d.comments[i]));
        cs.push_back(std::move(words));
    }
    j["comments"] = std::move(cs);
    j["f_img"] = d.f_img;
    j["f_mot"] = d.f_mot;
    j["f_aud"] = d.f_aud;
    j["label"] = d.label ? json(*d.label) : json(nullptr);
    if (d.comment_flags) {
        json f = json::array();
        for (auto v : *d.comment_flags) f.push_back(static_cast<int>(v));
        j["comment_flags"] = std::move(f);
    } else {
        j["comment_flags"] = nullptr;
    }
    return j;
}

void write_corpus(const Corpus& corpus, std::ostream& out)
{
    for (const auto& d : corpus.docs) out << doc_to_json(d, corpus.vocab).dump() << '\n';
}

void save_corpus(const Corpus& corpus, const std::string& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    write_corpus(corpus, out);
}

// ---------------------------------------------------------------------------

SeedOntology parse_ontology(const json& j, Vocabulary& vocab)
{
    if (!j.is_object() || !j.contains("categories") || !j["categories"].is_array()) {
        throw SchemaError("ontology must be an object with a 'categories' array");
    }
    SeedOntology onto;
    std::set<std::string> names;
    for (const auto& c : j["categories"]) {
        if (!c.is_object() || !c.contains("name") || !c["name"].is_string()) {
            throw SchemaError("ontology category needs a string 'name'");
        }
        const auto name = c["name"].get<std::string>();
        if (!names.insert(name).second) throw SchemaError("duplicate ontology category '" + name + "'");
        if (!c.contains("seed_words") || !c["seed_words"].is_array()) {
            throw SchemaError("ontology category '" + name + "' needs a 'seed_words' array");
        }
        if (c["seed_words"].empty()) throw SchemaError("ontology category '" + name + "' is empty");
        SeedCategory cat{name, {}};
        std::set<std::string> seen;
        for (const auto& w : c["seed_words"]) {
            if (!w.is_string()) throw SchemaError("seed words of '" + name + "' must be strings");
            const auto s = w.get<std::string>();
            if (s.empty() || std::any_of(s.begin(), s.end(), [](unsigned char ch) { return std::isspace(ch); })) {
                throw SchemaError("seed word '" + s + "' in '" + name + "' is not a single token");
            }
            if (!seen.insert(s).second) throw SchemaError("duplicate seed word '" + s + "' in '" + name + "'");
            cat.seeds.push_back(vocab.add_seed(s));
        }
        onto.categories.push_back(std::move(cat));
    }
    if (onto.categories.empty()) throw SchemaError("ontology has no categories");
    return onto;
}

SeedOntology load_ontology(const std::string& path, Vocabulary& vocab)
{
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open ontology '" + path + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(std::string("malformed ontology JSON: ") + e.what());
    }
    return parse_ontology(j, vocab);
}

void save_ontology(const SeedOntology& onto, const Vocabulary& vocab, const std::string& path)
{
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << onto.to_json(vocab).dump(2) << '\n';
}

int label_by_cutoff(VideoDoc& doc, double cutoff)
{
    if (!doc.comment_flags || doc.comment_flags->empty()) {
        throw std::logic_error("label_by_cutoff: document '" + doc.id + "' has no comment_flags");
    }
    if (!(cutoff > 0.0 && cutoff < 1.0)) throw std::invalid_argument("cutoff must lie in (0, 1)");
    const auto& f = *doc.comment_flags;
    const auto flagged = static_cast<std::size_t>(std::count(f.begin(), f.end(), std::uint8_t{1}));
    // Compare counts against cutoff*total with a rounding allowance so that
    // boundary cases such as 3 of 10 at 0.30 stay inclusive.
    const double lhs = static_cast<double>(flagged);
    const double rhs = cutoff * static_cast<double>(f.size());
    const int label = lhs >= rhs - 1e-12 * static_cast<double>(f.size()) ? 1 : 0;
    doc.label = label;
    return label;
}

} // namespace kgntm
