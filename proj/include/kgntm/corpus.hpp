#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "kgntm/rng.hpp"

namespace kgntm {

using TokenId = std::uint32_t;

// Malformed input syntax (bad JSON). `line` is 1-based, 0 when not line-bound.
class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& msg, std::size_t line = 0) : std::runtime_error(msg), line(line) {}
    std::size_t line;
};

// Well-formed input that violates the schema or an invariant.
class SchemaError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Vocabulary {
public:
    std::size_t V() const noexcept { return regular_.size(); }
    std::size_t U() const noexcept { return seed_.size(); }

    // Index of the token, inserting it if new.
    TokenId add_regular(const std::string& word);
    TokenId add_seed(const std::string& word);

    std::optional<TokenId> regular_id(const std::string& word) const;
    std::optional<TokenId> seed_id(const std::string& word) const;

    const std::string& regular_word(TokenId i) const { return regular_.at(i); }
    const std::string& seed_word(TokenId i) const { return seed_.at(i); }
    const std::vector<std::string>& regular_words() const noexcept { return regular_; }
    const std::vector<std::string>& seed_words() const noexcept { return seed_; }

    // Regular-vocabulary index of each seed word, or nullopt when the seed
    // word never occurs as a regular token.
    std::vector<std::optional<TokenId>> seed_to_regular() const;

    // Throws SchemaError unless V >= 2 and U >= 1.
    void validate() const;

    nlohmann::json to_json() const;
    static Vocabulary from_json(const nlohmann::json& j);

    bool operator==(const Vocabulary& o) const { return regular_ == o.regular_ && seed_ == o.seed_; }

private:
    std::vector<std::string> regular_, seed_;
    std::unordered_map<std::string, TokenId> regular_index_, seed_index_;
};

struct SeedCategory {
    std::string name;
    std::vector<TokenId> seeds; // indices into Vocabulary::seed_words
};

struct SeedOntology {
    std::vector<SeedCategory> categories;
    std::size_t size() const noexcept { return categories.size(); }

    nlohmann::json to_json(const Vocabulary& vocab) const;
};

struct FeatureDims {
    std::size_t img = 0, mot = 0, aud = 0;
    bool operator==(const FeatureDims&) const = default;
};

struct VideoDoc {
    std::string id;
    std::optional<std::vector<TokenId>> transcript; // absent when empty
    std::vector<TokenId> comments;                   // all comments, flattened in order
    std::vector<std::size_t> comment_offsets;        // start of each comment in `comments`
    std::vector<double> f_img, f_mot, f_aud;
    std::optional<int> label;
    std::optional<std::vector<std::uint8_t>> comment_flags;

    std::size_t num_comments() const noexcept { return comment_offsets.size(); }
    bool has_transcript() const noexcept { return transcript.has_value() && !transcript->empty(); }
};

struct Corpus {
    std::vector<VideoDoc> docs;
    Vocabulary vocab;
    FeatureDims dims;
};

enum class VocabPolicy { build, given };

struct LoadReport {
    std::size_t lines = 0;
    std::size_t dropped_tokens = 0;
};

// Reads a JSON-lines corpus. With VocabPolicy::given, `vocab` must be
// supplied and unknown tokens are dropped (counted in the report). When
// `dims` is empty the feature dimensions are taken from the first document.
Corpus load_corpus(const std::string& path, VocabPolicy policy, const Vocabulary* vocab = nullptr,
                   std::optional<FeatureDims> dims = std::nullopt, LoadReport* report = nullptr);
Corpus parse_corpus(std::istream& in, VocabPolicy policy, const Vocabulary* vocab = nullptr,
                    std::optional<FeatureDims> dims = std::nullopt, LoadReport* report = nullptr);

nlohmann::json doc_to_json(const VideoDoc& doc, const Vocabulary& vocab);
void save_corpus(const Corpus& corpus, const std::string& path);
void write_corpus(const Corpus& corpus, std::ostream& out);

// Reads the ontology and registers every seed word in `vocab`.
SeedOntology load_ontology(const std::string& path, Vocabulary& vocab);
SeedOntology parse_ontology(const nlohmann::json& j, Vocabulary& vocab);
void save_ontology(const SeedOntology& onto, const Vocabulary& vocab, const std::string& path);

// 1 iff flagged / total >= cutoff; the result is also stored in doc.label.
int label_by_cutoff(VideoDoc& doc, double cutoff);

} // namespace kgntm
