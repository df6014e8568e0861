#include "kgntm/predictor.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "kgntm/log.hpp"

namespace kgntm {

using nlohmann::json;

json Prediction::to_json() const
{
    return {{"id", id}, {"probability", probability}, {"label", label}, {"theta", theta}};
}

Prediction predict(const VideoDoc& doc, const TrainedModel& m, double threshold)
{
    VideoDoc input = doc;
    input.comments.clear();
    input.comment_offsets.clear();
    input.comment_flags.reset();
    input.label.reset();
    auto b = encode_docs({&input}, m.model.V, m.dims);
    const auto variant =
        doc.has_transcript() ? IncompleteVariant::with_transcript : IncompleteVariant::without_transcript;
    auto g = infer_theta_incomplete(m.vs, b, variant);
    Prediction p;
    p.id = doc.id;
    p.theta = softmax(g.mu.row_vector(0));
    p.probability = generate_label_prob(m.model, p.theta);
    p.label = p.probability > threshold ? 1 : 0;
    return p;
}

std::vector<Prediction> predict_all(const Corpus& corpus, const TrainedModel& m, double threshold)
{
    if (!m.distilled) log_info("model has not been distilled; incomplete networks are at their initialization");
    std::vector<Prediction> out;
    out.reserve(corpus.docs.size());
    for (const auto& d : corpus.docs) out.push_back(predict(d, m, threshold));
    return out;
}

std::vector<std::size_t> top_indices(std::span<const double> values, std::size_t n)
{
    std::vector<std::size_t> idx(values.size());
    std::iota(idx.begin(), idx.end(), 0);
    n = std::min(n, idx.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(),
                      [&](std::size_t a, std::size_t b) { return values[a] > values[b] || (values[a] == values[b] && a < b); });
    idx.resize(n);
    return idx;
}

namespace {

std::vector<WordWeight> top_words(const Tensor& phi, std::size_t k, std::size_t n, const Vocabulary& vocab)
{
    auto row = phi.row_vector(k);
    std::vector<WordWeight> out;
    for (auto i : top_indices(row, n)) {
        out.push_back({vocab.regular_word(static_cast<TokenId>(i)), static_cast<TokenId>(i), row[i]});
    }
    return out;
}

json words_json(const std::vector<WordWeight>& ws)
{
    json a = json::array();
    for (const auto& w : ws) a.push_back({{"word", w.word}, {"probability", w.probability}});
    return a;
}

} // namespace

TopicReport topic_report(const TrainedModel& m, std::size_t top_n, const Corpus* docs)
{
    auto phis = infer_phis(m.vs);
    const Tensor comment = phi_posterior_mean(phis.phiR);
    const Tensor transcript = phi_posterior_mean(phis.phiRt);
    TopicReport r;
    for (std::size_t k = 0; k < m.model.K; ++k) {
        TopicEntry e;
        e.topic = k;
        e.comment_words = top_words(comment, k, top_n, m.vocab);
        e.transcript_words = top_words(transcript, k, top_n, m.vocab);
        e.seed_topic_weight = 1.0 - m.model.pi[k];
        r.topics.push_back(std::move(e));
    }
    if (docs) r.documents = predict_all(*docs, m);
    return r;
}

json TopicReport::to_json() const
{
    json t = json::array();
    for (const auto& e : topics) {
        t.push_back({{"topic", e.topic},
                     {"seed_topic_weight", e.seed_topic_weight},
                     {"comment_words", words_json(e.comment_words)},
                     {"transcript_words", words_json(e.transcript_words)}});
    }
    json d = json::array();
    for (const auto& p : documents) d.push_back({{"id", p.id}, {"theta", p.theta}});
    return {{"topics", t}, {"documents", d}};
}

std::string TopicReport::to_text() const
{
    std::ostringstream os;
    os << std::fixed << std::setprecision(3);
    for (const auto& e : topics) {
        os << "topic " << e.topic << "  seed weight " << e.seed_topic_weight << "\n  comments:   ";
        for (const auto& w : e.comment_words) os << w.word << ' ';
        os << "\n  transcript: ";
        for (const auto& w : e.transcript_words) os << w.word << ' ';
        os << '\n';
    }
    return os.str();
}

} // namespace kgntm
