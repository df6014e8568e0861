// Python module _kgntm: closed-form model quantities, evaluation helpers,
// model loading and prediction, and the command-line entry point.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <set>
#include <sstream>

#include "cli.hpp"
#include "kgntm/evalkit.hpp"
#include "kgntm/generative.hpp"
#include "kgntm/predictor.hpp"

namespace py = pybind11;
using namespace kgntm;

namespace {

// nlohmann::json -> Python objects via the json module.
py::object to_python(const nlohmann::json& j)
{
    return py::module_::import("json").attr("loads")(j.dump());
}

Corpus load_for(const TrainedModel& m, const std::string& path)
{
    return load_corpus(path, VocabPolicy::given, &m.vocab, m.dims);
}

} // namespace

PYBIND11_MODULE(_kgntm, mod)
{
    mod.doc() = "Knowledge-guided neural topic model";

    mod.def("b_prime", [](const std::vector<double>& theta, double beta) { return b_prime(theta, beta); },
            py::arg("theta"), py::arg("beta_ratio"),
            "Closed-form bound on the expected masked topic mixture.");
    mod.def("theta_tilde",
            [](const std::vector<double>& h, const std::vector<std::uint8_t>& mask) { return theta_tilde(h, mask); },
            py::arg("h"), py::arg("mask"));
    mod.def("theorem_bound", [](const std::vector<double>& h) { return theorem_bound(h); }, py::arg("h"));
    mod.def(
        "umass_coherence",
        [](const std::vector<TokenId>& top, const std::vector<std::vector<TokenId>>& docs) {
            std::vector<std::set<TokenId>> sets;
            for (const auto& d : docs) sets.emplace_back(d.begin(), d.end());
            return umass_coherence(top, sets);
        },
        py::arg("top_words"), py::arg("docs"));
    mod.def("hungarian", &hungarian, py::arg("cost"));
    mod.def(
        "classification_metrics",
        [](const std::vector<int>& predicted, const std::vector<int>& labels) {
            return to_python(classification_metrics(predicted, labels).to_json());
        },
        py::arg("predicted"), py::arg("labels"));
    mod.def(
        "split_70_15_15",
        [](std::size_t n, std::uint64_t seed) {
            auto s = split_70_15_15(n, seed);
            return py::make_tuple(s.train, s.val, s.test);
        },
        py::arg("n"), py::arg("seed"));

    py::class_<TrainedModel>(mod, "Model")
        .def_static("load", &load_model, py::arg("path"))
        .def_property_readonly("num_topics", [](const TrainedModel& m) { return m.cfg.hp.K; })
        .def_property_readonly("vocabulary_size", [](const TrainedModel& m) { return m.vocab.V(); })
        .def(
            "predict",
            [](const TrainedModel& m, const std::string& corpus_path, double threshold) {
                auto corpus = load_for(m, corpus_path);
                py::list out;
                for (const auto& p : predict_all(corpus, m, threshold)) out.append(to_python(p.to_json()));
                return out;
            },
            py::arg("corpus"), py::arg("threshold") = 0.5)
        .def(
            "topics",
            [](const TrainedModel& m, std::size_t top_n) { return to_python(topic_report(m, top_n).to_json()); },
            py::arg("top_n") = 10);

    mod.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code;
            {
                py::gil_scoped_release release;
                code = cli::run(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"), "Runs one subcommand; returns (exit_code, stdout, stderr).");
}
