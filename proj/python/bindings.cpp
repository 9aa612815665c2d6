#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "cream/cli.hpp"
#include "cream/eval.hpp"
#include "cream/generator.hpp"
#include "cream/pairing.hpp"
#include "cream/scorer.hpp"
#include "cream/tournament.hpp"

namespace py = pybind11;
using namespace cream;

namespace {

// Structured values cross the boundary as JSON text; the Python package decodes them.
std::string pairs_json(const std::vector<LabeledPair>& pairs, const TimeZone& tz) {
    json out = json::array();
    for (const auto& p : pairs) out.push_back(pair_to_json(p, tz));
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Pairwise engagement prediction core";

    PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> cream_error;
    cream_error.call_once_and_store_result([&]() { return py::exception<Error>(m, "CreamError"); });
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            json body{{"code", std::string(to_string(e.code()))}, {"message", e.what()}, {"detail", e.detail()}};
            if (e.field()) body["field"] = *e.field();
            py::set_error(cream_error.get_stored(), body.dump().c_str());
        }
    });

    m.def("render_compare_prompt", [](const std::string& t1, const std::string& t2) {
        return render_compare_prompt(t1, t2);
    });
    m.def(
        "render_engaging_prompt",
        [](const std::string& text, bool completion) { return render_engaging_prompt(text, completion); },
        py::arg("text"), py::arg("with_completion_stub") = false);

    m.def("accuracy", &accuracy);
    m.def("f1_positive", &f1_positive);
    m.def(
        "assign_bucket",
        [](double rel_diff_pct, std::optional<std::vector<double>> boundaries) {
            BucketSpec spec;
            if (boundaries) spec.boundaries = *boundaries;
            spec.validate();
            return assign_bucket(rel_diff_pct, spec);
        },
        py::arg("rel_diff_pct"), py::arg("boundaries") = py::none());
    m.def("approximate_randomization_p", &approximate_randomization_p, py::arg("correct_a"), py::arg("correct_b"),
          py::arg("iterations"), py::arg("seed"));

    m.def(
        "build_pairs_json",
        [](const std::string& tweets_path, const std::string& timezone, std::uint64_t seed) {
            IngestConfig ic;
            ic.reference_timezone = TimeZone::load(timezone);
            PairingConfig pc;
            pc.order_seed = seed;
            const auto corpus = ingest_file(tweets_path, ic).corpus;
            return pairs_json(build_pairs(corpus, pc), corpus.reference_timezone());
        },
        py::arg("tweets_path"), py::arg("timezone") = "America/New_York", py::arg("seed") = 0);

    m.def(
        "train_model",
        [](const std::string& pairs_path, const std::string& model_path, const std::string& mode,
           const std::map<std::string, std::string>& explanations, const std::string& train_config) {
            const auto pairs = read_pairs_file(pairs_path, IngestConfig{});
            const TrainConfig tc = train_config.empty() ? TrainConfig{} : TrainConfig::from_json(json::parse(train_config));
            const auto r = train(pairs, explanations, tc, parse_assembly_mode(mode));
            r.model.save(model_path);
            return r.train_accuracy;
        },
        py::arg("pairs_path"), py::arg("model_path"), py::arg("mode") = "PAIR_ONLY",
        py::arg("explanations") = std::map<std::string, std::string>{}, py::arg("train_config") = "");

    m.def(
        "predict",
        [](const std::string& model_path, const std::string& t1, const std::string& t2, std::optional<std::string> e1,
           std::optional<std::string> e2) {
            LinearScorer s(std::make_shared<const PairwiseModel>(PairwiseModel::load(model_path)));
            const auto mode = s.model().mode;
            return s.predict({t1, t2, std::move(e1), std::move(e2)}, mode).p_t1;
        },
        py::arg("model_path"), py::arg("t1"), py::arg("t2"), py::arg("e1") = py::none(), py::arg("e2") = py::none());

    m.def(
        "select_best_replay",
        [](const std::vector<std::string>& candidates, const std::string& scorer_replay_path) {
            auto scorer = ReplayScorer::from_file(scorer_replay_path);
            return select_best(candidates, *scorer, {}, AssemblyMode::PairOnly).to_json().dump();
        },
        py::arg("candidates"), py::arg("scorer_replay_path"));

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            int code = 0;
            {
                py::gil_scoped_release release;
                code = run_cli(args, out, err);
            }
            return py::make_tuple(code, out.str(), err.str());
        },
        py::arg("args"));
}
