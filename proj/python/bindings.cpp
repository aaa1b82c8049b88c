#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "e4s/adherence.hpp"
#include "e4s/consistency.hpp"
#include "e4s/error.hpp"
#include "e4s/naturalness.hpp"
#include "e4s/pipeline.hpp"
#include "e4s/report.hpp"
#include "e4s/sparse_index.hpp"
#include "e4s/text.hpp"

namespace py = pybind11;
using namespace e4s;

namespace {

std::vector<PairTruth> truths_from(const std::vector<bool>& same) {
  std::vector<PairTruth> t;
  t.reserve(same.size());
  for (bool s : same) t.push_back(s ? PairTruth::Same : PairTruth::Different);
  return t;
}

std::vector<ScoredLabel> labels_from(const std::vector<std::string>& names) {
  std::vector<ScoredLabel> out;
  for (const auto& n : names) {
    auto l = parse_nli_label(n);
    if (!l) throw ConfigError("unknown NLI label \"" + n + "\"");
    out.push_back({*l, 1.0});
  }
  return out;
}

MrrCurve curve_from(const std::vector<std::pair<std::size_t, double>>& points) {
  MrrCurve c;
  for (const auto& [p, m] : points) c.points.push_back({p, m, 0.0, 1, m, m});
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of the e4s evaluation toolkit";
  m.attr("__version__") = E4S_VERSION;

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<ProviderError>(m, "ProviderError", base.ptr());

  py::enum_<SpeakerRole>(m, "SpeakerRole").value("USER1", SpeakerRole::User1).value("USER2", SpeakerRole::User2);

  py::class_<Turn>(m, "Turn")
      .def_readonly("index", &Turn::index)
      .def_readonly("speaker", &Turn::speaker)
      .def_readonly("text", &Turn::text);
  py::class_<Conversation>(m, "Conversation")
      .def_readonly("id", &Conversation::id)
      .def_readonly("turns", &Conversation::turns)
      .def("persona", &Conversation::persona, py::arg("role"));
  py::class_<Corpus>(m, "Corpus")
      .def_readonly("name", &Corpus::name)
      .def_readonly("conversations", &Corpus::conversations)
      .def("__len__", [](const Corpus& c) { return c.conversations.size(); })
      .def("to_jsonl", [](const Corpus& c) {
        std::ostringstream out;
        write_jsonl(c, out);
        return out.str();
      });

  m.def(
      "parse_corpus",
      [](const std::string& data, const std::string& format, bool strict, const std::string& name) {
        auto fmt = parse_format(format);
        if (!fmt) throw ConfigError("unknown corpus format \"" + format + "\"");
        std::istringstream in(data);
        return parse_corpus(in, {*fmt, strict, name}).corpus;
      },
      py::arg("data"), py::arg("format") = "canonical-jsonl", py::arg("strict") = true, py::arg("name") = "corpus");
  m.def(
      "load_corpus",
      [](const std::string& path, bool strict) {
        return parse_corpus_file(path, {guess_format(path), strict, {}}).corpus;
      },
      py::arg("path"), py::arg("strict") = true);
  m.def(
      "validate",
      [](const Corpus& c) {
        const auto r = validate(c);
        py::dict d;
        d["conversations"] = r.conversations;
        d["turns"] = r.turns;
        d["persona_sentences"] = r.persona_sentences;
        d["errors"] = r.errors;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("corpus"));
  m.def("split_sentences", &text::split_sentences, py::arg("text"));
  m.def("normalize", &text::normalize, py::arg("text"));
  m.def("text_key", &text::text_key, py::arg("text"));

  py::class_<SparseIndex>(m, "SparseIndex")
      .def_static(
          "build",
          [](const std::vector<std::pair<std::string, std::string>>& docs, const std::string& scheme) {
            auto s = parse_sparse_scheme(scheme);
            if (!s) throw ConfigError("unknown sparse scheme \"" + scheme + "\"");
            std::vector<SparseDoc> d;
            for (const auto& [id, t] : docs) d.push_back({id, t});
            return SparseIndex::build(d, *s);
          },
          py::arg("docs"), py::arg("scheme") = "tfidf-word")
      .def("score_all", &SparseIndex::score_all, py::arg("query"))
      .def("rank",
           [](const SparseIndex& idx, const std::string& q) {
             std::vector<std::pair<std::string, double>> out;
             for (const auto& s : score_sparse(idx, q)) out.emplace_back(s.id, s.score);
             return out;
           })
      .def_property_readonly("terms", &SparseIndex::terms);

  m.def("interpolation_weight", &interpolation_weight, py::arg("alpha"));
  m.def("blend_scores", &blend_scores, py::arg("full_score"), py::arg("target_score"), py::arg("alpha"));
  m.def("span_weights", [](const std::vector<std::size_t>& p) { return span_weights(p); }, py::arg("pool_sizes"));
  m.def(
      "curve_similarity",
      [](const std::vector<std::pair<std::size_t, double>>& ref, const std::vector<std::pair<std::size_t, double>>& sim) {
        return curve_similarity(curve_from(ref), curve_from(sim));
      },
      py::arg("reference"), py::arg("simulation"),
      "Curves are lists of (pool_size, mrr_mean) points on the same grid.");
  m.def(
      "normalized_auc", [](const std::vector<std::pair<std::size_t, double>>& c) { return normalized_auc(curve_from(c)); },
      py::arg("curve"));
  m.def(
      "reciprocal_rank",
      [](const std::vector<std::string>& ranking, const std::set<std::string>& relevant) {
        return reciprocal_rank(ranking, relevant);
      },
      py::arg("ranking"), py::arg("relevant"));

  py::class_<CalibrationParams>(m, "CalibrationParams")
      .def(py::init<double, double>(), py::arg("p1"), py::arg("p2"))
      .def_readwrite("p1", &CalibrationParams::p1)
      .def_readwrite("p2", &CalibrationParams::p2);
  m.def(
      "calibrate_score", [](double s, double p1, double p2) { return calibrate_score(s, {p1, p2}); }, py::arg("cosine"),
      py::arg("p1"), py::arg("p2"));
  m.def(
      "pan_metrics",
      [](const std::vector<double>& scores, const std::vector<bool>& same) {
        const auto r = pan_metrics(scores, truths_from(same));
        py::dict d;
        d["f1"] = r.f1;
        d["auc"] = r.auc;
        d["brier"] = r.brier;
        d["c_at_1"] = r.c_at_1;
        d["f05u"] = r.f05u;
        d["consistency"] = r.consistency;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("scores"), py::arg("same"), "`same[i]` is True for same-author pairs.");
  m.def(
      "select_thresholds",
      [](const std::vector<double>& cosines, const std::vector<bool>& same) {
        const auto r = select_thresholds(cosines, truths_from(same));
        return py::make_tuple(r.params.p1, r.params.p2, r.objective);
      },
      py::arg("cosines"), py::arg("same"));
  m.def("consistency_similarity", &consistency_similarity, py::arg("sim"), py::arg("ref"));

  m.def(
      "coherence_score", [](const std::vector<std::string>& labels) { return coherence_score(labels_from(labels)); },
      py::arg("labels"));
  m.def(
      "label_distribution",
      [](const std::vector<std::string>& labels) {
        const auto d = label_distribution(labels_from(labels));
        return py::make_tuple(d.er, d.nr, d.cr);
      },
      py::arg("labels"));
  m.def(
      "naturalness_score", [](double cs, double pcr, double scr) { return naturalness_score(cs, pcr, scr); },
      py::arg("cs"), py::arg("pcr"), py::arg("scr"));
  m.def("naturalness_similarity", &naturalness_similarity, py::arg("sim"), py::arg("ref"));

  m.def("aggregate_e4s", &aggregate_e4s, py::arg("adherence"), py::arg("consistency"), py::arg("naturalness"));
  m.def(
      "competition_ranks", [](const std::vector<double>& v) { return competition_ranks(v); }, py::arg("values"));
  m.def("offset_percent", &offset_percent, py::arg("similarity"));

  m.def(
      "run_pipeline",
      [](const std::string& config_json, const std::string& base_dir, bool write) {
        const auto j = nlohmann::json::parse(config_json);
        RunConfig c = RunConfig::from_json(j, base_dir);
        RunReport r;
        {
          py::gil_scoped_release release;
          r = run_pipeline(c, write);
        }
        return to_json(r).dump();
      },
      py::arg("config_json"), py::arg("base_dir") = "", py::arg("write") = true,
      "Runs the full pipeline from a JSON config string and returns report.json as a string.");
}
