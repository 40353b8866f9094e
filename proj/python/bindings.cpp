#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ctxprobe/context_builder.hpp"
#include "ctxprobe/error.hpp"
#include "ctxprobe/evaluation.hpp"
#include "ctxprobe/featurizer.hpp"
#include "ctxprobe/run.hpp"
#include "ctxprobe/scorer.hpp"
#include "ctxprobe/synthetic.hpp"

namespace py = pybind11;
using namespace ctxprobe;

namespace {

py::dict prediction_dict(const Prediction& p) {
  py::list top;
  for (const auto& t : p.top_k) top.append(py::make_tuple(t.token, t.logprob));
  py::dict d;
  d["id"] = p.fact_uuid;
  d["candidate_logprobs"] = p.candidate_logprobs;
  d["top_k"] = top;
  d["nsp_prob"] = p.nsp_prob ? py::object(py::float_(*p.nsp_prob)) : py::object(py::none());
  d["argmax"] = p.argmax_token;
  return d;
}

std::vector<Paragraph> paragraphs_from(const std::vector<std::pair<std::string, std::string>>& items) {
  std::vector<Paragraph> out;
  out.reserve(items.size());
  for (const auto& [id, text] : items) out.push_back({id, "", text});
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Context-enriched cloze probing: retrieval, featurization, mock scoring, evaluation.";

  // Translators run newest first, so the base class goes in first.
  py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<InvalidArgument>(m, "InvalidArgument", PyExc_ValueError);
  py::register_exception<QueryTooLong>(m, "QueryTooLong", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);

  m.def("tokenize", &tokenize, py::arg("text"));
  m.def("answer_in_context", &answer_in_context, py::arg("context"), py::arg("answer"));
  m.def("split_sentences", &split_sentences, py::arg("text"));

  m.def(
      "assemble",
      [](const std::vector<std::string>& query, const std::vector<std::string>& context, const std::string& mode,
         std::size_t max_length) {
        auto in = assemble(query, context, parse_segment_mode(mode), {}, max_length);
        py::dict d;
        d["tokens"] = in.tokens;
        d["segment_ids"] = std::vector<int>(in.segment_ids.begin(), in.segment_ids.end());
        d["mask_index"] = in.mask_index;
        d["context_length"] = in.context_end - in.context_begin;
        return d;
      },
      py::arg("query_tokens"), py::arg("context_tokens"), py::arg("mode") = "two_segment",
      py::arg("max_length") = kMaxSequenceLength);

  py::class_<TfidfIndex>(m, "TfidfIndex")
      .def_static(
          "build",
          [](const std::vector<std::pair<std::string, std::string>>& paragraphs, std::uint32_t hash_bits,
             std::uint32_t ngrams) {
            IndexConfig cfg;
            cfg.hash_bits = hash_bits;
            cfg.ngram_order = ngrams;
            auto ps = paragraphs_from(paragraphs);
            return TfidfIndex::build(ps, cfg);
          },
          py::arg("paragraphs"), py::arg("hash_bits") = 24, py::arg("ngrams") = 2,
          "Build from (para_id, text) pairs.")
      .def_static(
          "load", [](const std::filesystem::path& p) { return TfidfIndex::load(p); }, py::arg("path"))
      .def("save", &TfidfIndex::save, py::arg("path"))
      .def(
          "query",
          [](const TfidfIndex& idx, const std::string& text, std::size_t k) {
            std::vector<std::pair<std::string, double>> out;
            for (const auto& h : idx.query(text, k)) out.emplace_back(h.para_id, h.score);
            return out;
          },
          py::arg("text"), py::arg("k") = 10)
      .def("__len__", &TfidfIndex::num_paragraphs)
      .def_property_readonly("hash_bits", &TfidfIndex::hash_bits);

  m.def(
      "mock_nsp", [](const std::string& q, const std::string& c) { return mock_nsp(q, c); }, py::arg("query"),
      py::arg("context"));

  m.def(
      "score",
      [](const std::string& query, std::optional<std::string> context, const std::vector<std::string>& candidates,
         const std::string& mode, const std::string& scorer, double lam, double gate, std::size_t top_k) {
        auto s = make_mock_scorer({scorer, lam, gate, ""});
        ScoreRequest r;
        r.id = "q";
        r.query = query;
        r.context = std::move(context);
        r.mode = parse_segment_mode(mode);
        r.candidates = std::make_shared<const Vocabulary>(candidates);
        r.top_k = top_k;
        return prediction_dict(s->score(r));
      },
      py::arg("query"), py::arg("context"), py::arg("candidates"), py::arg("mode") = "two_segment",
      py::arg("scorer") = "copy", py::arg("lam") = 0.9, py::arg("gate") = 0.5, py::arg("top_k") = 10,
      "Score one cloze query with a mock scorer.");

  m.def(
      "precision_at_1",
      [](const std::filesystem::path& predictions) {
        auto t = precision_at_1(read_records(predictions));
        py::dict d;
        d["per_relation"] = t.per_relation;
        d["per_corpus"] = t.per_corpus;
        d["overall"] = t.overall;
        d["records"] = t.records;
        return d;
      },
      py::arg("predictions"));
  m.def(
      "weighted_average",
      [](const std::map<std::string, double>& per_corpus, std::optional<std::map<std::string, double>> weights) {
        return weights ? weighted_average(per_corpus, *weights) : weighted_average(per_corpus);
      },
      py::arg("per_corpus"), py::arg("weights") = py::none());
  m.def(
      "sign_test",
      [](const std::map<std::string, double>& a, const std::map<std::string, double>& b) {
        auto r = sign_test(a, b);
        py::dict d;
        d["wins"] = r.wins;
        d["losses"] = r.losses;
        d["ties"] = r.ties;
        d["p_value"] = r.p_value;
        return d;
      },
      py::arg("a"), py::arg("b"));
  m.def("binomial_half_cdf", &binomial_half_cdf, py::arg("n"), py::arg("m"));

  m.def(
      "run",
      [](const std::filesystem::path& config, const std::vector<std::string>& overrides) {
        RunConfig cfg;
        try {
          cfg = RunConfig::load(config, overrides);
        } catch (const ValidationError&) {
          return 2;
        }
        py::gil_scoped_release release;
        return run(cfg).exit_code;
      },
      py::arg("config"), py::arg("overrides") = std::vector<std::string>{},
      "Run a configured experiment; returns the exit code.");
  m.def(
      "write_synthetic_probe",
      [](const std::filesystem::path& dir) { write_synthetic_probe(make_synthetic_probe(), dir); }, py::arg("dir"));
}
