#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "robassist/benchmark.hpp"
#include "robassist/document.hpp"
#include "robassist/error.hpp"
#include "robassist/metrics.hpp"
#include "robassist/qa.hpp"
#include "robassist/questionnaire.hpp"
#include "robassist/retrieval.hpp"
#include "robassist/rob_logic.hpp"

namespace py = pybind11;
using namespace rob;

namespace {

// Structured data crosses the boundary as JSON text; the Python package
// decodes it, so nothing here owns Python objects beyond strings and lists.

Answer parse_answer(const std::string& s) {
    auto a = answer_from_text(s);
    if (!a) fail(ErrorCode::Argument, "unknown answer '" + s + "'");
    return *a;
}

AnswerMap parse_answers(const std::map<std::string, std::string>& in) {
    AnswerMap out;
    for (const auto& [qid, a] : in) {
        default_questionnaire().question(qid);  // throws on unknown ids
        out[qid] = parse_answer(a);
    }
    return out;
}

std::map<std::string, std::string> gate(const std::map<std::string, std::string>& answers) {
    std::map<std::string, std::string> out;
    for (const auto& [qid, a] : apply_gating(default_questionnaire(), parse_answers(answers)))
        out[qid] = std::string(answer_key(a));
    return out;
}

std::string judge(const std::map<std::string, std::string>& answers) {
    auto gated = apply_gating(default_questionnaire(), parse_answers(answers));
    // domains with unanswered questions come back as null, as does overall
    DomainLevels levels{};
    bool complete = true;
    ordered_json domains = ordered_json::array();
    for (int d = 1; d <= kDomainCount; ++d) {
        try {
            levels[d - 1] = domain_judgment(default_rule_set().table(d), gated);
            domains.push_back(risk_key(levels[d - 1]));
        } catch (const Error& e) {
            if (e.code() != ErrorCode::Sequencing) throw;
            complete = false;
            domains.push_back(nullptr);
        }
    }
    ordered_json overall = complete ? ordered_json(risk_key(overall_judgment(levels))) : ordered_json(nullptr);
    return ordered_json{{"domains", domains}, {"overall", overall}}.dump();
}

std::vector<std::pair<std::size_t, double>> retrieve(const std::string& document, const std::string& qid, std::size_t k,
                                                     const std::string& retriever, std::size_t embed_dim) {
    auto doc = ingest_document(document);
    HashEmbedder emb(embed_dim);
    auto index = build_index(doc, emb);
    Retriever r;
    if (retriever == "bm25")
        r = bm25_retriever(index);
    else if (retriever == "dense")
        r = dense_retriever(index, emb);
    else
        fail(ErrorCode::Argument, "retriever must be bm25 or dense");
    std::vector<std::pair<std::size_t, double>> out;
    for (const auto& hit : r(default_questionnaire().question(qid), k)) out.emplace_back(hit.paragraph_index, hit.score);
    return out;
}

std::string assess(const std::string& document, const std::string& model, const std::string& mode,
                   const std::string& retriever, std::size_t embed_dim) {
    auto doc = ingest_document(document);
    HashEmbedder emb(embed_dim);
    auto index = build_index(doc, emb);
    Retriever r = retriever == "bm25" ? bm25_retriever(index) : dense_retriever(index, emb);
    auto llm = make_llm_client(model, LlmEndpointConfig::from_env());
    QaOptions opts;
    opts.mode = ContextMode::parse(mode);
    std::vector<QuestionOutcome> outcomes;
    {
        py::gil_scoped_release release;
        outcomes = assess_document(doc, default_questionnaire(), r, *llm, opts);
    }
    ordered_json out = ordered_json::array();
    for (const auto& o : outcomes) out.push_back(o.to_json());
    return out.dump();
}

Class3 parse_class3(const std::string& s) {
    if (auto c = class3_from_label(s)) return *c;
    if (auto c = to_class3(parse_answer(s))) return *c;
    fail(ErrorCode::Argument, "'" + s + "' has no three-class label");
}

std::string f1(const std::vector<std::string>& qids, const std::vector<std::string>& gold,
               const std::vector<std::optional<std::string>>& pred) {
    if (qids.size() != gold.size() || gold.size() != pred.size())
        fail(ErrorCode::Argument, "qids, gold and pred must have the same length");
    std::vector<ScoredItem> items;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        ScoredItem it{"doc", qids[i], parse_class3(gold[i]), std::nullopt};
        if (pred[i]) it.pred = parse_class3(*pred[i]);
        items.push_back(std::move(it));
    }
    return f1_scores(items).to_json().dump();
}

double kappa(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::vector<Class4> ca, cb;
    for (const auto& s : a) ca.push_back(to_class4(parse_answer(s)));
    for (const auto& s : b) cb.push_back(to_class4(parse_answer(s)));
    return cohens_kappa_4class(ca, cb);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Risk-of-bias assessment core";

    static py::exception<Error> rob_error(m, "RobError", PyExc_ValueError);
    py::register_exception_translator([](std::exception_ptr p) {
        try {
            if (p) std::rethrow_exception(p);
        } catch (const Error& e) {
            PyErr_SetString(rob_error.ptr(), (std::string(to_string(e.code())) + ": " + e.what()).c_str());
        }
    });

    m.def("questionnaire_json", [] { return default_questionnaire().to_json().dump(); });
    m.def("ingest_document", [](const std::string& raw) { return serialize_document(ingest_document(raw)); },
          py::arg("raw"));
    m.def("apply_gating", &gate, py::arg("answers"));
    m.def("judge_json", &judge, py::arg("answers"));
    m.def("retrieve", &retrieve, py::arg("document"), py::arg("qid"), py::arg("k") = 3,
          py::arg("retriever") = "bm25", py::arg("embed_dim") = 64);
    m.def("assess_json", &assess, py::arg("document"), py::arg("model") = "stub-hash", py::arg("mode") = "topk:3",
          py::arg("retriever") = "dense", py::arg("embed_dim") = 64);
    m.def("f1_json", &f1, py::arg("qids"), py::arg("gold"), py::arg("pred"));
    m.def("cohens_kappa", &kappa, py::arg("a"), py::arg("b"));
}
