#include "robassist/dataset.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "robassist/error.hpp"
#include "robassist/qa.hpp"

namespace fs = std::filesystem;

namespace rob {

const TrialDocument* Dataset::document(const std::string& doc_id) const {
    auto it = documents.find(doc_id);
    return it == documents.end() ? nullptr : &it->second;
}

std::vector<AssessmentSession> Dataset::with_provenance(Provenance p) const {
    std::vector<AssessmentSession> out;
    for (const auto& s : sessions)
        if (s.provenance == p) out.push_back(s);
    return out;
}

std::string dataset_instructions(const fs::path& root) {
    return "dataset not found at '" + root.string() +
           "'. Download the released assessments and parsed reports, then lay them out as\n"
           "  <dir>/documents/*.json    (parsed trial reports)\n"
           "  <dir>/assessments/*.json  (session exports; manual and assisted)\n"
           "  <dir>/vectors.json        (optional reference embeddings)\n"
           "and pass --data <dir> or set " +
           std::string(kDatasetEnv) + "=<dir>.";
}

namespace {

std::vector<fs::path> sorted_files(const fs::path& dir, std::initializer_list<const char*> exts) {
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = e.path().extension().string();
        for (const char* x : exts)
            if (ext == x) out.push_back(e.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

template <typename F>
auto with_file(const fs::path& p, F&& f) {
    try {
        return f();
    } catch (const Error& e) {
        throw Error(e.code(), p.filename().string() + ": " + e.what());
    }
}

}  // namespace

Dataset load_dataset(const fs::path& root) {
    if (root.empty() || !fs::is_directory(root) || !fs::is_directory(root / "documents") ||
        !fs::is_directory(root / "assessments"))
        fail(ErrorCode::NotFound, dataset_instructions(root));
    Dataset ds;
    ds.root = root;
    for (const auto& p : sorted_files(root / "documents", {".json"})) {
        auto doc = with_file(p, [&] { return ingest_document(read_file(p)); });
        auto id = doc.doc_id;
        if (!ds.documents.emplace(id, std::move(doc)).second)
            fail(ErrorCode::Import, p.filename().string() + ": duplicate document id " + id);
    }
    for (const auto& p : sorted_files(root / "assessments", {".json", ".jsonl"})) {
        with_file(p, [&] {
            auto text = read_file(p);
            if (p.extension() == ".jsonl") {
                std::istringstream in(text);
                std::string line;
                while (std::getline(in, line))
                    if (!trim(line).empty()) ds.sessions.push_back(import_session_text(line));
                return 0;
            }
            auto j = parse_json(text, p.filename().string());
            if (j.is_array()) {
                for (const auto& s : j) ds.sessions.push_back(import_session(s));
            } else {
                ds.sessions.push_back(import_session(j));
            }
            return 0;
        });
    }
    std::sort(ds.sessions.begin(), ds.sessions.end(),
              [](const auto& a, const auto& b) { return a.session_id < b.session_id; });
    for (std::size_t i = 1; i < ds.sessions.size(); ++i)
        if (ds.sessions[i].session_id == ds.sessions[i - 1].session_id)
            fail(ErrorCode::Import, "duplicate session id " + ds.sessions[i].session_id);
    if (fs::exists(root / "vectors.json"))
        ds.sidecar = with_file(root / "vectors.json", [&] { return VectorSidecar::load(root / "vectors.json"); });
    return ds;
}

std::vector<GoldItem> gold_items(const Dataset& ds, const Questionnaire& qn) {
    std::vector<GoldItem> out;
    for (const auto& s : ds.sessions) {
        if (s.provenance != Provenance::Manual) continue;
        for (const auto& q : qn.questions()) {
            const auto* r = s.record(q.qid);
            if (!r || !r->final_answer) continue;
            auto c = to_class3(*r->final_answer);
            if (!c) continue;
            out.push_back({s.session_id, s.doc_id, q.qid, *r->final_answer, *c, r->gold_evidence});
        }
    }
    return out;
}

ordered_json GoldCounts::to_json() const {
    ordered_json t = ordered_json::object(), o = ordered_json::object();
    std::size_t st = 0, so = 0;
    for (int d = 0; d < kDomainCount; ++d) {
        t["D" + std::to_string(d + 1)] = total[d];
        o["D" + std::to_string(d + 1)] = oracle[d];
        st += total[d];
        so += oracle[d];
    }
    t["all"] = st;
    o["all"] = so;
    return {{"n_total", std::move(t)}, {"n_oracle", std::move(o)}};
}

GoldCounts gold_counts(std::span<const GoldItem> items) {
    GoldCounts c;
    for (const auto& it : items) {
        auto p = parse_qid(it.qid);
        if (!p) continue;
        ++c.total[p->first - 1];
        if (it.evidence) ++c.oracle[p->first - 1];
    }
    return c;
}

namespace {

ordered_json level_counts(const std::array<std::size_t, 3>& c) {
    ordered_json j = ordered_json::object();
    for (int i = 0; i < 3; ++i) j[std::string(risk_key(static_cast<RiskLevel>(i)))] = c[i];
    return j;
}

}  // namespace

ordered_json JudgmentDistribution::to_json() const {
    ordered_json d = ordered_json::object();
    for (int i = 0; i < kDomainCount; ++i) d["D" + std::to_string(i + 1)] = level_counts(domains[i]);
    return {{"sessions", sessions},
            {"without_judgments", without_judgments},
            {"overall", level_counts(overall)},
            {"domains", std::move(d)}};
}

JudgmentDistribution judgment_distribution(std::span<const AssessmentSession> sessions) {
    JudgmentDistribution out;
    out.sessions = sessions.size();
    for (const auto& s : sessions) {
        if (!s.overall && !s.domain_judgments) {
            ++out.without_judgments;
            continue;
        }
        if (s.overall) ++out.overall[static_cast<std::size_t>(*s.overall)];
        if (s.domain_judgments)
            for (int d = 0; d < kDomainCount; ++d) ++out.domains[d][static_cast<std::size_t>((*s.domain_judgments)[d])];
    }
    return out;
}

ordered_json ConsistencyReport::to_json() const {
    ordered_json per = ordered_json::object();
    for (int d = 0; d < kDomainCount; ++d)
        per["D" + std::to_string(d + 1)] = {{"checked", checked[d]}, {"mismatched", mismatched[d]}};
    ordered_json list = ordered_json::array();
    for (const auto& m : mismatches)
        list.push_back({{"session_id", m.session_id},
                        {"doc_id", m.doc_id},
                        {"domain", m.domain},
                        {"stored", risk_key(m.stored)},
                        {"derived", m.derived ? ordered_json(risk_key(*m.derived)) : ordered_json(nullptr)},
                        {"error", m.error}});
    return {{"sessions", sessions}, {"domains", std::move(per)}, {"mismatches", std::move(list)}};
}

ConsistencyReport consistency_report(std::span<const AssessmentSession> sessions, const Questionnaire& qn,
                                     const RuleSet& rules) {
    ConsistencyReport out;
    out.sessions = sessions.size();
    for (const auto& s : sessions) {
        if (!s.domain_judgments) continue;
        auto answers = s.final_answers();
        for (int d = 1; d <= kDomainCount; ++d) {
            auto qs = qn.domain_questions(d);
            bool complete = std::all_of(qs.begin(), qs.end(), [&](auto* q) { return answers.contains(q->qid); });
            if (!complete) continue;
            ++out.checked[d - 1];
            auto stored = (*s.domain_judgments)[d - 1];
            ConsistencyMismatch m{s.session_id, s.doc_id, d, stored, std::nullopt, {}};
            try {
                m.derived = rules.table(d).judge(answers);
            } catch (const Error& e) {
                m.error = e.what();  // answers the rule table cannot route
            }
            if (m.derived != stored) {
                ++out.mismatched[d - 1];
                out.mismatches.push_back(std::move(m));
            }
        }
    }
    return out;
}

ordered_json DualAnnotation::to_json() const {
    ordered_json j{{"papers", doc_ids.size()}, {"items", a.size()}};
    j["kappa"] = a.empty() ? ordered_json(nullptr) : ordered_json(quantize(cohens_kappa_4class(a, b)));
    j["doc_ids"] = doc_ids;
    return j;
}

DualAnnotation dual_annotations(std::span<const AssessmentSession> sessions, const Questionnaire& qn) {
    std::map<std::string, std::map<std::string, const AssessmentSession*>> by_doc;
    for (const auto& s : sessions)
        if (s.provenance == Provenance::Manual) by_doc[s.doc_id].emplace(s.annotator_id, &s);
    DualAnnotation out;
    for (const auto& [doc, annots] : by_doc) {
        if (annots.size() < 2) continue;
        const auto& first = *annots.begin()->second;
        const auto& second = *std::next(annots.begin())->second;
        out.doc_ids.push_back(doc);
        for (const auto& q : qn.questions()) {
            const auto* ra = first.record(q.qid);
            const auto* rb = second.record(q.qid);
            if (!ra || !rb || !ra->final_answer || !rb->final_answer) continue;
            out.a.push_back(to_class4(*ra->final_answer));
            out.b.push_back(to_class4(*rb->final_answer));
        }
    }
    return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::clamp<std::size_t>(jobs, 1, std::max<std::size_t>(n, 1));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::atomic<bool> stop{false};
    std::exception_ptr first;
    std::mutex mu;
    {
        std::vector<std::jthread> workers;
        for (std::size_t w = 0; w < jobs; ++w)
            workers.emplace_back([&] {
                for (std::size_t i; !stop && (i = next++) < n;) {
                    try {
                        fn(i);
                    } catch (...) {
                        std::lock_guard lock(mu);
                        if (!first) first = std::current_exception();
                        stop = true;
                    }
                }
            });
    }
    if (first) std::rethrow_exception(first);
}

ordered_json RetrievalEval::to_json() const {
    ordered_json r = ordered_json::object();
    for (std::size_t i = 0; i < ks.size(); ++i) r["recall@" + std::to_string(ks[i])] = quantize(recall[i]);
    return {{"retriever", retriever},
            {"recall", std::move(r)},
            {"questions", questions},
            {"documents", documents},
            {"missing_documents", missing_documents}};
}

RetrievalEval eval_retrieval(const Dataset& ds, const Questionnaire& qn, const std::string& kind,
                             std::span<const std::size_t> ks, const Embedder* embedder, Bm25Params params,
                             std::size_t jobs) {
    if (ks.empty()) fail(ErrorCode::Argument, "eval retrieval needs at least one k");
    if (kind == "dense" && !embedder) fail(ErrorCode::Configuration, "dense retrieval needs an embedder");
    if (kind == "sidecar" && !ds.sidecar)
        fail(ErrorCode::Configuration, "sidecar retrieval needs " + (ds.root / "vectors.json").string());
    if (kind != "bm25" && kind != "dense" && kind != "sidecar")
        fail(ErrorCode::Argument, "unknown retriever '" + kind + "' (bm25, dense, sidecar)");

    // doc_id -> (qid, gold paragraph) pairs, evidence-bearing manual records only
    std::map<std::string, std::vector<std::pair<std::string, std::size_t>>> wanted;
    for (const auto& s : ds.sessions) {
        if (s.provenance != Provenance::Manual) continue;
        for (const auto& [qid, r] : s.records)
            if (r.gold_evidence) wanted[s.doc_id].emplace_back(qid, *r.gold_evidence);
    }
    std::vector<std::string> docs;
    RetrievalEval out;
    out.retriever = kind == "dense" ? "dense:" + embedder->model_id()
                    : kind == "sidecar" ? "sidecar:" + ds.sidecar->model_id()
                                        : "bm25";
    out.ks.assign(ks.begin(), ks.end());
    for (const auto& [doc, _] : wanted) {
        if (ds.document(doc))
            docs.push_back(doc);
        else
            ++out.missing_documents;
    }
    const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
    std::vector<std::vector<RankedQuestion>> ranked(docs.size());
    static const HashEmbedder unused_vectors(8);
    parallel_for(docs.size(), jobs, [&](std::size_t i) {
        const auto& doc = *ds.document(docs[i]);
        ParagraphIndex index;
        Retriever retriever;
        if (kind == "bm25") {
            index = build_index(doc, unused_vectors, params);
            retriever = bm25_retriever(index);
        } else if (kind == "dense") {
            index = build_index(doc, *embedder, params);
            retriever = dense_retriever(index, *embedder);
        } else {
            index = build_index_from_vectors(doc, ds.sidecar->document_vectors(doc), ds.sidecar->model_id(), params);
            retriever = sidecar_retriever(index, *ds.sidecar);
        }
        for (const auto& [qid, gold] : wanted.at(docs[i])) {
            RankedQuestion rq;
            rq.gold = gold;
            for (const auto& r : retriever(qn.question(qid), kmax)) rq.ranking.push_back(r.paragraph_index);
            ranked[i].push_back(std::move(rq));
        }
    });
    std::vector<RankedQuestion> all;
    for (auto& v : ranked)
        for (auto& q : v) all.push_back(std::move(q));
    out.questions = all.size();
    out.documents = docs.size();
    for (auto k : ks) out.recall.push_back(recall_at_k(all, k));
    return out;
}

}  // namespace rob
