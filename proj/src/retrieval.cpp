#include "robassist/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "robassist/error.hpp"
#include "robassist/http_util.hpp"

namespace rob {
namespace {

// Decodes one UTF-8 code point; invalid bytes come back as U+FFFD and
// advance by one.
char32_t next_code_point(std::string_view s, std::size_t& i) {
    auto b0 = static_cast<unsigned char>(s[i]);
    auto cont = [&](std::size_t k) -> int {
        if (i + k >= s.size()) return -1;
        auto c = static_cast<unsigned char>(s[i + k]);
        return (c & 0xC0) == 0x80 ? (c & 0x3F) : -1;
    };
    if (b0 < 0x80) {
        ++i;
        return b0;
    }
    int len = (b0 >> 5) == 0x6 ? 2 : (b0 >> 4) == 0xE ? 3 : (b0 >> 3) == 0x1E ? 4 : 0;
    char32_t cp = len == 2 ? (b0 & 0x1F) : len == 3 ? (b0 & 0x0F) : (b0 & 0x07);
    for (int k = 1; k < len; ++k) {
        int c = cont(k);
        if (c < 0) {
            len = 0;
            break;
        }
        cp = (cp << 6) | static_cast<char32_t>(c);
    }
    if (len == 0) {
        ++i;
        return 0xFFFD;
    }
    i += static_cast<std::size_t>(len);
    return cp;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_word_code_point(char32_t cp) {
    if (cp < 0x80) return std::isalnum(static_cast<int>(cp)) != 0;
    if (cp == 0xFFFD) return false;
    if (cp <= 0xBF) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;  // Latin-1 punctuation/symbols
    if (cp == 0xD7 || cp == 0xF7) return false;                      // × ÷
    if (cp >= 0x2000 && cp <= 0x2BFF) return false;                  // punctuation, arrows, math, shapes
    if (cp >= 0x3000 && cp <= 0x303F) return false;                  // CJK punctuation
    if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
    if (cp >= 0xFF00 && cp <= 0xFF0F) return false;
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    return true;
}

char32_t to_lower(char32_t cp) {
    if (cp < 0x80) return static_cast<char32_t>(std::tolower(static_cast<int>(cp)));
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp >= 0x100 && cp <= 0x137 && cp % 2 == 0) return cp + 1;
    if (cp >= 0x139 && cp <= 0x148 && cp % 2 == 1) return cp + 1;
    if (cp >= 0x14A && cp <= 0x177 && cp % 2 == 0) return cp + 1;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string cur;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = next_code_point(text, i);
        if (is_word_code_point(cp)) {
            append_utf8(cur, to_lower(cp));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::vector<Vector> Embedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(embed(t));
    return out;
}

void normalize(Vector& v) {
    double n = 0.0;
    for (float x : v) n += static_cast<double>(x) * x;
    n = std::sqrt(n);
    if (n == 0.0) return;
    for (float& x : v) x = static_cast<float>(x / n);
}

double dot(std::span<const float> a, std::span<const float> b) {
    double s = 0.0;
    std::size_t n = std::min(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

Vector HashEmbedder::embed(std::string_view text) const {
    std::vector<double> acc(dim_, 0.0);
    for (const auto& tok : tokenize(text)) {
        std::uint64_t h = fnv1a64(tok);
        std::size_t bucket = static_cast<std::size_t>(h % dim_);
        acc[bucket] += (h >> 63) ? -1.0 : 1.0;
    }
    double n = 0.0;
    for (double x : acc) n += x * x;
    Vector v(dim_, 0.0f);
    if (n == 0.0) {
        // no tokens (or perfect cancellation): fixed unit vector
        v[0] = 1.0f;
        return v;
    }
    n = std::sqrt(n);
    for (std::size_t i = 0; i < dim_; ++i) v[i] = static_cast<float>(acc[i] / n);
    return v;
}

HttpEmbedder::HttpEmbedder(EmbeddingServiceConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) fail(ErrorCode::Configuration, "embedding endpoint is not configured");
    if (config_.model.empty()) fail(ErrorCode::Configuration, "embedding model is not configured");
}

std::size_t HttpEmbedder::dimension() const {
    if (dim_ == 0) dim_ = embed("dimension probe").size();
    return dim_;
}

Vector HttpEmbedder::embed(std::string_view text) const {
    std::vector<std::string> one{std::string(text)};
    return embed_batch(one).front();
}

std::vector<Vector> HttpEmbedder::embed_batch(std::span<const std::string> texts) const {
    std::vector<Vector> out;
    out.reserve(texts.size());
    for (std::size_t start = 0; start < texts.size(); start += config_.batch_size) {
        std::size_t end = std::min(texts.size(), start + config_.batch_size);
        json body = {{"model", config_.model}, {"texts", json::array()}};
        for (std::size_t i = start; i < end; ++i) body["texts"].push_back(texts[i]);
        auto resp = http_post_json(config_.endpoint, body.dump(), config_.api_key, config_.timeout_seconds);
        auto j = parse_json(resp, "embedding service response");
        if (!j.contains("vectors") || !j["vectors"].is_array() || j["vectors"].size() != end - start)
            fail(ErrorCode::Upstream, "embedding service returned a malformed vectors list");
        for (const auto& row : j["vectors"]) {
            Vector v = row.get<Vector>();
            if (v.empty()) fail(ErrorCode::Upstream, "embedding service returned an empty vector");
            if (dim_ == 0) dim_ = v.size();
            if (v.size() != dim_) fail(ErrorCode::Upstream, "embedding service returned inconsistent dimensions");
            normalize(v);
            out.push_back(std::move(v));
        }
    }
    return out;
}

void ParagraphIndex::build_bm25(const TrialDocument& doc) {
    term_freqs_.clear();
    lengths_.clear();
    doc_freq_.clear();
    double total = 0.0;
    for (const auto& p : doc.paragraphs) {
        std::map<std::string, std::size_t> tf;
        auto toks = tokenize(p.text);
        for (auto& t : toks) ++tf[t];
        for (const auto& [term, _] : tf) ++doc_freq_[term];
        lengths_.push_back(toks.size());
        total += static_cast<double>(toks.size());
        term_freqs_.push_back(std::move(tf));
    }
    avg_length_ = lengths_.empty() ? 0.0 : total / static_cast<double>(lengths_.size());
}

ParagraphIndex build_index(const TrialDocument& doc, const Embedder& embedder, Bm25Params params) {
    const std::size_t dim = embedder.dimension();
    std::vector<std::string> texts;
    for (const auto& p : doc.paragraphs) texts.push_back(p.text);
    std::vector<Vector> batch;
    try {
        batch = embedder.embed_batch(texts);
    } catch (const std::exception&) {
        // retry one at a time to identify the failing paragraph
        batch.clear();
        for (const auto& p : doc.paragraphs) {
            try {
                batch.push_back(embedder.embed(p.text));
            } catch (const std::exception& inner) {
                fail(ErrorCode::IndexBuild, "embedding paragraph " + std::to_string(p.index) + " of " + doc.doc_id +
                                                " failed: " + inner.what());
            }
        }
    }
    for (std::size_t i = 0; i < batch.size(); ++i)
        if (batch[i].size() != dim)
            fail(ErrorCode::IndexBuild, "embedding paragraph " + std::to_string(i) + " of " + doc.doc_id +
                                            " has dimension " + std::to_string(batch[i].size()));
    return build_index_from_vectors(doc, std::move(batch), embedder.model_id(), params);
}

ParagraphIndex build_index_from_vectors(const TrialDocument& doc, std::vector<Vector> vectors, std::string model_id,
                                        Bm25Params params) {
    if (vectors.size() != doc.paragraphs.size())
        fail(ErrorCode::IndexBuild, "got " + std::to_string(vectors.size()) + " vectors for " +
                                        std::to_string(doc.paragraphs.size()) + " paragraphs of " + doc.doc_id);
    ParagraphIndex idx;
    idx.doc_id_ = doc.doc_id;
    idx.model_id_ = std::move(model_id);
    idx.params_ = params;
    for (std::size_t i = 0; i < vectors.size(); ++i) {
        if (vectors[i].empty() || (i > 0 && vectors[i].size() != vectors[0].size()))
            fail(ErrorCode::IndexBuild, "paragraph " + std::to_string(i) + " of " + doc.doc_id + " has a bad vector");
        normalize(vectors[i]);
    }
    idx.vectors_ = std::move(vectors);
    idx.build_bm25(doc);
    return idx;
}

void rank_results(std::vector<RetrievalResult>& results, std::size_t k) {
    std::sort(results.begin(), results.end(), [](const RetrievalResult& a, const RetrievalResult& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.paragraph_index < b.paragraph_index;
    });
    if (results.size() > k) results.resize(k);
}

std::vector<RetrievalResult> ParagraphIndex::query_vector(std::string_view query, std::size_t k,
                                                          const Embedder& embedder) const {
    if (embedder.model_id() != model_id_)
        fail(ErrorCode::Configuration,
             "index built with embedder '" + model_id_ + "' queried with '" + embedder.model_id() + "'");
    Vector q = embedder.embed(query);
    return query_with_vector(q, k);
}

std::vector<RetrievalResult> ParagraphIndex::query_with_vector(std::span<const float> query, std::size_t k) const {
    if (k == 0) fail(ErrorCode::Argument, "k must be positive");
    if (!vectors_.empty() && query.size() != vectors_.front().size())
        fail(ErrorCode::Configuration, "query vector dimension does not match the index");
    Vector q(query.begin(), query.end());
    normalize(q);
    std::vector<RetrievalResult> out;
    out.reserve(vectors_.size());
    for (std::size_t i = 0; i < vectors_.size(); ++i)
        out.push_back({i, std::clamp(dot(q, vectors_[i]), -1.0, 1.0)});
    rank_results(out, k);
    return out;
}

double ParagraphIndex::bm25_score(std::size_t paragraph, const std::vector<std::string>& query_tokens) const {
    const double n = static_cast<double>(lengths_.size());
    const auto& tf = term_freqs_.at(paragraph);
    const double len = static_cast<double>(lengths_[paragraph]);
    double score = 0.0;
    for (const auto& term : query_tokens) {
        auto it = tf.find(term);
        if (it == tf.end()) continue;
        double df = static_cast<double>(doc_freq_.at(term));
        double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        double f = static_cast<double>(it->second);
        double norm = avg_length_ > 0.0 ? len / avg_length_ : 0.0;
        score += idf * f * (params_.k1 + 1.0) / (f + params_.k1 * (1.0 - params_.b + params_.b * norm));
    }
    return score;
}

std::vector<RetrievalResult> ParagraphIndex::query_bm25(std::string_view query, std::size_t k) const {
    if (k == 0) fail(ErrorCode::Argument, "k must be positive");
    auto toks = tokenize(query);
    std::vector<RetrievalResult> out;
    out.reserve(lengths_.size());
    for (std::size_t i = 0; i < lengths_.size(); ++i) out.push_back({i, bm25_score(i, toks)});
    rank_results(out, k);
    return out;
}

ordered_json ParagraphIndex::to_json() const {
    ordered_json j;
    j["doc_id"] = doc_id_;
    j["model_id"] = model_id_;
    j["bm25"] = {{"k1", params_.k1}, {"b", params_.b}, {"avg_length", avg_length_}};
    ordered_json df = ordered_json::object();
    for (const auto& [t, n] : doc_freq_) df[t] = n;
    j["doc_freq"] = std::move(df);
    ordered_json paras = ordered_json::array();
    for (std::size_t i = 0; i < lengths_.size(); ++i) {
        ordered_json tf = ordered_json::object();
        for (const auto& [t, n] : term_freqs_[i]) tf[t] = n;
        paras.push_back({{"index", i}, {"length", lengths_[i]}, {"terms", std::move(tf)}, {"vector", vectors_[i]}});
    }
    j["paragraphs"] = std::move(paras);
    return j;
}

std::string ParagraphIndex::serialize() const { return to_json().dump(); }

double recall_at_k(std::span<const RankedQuestion> questions, std::size_t k) {
    if (k < 1) fail(ErrorCode::Argument, "recall@k needs k >= 1");
    std::size_t with_gold = 0, hits = 0;
    for (const auto& q : questions) {
        if (!q.gold) continue;
        ++with_gold;
        auto end = q.ranking.begin() + static_cast<std::ptrdiff_t>(std::min(k, q.ranking.size()));
        if (std::find(q.ranking.begin(), end, *q.gold) != end) ++hits;
    }
    return with_gold == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(with_gold);
}

VectorSidecar VectorSidecar::load(const std::filesystem::path& path) { return from_json(read_json_file(path)); }

VectorSidecar VectorSidecar::from_json(const json& j) {
    if (!j.is_object()) fail(ErrorCode::Schema, "vector sidecar must be an object");
    VectorSidecar s;
    s.model_id_ = j.value("model_id", std::string{});
    s.dim_ = j.value("dimension", std::size_t{0});
    auto check = [&](Vector& v, const std::string& where) {
        if (s.dim_ == 0) s.dim_ = v.size();
        if (v.size() != s.dim_ || v.empty())
            fail(ErrorCode::Schema, "vector sidecar: " + where + " has dimension " + std::to_string(v.size()));
        normalize(v);
    };
    for (const auto& e : j.value("paragraphs", json::array())) {
        std::string doc = e.at("doc_id").get<std::string>();
        auto idx = e.at("paragraph_index").get<std::size_t>();
        Vector v = e.at("vector").get<Vector>();
        check(v, doc + "#" + std::to_string(idx));
        s.paragraphs_[doc][idx] = std::move(v);
    }
    for (const auto& e : j.value("queries", json::array())) {
        std::string qid = e.at("qid").get<std::string>();
        Vector v = e.at("vector").get<Vector>();
        check(v, "query " + qid);
        s.queries_[qid] = std::move(v);
    }
    return s;
}

std::vector<Vector> VectorSidecar::document_vectors(const TrialDocument& doc) const {
    auto it = paragraphs_.find(doc.doc_id);
    if (it == paragraphs_.end()) fail(ErrorCode::NotFound, "no sidecar vectors for document " + doc.doc_id);
    std::vector<Vector> out;
    for (const auto& p : doc.paragraphs) {
        auto v = it->second.find(p.index);
        if (v == it->second.end())
            fail(ErrorCode::NotFound, "no sidecar vector for " + doc.doc_id + "#" + std::to_string(p.index));
        out.push_back(v->second);
    }
    return out;
}

const Vector* VectorSidecar::query(const std::string& qid) const {
    auto it = queries_.find(qid);
    return it == queries_.end() ? nullptr : &it->second;
}

void VectorSidecar::set_paragraph(const std::string& doc_id, std::size_t index, Vector v) {
    paragraphs_[doc_id][index] = std::move(v);
}
void VectorSidecar::set_query(const std::string& qid, Vector v) { queries_[qid] = std::move(v); }
void VectorSidecar::set_model(std::string model_id, std::size_t dim) {
    model_id_ = std::move(model_id);
    dim_ = dim;
}

ordered_json VectorSidecar::to_json() const {
    ordered_json j;
    j["model_id"] = model_id_;
    j["dimension"] = dim_;
    ordered_json paras = ordered_json::array();
    for (const auto& [doc, m] : paragraphs_)
        for (const auto& [i, v] : m) paras.push_back({{"doc_id", doc}, {"paragraph_index", i}, {"vector", v}});
    j["paragraphs"] = std::move(paras);
    ordered_json qs = ordered_json::array();
    for (const auto& [q, v] : queries_) qs.push_back({{"qid", q}, {"vector", v}});
    j["queries"] = std::move(qs);
    return j;
}

}  // namespace rob
