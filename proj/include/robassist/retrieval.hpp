#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "robassist/document.hpp"
#include "robassist/util.hpp"

namespace rob {

// Lowercase, split on non-alphanumeric code points; no stemming, no stop
// words. Non-ASCII letters and digits count as alphanumeric.
std::vector<std::string> tokenize(std::string_view text);

using Vector = std::vector<float>;

// Produces unit-L2 vectors of a fixed dimension; deterministic per
// (model_id, text). Implementations must be safe for concurrent calls.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string model_id() const = 0;
    virtual std::size_t dimension() const = 0;
    virtual Vector embed(std::string_view text) const = 0;
    // Default loops over embed(); HTTP embedders override to batch.
    virtual std::vector<Vector> embed_batch(std::span<const std::string> texts) const;
};

// Offline reference embedder: hashed bag of words projected to `dim`
// buckets with a hash-derived sign, then L2-normalized.
class HashEmbedder final : public Embedder {
public:
    explicit HashEmbedder(std::size_t dim = 64) : dim_(dim) {}
    std::string model_id() const override { return "hash-bow-" + std::to_string(dim_); }
    std::size_t dimension() const override { return dim_; }
    Vector embed(std::string_view text) const override;

private:
    std::size_t dim_;
};

struct EmbeddingServiceConfig {
    std::string endpoint;  // e.g. http://localhost:8080/embed
    std::string model;     // e.g. all-MiniLM-L6-v2
    std::string api_key;
    int timeout_seconds = 60;
    std::size_t batch_size = 64;
};

// Client for an embedding service: POST {model, texts} -> {vectors}.
class HttpEmbedder final : public Embedder {
public:
    explicit HttpEmbedder(EmbeddingServiceConfig config);
    std::string model_id() const override { return config_.model; }
    std::size_t dimension() const override;
    Vector embed(std::string_view text) const override;
    std::vector<Vector> embed_batch(std::span<const std::string> texts) const override;

private:
    EmbeddingServiceConfig config_;
    mutable std::size_t dim_ = 0;
};

void normalize(Vector& v);
double dot(std::span<const float> a, std::span<const float> b);

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct RetrievalResult {
    std::size_t paragraph_index = 0;
    double score = 0.0;
    bool operator==(const RetrievalResult&) const = default;
};

// Within-document index: BM25 statistics over this document's paragraphs
// and one unit vector per paragraph. Immutable after build.
class ParagraphIndex {
public:
    ParagraphIndex() = default;

    const std::string& doc_id() const noexcept { return doc_id_; }
    const std::string& model_id() const noexcept { return model_id_; }
    const Bm25Params& bm25_params() const noexcept { return params_; }
    std::size_t size() const noexcept { return lengths_.size(); }
    std::size_t dimension() const noexcept { return vectors_.empty() ? 0 : vectors_.front().size(); }
    const std::vector<Vector>& vectors() const noexcept { return vectors_; }

    std::vector<RetrievalResult> query_vector(std::string_view query, std::size_t k, const Embedder& embedder) const;
    // Ranks by cosine against a precomputed unit query vector.
    std::vector<RetrievalResult> query_with_vector(std::span<const float> query, std::size_t k) const;
    std::vector<RetrievalResult> query_bm25(std::string_view query, std::size_t k) const;
    double bm25_score(std::size_t paragraph, const std::vector<std::string>& query_tokens) const;

    ordered_json to_json() const;
    std::string serialize() const;

    friend ParagraphIndex build_index(const TrialDocument&, const Embedder&, Bm25Params);
    friend ParagraphIndex build_index_from_vectors(const TrialDocument&, std::vector<Vector>, std::string, Bm25Params);

private:
    void build_bm25(const TrialDocument& doc);

    std::string doc_id_;
    std::string model_id_;
    Bm25Params params_;
    std::vector<std::map<std::string, std::size_t>> term_freqs_;
    std::vector<std::size_t> lengths_;
    std::map<std::string, std::size_t> doc_freq_;
    double avg_length_ = 0.0;
    std::vector<Vector> vectors_;
};

// Index-build error names the failing paragraph.
ParagraphIndex build_index(const TrialDocument& doc, const Embedder& embedder, Bm25Params params = {});

// Uses externally computed vectors (e.g. the sidecar file); they are
// re-normalized.
ParagraphIndex build_index_from_vectors(const TrialDocument& doc, std::vector<Vector> vectors, std::string model_id,
                                        Bm25Params params = {});

// Sorted by score descending, ties by ascending paragraph index; keeps k.
void rank_results(std::vector<RetrievalResult>& results, std::size_t k);

// Fraction of questions with a gold paragraph whose gold appears in the
// top k of their ranking. Entries without gold are excluded.
struct RankedQuestion {
    std::vector<std::size_t> ranking;  // paragraph indices, best first
    std::optional<std::size_t> gold;
};
double recall_at_k(std::span<const RankedQuestion> questions, std::size_t k);

// Precomputed vectors keyed by (doc_id, paragraph_index), plus query vectors
// keyed by qid. JSON: {model_id, dimension, paragraphs: [{doc_id,
// paragraph_index, vector}], queries: [{qid, vector}]}.
class VectorSidecar {
public:
    static VectorSidecar load(const std::filesystem::path& path);
    static VectorSidecar from_json(const json& j);

    const std::string& model_id() const noexcept { return model_id_; }
    std::size_t dimension() const noexcept { return dim_; }
    bool has_document(const std::string& doc_id) const { return paragraphs_.contains(doc_id); }
    // Vectors for every paragraph of doc, in paragraph order; throws if any
    // paragraph is missing.
    std::vector<Vector> document_vectors(const TrialDocument& doc) const;
    const Vector* query(const std::string& qid) const;

    void set_paragraph(const std::string& doc_id, std::size_t index, Vector v);
    void set_query(const std::string& qid, Vector v);
    void set_model(std::string model_id, std::size_t dim);
    ordered_json to_json() const;

private:
    std::string model_id_;
    std::size_t dim_ = 0;
    std::map<std::string, std::map<std::size_t, Vector>> paragraphs_;
    std::map<std::string, Vector> queries_;
};

}  // namespace rob
