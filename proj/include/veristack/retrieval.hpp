#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "veristack/backend.hpp"
#include "veristack/config.hpp"
#include "veristack/core.hpp"

namespace veristack {

struct TextChunk {
    std::string doc_url;
    int index = 0;
    std::size_t start_char = 0;  // scalar offsets into the source document
    std::size_t end_char = 0;
    std::string text;

    bool operator==(const TextChunk&) const = default;
};

/// Fixed-width segmentation by Unicode scalar count; the last chunk may be shorter.
std::vector<TextChunk> chunk_document(std::string_view text, int chunk_chars, const std::string& doc_url = {});

enum class EvidenceSource { TT, IT };

struct TextEvidenceItem {
    TextChunk center;
    std::optional<TextChunk> previous;
    std::optional<TextChunk> next;
    std::string combined_text;
    EvidenceSource source_store = EvidenceSource::TT;
    double embed_score = 0.0;
    double rerank_score = 0.0;

    std::size_t chunk_count() const { return 1 + (previous ? 1 : 0) + (next ? 1 : 0); }
};

struct ImageQueryKind {
    int claim_image = 0;  // 0 for the claim-text query, otherwise the 1-based claim image number

    bool is_text() const { return claim_image == 0; }
    bool operator==(const ImageQueryKind&) const = default;
};

struct ImageEvidenceItem {
    ImageRef image;
    std::string source_url;
    double score = 0.0;
    ImageQueryKind query_kind;
};

/// Unit-normalized vectors (held in double precision) keyed by (doc_url, chunk index). Immutable once built
/// and safe for concurrent queries.
class DenseIndex {
  public:
    explicit DenseIndex(int dim);

    /// Normalizes vec. Throws DimensionMismatch.
    void add(std::string doc_url, int chunk_index, const std::vector<float>& vec);

    int dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return keys_.size(); }
    const std::pair<std::string, int>& key(std::size_t i) const { return keys_[i]; }
    const std::vector<double>& vector(std::size_t i) const { return vectors_[i]; }

  private:
    int dim_;
    std::vector<std::pair<std::string, int>> keys_;
    std::vector<std::vector<double>> vectors_;
};

struct DenseHit {
    std::size_t slot;  // position in the index
    double score;
};

/// Exhaustive cosine ranking: descending score, ties by ascending (doc_url, chunk index), then slot.
/// Throws DimensionMismatch.
std::vector<DenseHit> dense_topk(const DenseIndex& index, const std::vector<float>& query, int k);

/// Unit-length copy in double precision; the zero vector is returned unchanged.
std::vector<double> l2_normalize(const std::vector<float>& v);

struct RerankHit {
    std::size_t candidate;  // position in the candidate list
    double score;
};

/// One backend call over all candidate texts; top k by score, ties by input order.
std::vector<RerankHit> rerank(Backend& backend, const std::string& model, const std::string& query,
                              const std::vector<TextChunk>& candidates, int k);

/// Attaches up to `span` chunks on each side. Throws ChunkNotInDocument.
TextEvidenceItem augment_with_neighbors(const TextChunk& item, const std::vector<TextChunk>& document_chunks,
                                        int span = 1);

/// Persistent chunk embeddings: <dir>/<model>/<hash>.bin holds a u32 dimension,
/// a u32 row count, then row-major little-endian f32. <dir>/<model>/manifest.json
/// maps hashes to the urls that produced them. Safe for concurrent use.
class EmbeddingCache {
  public:
    explicit EmbeddingCache(std::filesystem::path dir);

    static std::string content_key(std::string_view text, int chunk_chars);

    std::optional<std::vector<std::vector<float>>> get(const std::string& model, const std::string& key) const;
    void put(const std::string& model, const std::string& key, const std::vector<std::vector<float>>& rows,
             const std::string& doc_url);

    /// Rewrites manifest files from the in-memory record of put() calls.
    void flush_manifest() const;

    int hits() const;
    int misses() const;

  private:
    std::filesystem::path dir_;
    mutable std::mutex mu_;
    std::map<std::string, std::map<std::string, std::vector<std::string>>> manifest_;  // model -> hash -> urls
    mutable int hits_ = 0;
    mutable int misses_ = 0;
};

/// Chunked, embedded view of one textual store.
struct StoreIndex {
    std::vector<std::vector<TextChunk>> documents;  // one chunk list per distinct url, store order
    std::vector<std::pair<std::size_t, std::size_t>> slot_chunk;  // index slot -> (document, chunk)
    DenseIndex index{1};
};

/// Entries without text are skipped; repeated urls keep the first occurrence.
StoreIndex build_store_index(const KnowledgeStore& store, const PipelineConfig& cfg, Backend& backend,
                             EmbeddingCache* cache = nullptr);

/// Dense top-k, rerank, then neighbor augmentation; ordered by rerank score.
std::vector<TextEvidenceItem> retrieve_text_evidence(const Claim& claim, const KnowledgeStore& store,
                                                     const PipelineConfig& cfg, Backend& backend,
                                                     EmbeddingCache* cache = nullptr);
std::vector<TextEvidenceItem> retrieve_text_evidence(const Claim& claim, const StoreIndex& index, EvidenceSource source,
                                                     const PipelineConfig& cfg, Backend& backend);

/// Top visual_text_k images for the claim text plus top visual_per_image_k per
/// claim image; duplicates keep the higher score. Ordered by score, ties by image id.
/// Store images that cannot be read are skipped.
std::vector<ImageEvidenceItem> retrieve_visual_evidence(const Claim& claim, const KnowledgeStore& store,
                                                        const PipelineConfig& cfg, Backend& backend);

/// Base64 of the file at location, or nullopt when unreadable.
std::optional<std::string> load_image_b64(const std::string& location);

struct EvidenceBundle {
    std::optional<std::vector<TextEvidenceItem>> text_text;   // from the text-query text store
    std::optional<std::vector<TextEvidenceItem>> image_text;  // from the reverse-image-search text store
    std::optional<std::vector<ImageEvidenceItem>> images;     // from the text-query image store
};

EvidenceBundle retrieve_evidence(const Claim& claim, const ClaimStores& stores, const PipelineConfig& cfg,
                                 Backend& backend, EmbeddingCache* cache = nullptr);

class Bm25Index {
  public:
    Bm25Index(std::vector<std::string> documents, double k1 = 1.5, double b = 0.75);

    double score(std::size_t doc, const std::vector<std::string>& query_terms) const;
    std::size_t size() const noexcept { return docs_.size(); }
    std::size_t document_frequency(const std::string& term) const;
    double avg_length() const noexcept { return avgdl_; }

  private:
    std::vector<std::map<std::string, int>> docs_;
    std::vector<std::size_t> lengths_;
    std::map<std::string, std::size_t> df_;
    double avgdl_ = 0.0;
    double k1_;
    double b_;
};

/// Descending score, ties by ascending doc id; zero-score documents excluded.
std::vector<std::pair<std::size_t, double>> bm25_topk(const Bm25Index& index, std::string_view query, int k);

struct FewShotExample {
    std::string claim;
    std::optional<Label> label;
    std::vector<QAPair> qa;
    std::optional<std::string> justification;
};

/// JSON-lines: claim_text, label?, questions: [{question, answer}], justification?.
std::vector<FewShotExample> read_fewshot_jsonl(const std::filesystem::path& path);

/// BM25 over exemplar claim texts.
class FewShotSelector {
  public:
    FewShotSelector(std::vector<FewShotExample> examples, double k1 = 1.5, double b = 0.75);
    std::vector<FewShotExample> select(std::string_view claim_text, int k) const;
    std::size_t size() const noexcept { return examples_.size(); }

  private:
    static std::vector<std::string> claim_texts(const std::vector<FewShotExample>& examples);

    std::vector<FewShotExample> examples_;
    Bm25Index index_;
};

}  // namespace veristack
