#include "veristack/retrieval.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <cmath>
#include <future>
#include <numeric>
#include <set>

#include <json.hpp>

#include "veristack/errors.hpp"
#include "veristack/hashing.hpp"
#include "veristack/store_io.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

std::vector<TextChunk> chunk_document(std::string_view text, int chunk_chars, const std::string& doc_url)
{
    if (chunk_chars < 1) {
        throw Error(ErrorCode::InvalidArgument, "chunk_chars must be >= 1");
    }
    std::vector<TextChunk> chunks;
    auto offsets = scalar_offsets(text);
    auto width = static_cast<std::size_t>(chunk_chars);
    for (std::size_t start = 0; start < offsets.size(); start += width) {
        auto end = std::min(start + width, offsets.size());
        auto byte_begin = offsets[start];
        auto byte_end = end < offsets.size() ? offsets[end] : text.size();
        chunks.push_back(TextChunk{doc_url, static_cast<int>(chunks.size()), start, end,
                                   std::string(text.substr(byte_begin, byte_end - byte_begin))});
    }
    return chunks;
}

std::vector<double> l2_normalize(const std::vector<float>& v)
{
    double norm = 0.0;
    for (float x : v) {
        norm += static_cast<double>(x) * static_cast<double>(x);
    }
    std::vector<double> out(v.begin(), v.end());
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (auto& x : out) {
            x /= norm;
        }
    }
    return out;
}

DenseIndex::DenseIndex(int dim) : dim_(dim)
{
    if (dim < 1) {
        throw Error(ErrorCode::InvalidArgument, "index dimension must be >= 1");
    }
}

void DenseIndex::add(std::string doc_url, int chunk_index, const std::vector<float>& vec)
{
    if (vec.size() != static_cast<std::size_t>(dim_)) {
        throw Error(ErrorCode::DimensionMismatch,
                    "vector of dimension " + std::to_string(vec.size()) + " added to index of dimension " +
                        std::to_string(dim_));
    }
    keys_.emplace_back(std::move(doc_url), chunk_index);
    vectors_.push_back(l2_normalize(vec));
}

std::vector<DenseHit> dense_topk(const DenseIndex& index, const std::vector<float>& query, int k)
{
    if (query.size() != static_cast<std::size_t>(index.dim())) {
        throw Error(ErrorCode::DimensionMismatch,
                    "query of dimension " + std::to_string(query.size()) + " against index of dimension " +
                        std::to_string(index.dim()));
    }
    auto q = l2_normalize(query);
    std::vector<DenseHit> hits;
    hits.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        const auto& v = index.vector(i);
        double dot = 0.0;
        for (std::size_t d = 0; d < q.size(); ++d) {
            dot += v[d] * q[d];
        }
        hits.push_back({i, dot});
    }
    auto n = std::min(hits.size(), static_cast<std::size_t>(std::max(k, 0)));
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(n), hits.end(),
                      [&](const DenseHit& a, const DenseHit& b) {
                          if (a.score != b.score) {
                              return a.score > b.score;
                          }
                          if (index.key(a.slot) != index.key(b.slot)) {
                              return index.key(a.slot) < index.key(b.slot);
                          }
                          return a.slot < b.slot;
                      });
    hits.resize(n);
    return hits;
}

std::vector<RerankHit> rerank(Backend& backend, const std::string& model, const std::string& query,
                              const std::vector<TextChunk>& candidates, int k)
{
    if (candidates.empty()) {
        throw Error(ErrorCode::InvalidArgument, "rerank needs at least one candidate");
    }
    std::vector<std::string> texts;
    texts.reserve(candidates.size());
    for (const auto& c : candidates) {
        texts.push_back(c.text);
    }
    auto scores = backend.rerank(model, query, texts);
    if (scores.size() != candidates.size()) {
        throw Error(ErrorCode::BackendMalformed, "rerank returned " + std::to_string(scores.size()) + " scores for " +
                                                     std::to_string(candidates.size()) + " documents");
    }
    std::vector<RerankHit> hits;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        hits.push_back({i, scores[i]});
    }
    std::stable_sort(hits.begin(), hits.end(), [](const RerankHit& a, const RerankHit& b) { return a.score > b.score; });
    hits.resize(std::min(hits.size(), static_cast<std::size_t>(std::max(k, 0))));
    return hits;
}

TextEvidenceItem augment_with_neighbors(const TextChunk& item, const std::vector<TextChunk>& document_chunks, int span)
{
    auto it = std::find(document_chunks.begin(), document_chunks.end(), item);
    if (it == document_chunks.end()) {
        throw Error(ErrorCode::ChunkNotInDocument,
                    "chunk " + std::to_string(item.index) + " of " + item.doc_url + " is not in the document");
    }
    auto pos = static_cast<std::size_t>(it - document_chunks.begin());
    TextEvidenceItem ev;
    ev.center = item;
    if (span >= 1 && pos > 0) {
        ev.previous = document_chunks[pos - 1];
    }
    if (span >= 1 && pos + 1 < document_chunks.size()) {
        ev.next = document_chunks[pos + 1];
    }
    ev.combined_text = (ev.previous ? ev.previous->text : "") + item.text + (ev.next ? ev.next->text : "");
    return ev;
}

namespace {

std::string model_dir_name(const std::string& model)
{
    std::string out;
    for (char c : model) {
        out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.' || c == '_') ? c : '_';
    }
    return out.empty() ? "_" : out;
}

void append_u32(std::string& out, std::uint32_t v)
{
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFU));
    }
}

std::uint32_t read_u32(const std::string& in, std::size_t at)
{
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)])) << (8 * i);
    }
    return v;
}

}  // namespace

EmbeddingCache::EmbeddingCache(std::filesystem::path dir) : dir_(std::move(dir))
{
    std::error_code ec;
    if (!std::filesystem::is_directory(dir_, ec)) {
        return;
    }
    for (const auto& model_dir : std::filesystem::directory_iterator(dir_)) {
        auto manifest = model_dir.path() / "manifest.json";
        if (!std::filesystem::exists(manifest)) {
            continue;
        }
        auto j = nlohmann::json::parse(read_text_file(manifest), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            continue;
        }
        auto& slot = manifest_[model_dir.path().filename().string()];
        for (auto& [hash, urls] : j.items()) {
            slot[hash] = urls.get<std::vector<std::string>>();
        }
    }
}

std::string EmbeddingCache::content_key(std::string_view text, int chunk_chars)
{
    return sha256_hex(std::to_string(chunk_chars) + "\n" + std::string(text));
}

std::optional<std::vector<std::vector<float>>> EmbeddingCache::get(const std::string& model,
                                                                   const std::string& key) const
{
    auto path = dir_ / model_dir_name(model) / (key + ".bin");
    std::string raw;
    try {
        raw = read_text_file(path);
    } catch (const Error&) {
        std::lock_guard lock(mu_);
        ++misses_;
        return std::nullopt;
    }
    if (raw.size() < 8) {
        throw Error(ErrorCode::IoError, "truncated embedding file " + path.string());
    }
    auto dim = read_u32(raw, 0);
    auto rows = read_u32(raw, 4);
    if (raw.size() != 8 + static_cast<std::size_t>(dim) * rows * 4) {
        throw Error(ErrorCode::IoError, "embedding file size does not match its header: " + path.string());
    }
    std::vector<std::vector<float>> out(rows, std::vector<float>(dim));
    std::size_t at = 8;
    for (auto& row : out) {
        for (auto& x : row) {
            auto bits = read_u32(raw, at);
            std::memcpy(&x, &bits, 4);
            at += 4;
        }
    }
    std::lock_guard lock(mu_);
    ++hits_;
    return out;
}

void EmbeddingCache::put(const std::string& model, const std::string& key,
                         const std::vector<std::vector<float>>& rows, const std::string& doc_url)
{
    std::string raw;
    auto dim = rows.empty() ? 0U : static_cast<std::uint32_t>(rows.front().size());
    append_u32(raw, dim);
    append_u32(raw, static_cast<std::uint32_t>(rows.size()));
    for (const auto& row : rows) {
        if (row.size() != dim) {
            throw Error(ErrorCode::DimensionMismatch, "ragged embedding rows for " + doc_url);
        }
        for (float x : row) {
            std::uint32_t bits = 0;
            std::memcpy(&bits, &x, 4);
            append_u32(raw, bits);
        }
    }
    auto model_dir = model_dir_name(model);
    write_text_file(dir_ / model_dir / (key + ".bin"), raw);
    std::lock_guard lock(mu_);
    auto& urls = manifest_[model_dir][key];
    if (std::find(urls.begin(), urls.end(), doc_url) == urls.end()) {
        urls.push_back(doc_url);
    }
}

void EmbeddingCache::flush_manifest() const
{
    std::lock_guard lock(mu_);
    for (const auto& [model, entries] : manifest_) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [hash, urls] : entries) {
            j[hash] = urls;
        }
        write_text_file(dir_ / model / "manifest.json", j.dump(1));
    }
}

int EmbeddingCache::hits() const
{
    std::lock_guard lock(mu_);
    return hits_;
}

int EmbeddingCache::misses() const
{
    std::lock_guard lock(mu_);
    return misses_;
}

namespace {

// Embeds texts in batches with a bounded number of concurrent requests.
std::vector<std::vector<float>> embed_batched(Backend& backend, const std::string& model,
                                              const std::vector<std::string>& texts, const PipelineConfig& cfg)
{
    auto batch = static_cast<std::size_t>(std::max(cfg.embed_batch_size, 1));
    auto inflight = static_cast<std::size_t>(std::max(cfg.embed_max_inflight, 1));
    std::vector<std::vector<std::string>> batches;
    for (std::size_t i = 0; i < texts.size(); i += batch) {
        batches.emplace_back(texts.begin() + static_cast<std::ptrdiff_t>(i),
                             texts.begin() + static_cast<std::ptrdiff_t>(std::min(i + batch, texts.size())));
    }
    std::vector<std::vector<float>> out;
    out.reserve(texts.size());
    for (std::size_t wave = 0; wave < batches.size(); wave += inflight) {
        std::vector<std::future<Embeddings>> pending;
        for (std::size_t b = wave; b < std::min(wave + inflight, batches.size()); ++b) {
            pending.push_back(std::async(std::launch::async, [&, b] { return backend.embed(model, batches[b]); }));
        }
        for (std::size_t p = 0; p < pending.size(); ++p) {
            auto e = pending[p].get();
            if (e.vectors.size() != batches[wave + p].size()) {
                throw Error(ErrorCode::BackendMalformed, "embed returned " + std::to_string(e.vectors.size()) +
                                                             " vectors for " +
                                                             std::to_string(batches[wave + p].size()) + " texts");
            }
            for (auto& v : e.vectors) {
                out.push_back(std::move(v));
            }
        }
    }
    return out;
}

}  // namespace

StoreIndex build_store_index(const KnowledgeStore& store, const PipelineConfig& cfg, Backend& backend,
                             EmbeddingCache* cache)
{
    if (!is_textual(store.kind())) {
        throw Error(ErrorCode::InvalidArgument, "text retrieval over a non-textual store");
    }
    StoreIndex out;
    std::set<std::string> seen;
    std::vector<std::string> keys;
    for (const auto& e : store.entries()) {
        if (!e.text || e.text->empty() || !seen.insert(e.url).second) {
            continue;
        }
        auto chunks = chunk_document(*e.text, cfg.chunk_chars, e.url);
        keys.push_back(cache ? EmbeddingCache::content_key(*e.text, cfg.chunk_chars) : std::string());
        out.documents.push_back(std::move(chunks));
    }

    std::vector<std::vector<std::vector<float>>> doc_vectors(out.documents.size());
    std::vector<std::string> missing_texts;
    std::vector<std::size_t> missing_docs;
    for (std::size_t d = 0; d < out.documents.size(); ++d) {
        if (cache) {
            auto hit = cache->get(cfg.embed_model, keys[d]);
            if (hit && hit->size() == out.documents[d].size()) {
                doc_vectors[d] = std::move(*hit);
                continue;
            }
        }
        missing_docs.push_back(d);
        for (const auto& c : out.documents[d]) {
            missing_texts.push_back(c.text);
        }
    }
    auto fresh = embed_batched(backend, cfg.embed_model, missing_texts, cfg);
    std::size_t at = 0;
    for (auto d : missing_docs) {
        auto n = out.documents[d].size();
        doc_vectors[d].assign(std::make_move_iterator(fresh.begin() + static_cast<std::ptrdiff_t>(at)),
                              std::make_move_iterator(fresh.begin() + static_cast<std::ptrdiff_t>(at + n)));
        at += n;
        if (cache) {
            cache->put(cfg.embed_model, keys[d], doc_vectors[d], out.documents[d].front().doc_url);
        }
    }
    if (cache && !missing_docs.empty()) {
        cache->flush_manifest();
    }

    for (std::size_t d = 0; d < out.documents.size(); ++d) {
        for (std::size_t c = 0; c < out.documents[d].size(); ++c) {
            if (out.slot_chunk.empty()) {
                out.index = DenseIndex(static_cast<int>(doc_vectors[d][c].size()));
            }
            const auto& chunk = out.documents[d][c];
            out.index.add(chunk.doc_url, chunk.index, doc_vectors[d][c]);
            out.slot_chunk.emplace_back(d, c);
        }
    }
    return out;
}

std::vector<TextEvidenceItem> retrieve_text_evidence(const Claim& claim, const StoreIndex& index, EvidenceSource source,
                                                     const PipelineConfig& cfg, Backend& backend)
{
    if (index.slot_chunk.empty()) {
        return {};
    }
    auto query = backend.embed(cfg.embed_model, {claim.text});
    if (query.vectors.size() != 1) {
        throw Error(ErrorCode::BackendMalformed, "embed returned no query vector");
    }
    auto dense = dense_topk(index.index, query.vectors.front(), cfg.dense_k);
    std::vector<TextChunk> candidates;
    for (const auto& hit : dense) {
        auto [d, c] = index.slot_chunk[hit.slot];
        candidates.push_back(index.documents[d][c]);
    }
    auto reranked = rerank(backend, cfg.rerank_model, claim.text, candidates, cfg.rerank_k);
    std::vector<TextEvidenceItem> out;
    for (const auto& hit : reranked) {
        auto [d, c] = index.slot_chunk[dense[hit.candidate].slot];
        auto item = augment_with_neighbors(index.documents[d][c], index.documents[d], cfg.neighbor_span);
        item.source_store = source;
        item.embed_score = dense[hit.candidate].score;
        item.rerank_score = hit.score;
        out.push_back(std::move(item));
    }
    return out;
}

std::vector<TextEvidenceItem> retrieve_text_evidence(const Claim& claim, const KnowledgeStore& store,
                                                     const PipelineConfig& cfg, Backend& backend,
                                                     EmbeddingCache* cache)
{
    auto index = build_store_index(store, cfg, backend, cache);
    auto source = store.kind() == StoreKind::ImageQueryText ? EvidenceSource::IT : EvidenceSource::TT;
    return retrieve_text_evidence(claim, index, source, cfg, backend);
}

std::optional<std::string> load_image_b64(const std::string& location)
{
    try {
        return base64_encode(read_text_file(location));
    } catch (const Error&) {
        return std::nullopt;
    }
}

std::vector<ImageEvidenceItem> retrieve_visual_evidence(const Claim& claim, const KnowledgeStore& store,
                                                        const PipelineConfig& cfg, Backend& backend)
{
    if (store.kind() != StoreKind::TextQueryImage) {
        throw Error(ErrorCode::InvalidArgument, "visual retrieval needs the text-query image store");
    }
    std::vector<const StoreEntry*> entries;
    std::vector<MultimodalItem> items;
    std::set<std::string> seen;
    for (const auto& e : store.entries()) {
        if (!e.image || !seen.insert(e.image->id).second) {
            continue;
        }
        auto b64 = load_image_b64(e.image->location);
        if (!b64) {
            continue;
        }
        entries.push_back(&e);
        items.push_back(MultimodalItem{std::nullopt, std::move(*b64)});
    }
    if (entries.empty()) {
        return {};
    }

    std::vector<std::vector<double>> store_vecs;
    auto batch = static_cast<std::size_t>(std::max(cfg.embed_batch_size, 1));
    for (std::size_t i = 0; i < items.size(); i += batch) {
        std::vector<MultimodalItem> part(items.begin() + static_cast<std::ptrdiff_t>(i),
                                         items.begin() + static_cast<std::ptrdiff_t>(std::min(i + batch, items.size())));
        auto e = backend.mm_embed(cfg.mm_embed_model, part);
        if (e.vectors.size() != part.size()) {
            throw Error(ErrorCode::BackendMalformed, "mm_embed returned a wrong number of vectors");
        }
        for (const auto& v : e.vectors) {
            store_vecs.push_back(l2_normalize(v));
        }
    }

    std::vector<MultimodalItem> queries{MultimodalItem{claim.text, std::nullopt}};
    std::vector<int> query_image_numbers{0};
    for (std::size_t i = 0; i < claim.images.size(); ++i) {
        if (auto b64 = load_image_b64(claim.images[i].location)) {
            queries.push_back(MultimodalItem{std::nullopt, std::move(*b64)});
            query_image_numbers.push_back(static_cast<int>(i) + 1);
        }
    }
    auto qe = backend.mm_embed(cfg.mm_embed_model, queries);
    if (qe.vectors.size() != queries.size()) {
        throw Error(ErrorCode::BackendMalformed, "mm_embed returned a wrong number of vectors");
    }

    std::map<std::string, ImageEvidenceItem> best;
    for (std::size_t q = 0; q < queries.size(); ++q) {
        auto qv = l2_normalize(qe.vectors[q]);
        std::vector<std::pair<double, std::size_t>> scored;
        for (std::size_t i = 0; i < store_vecs.size(); ++i) {
            if (store_vecs[i].size() != qv.size()) {
                throw Error(ErrorCode::DimensionMismatch, "image and query embeddings differ in dimension");
            }
            double dot = 0.0;
            for (std::size_t d = 0; d < qv.size(); ++d) {
                dot += store_vecs[i][d] * qv[d];
            }
            scored.emplace_back(dot, i);
        }
        std::sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
            if (a.first != b.first) {
                return a.first > b.first;
            }
            return entries[a.second]->image->id < entries[b.second]->image->id;
        });
        auto k = static_cast<std::size_t>(std::max(q == 0 ? cfg.visual_text_k : cfg.visual_per_image_k, 0));
        for (std::size_t r = 0; r < std::min(k, scored.size()); ++r) {
            const auto* e = entries[scored[r].second];
            ImageEvidenceItem item{*e->image, e->url, scored[r].first, ImageQueryKind{query_image_numbers[q]}};
            auto [it, inserted] = best.emplace(e->image->id, item);
            if (!inserted && item.score > it->second.score) {
                it->second = item;
            }
        }
    }
    std::vector<ImageEvidenceItem> out;
    for (auto& [id, item] : best) {
        out.push_back(std::move(item));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const ImageEvidenceItem& a, const ImageEvidenceItem& b) { return a.score > b.score; });
    return out;
}

EvidenceBundle retrieve_evidence(const Claim& claim, const ClaimStores& stores, const PipelineConfig& cfg,
                                 Backend& backend, EmbeddingCache* cache)
{
    EvidenceBundle b;
    b.text_text = retrieve_text_evidence(claim, stores.text_query_text, cfg, backend, cache);
    b.image_text = retrieve_text_evidence(claim, stores.image_query_text, cfg, backend, cache);
    b.images = retrieve_visual_evidence(claim, stores.text_query_image, cfg, backend);
    return b;
}

}  // namespace veristack
