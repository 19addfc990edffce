#pragma once

#include <atomic>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "veristack/config.hpp"

namespace veristack {

struct Segment {
    enum class Type { Text, Image };
    Type type = Type::Text;
    std::string text;       // Type::Text
    std::string image_b64;  // Type::Image

    static Segment of_text(std::string text) { return {Type::Text, std::move(text), {}}; }
    static Segment of_image(std::string b64) { return {Type::Image, {}, std::move(b64)}; }
    bool operator==(const Segment&) const = default;
};

struct ModelRequest {
    std::string model;
    std::vector<Segment> segments;  // order-preserving
    int max_tokens = 4096;
    double temperature = 0.0;
};

struct ModelResponse {
    std::string text;
    std::string finish_reason;
    int prompt_tokens = 0;
    int output_tokens = 0;

    bool succeeded() const { return finish_reason == "stop" || finish_reason == "length"; }
};

/// Exactly one of text / image_b64 is set.
struct MultimodalItem {
    std::optional<std::string> text;
    std::optional<std::string> image_b64;
};

struct Embeddings {
    std::vector<std::vector<float>> vectors;
    int dim = 0;
};

/// Model inference contract. Implementations must be safe for concurrent use.
/// Transport failures throw BackendUnavailable, schema violations BackendMalformed,
/// and explicit rejections (non-2xx with an error body) BackendRejected.
class Backend {
  public:
    virtual ~Backend() = default;

    virtual Embeddings embed(const std::string& model, const std::vector<std::string>& texts) = 0;
    virtual Embeddings mm_embed(const std::string& model, const std::vector<MultimodalItem>& items) = 0;
    /// One score per document, in input order.
    virtual std::vector<double> rerank(const std::string& model, const std::string& query,
                                       const std::vector<std::string>& documents) = 0;
    virtual ModelResponse generate(const ModelRequest& request) = 0;

    /// Identifies the serving stack; part of every cache key.
    virtual std::string id() const = 0;
};

/// Speaks the /v1 wire protocol over HTTP. Retries transport failures and 5xx
/// responses up to retry_budget times.
class HttpBackend : public Backend {
  public:
    HttpBackend(std::string base_url, int timeout_s, int retry_budget);

    Embeddings embed(const std::string& model, const std::vector<std::string>& texts) override;
    Embeddings mm_embed(const std::string& model, const std::vector<MultimodalItem>& items) override;
    std::vector<double> rerank(const std::string& model, const std::string& query,
                               const std::vector<std::string>& documents) override;
    ModelResponse generate(const ModelRequest& request) override;
    std::string id() const override { return "http:" + base_url_; }

  private:
    std::string post(const std::string& path, const std::string& body);

    std::string base_url_;
    int timeout_s_;
    int retry_budget_;
};

/// Deterministic in-process backend implementing the stub rules (see schema/stub_rules.md).
class FakeBackend : public Backend {
  public:
    explicit FakeBackend(int dim = 64) : dim_(dim) {}

    Embeddings embed(const std::string& model, const std::vector<std::string>& texts) override;
    Embeddings mm_embed(const std::string& model, const std::vector<MultimodalItem>& items) override;
    std::vector<double> rerank(const std::string& model, const std::string& query,
                               const std::vector<std::string>& documents) override;
    ModelResponse generate(const ModelRequest& request) override;
    std::string id() const override { return "stub-v1/d" + std::to_string(dim_); }

  private:
    int dim_;
};

/// Per-endpoint call counters plus token usage, wrapped around any backend.
class CountingBackend : public Backend {
  public:
    explicit CountingBackend(Backend& inner) : inner_(inner) {}

    Embeddings embed(const std::string& model, const std::vector<std::string>& texts) override;
    Embeddings mm_embed(const std::string& model, const std::vector<MultimodalItem>& items) override;
    std::vector<double> rerank(const std::string& model, const std::string& query,
                               const std::vector<std::string>& documents) override;
    ModelResponse generate(const ModelRequest& request) override;
    std::string id() const override { return inner_.id(); }

    struct Usage {
        int embed_calls = 0;
        int mm_embed_calls = 0;
        int rerank_calls = 0;
        int generate_calls = 0;
        long prompt_tokens = 0;
        long output_tokens = 0;

        int total_calls() const { return embed_calls + mm_embed_calls + rerank_calls + generate_calls; }
    };
    Usage usage() const;
    void reset();

  private:
    Backend& inner_;
    std::atomic<int> embed_calls_{0};
    std::atomic<int> mm_embed_calls_{0};
    std::atomic<int> rerank_calls_{0};
    std::atomic<int> generate_calls_{0};
    std::atomic<long> prompt_tokens_{0};
    std::atomic<long> output_tokens_{0};
};

/// "fake" selects FakeBackend; anything else is treated as an HTTP base URL.
std::unique_ptr<Backend> make_backend(const PipelineConfig& cfg);

}  // namespace veristack
