#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "veristack/backend.hpp"

// JSON bodies of the /v1 protocol:
//   POST /v1/embed     {model, texts}                      -> {vectors, dim}
//   POST /v1/mm_embed  {model, items:[{text}|{image_b64}]} -> {vectors, dim}
//   POST /v1/rerank    {model, query, documents}           -> {scores}
//   POST /v1/generate  {model, segments, max_tokens, temperature}
//                      -> {text, finish_reason, usage:{prompt_tokens, output_tokens}}
// Errors: non-2xx with {error:{code, message}}.
// Parsers throw BackendMalformed on any schema violation.
namespace veristack::wire {

nlohmann::json embed_request(const std::string& model, const std::vector<std::string>& texts);
nlohmann::json mm_embed_request(const std::string& model, const std::vector<MultimodalItem>& items);
nlohmann::json rerank_request(const std::string& model, const std::string& query,
                              const std::vector<std::string>& documents);
nlohmann::json generate_request(const ModelRequest& request);

nlohmann::json embeddings_response(const Embeddings& e);
nlohmann::json rerank_response(const std::vector<double>& scores);
nlohmann::json generate_response(const ModelResponse& r);
nlohmann::json error_body(const std::string& code, const std::string& message);

/// `expected` is the number of inputs the vectors must match.
Embeddings parse_embeddings(const nlohmann::json& body, std::size_t expected);
std::vector<double> parse_rerank(const nlohmann::json& body, std::size_t expected);
ModelResponse parse_generate(const nlohmann::json& body);

// Server-side parsing of request bodies (used by in-process test servers).
struct EmbedCall {
    std::string model;
    std::vector<std::string> texts;
};
struct MmEmbedCall {
    std::string model;
    std::vector<MultimodalItem> items;
};
struct RerankCall {
    std::string model;
    std::string query;
    std::vector<std::string> documents;
};

EmbedCall parse_embed_request(const nlohmann::json& body);
MmEmbedCall parse_mm_embed_request(const nlohmann::json& body);
RerankCall parse_rerank_request(const nlohmann::json& body);
ModelRequest parse_generate_request(const nlohmann::json& body);

}  // namespace veristack::wire
