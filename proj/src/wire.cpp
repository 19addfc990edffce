#include "veristack/wire.hpp"

#include <cmath>

#include "veristack/errors.hpp"

namespace veristack::wire {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what)
{
    throw Error(ErrorCode::BackendMalformed, what);
}

const json& field(const json& body, const char* key)
{
    if (!body.is_object()) {
        malformed("body is not a JSON object");
    }
    auto it = body.find(key);
    if (it == body.end()) {
        malformed(std::string("missing key '") + key + "'");
    }
    return *it;
}

std::string string_field(const json& body, const char* key)
{
    const auto& v = field(body, key);
    if (!v.is_string()) {
        malformed(std::string("'") + key + "' must be a string");
    }
    return v.get<std::string>();
}

std::vector<std::string> string_list(const json& body, const char* key)
{
    const auto& v = field(body, key);
    if (!v.is_array()) {
        malformed(std::string("'") + key + "' must be an array");
    }
    std::vector<std::string> out;
    for (const auto& item : v) {
        if (!item.is_string()) {
            malformed(std::string("'") + key + "' must hold strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

int int_field(const json& body, const char* key)
{
    const auto& v = field(body, key);
    if (!v.is_number_integer()) {
        malformed(std::string("'") + key + "' must be an integer");
    }
    return v.get<int>();
}

}  // namespace

json embed_request(const std::string& model, const std::vector<std::string>& texts)
{
    return json{{"model", model}, {"texts", texts}};
}

json mm_embed_request(const std::string& model, const std::vector<MultimodalItem>& items)
{
    json list = json::array();
    for (const auto& item : items) {
        if (item.text) {
            list.push_back(json{{"text", *item.text}});
        } else {
            list.push_back(json{{"image_b64", item.image_b64.value_or("")}});
        }
    }
    return json{{"model", model}, {"items", std::move(list)}};
}

json rerank_request(const std::string& model, const std::string& query, const std::vector<std::string>& documents)
{
    return json{{"model", model}, {"query", query}, {"documents", documents}};
}

json generate_request(const ModelRequest& request)
{
    json segments = json::array();
    for (const auto& s : request.segments) {
        if (s.type == Segment::Type::Text) {
            segments.push_back(json{{"type", "text"}, {"text", s.text}});
        } else {
            segments.push_back(json{{"type", "image"}, {"image_b64", s.image_b64}});
        }
    }
    return json{{"model", request.model},
                {"segments", std::move(segments)},
                {"max_tokens", request.max_tokens},
                {"temperature", request.temperature}};
}

json embeddings_response(const Embeddings& e)
{
    return json{{"vectors", e.vectors}, {"dim", e.dim}};
}

json rerank_response(const std::vector<double>& scores)
{
    return json{{"scores", scores}};
}

json generate_response(const ModelResponse& r)
{
    return json{{"text", r.text},
                {"finish_reason", r.finish_reason},
                {"usage", {{"prompt_tokens", r.prompt_tokens}, {"output_tokens", r.output_tokens}}}};
}

json error_body(const std::string& code, const std::string& message)
{
    return json{{"error", {{"code", code}, {"message", message}}}};
}

Embeddings parse_embeddings(const json& body, std::size_t expected)
{
    Embeddings e;
    e.dim = int_field(body, "dim");
    const auto& vectors = field(body, "vectors");
    if (!vectors.is_array() || vectors.size() != expected) {
        malformed("expected " + std::to_string(expected) + " vectors");
    }
    if (e.dim <= 0) {
        malformed("dim must be positive");
    }
    for (const auto& row : vectors) {
        if (!row.is_array() || row.size() != static_cast<std::size_t>(e.dim)) {
            malformed("vector length differs from dim");
        }
        std::vector<float> v;
        v.reserve(row.size());
        for (const auto& x : row) {
            if (!x.is_number() || !std::isfinite(x.get<double>())) {
                malformed("vector component is not a finite number");
            }
            v.push_back(x.get<float>());
        }
        e.vectors.push_back(std::move(v));
    }
    return e;
}

std::vector<double> parse_rerank(const json& body, std::size_t expected)
{
    const auto& scores = field(body, "scores");
    if (!scores.is_array() || scores.size() != expected) {
        malformed("expected " + std::to_string(expected) + " scores");
    }
    std::vector<double> out;
    for (const auto& s : scores) {
        if (!s.is_number() || !std::isfinite(s.get<double>())) {
            malformed("score is not a finite number");
        }
        out.push_back(s.get<double>());
    }
    return out;
}

ModelResponse parse_generate(const json& body)
{
    ModelResponse r;
    r.text = string_field(body, "text");
    r.finish_reason = string_field(body, "finish_reason");
    const auto& usage = field(body, "usage");
    r.prompt_tokens = int_field(usage, "prompt_tokens");
    r.output_tokens = int_field(usage, "output_tokens");
    if (r.text.empty() && r.succeeded()) {
        malformed("empty text with successful finish_reason '" + r.finish_reason + "'");
    }
    return r;
}

EmbedCall parse_embed_request(const json& body)
{
    return {string_field(body, "model"), string_list(body, "texts")};
}

MmEmbedCall parse_mm_embed_request(const json& body)
{
    MmEmbedCall call{string_field(body, "model"), {}};
    const auto& items = field(body, "items");
    if (!items.is_array()) {
        malformed("'items' must be an array");
    }
    for (const auto& item : items) {
        bool has_text = item.is_object() && item.contains("text");
        bool has_image = item.is_object() && item.contains("image_b64");
        if (has_text == has_image) {
            malformed("each item needs exactly one of text / image_b64");
        }
        MultimodalItem m;
        if (has_text) {
            m.text = string_field(item, "text");
        } else {
            m.image_b64 = string_field(item, "image_b64");
        }
        call.items.push_back(std::move(m));
    }
    return call;
}

RerankCall parse_rerank_request(const json& body)
{
    return {string_field(body, "model"), string_field(body, "query"), string_list(body, "documents")};
}

ModelRequest parse_generate_request(const json& body)
{
    ModelRequest r;
    r.model = string_field(body, "model");
    r.max_tokens = int_field(body, "max_tokens");
    const auto& temp = field(body, "temperature");
    if (!temp.is_number()) {
        malformed("'temperature' must be a number");
    }
    r.temperature = temp.get<double>();
    const auto& segments = field(body, "segments");
    if (!segments.is_array()) {
        malformed("'segments' must be an array");
    }
    for (const auto& s : segments) {
        auto type = string_field(s, "type");
        if (type == "text") {
            r.segments.push_back(Segment::of_text(string_field(s, "text")));
        } else if (type == "image") {
            r.segments.push_back(Segment::of_image(string_field(s, "image_b64")));
        } else {
            malformed("unknown segment type '" + type + "'");
        }
    }
    return r;
}

}  // namespace veristack::wire
