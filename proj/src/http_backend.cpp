#include <chrono>
#include <thread>

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "veristack/backend.hpp"
#include "veristack/errors.hpp"
#include "veristack/text_util.hpp"
#include "veristack/wire.hpp"

namespace veristack {

using nlohmann::json;

HttpBackend::HttpBackend(std::string base_url, int timeout_s, int retry_budget)
    : base_url_(std::move(base_url)), timeout_s_(timeout_s), retry_budget_(retry_budget)
{
    while (!base_url_.empty() && base_url_.back() == '/') {
        base_url_.pop_back();
    }
    parse_url(base_url_);  // UrlInvalid early rather than on first call
}

std::string HttpBackend::post(const std::string& path, const std::string& body)
{
    auto parts = parse_url(base_url_);
    auto origin = parts.scheme + "://" + parts.host + (parts.port ? ":" + std::to_string(parts.port) : "");
    auto prefix = parts.target == "/" ? std::string() : parts.target;

    std::string last_error;
    for (int attempt = 0; attempt <= retry_budget_; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
        }
        httplib::Client client(origin);
        client.set_connection_timeout(timeout_s_, 0);
        client.set_read_timeout(timeout_s_, 0);
        client.set_write_timeout(timeout_s_, 0);
        auto res = client.Post(prefix + path, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            std::string code = "http_" + std::to_string(res->status);
            std::string message = res->body;
            try {
                auto err = json::parse(res->body).at("error");
                code = err.at("code").get<std::string>();
                message = err.value("message", "");
            } catch (const json::exception&) {
            }
            throw Error(ErrorCode::BackendRejected, path + ": " + code + ": " + message);
        }
        return res->body;
    }
    throw Error(ErrorCode::BackendUnavailable,
                path + " failed after " + std::to_string(retry_budget_ + 1) + " attempts: " + last_error);
}

namespace {

json parse_body(const std::string& raw)
{
    try {
        return json::parse(raw);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendMalformed, std::string("response is not JSON: ") + e.what());
    }
}

}  // namespace

Embeddings HttpBackend::embed(const std::string& model, const std::vector<std::string>& texts)
{
    auto body = post("/v1/embed", wire::embed_request(model, texts).dump());
    return wire::parse_embeddings(parse_body(body), texts.size());
}

Embeddings HttpBackend::mm_embed(const std::string& model, const std::vector<MultimodalItem>& items)
{
    auto body = post("/v1/mm_embed", wire::mm_embed_request(model, items).dump());
    return wire::parse_embeddings(parse_body(body), items.size());
}

std::vector<double> HttpBackend::rerank(const std::string& model, const std::string& query,
                                        const std::vector<std::string>& documents)
{
    auto body = post("/v1/rerank", wire::rerank_request(model, query, documents).dump());
    return wire::parse_rerank(parse_body(body), documents.size());
}

ModelResponse HttpBackend::generate(const ModelRequest& request)
{
    auto body = post("/v1/generate", wire::generate_request(request).dump());
    return wire::parse_generate(parse_body(body));
}

Embeddings CountingBackend::embed(const std::string& model, const std::vector<std::string>& texts)
{
    ++embed_calls_;
    return inner_.embed(model, texts);
}

Embeddings CountingBackend::mm_embed(const std::string& model, const std::vector<MultimodalItem>& items)
{
    ++mm_embed_calls_;
    return inner_.mm_embed(model, items);
}

std::vector<double> CountingBackend::rerank(const std::string& model, const std::string& query,
                                            const std::vector<std::string>& documents)
{
    ++rerank_calls_;
    return inner_.rerank(model, query, documents);
}

ModelResponse CountingBackend::generate(const ModelRequest& request)
{
    ++generate_calls_;
    auto r = inner_.generate(request);
    prompt_tokens_ += r.prompt_tokens;
    output_tokens_ += r.output_tokens;
    return r;
}

CountingBackend::Usage CountingBackend::usage() const
{
    return Usage{embed_calls_.load(),   mm_embed_calls_.load(), rerank_calls_.load(),
                 generate_calls_.load(), prompt_tokens_.load(),  output_tokens_.load()};
}

void CountingBackend::reset()
{
    embed_calls_ = mm_embed_calls_ = rerank_calls_ = generate_calls_ = 0;
    prompt_tokens_ = output_tokens_ = 0;
}

std::unique_ptr<Backend> make_backend(const PipelineConfig& cfg)
{
    if (cfg.backend_url == "fake") {
        return std::make_unique<FakeBackend>();
    }
    return std::make_unique<HttpBackend>(cfg.backend_url, cfg.backend_timeout_s, cfg.retry_budget);
}

}  // namespace veristack
