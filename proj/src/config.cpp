#include "veristack/config.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

#include <fmt/format.h>

#include "veristack/errors.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

namespace {

void require(bool ok, const char* field, const std::string& why)
{
    if (!ok) {
        throw Error(ErrorCode::ConfigInvalid, fmt::format("{}: {}", field, why));
    }
}

int parse_int(const std::string& key, const std::string& raw)
{
    int value = 0;
    auto [ptr, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), value);
    if (ec != std::errc() || ptr != raw.data() + raw.size()) {
        throw Error(ErrorCode::ConfigInvalid, fmt::format("{}: '{}' is not an integer", key, raw));
    }
    return value;
}

double parse_double(const std::string& key, const std::string& raw)
{
    try {
        std::size_t used = 0;
        double value = std::stod(raw, &used);
        if (used == raw.size()) {
            return value;
        }
    } catch (const std::exception&) {
    }
    throw Error(ErrorCode::ConfigInvalid, fmt::format("{}: '{}' is not a number", key, raw));
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

template <typename T>
Setter int_field(T PipelineConfig::*member)
{
    return [member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parse_int(k, v); };
}

Setter double_field(double PipelineConfig::*member)
{
    return [member](PipelineConfig& c, const std::string& k, const std::string& v) { c.*member = parse_double(k, v); };
}

Setter string_field(std::string PipelineConfig::*member)
{
    return [member](PipelineConfig& c, const std::string&, const std::string& v) { c.*member = v; };
}

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"dense_k", int_field(&PipelineConfig::dense_k)},
        {"rerank_k", int_field(&PipelineConfig::rerank_k)},
        {"chunk_chars", int_field(&PipelineConfig::chunk_chars)},
        {"neighbor_span", int_field(&PipelineConfig::neighbor_span)},
        {"visual_text_k", int_field(&PipelineConfig::visual_text_k)},
        {"visual_per_image_k", int_field(&PipelineConfig::visual_per_image_k)},
        {"embed_batch_size", int_field(&PipelineConfig::embed_batch_size)},
        {"embed_max_inflight", int_field(&PipelineConfig::embed_max_inflight)},
        {"bm25_k1", double_field(&PipelineConfig::bm25_k1)},
        {"bm25_b", double_field(&PipelineConfig::bm25_b)},
        {"qa_iterations", int_field(&PipelineConfig::qa_iterations)},
        {"qa_per_iteration", int_field(&PipelineConfig::qa_per_iteration)},
        {"fewshot_k", int_field(&PipelineConfig::fewshot_k)},
        {"verdict_select_k", int_field(&PipelineConfig::verdict_select_k)},
        {"retry_budget", int_field(&PipelineConfig::retry_budget)},
        {"max_tokens", int_field(&PipelineConfig::max_tokens)},
        {"temperature", double_field(&PipelineConfig::temperature)},
        {"evidence_char_cap", int_field(&PipelineConfig::evidence_char_cap)},
        {"lambdas",
         [](PipelineConfig& c, const std::string& k, const std::string& v) {
             c.lambdas.clear();
             for (const auto& part : split(v, ',')) {
                 auto item = trim(part);
                 if (!item.empty()) {
                     c.lambdas.push_back(parse_double(k, std::string(item)));
                 }
             }
         }},
        {"judge_runs", int_field(&PipelineConfig::judge_runs)},
        {"usefulness_min_chars", int_field(&PipelineConfig::usefulness_min_chars)},
        {"generic_line_ratio", double_field(&PipelineConfig::generic_line_ratio)},
        {"fill_workers", int_field(&PipelineConfig::fill_workers)},
        {"fetch_timeout_s", int_field(&PipelineConfig::fetch_timeout_s)},
        {"backend_url", string_field(&PipelineConfig::backend_url)},
        {"backend_timeout_s", int_field(&PipelineConfig::backend_timeout_s)},
        {"embed_model", string_field(&PipelineConfig::embed_model)},
        {"rerank_model", string_field(&PipelineConfig::rerank_model)},
        {"mm_embed_model", string_field(&PipelineConfig::mm_embed_model)},
        {"generate_model", string_field(&PipelineConfig::generate_model)},
    };
    return table;
}

std::string read_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot read config file " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

PipelineConfig validate_config(PipelineConfig cfg)
{
    const std::pair<const char*, int> counts[] = {
        {"dense_k", cfg.dense_k},
        {"rerank_k", cfg.rerank_k},
        {"chunk_chars", cfg.chunk_chars},
        {"neighbor_span", cfg.neighbor_span},
        {"visual_text_k", cfg.visual_text_k},
        {"visual_per_image_k", cfg.visual_per_image_k},
        {"embed_batch_size", cfg.embed_batch_size},
        {"embed_max_inflight", cfg.embed_max_inflight},
        {"qa_iterations", cfg.qa_iterations},
        {"qa_per_iteration", cfg.qa_per_iteration},
        {"fewshot_k", cfg.fewshot_k},
        {"verdict_select_k", cfg.verdict_select_k},
        {"max_tokens", cfg.max_tokens},
        {"evidence_char_cap", cfg.evidence_char_cap},
        {"judge_runs", cfg.judge_runs},
        {"usefulness_min_chars", cfg.usefulness_min_chars},
        {"fill_workers", cfg.fill_workers},
        {"fetch_timeout_s", cfg.fetch_timeout_s},
        {"backend_timeout_s", cfg.backend_timeout_s},
    };
    for (const auto& [name, value] : counts) {
        require(value >= 1, name, fmt::format("must be >= 1, got {}", value));
    }
    require(cfg.retry_budget >= 0, "retry_budget", "must be >= 0");
    require(cfg.rerank_k <= cfg.dense_k, "rerank_k",
            fmt::format("must not exceed dense_k ({} > {})", cfg.rerank_k, cfg.dense_k));
    require(!cfg.lambdas.empty(), "lambdas", "must list at least one threshold");
    for (double lambda : cfg.lambdas) {
        require(lambda >= 0.0 && lambda <= 1.0, "lambdas", fmt::format("{} is outside [0, 1]", lambda));
    }
    require(cfg.bm25_k1 > 0.0, "bm25_k1", "must be > 0");
    require(cfg.bm25_b >= 0.0 && cfg.bm25_b <= 1.0, "bm25_b", "must lie in [0, 1]");
    require(cfg.temperature >= 0.0, "temperature", "must be >= 0");
    require(cfg.generic_line_ratio >= 0.0 && cfg.generic_line_ratio <= 1.0, "generic_line_ratio",
            "must lie in [0, 1]");
    require(!cfg.backend_url.empty(), "backend_url", "must not be empty");
    return cfg;
}

std::map<std::string, std::string> parse_config_document(const std::string& text)
{
    std::map<std::string, std::string> values;
    int line_no = 0;
    for (const auto& raw_line : split(text, '\n')) {
        ++line_no;
        auto line = trim(raw_line);
        if (line.empty() || line.front() == '#') {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw Error(ErrorCode::ConfigInvalid, fmt::format("line {}: expected 'key = value'", line_no));
        }
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw Error(ErrorCode::ConfigInvalid, fmt::format("line {}: empty key", line_no));
        }
        values[std::string(key)] = std::string(value);
    }
    return values;
}

void apply_config_values(PipelineConfig& cfg, const std::map<std::string, std::string>& values)
{
    const auto& table = setters();
    for (const auto& [key, value] : values) {
        auto it = table.find(key);
        if (it == table.end()) {
            throw Error(ErrorCode::ConfigInvalid, fmt::format("{}: unknown key", key));
        }
        it->second(cfg, key, value);
    }
}

PipelineConfig load_config(const std::filesystem::path& path)
{
    PipelineConfig cfg;
    if (!path.empty()) {
        apply_config_values(cfg, parse_config_document(read_file(path)));
    }
    if (const char* env_path = std::getenv("VERISTACK_CONFIG"); env_path && *env_path) {
        apply_config_values(cfg, parse_config_document(read_file(env_path)));
    }
    if (const char* url = std::getenv("VERISTACK_BACKEND_URL"); url && *url) {
        cfg.backend_url = url;
    }
    return validate_config(std::move(cfg));
}

std::string to_config_document(const PipelineConfig& cfg)
{
    std::string lambdas;
    for (std::size_t i = 0; i < cfg.lambdas.size(); ++i) {
        lambdas += (i ? "," : "") + fmt::format("{}", cfg.lambdas[i]);
    }
    std::string out;
    auto put = [&out](std::string_view key, const auto& value) { out += fmt::format("{} = {}\n", key, value); };
    put("dense_k", cfg.dense_k);
    put("rerank_k", cfg.rerank_k);
    put("chunk_chars", cfg.chunk_chars);
    put("neighbor_span", cfg.neighbor_span);
    put("visual_text_k", cfg.visual_text_k);
    put("visual_per_image_k", cfg.visual_per_image_k);
    put("embed_batch_size", cfg.embed_batch_size);
    put("embed_max_inflight", cfg.embed_max_inflight);
    put("bm25_k1", cfg.bm25_k1);
    put("bm25_b", cfg.bm25_b);
    put("qa_iterations", cfg.qa_iterations);
    put("qa_per_iteration", cfg.qa_per_iteration);
    put("fewshot_k", cfg.fewshot_k);
    put("verdict_select_k", cfg.verdict_select_k);
    put("retry_budget", cfg.retry_budget);
    put("max_tokens", cfg.max_tokens);
    put("temperature", cfg.temperature);
    put("evidence_char_cap", cfg.evidence_char_cap);
    put("lambdas", lambdas);
    put("judge_runs", cfg.judge_runs);
    put("usefulness_min_chars", cfg.usefulness_min_chars);
    put("generic_line_ratio", cfg.generic_line_ratio);
    put("fill_workers", cfg.fill_workers);
    put("fetch_timeout_s", cfg.fetch_timeout_s);
    put("backend_url", cfg.backend_url);
    put("backend_timeout_s", cfg.backend_timeout_s);
    put("embed_model", cfg.embed_model);
    put("rerank_model", cfg.rerank_model);
    put("mm_embed_model", cfg.mm_embed_model);
    put("generate_model", cfg.generate_model);
    return out;
}

}  // namespace veristack
