#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace veristack {

/// The shared-task gating threshold on evidence score.
inline constexpr double kSharedTaskLambda = 0.3;

struct PipelineConfig {
    // Retrieval
    int dense_k = 100;
    int rerank_k = 10;
    int chunk_chars = 2048;
    int neighbor_span = 1;
    int visual_text_k = 5;
    int visual_per_image_k = 1;
    int embed_batch_size = 32;
    int embed_max_inflight = 4;
    double bm25_k1 = 1.5;
    double bm25_b = 0.75;

    // Agents
    int qa_iterations = 4;
    int qa_per_iteration = 5;
    int fewshot_k = 3;
    int verdict_select_k = 10;
    int retry_budget = 2;
    int max_tokens = 4096;
    double temperature = 0.0;
    int evidence_char_cap = 6000;

    // Evaluation
    std::vector<double> lambdas = {0.0, kSharedTaskLambda};
    int judge_runs = 5;  // repeats for model-backed judges; deterministic judges run once

    // Store filling
    int usefulness_min_chars = 200;
    double generic_line_ratio = 0.5;
    int fill_workers = 8;
    int fetch_timeout_s = 30;

    // Backend
    std::string backend_url = "http://127.0.0.1:8765";
    int backend_timeout_s = 120;
    std::string embed_model = "mxbai-embed-large-v1";
    std::string rerank_model = "mxbai-rerank-large-v1";
    std::string mm_embed_model = "Ops-MM-embedding-v1-7B";
    std::string generate_model = "gemini-2.5-pro";

    bool operator==(const PipelineConfig&) const = default;
};

/// Returns cfg unchanged when every invariant holds; throws ConfigInvalid naming the field otherwise.
PipelineConfig validate_config(PipelineConfig cfg);

/// Applies "key = value" pairs onto cfg. Unknown keys throw ConfigInvalid.
void apply_config_values(PipelineConfig& cfg, const std::map<std::string, std::string>& values);

/// Parses a flat key-value document: one `key = value` per line, `#` comments.
std::map<std::string, std::string> parse_config_document(const std::string& text);

/// Defaults, then the file at `path` (if non-empty), then the file named by
/// VERISTACK_CONFIG, then VERISTACK_BACKEND_URL. The result is validated.
PipelineConfig load_config(const std::filesystem::path& path = {});

/// Renders cfg as a config document that parse_config_document reads back.
std::string to_config_document(const PipelineConfig& cfg);

}  // namespace veristack
