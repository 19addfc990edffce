#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "veristack/agents.hpp"
#include "veristack/backend.hpp"
#include "veristack/config.hpp"
#include "veristack/core.hpp"
#include "veristack/errors.hpp"
#include "veristack/retrieval.hpp"
#include "veristack/submission.hpp"

namespace veristack {

inline constexpr const char* kStageRetrieval = "retrieval";
inline constexpr const char* kStageAnalysis = "analysis";
inline constexpr const char* kStageQa = "qa_generation";
inline constexpr const char* kStageVerdict = "verdict";

/// On-disk stage outputs: <dir>/<stage>/<key>.json, written through a temporary
/// file and rename so concurrent readers never see partial entries.
class StageCache {
  public:
    explicit StageCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

    /// SHA-256 over the canonical serialization of (stage, inputs).
    static std::string key(std::string_view stage, const nlohmann::json& inputs);

    std::optional<nlohmann::json> get(std::string_view stage, const std::string& key) const;
    void put(std::string_view stage, const std::string& key, const nlohmann::json& value) const;
    /// Removes every cached entry; returns the number of files deleted.
    std::size_t clear() const;

    const std::filesystem::path& dir() const noexcept { return dir_; }

  private:
    std::filesystem::path dir_;
};

struct StageTiming {
    std::string stage;
    double seconds = 0.0;
    bool cache_hit = false;
};

struct StageFailure {
    std::string stage;
    ErrorCode code = ErrorCode::InvalidArgument;
    std::string message;
};

struct ClaimResult {
    std::string claim_id;
    std::optional<EvidenceBundle> evidence;
    std::optional<AnalysisReports> reports;
    std::optional<QASet> qa;
    std::optional<Verdict> verdict;
    std::vector<StageTiming> timings;
    std::optional<StageFailure> error;

    bool ok() const { return verdict.has_value() && !error; }
    int cache_hits() const;
};

/// Shared, read-only resources for a run. Null pointers disable the feature.
struct PipelineContext {
    const PipelineConfig& cfg;
    Backend& backend;
    const StageCache* cache = nullptr;
    EmbeddingCache* embeddings = nullptr;
    const FewShotSelector* fewshot = nullptr;
};

/// Retrieval, analysis, QA generation, verdict. Errors are captured in the
/// result, tagged with the failing stage.
ClaimResult run_pipeline(const Claim& claim, const ClaimStores& stores, const PipelineContext& ctx);

using StoreLoader = std::function<ClaimStores(const Claim&)>;

/// At most `workers` claims in flight; results follow input order.
std::vector<ClaimResult> run_batch(const std::vector<Claim>& claims, const StoreLoader& load_stores,
                                   const PipelineContext& ctx, int workers);

/// Failed claims become "Not Enough Evidence" with no questions and the failure in the justification.
SubmissionRecord to_submission(const ClaimResult& result);

/// Writes the submission JSON-lines file plus `<stem>.errors.jsonl` listing failed claims.
/// Throws IoError.
void write_submission(const std::vector<ClaimResult>& results, const std::filesystem::path& path);

std::filesystem::path errors_sidecar_path(const std::filesystem::path& submission_path);

/// Full per-claim record: evidence summary, reports, QA set, verdict, timings, error.
nlohmann::ordered_json result_json(const ClaimResult& result);

nlohmann::json to_cache_json(const EvidenceBundle& bundle);
EvidenceBundle evidence_from_cache_json(const nlohmann::json& j);
nlohmann::json to_cache_json(const AnalysisReports& reports);
AnalysisReports reports_from_cache_json(const nlohmann::json& j);

}  // namespace veristack
