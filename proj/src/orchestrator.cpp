#include "veristack/orchestrator.hpp"

#include <atomic>
#include <chrono>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "veristack/hashing.hpp"
#include "veristack/serialization.hpp"
#include "veristack/store_io.hpp"

namespace veristack {

namespace fs = std::filesystem;
using nlohmann::json;

std::string StageCache::key(std::string_view stage, const json& inputs)
{
    // nlohmann::json keeps object keys sorted, so dump() is canonical.
    return sha256_hex(json{{"stage", stage}, {"inputs", inputs}}.dump());
}

std::optional<json> StageCache::get(std::string_view stage, const std::string& key) const
{
    auto path = dir_ / std::string(stage) / (key + ".json");
    std::error_code ec;
    if (!fs::exists(path, ec)) {
        return std::nullopt;
    }
    auto j = json::parse(read_text_file(path), nullptr, false);
    if (j.is_discarded()) {
        spdlog::warn("ignoring unreadable cache entry {}", path.string());
        return std::nullopt;
    }
    return j;
}

void StageCache::put(std::string_view stage, const std::string& key, const json& value) const
{
    write_text_file(dir_ / std::string(stage) / (key + ".json"), value.dump());
}

std::size_t StageCache::clear() const
{
    std::size_t removed = 0;
    for (const char* stage : {kStageRetrieval, kStageAnalysis, kStageQa, kStageVerdict}) {
        std::error_code ec;
        auto dir = dir_ / stage;
        if (!fs::is_directory(dir, ec)) {
            continue;
        }
        for (const auto& entry : fs::directory_iterator(dir)) {
            if (entry.is_regular_file() && fs::remove(entry.path(), ec)) {
                ++removed;
            }
        }
    }
    return removed;
}

int ClaimResult::cache_hits() const
{
    int n = 0;
    for (const auto& t : timings) {
        n += t.cache_hit ? 1 : 0;
    }
    return n;
}

namespace {

json chunk_json(const TextChunk& c)
{
    return json{{"doc_url", c.doc_url}, {"index", c.index}, {"start", c.start_char}, {"end", c.end_char},
                {"text", c.text}};
}

TextChunk chunk_from(const json& j)
{
    return TextChunk{j.at("doc_url").get<std::string>(), j.at("index").get<int>(), j.at("start").get<std::size_t>(),
                     j.at("end").get<std::size_t>(), j.at("text").get<std::string>()};
}

json text_items_json(const std::vector<TextEvidenceItem>& items)
{
    json out = json::array();
    for (const auto& it : items) {
        out.push_back({{"center", chunk_json(it.center)},
                       {"previous", it.previous ? chunk_json(*it.previous) : json(nullptr)},
                       {"next", it.next ? chunk_json(*it.next) : json(nullptr)},
                       {"combined_text", it.combined_text},
                       {"source", it.source_store == EvidenceSource::TT ? "TT" : "IT"},
                       {"embed_score", it.embed_score},
                       {"rerank_score", it.rerank_score}});
    }
    return out;
}

std::vector<TextEvidenceItem> text_items_from(const json& j)
{
    std::vector<TextEvidenceItem> out;
    for (const auto& e : j) {
        TextEvidenceItem it;
        it.center = chunk_from(e.at("center"));
        if (!e.at("previous").is_null()) {
            it.previous = chunk_from(e["previous"]);
        }
        if (!e.at("next").is_null()) {
            it.next = chunk_from(e["next"]);
        }
        it.combined_text = e.at("combined_text").get<std::string>();
        it.source_store = e.at("source").get<std::string>() == "TT" ? EvidenceSource::TT : EvidenceSource::IT;
        it.embed_score = e.at("embed_score").get<double>();
        it.rerank_score = e.at("rerank_score").get<double>();
        out.push_back(std::move(it));
    }
    return out;
}

std::optional<std::string> file_digest(const std::string& location)
{
    try {
        return sha256_hex(read_text_file(location));
    } catch (const Error&) {
        return std::nullopt;
    }
}

json claim_inputs(const Claim& claim)
{
    json digests = json::array();
    for (const auto& img : claim.images) {
        auto d = file_digest(img.location);
        digests.push_back(d ? json(*d) : json(nullptr));
    }
    return json{{"claim", claim}, {"image_digests", digests}};
}

json store_digest(const KnowledgeStore& store)
{
    json out{{"entries", sha256_hex(json(store).dump())}};
    if (store.kind() == StoreKind::TextQueryImage) {
        json digests = json::array();
        for (const auto& e : store.entries()) {
            auto d = e.image ? file_digest(e.image->location) : std::nullopt;
            digests.push_back(d ? json(*d) : json(nullptr));
        }
        out["image_digests"] = digests;
    }
    return out;
}

json generation_settings(const PipelineConfig& cfg)
{
    return json{{"generate_model", cfg.generate_model}, {"max_tokens", cfg.max_tokens},
                {"temperature", cfg.temperature}, {"retry_budget", cfg.retry_budget}};
}

json fewshot_json(const std::vector<FewShotExample>& examples)
{
    json out = json::array();
    for (const auto& ex : examples) {
        out.push_back({{"claim", ex.claim},
                       {"label", ex.label ? json(std::string(canonical_name(*ex.label))) : json(nullptr)},
                       {"qa", ex.qa},
                       {"justification", ex.justification ? json(*ex.justification) : json(nullptr)}});
    }
    return out;
}

json verdict_json(const Verdict& v)
{
    return json(v);
}

class StageRunner {
  public:
    StageRunner(ClaimResult& result, const PipelineContext& ctx) : result_(result), ctx_(ctx) {}

    // Runs compute() unless the cache holds an entry for inputs; returns nullopt after recording a failure.
    template <typename T, typename Compute, typename Encode, typename Decode>
    std::optional<T> run(const char* stage, const json& inputs, Compute compute, Encode encode, Decode decode)
    {
        auto start = std::chrono::steady_clock::now();
        StageTiming timing{stage, 0.0, false};
        std::optional<T> value;
        try {
            std::string key;
            if (ctx_.cache) {
                key = StageCache::key(stage, inputs);
                if (auto hit = ctx_.cache->get(stage, key)) {
                    value = decode(*hit);
                    timing.cache_hit = true;
                }
            }
            if (!value) {
                value = compute();
                if (ctx_.cache) {
                    ctx_.cache->put(stage, key, encode(*value));
                }
            }
        } catch (const StageError& e) {
            fail(e.stage(), e.code(), e.detail());
        } catch (const Error& e) {
            fail(stage, e.code(), e.detail());
        } catch (const std::exception& e) {
            fail(stage, ErrorCode::InvalidArgument, e.what());
        }
        timing.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        result_.timings.push_back(timing);
        if (result_.error) {
            return std::nullopt;
        }
        return value;
    }

  private:
    void fail(const std::string& stage, ErrorCode code, const std::string& message)
    {
        result_.error = StageFailure{stage, code, message};
    }

    ClaimResult& result_;
    const PipelineContext& ctx_;
};

}  // namespace

json to_cache_json(const EvidenceBundle& bundle)
{
    json images = nullptr;
    if (bundle.images) {
        images = json::array();
        for (const auto& img : *bundle.images) {
            images.push_back({{"image", img.image},
                              {"source_url", img.source_url},
                              {"score", img.score},
                              {"query_kind", img.query_kind.claim_image}});
        }
    }
    return json{{"text_text", bundle.text_text ? text_items_json(*bundle.text_text) : json(nullptr)},
                {"image_text", bundle.image_text ? text_items_json(*bundle.image_text) : json(nullptr)},
                {"images", images}};
}

EvidenceBundle evidence_from_cache_json(const json& j)
{
    EvidenceBundle b;
    if (!j.at("text_text").is_null()) {
        b.text_text = text_items_from(j["text_text"]);
    }
    if (!j.at("image_text").is_null()) {
        b.image_text = text_items_from(j["image_text"]);
    }
    if (!j.at("images").is_null()) {
        b.images.emplace();
        for (const auto& e : j["images"]) {
            b.images->push_back(ImageEvidenceItem{e.at("image").get<ImageRef>(), e.at("source_url").get<std::string>(),
                                                  e.at("score").get<double>(),
                                                  ImageQueryKind{e.at("query_kind").get<int>()}});
        }
    }
    return b;
}

json to_cache_json(const AnalysisReports& reports)
{
    return json{{"TT", reports.tt.raw}, {"IT", reports.it.raw}, {"CM", reports.cm.raw}};
}

AnalysisReports reports_from_cache_json(const json& j)
{
    AnalysisReports r;
    r.tt.raw = j.at("TT").get<std::string>();
    r.it.raw = j.at("IT").get<std::string>();
    r.cm.raw = j.at("CM").get<std::string>();
    for (auto* report : {&r.tt, &r.it, &r.cm}) {
        report->sections = parse_report_sections(report->raw);
    }
    return r;
}

ClaimResult run_pipeline(const Claim& claim, const ClaimStores& stores, const PipelineContext& ctx)
{
    const auto& cfg = ctx.cfg;
    ClaimResult result;
    result.claim_id = claim.id;
    StageRunner runner(result, ctx);
    auto backend_id = ctx.backend.id();
    auto claim_json = claim_inputs(claim);

    json retrieval_inputs{
        {"claim", claim_json},
        {"stores",
         {store_digest(stores.text_query_text), store_digest(stores.image_query_text),
          store_digest(stores.text_query_image)}},
        {"config",
         {{"dense_k", cfg.dense_k},
          {"rerank_k", cfg.rerank_k},
          {"chunk_chars", cfg.chunk_chars},
          {"neighbor_span", cfg.neighbor_span},
          {"visual_text_k", cfg.visual_text_k},
          {"visual_per_image_k", cfg.visual_per_image_k},
          {"embed_model", cfg.embed_model},
          {"rerank_model", cfg.rerank_model},
          {"mm_embed_model", cfg.mm_embed_model}}},
        {"backend", backend_id}};
    result.evidence = runner.run<EvidenceBundle>(
        kStageRetrieval, retrieval_inputs,
        [&] {
            validate_claim(claim);
            return retrieve_evidence(claim, stores, cfg, ctx.backend, ctx.embeddings);
        },
        [](const EvidenceBundle& b) { return to_cache_json(b); }, evidence_from_cache_json);
    if (!result.evidence) {
        return result;
    }

    json retrieved_digests = json::array();
    for (const auto& img : result.evidence->images.value_or(std::vector<ImageEvidenceItem>{})) {
        auto d = file_digest(img.image.location);
        retrieved_digests.push_back(d ? json(*d) : json(nullptr));
    }
    json analysis_inputs{{"claim", claim_json},
                         {"evidence", to_cache_json(*result.evidence)},
                         {"retrieved_image_digests", retrieved_digests},
                         {"config", generation_settings(cfg)},
                         {"evidence_char_cap", cfg.evidence_char_cap},
                         {"backend", backend_id}};
    result.reports = runner.run<AnalysisReports>(
        kStageAnalysis, analysis_inputs,
        [&] { return run_analysis_agents(claim, *result.evidence, cfg, ctx.backend); },
        [](const AnalysisReports& r) { return to_cache_json(r); }, reports_from_cache_json);
    if (!result.reports) {
        return result;
    }

    auto fewshot = ctx.fewshot ? ctx.fewshot->select(claim.text, cfg.fewshot_k) : std::vector<FewShotExample>{};
    json qa_inputs{{"claim", claim_json},
                   {"reports", to_cache_json(*result.reports)},
                   {"fewshot", fewshot_json(fewshot)},
                   {"config", generation_settings(cfg)},
                   {"qa_iterations", cfg.qa_iterations},
                   {"qa_per_iteration", cfg.qa_per_iteration},
                   {"fewshot_k", cfg.fewshot_k},
                   {"backend", backend_id}};
    result.qa = runner.run<QASet>(
        kStageQa, qa_inputs, [&] { return generate_qa(claim, *result.reports, fewshot, cfg, ctx.backend); },
        [](const QASet& q) { return json(q); }, [](const json& j) { return j.get<QASet>(); });
    if (!result.qa) {
        return result;
    }

    json verdict_inputs{{"claim", claim_json},
                        {"qa", *result.qa},
                        {"config", generation_settings(cfg)},
                        {"verdict_select_k", cfg.verdict_select_k},
                        {"backend", backend_id}};
    result.verdict = runner.run<Verdict>(
        kStageVerdict, verdict_inputs, [&] { return predict_verdict(claim, *result.qa, cfg, ctx.backend); },
        verdict_json, [](const json& j) { return j.get<Verdict>(); });
    return result;
}

std::vector<ClaimResult> run_batch(const std::vector<Claim>& claims, const StoreLoader& load_stores,
                                   const PipelineContext& ctx, int workers)
{
    if (workers < 1) {
        throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
    }
    std::vector<ClaimResult> results(claims.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (auto i = next.fetch_add(1); i < claims.size(); i = next.fetch_add(1)) {
            ClaimStores stores;
            try {
                stores = load_stores(claims[i]);
            } catch (const std::exception& e) {
                results[i].claim_id = claims[i].id;
                auto code = dynamic_cast<const Error*>(&e) ? static_cast<const Error&>(e).code() : ErrorCode::IoError;
                results[i].error = StageFailure{"load", code, e.what()};
                continue;
            }
            results[i] = run_pipeline(claims[i], stores, ctx);
            if (results[i].error) {
                spdlog::warn("claim {} failed at {}: {}", claims[i].id, results[i].error->stage,
                             results[i].error->message);
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        auto n = std::min(static_cast<std::size_t>(workers), std::max<std::size_t>(claims.size(), 1));
        for (std::size_t w = 0; w < n; ++w) {
            pool.emplace_back(work);
        }
    }
    return results;
}

SubmissionRecord to_submission(const ClaimResult& result)
{
    SubmissionRecord r;
    r.claim_id = result.claim_id;
    if (result.ok()) {
        r.label = result.verdict->label;
        r.justification = result.verdict->justification;
        r.questions = result.verdict->selected;
        return r;
    }
    r.label = Label::NotEnoughEvidence;
    if (result.error) {
        r.justification = fmt::format("No verdict: the {} stage failed ({}: {}).", result.error->stage,
                                      to_string(result.error->code), result.error->message);
    } else {
        r.justification = "No verdict was produced.";
    }
    return r;
}

fs::path errors_sidecar_path(const fs::path& submission_path)
{
    auto p = submission_path;
    p.replace_extension();
    p += ".errors.jsonl";
    return p;
}

void write_submission(const std::vector<ClaimResult>& results, const fs::path& path)
{
    if (results.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no results to write");
    }
    std::string lines;
    std::string errors;
    for (const auto& r : results) {
        lines += submission_line(to_submission(r)) + "\n";
        if (r.error) {
            nlohmann::ordered_json e;
            e["claim_id"] = r.claim_id;
            e["stage"] = r.error->stage;
            e["code"] = to_string(r.error->code);
            e["message"] = r.error->message;
            errors += e.dump() + "\n";
        }
    }
    write_text_file(path, lines);
    write_text_file(errors_sidecar_path(path), errors);
}

nlohmann::ordered_json result_json(const ClaimResult& result)
{
    nlohmann::ordered_json j;
    j["claim_id"] = result.claim_id;
    if (result.evidence) {
        auto summarize = [](const std::optional<std::vector<TextEvidenceItem>>& items) {
            nlohmann::ordered_json out = nlohmann::ordered_json::array();
            for (const auto& it : items.value_or(std::vector<TextEvidenceItem>{})) {
                out.push_back({{"url", it.center.doc_url},
                               {"chunk", it.center.index},
                               {"chunks", it.chunk_count()},
                               {"embed_score", it.embed_score},
                               {"rerank_score", it.rerank_score}});
            }
            return out;
        };
        nlohmann::ordered_json images = nlohmann::ordered_json::array();
        for (const auto& img : result.evidence->images.value_or(std::vector<ImageEvidenceItem>{})) {
            images.push_back({{"image", img.image.id},
                              {"url", img.source_url},
                              {"score", img.score},
                              {"query", img.query_kind.is_text() ? std::string("claim_text")
                                                                 : fmt::format("claim_image_{}",
                                                                               img.query_kind.claim_image)}});
        }
        j["evidence"] = {{"text_text", summarize(result.evidence->text_text)},
                         {"image_text", summarize(result.evidence->image_text)},
                         {"images", images}};
    }
    if (result.reports) {
        j["reports"] = {{"TT", result.reports->tt.raw}, {"IT", result.reports->it.raw}, {"CM", result.reports->cm.raw}};
    }
    if (result.qa) {
        j["qa"] = json(*result.qa);
    }
    if (result.verdict) {
        j["verdict"] = json(*result.verdict);
    }
    nlohmann::ordered_json timings = nlohmann::ordered_json::array();
    for (const auto& t : result.timings) {
        timings.push_back({{"stage", t.stage}, {"seconds", t.seconds}, {"cache_hit", t.cache_hit}});
    }
    j["timings"] = timings;
    j["cache_hits"] = result.cache_hits();
    if (result.error) {
        j["error"] = {{"stage", result.error->stage},
                      {"code", to_string(result.error->code)},
                      {"message", result.error->message}};
    }
    return j;
}

}  // namespace veristack
