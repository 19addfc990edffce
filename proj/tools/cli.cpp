#include "cli.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "veristack/backend.hpp"
#include "veristack/config.hpp"
#include "veristack/errors.hpp"
#include "veristack/evaluation.hpp"
#include "veristack/fetcher.hpp"
#include "veristack/orchestrator.hpp"
#include "veristack/retrieval.hpp"
#include "veristack/store_filler.hpp"
#include "veristack/store_io.hpp"

namespace veristack::cli {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitPartial = 1;
constexpr int kExitFatal = 2;

struct Common {
    std::string config;
    std::string backend;
};

PipelineConfig load(const Common& common)
{
    auto cfg = load_config(common.config);
    if (!common.backend.empty()) {
        cfg.backend_url = common.backend;
    }
    return validate_config(cfg);
}

std::unique_ptr<Fetcher> make_fetcher(const std::string& kind, const std::string& pages, int timeout_s)
{
    if (kind == "fake") {
        if (pages.empty()) {
            throw Error(ErrorCode::InvalidArgument, "--fetcher fake needs --pages DIR");
        }
        return std::make_unique<ScriptedFetcher>(ScriptedFetcher::from_directory(pages));
    }
    if (kind == "http") {
        return std::make_unique<HttpFetcher>(timeout_s);
    }
    if (kind == "browser") {
        return std::make_unique<BrowserFetcher>(timeout_s);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown fetcher '" + kind + "' (fake|http|browser)");
}

void print_stats(std::ostream& out, const std::vector<FillStatsRow>& rows)
{
    out << fmt::format("{:<8} {:<18} {:<9} {:>10} {:>8} {:>8}\n", "split", "store", "status", "avg", "min", "max");
    for (const auto& r : rows) {
        out << fmt::format("{:<8} {:<18} {:<9} {:>10.1f} {:>8} {:>8}\n", r.split, to_string(r.store), r.status,
                           r.stats.avg, r.stats.min, r.stats.max);
    }
}

std::vector<FillStatsRow> stats_for(const fs::path& root, const std::string& split_name)
{
    std::vector<KnowledgeStore> tqt;
    std::vector<KnowledgeStore> iqt;
    for (const auto& claim : list_claim_dirs(root)) {
        auto stores = load_claim_stores(root / claim, true);
        tqt.push_back(std::move(stores.text_query_text));
        iqt.push_back(std::move(stores.image_query_text));
    }
    auto rows = stats_rows(split_name, StoreKind::TextQueryText, compute_fill_stats(tqt));
    auto more = stats_rows(split_name, StoreKind::ImageQueryText, compute_fill_stats(iqt));
    rows.insert(rows.end(), more.begin(), more.end());
    return rows;
}

int cmd_fill(const Common& common, const std::string& stores_dir, const std::string& fetcher_kind,
             const std::string& pages, int workers, const std::string& split_name, const std::string& report,
             std::ostream& out)
{
    auto cfg = load(common);
    auto fetcher = make_fetcher(fetcher_kind, pages, cfg.fetch_timeout_s);
    auto rules = UsefulnessRules::defaults().with_thresholds(cfg);
    FillOptions options{&rules, workers > 0 ? workers : cfg.fill_workers};
    fs::path root(stores_dir);
    int attempted = 0;
    auto claims = list_claim_dirs(root);
    for (const auto& claim : claims) {
        auto stores = load_claim_stores(root / claim, false);
        for (auto* store : {&stores.text_query_text, &stores.image_query_text}) {
            auto result = fill_store(*store, *fetcher, options);
            attempted += result.attempted;
            write_store_jsonl(root / claim / store_file_name(store->kind(), true), result.store);
        }
    }
    auto rows = stats_for(root, split_name);
    auto report_path = report.empty() ? root / "fill_stats.json" : fs::path(report);
    write_fill_stats_report(report_path, rows);
    out << fmt::format("filled {} claims ({} fetches attempted); report: {}\n", claims.size(), attempted,
                       report_path.string());
    print_stats(out, rows);
    return kExitOk;
}

int cmd_stats(const std::string& stores_dir, const std::string& split_name, const std::string& report,
              std::ostream& out)
{
    auto rows = stats_for(stores_dir, split_name);
    if (!report.empty()) {
        write_fill_stats_report(report, rows);
    }
    print_stats(out, rows);
    return kExitOk;
}

int cmd_index(const Common& common, const std::string& stores_dir, const std::string& cache_dir, bool original,
              std::ostream& out)
{
    auto cfg = load(common);
    auto backend = make_backend(cfg);
    EmbeddingCache cache(cache_dir);
    fs::path root(stores_dir);
    std::size_t chunks = 0;
    auto claims = list_claim_dirs(root);
    for (const auto& claim : claims) {
        auto stores = load_claim_stores(root / claim, !original);
        for (const auto* store : {&stores.text_query_text, &stores.image_query_text}) {
            chunks += build_store_index(*store, cfg, *backend, &cache).index.size();
        }
    }
    out << fmt::format("indexed {} claims, {} chunks (cache hits {}, misses {}) into {}\n", claims.size(), chunks,
                       cache.hits(), cache.misses(), cache_dir);
    return kExitOk;
}

int cmd_run(const Common& common, const std::string& claims_file, const std::string& stores_dir,
            const std::string& out_dir, int workers, const std::string& fewshot_file, bool no_cache, bool original,
            std::ostream& out)
{
    auto cfg = load(common);
    auto inner = make_backend(cfg);
    CountingBackend backend(*inner);
    auto claims = read_claims_jsonl(claims_file);
    fs::path out_path(out_dir);

    std::optional<StageCache> cache;
    std::optional<EmbeddingCache> embeddings;
    if (!no_cache) {
        cache.emplace(out_path / "cache");
        embeddings.emplace(out_path / "cache" / "embeddings");
    }
    std::optional<FewShotSelector> fewshot;
    if (!fewshot_file.empty()) {
        fewshot.emplace(read_fewshot_jsonl(fewshot_file), cfg.bm25_k1, cfg.bm25_b);
    }
    PipelineContext ctx{cfg, backend, cache ? &*cache : nullptr, embeddings ? &*embeddings : nullptr,
                        fewshot ? &*fewshot : nullptr};
    fs::path root(stores_dir);
    auto results = run_batch(
        claims, [&](const Claim& c) { return load_claim_stores(root / c.id, !original); }, ctx, workers);

    write_submission(results, out_path / "submission.jsonl");
    std::string detail;
    std::size_t failed = 0;
    for (const auto& r : results) {
        detail += result_json(r).dump() + "\n";
        failed += r.ok() ? 0 : 1;
    }
    write_text_file(out_path / "results.jsonl", detail);
    auto usage = backend.usage();
    nlohmann::ordered_json u;
    u["backend"] = backend.id();
    u["embed_calls"] = usage.embed_calls;
    u["mm_embed_calls"] = usage.mm_embed_calls;
    u["rerank_calls"] = usage.rerank_calls;
    u["generate_calls"] = usage.generate_calls;
    u["prompt_tokens"] = usage.prompt_tokens;
    u["output_tokens"] = usage.output_tokens;
    write_text_file(out_path / "usage.json", u.dump(2) + "\n");

    out << fmt::format("{} claims, {} verified, {} failed; {} generate calls; submission: {}\n", results.size(),
                       results.size() - failed, failed, usage.generate_calls,
                       (out_path / "submission.jsonl").string());
    return failed == 0 ? kExitOk : kExitPartial;
}

int cmd_eval(const Common& common, const std::string& pred, const std::string& gold, const std::string& judge_kind,
             const std::string& report, std::ostream& out)
{
    auto cfg = load(common);
    auto results = read_submission(pred);
    auto golds = read_gold_jsonl(gold);
    std::unique_ptr<Backend> backend;
    std::unique_ptr<Judge> judge;
    if (judge_kind == "lexical") {
        judge = std::make_unique<LexicalJudge>();
    } else if (judge_kind == "backend") {
        backend = make_backend(cfg);
        judge = std::make_unique<BackendJudge>(*backend, cfg);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown judge '" + judge_kind + "' (lexical|backend)");
    }
    auto text = report_json(score_run(results, golds, *judge, cfg)).dump(2) + "\n";
    if (!report.empty()) {
        write_text_file(report, text);
    }
    out << text;
    return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"veristack: multimodal claim verification pipeline"};
    app.require_subcommand(1);
    Common common;
    app.add_option("--config", common.config, "Key-value config file");
    app.add_option("--backend", common.backend, "Backend base URL, or 'fake' for the in-process stub");
    bool verbose = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");

    std::string stores_dir, fetcher_kind = "http", pages, split_name = "dev", report;
    int fill_workers = 0;
    auto* fill = app.add_subcommand("fill", "Fetch content for empty or boilerplate store entries");
    fill->add_option("--stores", stores_dir, "Store root (one directory per claim)")->required();
    fill->add_option("--fetcher", fetcher_kind, "fake|http|browser")->capture_default_str();
    fill->add_option("--pages", pages, "Canned pages for --fetcher fake (DIR/index.json)");
    fill->add_option("--workers", fill_workers, "Concurrent fetches per store");
    fill->add_option("--split", split_name, "Split name for the stats report")->capture_default_str();
    fill->add_option("--report", report, "Stats report path (default STORES/fill_stats.json)");

    auto* stats = app.add_subcommand("stats", "Per-claim evidence counts before and after filling");
    stats->add_option("--stores", stores_dir, "Store root")->required();
    stats->add_option("--split", split_name, "Split name")->capture_default_str();
    stats->add_option("--report", report, "Also write the JSON report here");

    std::string cache_dir;
    bool original = false;
    auto* index = app.add_subcommand("index", "Embed all textual stores into the embedding cache");
    index->add_option("--stores", stores_dir, "Store root")->required();
    index->add_option("--cache", cache_dir, "Embedding cache directory")->required();
    index->add_flag("--original", original, "Ignore .filled.jsonl stores");

    std::string claims_file, out_dir, fewshot_file;
    int workers = 4;
    bool no_cache = false;
    auto* run = app.add_subcommand("run", "Verify claims and write a submission file");
    run->add_option("--claims", claims_file, "Claims JSON-lines file")->required();
    run->add_option("--stores", stores_dir, "Store root")->required();
    run->add_option("--out", out_dir, "Run directory")->required();
    run->add_option("--workers", workers, "Claims processed concurrently")->capture_default_str();
    run->add_option("--fewshot", fewshot_file, "Few-shot exemplar JSON-lines file");
    run->add_flag("--no-cache", no_cache, "Disable the stage and embedding caches");
    run->add_flag("--original", original, "Ignore .filled.jsonl stores");

    std::string pred, gold, judge = "lexical";
    auto* eval = app.add_subcommand("eval", "Score a submission against gold records");
    eval->add_option("--pred", pred, "Submission JSON-lines file")->required();
    eval->add_option("--gold", gold, "Gold JSON-lines file")->required();
    eval->add_option("--judge", judge, "lexical|backend")->capture_default_str();
    eval->add_option("--out", report, "Also write the JSON report here");

    auto* cache = app.add_subcommand("cache", "Manage the stage cache");
    cache->require_subcommand(1);
    std::string run_dir;
    auto* clear = cache->add_subcommand("clear", "Delete every cached stage output");
    clear->add_option("--dir", run_dir, "Run directory (as given to run --out)")->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err) == 0 ? kExitOk : kExitFatal;
    }
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

    try {
        if (*fill) {
            return cmd_fill(common, stores_dir, fetcher_kind, pages, fill_workers, split_name, report, out);
        }
        if (*stats) {
            return cmd_stats(stores_dir, split_name, report, out);
        }
        if (*index) {
            return cmd_index(common, stores_dir, cache_dir, original, out);
        }
        if (*run) {
            return cmd_run(common, claims_file, stores_dir, out_dir, workers, fewshot_file, no_cache, original, out);
        }
        if (*eval) {
            return cmd_eval(common, pred, gold, judge, report, out);
        }
        if (*clear) {
            auto removed = StageCache(fs::path(run_dir) / "cache").clear();
            std::error_code ec;
            auto embeddings = fs::remove_all(fs::path(run_dir) / "cache" / "embeddings", ec);
            out << fmt::format("removed {} cached stage outputs and {} embedding files\n", removed,
                               ec ? 0 : embeddings);
            return kExitOk;
        }
    } catch (const std::exception& e) {
        err << "veristack: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}

}  // namespace veristack::cli
