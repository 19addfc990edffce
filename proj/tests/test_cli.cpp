#include <sstream>

#include <gtest/gtest.h>

#include "cli.hpp"
#include "test_support.hpp"
#include "veristack/store_io.hpp"
#include "veristack/submission.hpp"

using namespace veristack;
using namespace veristack::testing;
using nlohmann::json;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome invoke(std::vector<std::string> args)
{
    std::ostringstream out;
    std::ostringstream err;
    int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

struct RunDir {
    TempDir dir;
    PipelineFixture fx;

    explicit RunDir(int claims) : fx(make_pipeline_fixture(dir.path(), claims)) { write_pipeline_fixture(fx, dir.path()); }

    std::string claims() const { return (dir / "claims.jsonl").string(); }
    std::string stores() const { return (dir / "stores").string(); }
    std::string out() const { return (dir / "run").string(); }

    Outcome run(std::vector<std::string> extra = {}) const
    {
        std::vector<std::string> args = {"--backend", "fake", "run", "--claims", claims(), "--stores", stores(),
                                         "--out", out()};
        args.insert(args.end(), extra.begin(), extra.end());
        return invoke(args);
    }
};

json usage_of(const RunDir& r)
{
    return json::parse(read_text_file(r.dir / "run" / "usage.json"));
}

}  // namespace

TEST(Cli, HelpAndUsageErrors)
{
    auto help = invoke({"--help"});
    EXPECT_EQ(help.code, 0);
    EXPECT_NE(help.out.find("run"), std::string::npos);
    EXPECT_NE(help.out.find("eval"), std::string::npos);
    EXPECT_EQ(invoke({}).code, 2);
    EXPECT_EQ(invoke({"run", "--claims", "x"}).code, 2);
    EXPECT_EQ(invoke({"frobnicate"}).code, 2);
}

TEST(Cli, RunWritesSubmissionAndReusesCache)
{
    RunDir r(3);
    auto first = r.run({"--workers", "2"});
    ASSERT_EQ(first.code, 0) << first.err;
    EXPECT_NE(first.out.find("3 claims, 3 verified, 0 failed; 24 generate calls"), std::string::npos);
    auto submission = read_text_file(r.dir / "run" / "submission.jsonl");
    auto records = read_submission(r.dir / "run" / "submission.jsonl");
    ASSERT_EQ(records.size(), 3U);
    EXPECT_EQ(records[0].claim_id, "claim-1");
    EXPECT_EQ(usage_of(r)["generate_calls"], 24);
    EXPECT_EQ(usage_of(r)["backend"], "stub-v1/d64");
    EXPECT_TRUE(std::filesystem::exists(r.dir / "run" / "results.jsonl"));
    EXPECT_EQ(read_text_file(r.dir / "run" / "submission.errors.jsonl"), "");

    auto again = r.run();
    ASSERT_EQ(again.code, 0);
    EXPECT_EQ(usage_of(r)["generate_calls"], 0);
    EXPECT_EQ(usage_of(r)["embed_calls"], 0);
    EXPECT_EQ(read_text_file(r.dir / "run" / "submission.jsonl"), submission);

    auto cleared = invoke({"cache", "clear", "--dir", r.out()});
    ASSERT_EQ(cleared.code, 0);
    EXPECT_NE(cleared.out.find("removed 12 cached stage outputs"), std::string::npos);
    ASSERT_EQ(r.run().code, 0);
    EXPECT_EQ(usage_of(r)["generate_calls"], 24);
}

TEST(Cli, NoCacheLeavesNoCacheDirectory)
{
    RunDir r(1);
    ASSERT_EQ(r.run({"--no-cache"}).code, 0);
    EXPECT_FALSE(std::filesystem::exists(r.dir / "run" / "cache"));
}

TEST(Cli, PartialFailureExitsOne)
{
    RunDir r(2);
    write_text_file(r.dir / "stores" / "claim-2" / store_file_name(StoreKind::TextQueryText, false), "{broken\n");
    auto res = r.run();
    EXPECT_EQ(res.code, 1);
    EXPECT_NE(res.out.find("2 claims, 1 verified, 1 failed"), std::string::npos);
    auto sidecar = read_text_file(r.dir / "run" / "submission.errors.jsonl");
    EXPECT_NE(sidecar.find("\"claim-2\""), std::string::npos);
    EXPECT_EQ(read_submission(r.dir / "run" / "submission.jsonl").size(), 2U);
}

TEST(Cli, FatalErrorsExitTwo)
{
    RunDir r(1);
    auto missing = invoke({"--backend", "fake", "run", "--claims", (r.dir / "nope.jsonl").string(), "--stores",
                           r.stores(), "--out", r.out()});
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("veristack:"), std::string::npos);

    write_text_file(r.dir / "bad.conf", "no_such_key = 1\n");
    EXPECT_EQ(invoke({"--config", (r.dir / "bad.conf").string(), "--backend", "fake", "run", "--claims", r.claims(),
                      "--stores", r.stores(), "--out", r.out()})
                  .code,
              2);
}

TEST(Cli, EvalScoresSubmissionAgainstGold)
{
    RunDir r(2);
    ASSERT_EQ(r.run().code, 0);
    auto pred = r.dir / "run" / "submission.jsonl";
    write_text_file(r.dir / "gold.jsonl", read_text_file(pred));
    auto report_path = r.dir / "report.json";
    auto res = invoke({"eval", "--pred", pred.string(), "--gold", (r.dir / "gold.jsonl").string(), "--out",
                       report_path.string()});
    ASSERT_EQ(res.code, 0) << res.err;
    auto j = json::parse(res.out);
    EXPECT_DOUBLE_EQ(j["q_eval"].get<double>(), 1.0);
    EXPECT_DOUBLE_EQ(j["veracity"]["0.3"].get<double>(), 1.0);
    EXPECT_EQ(j["instances"], 2);
    EXPECT_EQ(json::parse(read_text_file(report_path)), j);

    EXPECT_EQ(invoke({"eval", "--pred", pred.string(), "--gold", (r.dir / "gold.jsonl").string(), "--judge", "oracle"})
                  .code,
              2);
    write_text_file(r.dir / "partial_gold.jsonl", R"({"claim_id": "claim-1", "label": "Refuted"})"
                                                  "\n");
    auto missing = invoke({"eval", "--pred", pred.string(), "--gold", (r.dir / "partial_gold.jsonl").string()});
    EXPECT_EQ(missing.code, 2);
    EXPECT_NE(missing.err.find("MissingGold"), std::string::npos);
}

TEST(Cli, FillAndStats)
{
    TempDir dir;
    auto claim_dir = dir / "stores" / "f1";
    KnowledgeStore tqt(StoreKind::TextQueryText);
    tqt.add({"https://news.example.com/fact-check/bridge-photo", std::nullopt, std::nullopt, FillStatus::Original,
             Usefulness::Empty, std::nullopt, std::nullopt});
    tqt.add({"https://slow.example.com/timeout", std::string("Subscribe"), std::nullopt, FillStatus::Original,
             Usefulness::Empty, std::nullopt, std::nullopt});
    write_store_jsonl(claim_dir / store_file_name(StoreKind::TextQueryText, false), tqt);
    write_store_jsonl(claim_dir / store_file_name(StoreKind::ImageQueryText, false),
                      KnowledgeStore(StoreKind::ImageQueryText));

    auto pages = (fixture_dir() / "html").string();
    auto stores = (dir / "stores").string();
    EXPECT_EQ(invoke({"fill", "--stores", stores, "--fetcher", "fake"}).code, 2);
    auto res = invoke({"--backend", "fake", "fill", "--stores", stores, "--fetcher", "fake", "--pages", pages,
                       "--split", "dev"});
    ASSERT_EQ(res.code, 0) << res.err;
    EXPECT_NE(res.out.find("2 fetches attempted"), std::string::npos);

    auto filled = read_store_jsonl(claim_dir / store_file_name(StoreKind::TextQueryText, true), StoreKind::TextQueryText);
    ASSERT_EQ(filled.entries().size(), 2U);
    EXPECT_EQ(filled.entries()[0].fill_status, FillStatus::Filled);
    EXPECT_EQ(filled.entries()[1].fill_status, FillStatus::Unfillable);

    auto rows = read_fill_stats_report(dir / "stores" / "fill_stats.json");
    EXPECT_FALSE(rows.empty());
    for (const auto& row : rows) {
        EXPECT_EQ(row.split, "dev");
    }
    auto report = json::parse(read_text_file(dir / "stores" / "fill_stats.json"));
    for (const auto& row : report) {
        for (const char* key : {"split", "store", "status", "avg", "min", "max"}) {
            EXPECT_TRUE(row.contains(key)) << key;
        }
    }

    auto stats = invoke({"stats", "--stores", stores, "--report", (dir / "stats.json").string()});
    ASSERT_EQ(stats.code, 0);
    EXPECT_EQ(stats.out.rfind("split", 0), 0U);
    EXPECT_EQ(json::parse(read_text_file(dir / "stats.json")), report);
}

TEST(Cli, IndexFillsEmbeddingCache)
{
    RunDir r(2);
    auto cache = (r.dir / "emb").string();
    auto first = invoke({"--backend", "fake", "index", "--stores", r.stores(), "--cache", cache});
    ASSERT_EQ(first.code, 0) << first.err;
    EXPECT_NE(first.out.find("indexed 2 claims"), std::string::npos);
    EXPECT_EQ(first.out.find("misses 0)"), std::string::npos);
    auto second = invoke({"--backend", "fake", "index", "--stores", r.stores(), "--cache", cache});
    EXPECT_NE(second.out.find("misses 0"), std::string::npos);
}
