#include <algorithm>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "veristack/errors.hpp"
#include "veristack/evaluation.hpp"
#include "veristack/store_io.hpp"

using namespace veristack;
using namespace veristack::testing;

namespace {

ErrorCode code_of(const std::function<void()>& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::IoError;
}

InstanceScore inst(bool correct, double evidence, double justification = 0.0)
{
    InstanceScore s;
    s.label_correct = correct;
    s.evidence_score = evidence;
    s.justification_score = justification;
    return s;
}

// Independent reference for the gated accuracy.
double veracity_oracle(const std::vector<InstanceScore>& xs, double lambda)
{
    double hits = 0.0;
    for (const auto& x : xs) {
        if (x.label_correct && !(x.evidence_score < lambda)) {
            hits += 1.0;
        }
    }
    return hits / static_cast<double>(xs.size());
}

std::vector<InstanceScore> random_instances(Gen& gen)
{
    std::vector<InstanceScore> xs;
    for (int i = gen.integer(1, 40); i > 0; --i) {
        double evidence = gen.coin(0.1) ? 0.3 : gen.real(0.0, 1.0);
        xs.push_back(inst(gen.coin(), evidence, gen.real(0.0, 1.0)));
    }
    return xs;
}

GoldRecord gold(const std::string& id, Label label, std::vector<QAPair> qa, std::string justification)
{
    return GoldRecord{id, label, std::move(qa), std::move(justification)};
}

SubmissionRecord submitted(const GoldRecord& g)
{
    return SubmissionRecord{g.claim_id, g.qa, g.label, g.justification};
}

class ScriptedJudge : public Judge {
  public:
    explicit ScriptedJudge(std::vector<double> evidence) : evidence_(std::move(evidence)) {}
    double question_recall(const std::vector<QAPair>&, const std::vector<QAPair>&) override { return 0.5; }
    double evidence_recall(const std::vector<QAPair>&, const std::vector<QAPair>&) override
    {
        return evidence_[calls_++ % evidence_.size()];
    }
    double justification_similarity(const std::string&, const std::string&) override { return 1.0; }
    std::string name() const override { return "scripted"; }
    bool deterministic() const override { return false; }

  private:
    std::vector<double> evidence_;
    std::size_t calls_ = 0;
};

}  // namespace

TEST(TokenF1, HandExamples)
{
    EXPECT_NEAR(token_f1("the solar panel", "solar panel farm now"), 4.0 / 7.0, 1e-12);
    EXPECT_DOUBLE_EQ(token_f1("Solar panel", "panel, SOLAR!"), 1.0);
    EXPECT_DOUBLE_EQ(token_f1("abc", "xyz"), 0.0);
    EXPECT_DOUBLE_EQ(token_f1("", "..."), 1.0);
    EXPECT_DOUBLE_EQ(token_f1("", "word"), 0.0);
    EXPECT_DOUBLE_EQ(token_f1("a a a b", "a b"), 1.0);
}

TEST(LexicalRecall, BestMatchPerGoldItem)
{
    EXPECT_NEAR(lexical_recall({"solar panel", "quantum chess"}, {"solar panel farm"}), 0.4, 1e-12);
    EXPECT_DOUBLE_EQ(lexical_recall({}, {"anything"}), 1.0);
    EXPECT_DOUBLE_EQ(lexical_recall({"x"}, {}), 0.0);
    EXPECT_DOUBLE_EQ(lexical_recall({"a b", "c d"}, {"c d", "a b"}), 1.0);
}

TEST(Gating, ThresholdExamples)
{
    std::vector<InstanceScore> one = {inst(true, 0.29)};
    EXPECT_DOUBLE_EQ(conditional_veracity(one, kSharedTaskLambda), 0.0);
    EXPECT_DOUBLE_EQ(conditional_veracity(one, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(conditional_veracity({inst(true, 0.3)}, 0.3), 1.0);

    std::vector<InstanceScore> three = {inst(true, 0.5), inst(true, 0.1), inst(false, 0.9)};
    EXPECT_DOUBLE_EQ(conditional_veracity(three, 0.3), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(conditional_veracity(three, 0.0), 2.0 / 3.0);
}

TEST(Gating, JustificationIsZeroedBelowThreshold)
{
    std::vector<InstanceScore> xs = {inst(true, 0.5, 0.8), inst(false, 0.1, 0.6), inst(false, 0.9, 0.4)};
    EXPECT_NEAR(conditional_justification(xs, 0.3), (0.8 + 0.4) / 3.0, 1e-12);
    EXPECT_NEAR(conditional_justification(xs, 0.0), (0.8 + 0.6 + 0.4) / 3.0, 1e-12);
}

TEST(Gating, RejectsEmptyAndOutOfRange)
{
    EXPECT_EQ(code_of([] { conditional_veracity({}, 0.3); }), ErrorCode::EmptyInstances);
    EXPECT_EQ(code_of([] { conditional_justification({}, 0.3); }), ErrorCode::EmptyInstances);
    EXPECT_EQ(code_of([] { conditional_veracity({inst(true, 1)}, 1.5); }), ErrorCode::InvalidArgument);
    EXPECT_EQ(code_of([] { conditional_justification({inst(true, 1)}, -0.1); }), ErrorCode::InvalidArgument);
}

TEST(Gating, MatchesOracleOnRandomSets)
{
    Gen gen(31);
    for (int round = 0; round < 200; ++round) {
        auto xs = random_instances(gen);
        for (double lambda : {0.0, 0.1, 0.3, 0.5, 1.0}) {
            EXPECT_DOUBLE_EQ(conditional_veracity(xs, lambda), veracity_oracle(xs, lambda));
        }
    }
}

TEST(Gating, NonIncreasingInLambda)
{
    Gen gen(32);
    for (int round = 0; round < 200; ++round) {
        auto xs = random_instances(gen);
        double a = gen.real(0.0, 1.0);
        double b = gen.real(0.0, 1.0);
        auto lo = std::min(a, b);
        auto hi = std::max(a, b);
        EXPECT_GE(conditional_veracity(xs, lo), conditional_veracity(xs, hi));
        EXPECT_GE(conditional_justification(xs, lo), conditional_justification(xs, hi));
        EXPECT_GE(conditional_veracity(xs, 0.0), conditional_veracity(xs, kSharedTaskLambda));
    }
}

TEST(Gating, PermutationAndDuplicationInvariant)
{
    Gen gen(33);
    for (int round = 0; round < 100; ++round) {
        auto xs = random_instances(gen);
        auto shuffled = xs;
        std::shuffle(shuffled.begin(), shuffled.end(), gen.rng());
        auto doubled = xs;
        doubled.insert(doubled.end(), xs.begin(), xs.end());
        for (double lambda : {0.0, 0.3}) {
            EXPECT_NEAR(conditional_veracity(xs, lambda), conditional_veracity(shuffled, lambda), 1e-12);
            EXPECT_NEAR(conditional_veracity(xs, lambda), conditional_veracity(doubled, lambda), 1e-12);
            EXPECT_NEAR(conditional_justification(xs, lambda), conditional_justification(shuffled, lambda), 1e-12);
            EXPECT_NEAR(conditional_justification(xs, lambda), conditional_justification(doubled, lambda), 1e-12);
        }
    }
}

TEST(ScoreRun, IdenticalSubmissionScoresOne)
{
    std::vector<GoldRecord> golds = {
        gold("a", Label::Refuted, {{"Who took the photo?", "A family member in 2015.", 1, 1}}, "It is satire."),
        gold("b", Label::Supported, {{"Did it rain?", "Yes, records confirm it.", 1, 1}}, "Records agree."),
    };
    std::vector<SubmissionRecord> results = {submitted(golds[1]), submitted(golds[0])};
    LexicalJudge judge;
    auto r = score_run(results, golds, judge, PipelineConfig{});
    EXPECT_EQ(r.instances, 2U);
    EXPECT_EQ(r.runs, 1);
    EXPECT_DOUBLE_EQ(r.q_eval, 1.0);
    EXPECT_DOUBLE_EQ(r.evid_eval, 1.0);
    EXPECT_DOUBLE_EQ(r.veracity.at(0.0), 1.0);
    EXPECT_DOUBLE_EQ(r.veracity.at(0.3), 1.0);
    EXPECT_DOUBLE_EQ(r.justification.at(0.3), 1.0);
}

TEST(ScoreRun, ThreeInstanceHandFixture)
{
    std::vector<GoldRecord> golds = {
        gold("c1", Label::Refuted, {{"Who is pictured?", "Rosa Camfield with her great-granddaughter.", 1, 1}},
             "The story is satire."),
        gold("c2", Label::Supported,
             {{"Did the bridge collapse?", "The old bridge collapsed during a violent storm in 2021", 1, 1}},
             "Officials confirmed the collapse."),
        gold("c3", Label::NotEnoughEvidence, {{"Where was it taken?", "Unknown location.", 1, 1}}, "Unclear."),
    };
    std::vector<SubmissionRecord> results = {
        submitted(golds[0]),
        SubmissionRecord{"c2", {{"Did the bridge collapse?", "bridge", 1, 1}}, Label::Supported,
                         "Officials confirmed the collapse."},
        SubmissionRecord{"c3", golds[2].qa, Label::Refuted, "Unclear."},
    };
    LexicalJudge judge;
    auto r = score_run(results, golds, judge, PipelineConfig{});
    const double weak = 2.0 * 1.0 * 0.1 / 1.1;
    EXPECT_DOUBLE_EQ(r.q_eval, 1.0);
    EXPECT_NEAR(r.evid_eval, (1.0 + weak + 1.0) / 3.0, 1e-12);
    EXPECT_NEAR(r.veracity.at(0.0), 2.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.veracity.at(0.3), 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(r.justification.at(0.0), 1.0, 1e-12);
    EXPECT_NEAR(r.justification.at(0.3), 2.0 / 3.0, 1e-12);
}

TEST(ScoreRun, MissingGoldAndEmptyInput)
{
    LexicalJudge judge;
    std::vector<GoldRecord> golds = {gold("a", Label::Refuted, {}, "j")};
    SubmissionRecord stray{"zzz", {}, Label::Refuted, "j"};
    EXPECT_EQ(code_of([&] { score_run({stray}, golds, judge, PipelineConfig{}); }), ErrorCode::MissingGold);
    EXPECT_EQ(code_of([&] { score_run({}, golds, judge, PipelineConfig{}); }), ErrorCode::EmptyInstances);
}

TEST(ScoreRun, NonDeterministicJudgeRepeats)
{
    std::vector<GoldRecord> golds = {gold("a", Label::Refuted, {}, "j")};
    ScriptedJudge judge({0.2, 0.4});
    PipelineConfig cfg;
    cfg.judge_runs = 4;
    auto r = score_run({submitted(golds[0])}, golds, judge, cfg);
    EXPECT_EQ(r.runs, 4);
    EXPECT_NEAR(r.evid_eval, 0.3, 1e-12);
    EXPECT_NEAR(r.evid_eval_std, std::sqrt(4 * 0.01 / 3.0), 1e-12);
    EXPECT_DOUBLE_EQ(r.veracity.at(0.3), 0.5);
    EXPECT_DOUBLE_EQ(r.q_eval_std, 0.0);
}

TEST(BackendJudgeTest, ParsesAndClampsScores)
{
    ScriptedBackend backend([](const ModelRequest& r, int call) -> std::optional<ModelResponse> {
        EXPECT_NE(prompt_text(r).find("## Reference"), std::string::npos);
        return reply(call == 1 ? R"(```json
{"score": 1.7}
```)"
                               : R"({"score": 0.25})");
    });
    BackendJudge judge(backend, PipelineConfig{});
    EXPECT_DOUBLE_EQ(judge.justification_similarity("a", "b"), 1.0);
    EXPECT_DOUBLE_EQ(judge.evidence_recall({{"q", "a", 1, 1}}, {}), 0.25);
    EXPECT_DOUBLE_EQ(judge.question_recall({}, {}), 1.0);
    EXPECT_EQ(backend.generate_calls(), 2);
    EXPECT_FALSE(judge.deterministic());

    ScriptedBackend prose([](const ModelRequest&, int) { return std::optional(reply("looks fine")); });
    BackendJudge bad(prose, PipelineConfig{});
    EXPECT_EQ(code_of([&] { bad.justification_similarity("a", "b"); }), ErrorCode::ParseFailure);
}

TEST(Report, KeysAndLambdaRendering)
{
    EXPECT_EQ(lambda_key(0.0), "0.0");
    EXPECT_EQ(lambda_key(0.3), "0.3");
    EXPECT_EQ(lambda_key(1.0), "1.0");
    EXPECT_EQ(lambda_key(0.25), "0.25");

    std::vector<GoldRecord> golds = {gold("a", Label::Refuted, {{"q", "a", 1, 1}}, "j")};
    LexicalJudge judge;
    auto j = report_json(score_run({submitted(golds[0])}, golds, judge, PipelineConfig{}));
    std::vector<std::string> keys;
    for (const auto& item : j.items()) {
        keys.push_back(item.key());
    }
    EXPECT_EQ(keys, (std::vector<std::string>{"q_eval", "evid_eval", "veracity", "justification", "judge", "runs",
                                              "std", "instances", "image_matching"}));
    EXPECT_TRUE(j["veracity"].contains("0.0"));
    EXPECT_TRUE(j["veracity"].contains("0.3"));
    EXPECT_EQ(j["judge"], "lexical");
    EXPECT_EQ(j["image_matching"], "skipped");
    EXPECT_TRUE(j["std"]["justification"].contains("0.3"));
}

TEST(GoldFile, ReadsBothLabelKeys)
{
    TempDir dir;
    write_text_file(dir / "gold.jsonl",
                    R"({"claim_id": "a", "label": "Refuted", "questions": [{"question": "q1", "answer": "a1"}], "justification": "j"})"
                    "\n\n"
                    R"({"claim_id": 7, "veracity_verdict": "conflicting evidence/cherrypicking"})"
                    "\n");
    auto golds = read_gold_jsonl(dir / "gold.jsonl");
    ASSERT_EQ(golds.size(), 2U);
    EXPECT_EQ(golds[0].label, Label::Refuted);
    EXPECT_EQ(golds[0].qa.size(), 1U);
    EXPECT_EQ(golds[1].claim_id, "7");
    EXPECT_EQ(golds[1].label, Label::ConflictingEvidenceCherrypicking);

    write_text_file(dir / "bad.jsonl", R"({"claim_id": "a", "label": "Refuted"})"
                                       "\n"
                                       R"({"claim_id": "b", "label": "Probably"})"
                                       "\n");
    try {
        read_gold_jsonl(dir / "bad.jsonl");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::IoError);
        EXPECT_NE(e.detail().find(":2:"), std::string::npos);
    }
}
