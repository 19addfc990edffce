#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "test_support.hpp"
#include "veristack/agents.hpp"
#include "veristack/errors.hpp"
#include "veristack/hashing.hpp"

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

Claim sample_claim(const TempDir& dir, int images, bool with_claimant = true)
{
    Claim c;
    c.id = "c1";
    c.text = "Photo shows a 101-year-old woman who has given birth to her 17th child.";
    if (with_claimant) {
        c.claimant = "Viral post";
    }
    c.date = "2024-01-15";
    for (int i = 0; i < images; ++i) {
        auto p = write_image(dir.path() / "claim", "img" + std::to_string(i + 1) + ".png", i);
        c.images.push_back({"img" + std::to_string(i + 1), p.string(), std::nullopt});
    }
    return c;
}

TextEvidenceItem text_item(const std::string& url, const std::string& text)
{
    TextEvidenceItem item;
    item.center = TextChunk{url, 0, 0, text.size(), text};
    item.combined_text = text;
    return item;
}

std::vector<ImageEvidenceItem> image_items(const TempDir& dir, int n)
{
    std::vector<ImageEvidenceItem> out;
    for (int i = 0; i < n; ++i) {
        auto p = write_image(dir.path() / "web", "w" + std::to_string(i + 1) + ".png", 100 + i);
        ImageEvidenceItem item;
        item.image = ImageRef{"w" + std::to_string(i + 1), p.string(), std::nullopt};
        item.source_url = "https://photos.example.com/" + std::to_string(i + 1);
        item.score = 1.0 - 0.1 * i;
        out.push_back(std::move(item));
    }
    return out;
}

EvidenceBundle full_bundle(const TempDir& dir, int retrieved_images = 3)
{
    EvidenceBundle b;
    b.text_text = std::vector<TextEvidenceItem>{
        text_item("https://www.snopes.com/fact-check/woman-101", "Rosa Camfield held her great-granddaughter."),
        text_item("https://wndr.example.com/story", "A 101-year-old Italian woman gave birth, the site claims.")};
    b.image_text = std::vector<TextEvidenceItem>{
        text_item("https://news.example.org/photo", "The photo was shared by the family in March 2015.")};
    b.images = image_items(dir, retrieved_images);
    return b;
}

AnalysisReports sample_reports()
{
    AnalysisReports r;
    r.tt.raw = "## 1. Key Verification Facts\n* [Fact]: The woman is Rosa Camfield.\n";
    r.it.raw = "## 1. Visual-Text Corroboration\n* [Point]: The image shows an elderly woman with a newborn.\n";
    r.cm.raw = "## 1. Evidence Consistency Check\n* [Text-Text]: Major contradiction.\n";
    return r;
}

QASet numbered_set(int n)
{
    QASet set;
    for (int i = 0; i < n; ++i) {
        set.pairs.push_back({"Question number " + std::to_string(i + 1) + "?", "Answer " + std::to_string(i + 1),
                             i / 5 + 1, i % 5 + 1});
    }
    return set;
}

std::string verdict_json(const std::vector<std::string>& questions, const std::string& label)
{
    nlohmann::json j;
    j["questions"] = nlohmann::json::array();
    for (const auto& q : questions) {
        j["questions"].push_back({{"question", q}, {"answer", "echoed"}});
    }
    j["veracity_verdict"] = label;
    j["justification"] = "Because of the selected pairs.";
    return j.dump();
}

const char* kPublishedQaOutput = R"({"qa_pairs": [
  {"question": "Who are the people in the photograph and what is their actual relationship?",
   "answer": "The photograph shows 101-year-old Rosa Camfield holding her great-granddaughter, Kaylee, in March 2015. The baby is not her child."},
  {"question": "Is it medically plausible for a 101-year-old to give birth?",
   "answer": "No, giving birth at 101 is considered medically implausible. The verified Guinness World Record for the oldest mother is Maria del Carmen Bousada Lara, who gave birth at the age of 66."},
  {"question": "What is the origin of the story about a 101-year-old Italian woman named Anatolia Vertadella giving birth?",
   "answer": "The story is a complete fabrication that originated from 'World News Daily Report,' a website known for publishing satirical and fictional content."},
  {"question": "When did the woman in the photo, Rosa Camfield, pass away?",
   "answer": "Rosa Camfield passed away in March 2015, shortly after the photo was taken, which was years before many versions of the false claim began circulating."}]})";

const char* kPublishedVerdictOutput = R"({
  "questions": [
    {"question": "Who are the people in the photograph and what is their actual relationship?",
     "answer": "The photograph shows 101-year-old Rosa Camfield holding her great-granddaughter, Kaylee, in March 2015. The baby is not her child."},
    {"question": "What is the origin of the story about a 101-year-old Italian woman named Anatolia Vertadella giving birth?",
     "answer": "The story is a complete fabrication that originated from 'World News Daily Report,' a website known for publishing satirical and fictional content."},
    {"question": "Is it medically plausible for a 101-year-old to give birth?",
     "answer": "No, giving birth at 101 is considered medically implausible. The verified Guinness World Record for the oldest mother is Maria del Carmen Bousada Lara, who gave birth at the age of 66."}],
  "veracity_verdict": "Refuted",
  "justification": "The claim is a complete fabrication. The photograph does not show a mother and her newborn child, but rather 101-year-old Rosa Camfield holding her great-granddaughter, Kaylee, in March 2015."
})";

bool appears_in_order(const std::string& text, const std::vector<std::string>& parts)
{
    std::size_t from = 0;
    for (const auto& p : parts) {
        auto at = text.find(p, from);
        if (at == std::string::npos) {
            return false;
        }
        from = at + p.size();
    }
    return true;
}

}  // namespace

TEST(Prompts, AnalysisPromptsCarryTheirHeaders)
{
    TempDir dir;
    auto claim = sample_claim(dir, 1);
    auto bundle = full_bundle(dir);
    for (auto kind : {AgentKind::TT, AgentKind::IT, AgentKind::CM}) {
        auto text = build_analysis_prompt(kind, claim, bundle).render_text();
        for (const auto& h : required_headers(kind)) {
            EXPECT_NE(text.find(h), std::string::npos) << to_string(kind) << " lacks " << h;
        }
    }
}

TEST(Prompts, SourcesAreNumberedWithDomains)
{
    TempDir dir;
    auto text = build_analysis_prompt(AgentKind::TT, sample_claim(dir, 1), full_bundle(dir)).render_text();
    EXPECT_NE(text.find("[1] (snopes.com) Rosa Camfield held her great-granddaughter.\n"), std::string::npos);
    EXPECT_NE(text.find("[2] (wndr.example.com) A 101-year-old"), std::string::npos);
    EXPECT_EQ(text.find("[3] ("), std::string::npos);

    auto cm = build_analysis_prompt(AgentKind::CM, sample_claim(dir, 1), full_bundle(dir)).render_text();
    EXPECT_NE(cm.find("[3] (news.example.org) The photo was shared"), std::string::npos);
}

TEST(Prompts, MissingClaimantRendersUnknown)
{
    TempDir dir;
    auto text = build_analysis_prompt(AgentKind::TT, sample_claim(dir, 0, false), full_bundle(dir)).render_text();
    EXPECT_NE(text.find("- Claimant (Speaker): Unknown\n"), std::string::npos);
    EXPECT_NE(text.find("- Claim Date: 2024-01-15\n"), std::string::npos);
    EXPECT_NE(text.find("- Claim Images: None\n"), std::string::npos);
}

TEST(Prompts, CrossModalPlaceholdersAreConsecutive)
{
    TempDir dir;
    auto p = build_analysis_prompt(AgentKind::CM, sample_claim(dir, 2), full_bundle(dir, 3));
    EXPECT_EQ(p.image_numbers(PromptSegment::Type::ClaimImage), (std::vector<int>{1, 2}));
    EXPECT_EQ(p.image_numbers(PromptSegment::Type::RetrievedImage), (std::vector<int>{1, 2, 3}));
    auto text = p.render_text();
    EXPECT_TRUE(appears_in_order(text, {"[CLAIM_IMG_1]", "[CLAIM_IMG_2]", "[RETRIEVED_IMG_1]", "[RETRIEVED_IMG_2]",
                                        "[RETRIEVED_IMG_3]"}));
    EXPECT_NE(text.find("[RETRIEVED_IMG_1] (photos.example.com)"), std::string::npos);

    auto request = p.to_request("m", PipelineConfig{});
    auto images = std::count_if(request.segments.begin(), request.segments.end(),
                                [](const Segment& s) { return s.type == Segment::Type::Image; });
    EXPECT_EQ(images, 5);
    ASSERT_GE(request.segments.size(), 2U);
    for (std::size_t i = 0; i + 1 < request.segments.size(); ++i) {
        if (request.segments[i + 1].type == Segment::Type::Image) {
            ASSERT_EQ(request.segments[i].type, Segment::Type::Text);
            auto& t = request.segments[i].text;
            EXPECT_EQ(t.back(), ']');
        }
    }
}

TEST(Prompts, UnreadableImageKeepsPlaceholderOnly)
{
    TempDir dir;
    auto claim = sample_claim(dir, 1);
    claim.images[0].location = (dir / "missing.png").string();
    auto p = build_analysis_prompt(AgentKind::TT, claim, full_bundle(dir));
    EXPECT_NE(p.render_text().find("[CLAIM_IMG_1]"), std::string::npos);
    auto request = p.to_request("m", PipelineConfig{});
    EXPECT_TRUE(std::none_of(request.segments.begin(), request.segments.end(),
                             [](const Segment& s) { return s.type == Segment::Type::Image; }));
}

TEST(Prompts, EmptyEvidenceSetUsesMarker)
{
    TempDir dir;
    auto bundle = full_bundle(dir, 0);
    bundle.image_text->clear();
    auto it = build_analysis_prompt(AgentKind::IT, sample_claim(dir, 1), bundle).render_text();
    EXPECT_NE(it.find(std::string(kNoSourcesMarker)), std::string::npos);
    auto cm = build_analysis_prompt(AgentKind::CM, sample_claim(dir, 1), bundle).render_text();
    EXPECT_NE(cm.find("- Retrieved Source Images: " + std::string(kNoSourcesMarker)), std::string::npos);
}

TEST(Prompts, AbsentEvidenceSetIsRejected)
{
    TempDir dir;
    auto claim = sample_claim(dir, 1);
    auto bundle = full_bundle(dir);
    bundle.image_text.reset();
    EXPECT_NO_THROW(build_analysis_prompt(AgentKind::TT, claim, bundle));
    EXPECT_EQ(code_of([&] { build_analysis_prompt(AgentKind::IT, claim, bundle); }), ErrorCode::MissingEvidenceSet);
    EXPECT_EQ(code_of([&] { build_analysis_prompt(AgentKind::CM, claim, bundle); }), ErrorCode::MissingEvidenceSet);
    EXPECT_EQ(code_of([&] { build_analysis_prompt(AgentKind::QA, claim, bundle); }), ErrorCode::InvalidArgument);
}

TEST(Prompts, LongSourcesAreCapped)
{
    TempDir dir;
    auto bundle = full_bundle(dir);
    bundle.text_text->front().combined_text = std::string(10000, 'x');
    PipelineConfig cfg;
    cfg.evidence_char_cap = 100;
    auto text = build_analysis_prompt(AgentKind::TT, sample_claim(dir, 1), bundle, cfg).render_text();
    EXPECT_NE(text.find("[1] (snopes.com) " + std::string(100, 'x') + "...\n"), std::string::npos);
}

TEST(Prompts, QaPromptQuotesReportsAndHistory)
{
    TempDir dir;
    QASet history;
    history.pairs = {{"Who took the photo?", "A family member.", 1, 1}, {"When?", "March 2015.", 1, 2}};
    auto text = build_qa_prompt(sample_claim(dir, 1), sample_reports(), history, {}).render_text();
    for (const auto& h : required_headers(AgentKind::QA)) {
        EXPECT_NE(text.find(h), std::string::npos) << h;
    }
    EXPECT_TRUE(appears_in_order(text, {"[Agent 1 Output]:\n> ## 1. Key Verification Facts\n",
                                        "[Agent 2 Output]:\n", "[Agent 3 Output]:\n"}));
    EXPECT_NE(text.find("Q: Who took the photo?\nA: A family member.\nQ: When?\nA: March 2015.\n"), std::string::npos);
    EXPECT_EQ(text.find(std::string(kNoHistoryMarker)), std::string::npos);
    EXPECT_NE(text.find("Formulate 5 high-impact QA pairs"), std::string::npos);

    auto first = build_qa_prompt(sample_claim(dir, 1), sample_reports(), QASet{}, {}).render_text();
    EXPECT_NE(first.find(std::string(kNoHistoryMarker)), std::string::npos);
}

TEST(Prompts, FewShotBlocksKeepSelectionOrder)
{
    TempDir dir;
    std::vector<FewShotExample> shots;
    for (int i = 0; i < 3; ++i) {
        shots.push_back({"Exemplar claim " + std::to_string(i + 1), kAllLabels[static_cast<std::size_t>(i)],
                         {{"Q" + std::to_string(i + 1) + "?", "A" + std::to_string(i + 1), 1, 1}},
                         "Reason " + std::to_string(i + 1)});
    }
    auto text = build_qa_prompt(sample_claim(dir, 1), sample_reports(), QASet{}, shots).render_text();
    EXPECT_TRUE(appears_in_order(
        text, {"Example 1:\n- Claim: Exemplar claim 1\n- Verdict: Supported\n- Question: Q1?\n  Answer: A1\n"
               "- Justification: Reason 1\n",
               "Example 2:\n- Claim: Exemplar claim 2\n- Verdict: Refuted\n",
               "Example 3:\n- Claim: Exemplar claim 3\n- Verdict: Not Enough Evidence\n"}));

    shots.push_back(shots.front());
    EXPECT_EQ(code_of([&] { build_qa_prompt(sample_claim(dir, 1), sample_reports(), QASet{}, shots); }),
              ErrorCode::InvalidArgument);
}

TEST(Prompts, RenderingIsDeterministic)
{
    TempDir dir;
    auto claim = sample_claim(dir, 2);
    auto bundle = full_bundle(dir);
    for (auto kind : {AgentKind::TT, AgentKind::IT, AgentKind::CM}) {
        auto a = build_analysis_prompt(kind, claim, bundle).to_request("m", PipelineConfig{});
        auto b = build_analysis_prompt(kind, claim, bundle).to_request("m", PipelineConfig{});
        EXPECT_EQ(a.segments, b.segments);
    }
    EXPECT_EQ(build_verdict_prompt(claim, numbered_set(4)).render_text(),
              build_verdict_prompt(claim, numbered_set(4)).render_text());
}

TEST(Prompts, VerdictPromptListsPairs)
{
    TempDir dir;
    PipelineConfig cfg;
    cfg.verdict_select_k = 7;
    auto text = build_verdict_prompt(sample_claim(dir, 1), numbered_set(3), cfg).render_text();
    for (const auto& h : required_headers(AgentKind::V)) {
        EXPECT_NE(text.find(h), std::string::npos) << h;
    }
    EXPECT_NE(text.find("1. Q: Question number 1?\n   A: Answer 1\n2. Q: Question number 2?\n"), std::string::npos);
    EXPECT_NE(text.find("select the 7 most relevant"), std::string::npos);
    for (auto label : kAllLabels) {
        EXPECT_NE(text.find("   - " + std::string(canonical_name(label)) + "\n"), std::string::npos);
    }
}

TEST(Prompts, RandomBundlesKeepHeadersAndNumbering)
{
    TempDir dir;
    Gen gen(11);
    for (int round = 0; round < 40; ++round) {
        Claim claim;
        claim.id = "r" + std::to_string(round);
        claim.text = gen.sentence(3, 20);
        if (gen.coin()) {
            claim.claimant = gen.sentence(1, 3);
        }
        int claim_images = gen.integer(0, 3);
        for (int i = 0; i < claim_images; ++i) {
            claim.images.push_back({"i", (dir / ("none" + std::to_string(i))).string(), std::nullopt});
        }
        EvidenceBundle b;
        b.text_text.emplace();
        b.image_text.emplace();
        b.images.emplace();
        for (int i = gen.integer(0, 6); i > 0; --i) {
            b.text_text->push_back(text_item("https://t.example.com/" + gen.word(), gen.sentence(1, 40)));
        }
        for (int i = gen.integer(0, 6); i > 0; --i) {
            b.image_text->push_back(text_item("https://i.example.com/" + gen.word(), gen.sentence(1, 40)));
        }
        int retrieved = gen.integer(0, 6);
        for (int i = 0; i < retrieved; ++i) {
            ImageEvidenceItem item;
            item.image = ImageRef{"x", "/nonexistent/x.png", std::nullopt};
            item.source_url = "https://img.example.com/" + gen.word();
            b.images->push_back(item);
        }
        std::vector<int> claim_seq(static_cast<std::size_t>(claim_images));
        std::iota(claim_seq.begin(), claim_seq.end(), 1);
        std::vector<int> retrieved_seq(static_cast<std::size_t>(retrieved));
        std::iota(retrieved_seq.begin(), retrieved_seq.end(), 1);
        for (auto kind : {AgentKind::TT, AgentKind::IT, AgentKind::CM}) {
            auto p = build_analysis_prompt(kind, claim, b);
            auto text = p.render_text();
            for (const auto& h : required_headers(kind)) {
                EXPECT_NE(text.find(h), std::string::npos);
            }
            EXPECT_EQ(p.image_numbers(PromptSegment::Type::ClaimImage), claim_seq);
            EXPECT_EQ(p.image_numbers(PromptSegment::Type::RetrievedImage),
                      kind == AgentKind::CM ? retrieved_seq : std::vector<int>{});
        }
    }
}

TEST(ReportSections, SplitsNumberedHeaders)
{
    auto s = parse_report_sections("intro\n## 1. Key Verification Facts\n* a\n* b\n\n## 2. Missing Information\n"
                                   "* gap\n## Analysis\ntext\n");
    ASSERT_TRUE(s.has_value());
    EXPECT_EQ(s->at("Key Verification Facts"), "* a\n* b");
    EXPECT_EQ(s->at("Missing Information"), "* gap");
    EXPECT_EQ(s->at("Analysis"), "text");
    EXPECT_FALSE(parse_report_sections("no headers at all").has_value());
}

TEST(ParseQa, FencedOutputWithFivePairs)
{
    nlohmann::json j;
    for (int i = 0; i < 5; ++i) {
        j["qa_pairs"].push_back({{"question", "q" + std::to_string(i)}, {"answer", "a" + std::to_string(i)}});
    }
    auto parsed = parse_qa_output("Sure.\n```json\n" + j.dump(2) + "\n```\nDone.", 5);
    ASSERT_EQ(parsed.pairs.size(), 5U);
    EXPECT_FALSE(parsed.count_deviation);
    EXPECT_EQ(parsed.pairs[3].question, "q3");
    EXPECT_EQ(parsed.pairs[3].answer, "a3");
}

TEST(ParseQa, PublishedExampleOutput)
{
    auto parsed = parse_qa_output(kPublishedQaOutput, 5);
    ASSERT_EQ(parsed.pairs.size(), 4U);
    EXPECT_TRUE(parsed.count_deviation);
    EXPECT_EQ(parsed.pairs[0].question,
              "Who are the people in the photograph and what is their actual relationship?");
    EXPECT_EQ(parsed.pairs[3].question, "When did the woman in the photo, Rosa Camfield, pass away?");
}

TEST(ParseQa, FormatTemplateParses)
{
    auto parsed = parse_qa_output(R"({"qa_pairs": [{"question": "<Question 1>", "answer": "<Full statement answer 1>"}, )"
                                  R"({"question": "<Question 2>", "answer": "<Full statement answer 2>"}]})",
                                  2);
    EXPECT_EQ(parsed.pairs.size(), 2U);
    EXPECT_FALSE(parsed.count_deviation);
}

TEST(ParseQa, RecoversObjectAfterBrokenBraces)
{
    auto parsed = parse_qa_output(R"(Thinking {not json} then {"qa_pairs": [{"question": "q", "answer": "a}"}]})", 1);
    ASSERT_EQ(parsed.pairs.size(), 1U);
    EXPECT_EQ(parsed.pairs[0].answer, "a}");
}

TEST(ParseQa, MalformedOutputsFail)
{
    for (const char* raw : {"I cannot answer that.", R"({"qa_pairs": []})", R"({"qa_pairs": "none"})",
                            R"({"qa_pairs": [{"question": "q"}]})", R"({"qa_pairs": [{"question": " ", "answer": "a"}]})",
                            R"({"other": 1})", ""}) {
        EXPECT_EQ(code_of([&] { parse_qa_output(raw, 5); }), ErrorCode::ParseFailure) << raw;
    }
}

TEST(ParseVerdict, PublishedExampleOutput)
{
    auto v = parse_verdict_output(kPublishedVerdictOutput);
    EXPECT_EQ(v.label, Label::Refuted);
    ASSERT_EQ(v.echoed.size(), 3U);
    EXPECT_EQ(v.echoed[2].question, "Is it medically plausible for a 101-year-old to give birth?");
    EXPECT_EQ(v.justification.rfind("The claim is a complete fabrication.", 0), 0U);
}

TEST(ParseVerdict, RejectsBadLabelAndShape)
{
    EXPECT_EQ(code_of([] { parse_verdict_output(verdict_json({"q"}, "maybe")); }), ErrorCode::LabelInvalid);
    EXPECT_EQ(code_of([] { parse_verdict_output(R"({"veracity_verdict": "Refuted"})"); }), ErrorCode::ParseFailure);
    EXPECT_EQ(code_of([] { parse_verdict_output(R"({"veracity_verdict": 3, "justification": "j", "questions": []})"); }),
              ErrorCode::ParseFailure);
    EXPECT_EQ(code_of([] { parse_verdict_output("no json"); }), ErrorCode::ParseFailure);
    EXPECT_EQ(parse_verdict_output(verdict_json({}, "not enough evidence")).label, Label::NotEnoughEvidence);
}

TEST(GenerateQa, FourIterationsOfFive)
{
    TempDir dir;
    ScriptedBackend backend;
    auto set = generate_qa(sample_claim(dir, 1), sample_reports(), {}, PipelineConfig{}, backend);
    ASSERT_EQ(set.size(), 20U);
    EXPECT_EQ(set.retries, 0);
    EXPECT_FALSE(set.count_deviation);
    EXPECT_EQ(backend.generate_calls(), 4);
    for (std::size_t i = 0; i < set.pairs.size(); ++i) {
        EXPECT_EQ(set.pairs[i].iteration, static_cast<int>(i / 5) + 1);
        EXPECT_EQ(set.pairs[i].position, static_cast<int>(i % 5) + 1);
        EXPECT_EQ(set.pairs[i].question.rfind("Q" + std::to_string(i + 1) + ":", 0), 0U);
    }
}

TEST(GenerateQa, LaterIterationsSeeEarlierPairs)
{
    TempDir dir;
    std::vector<std::string> prompts;
    std::mutex mu;
    ScriptedBackend backend([&](const ModelRequest& r, int) -> std::optional<ModelResponse> {
        std::lock_guard lock(mu);
        prompts.push_back(prompt_text(r));
        return std::nullopt;
    });
    auto set = generate_qa(sample_claim(dir, 1), sample_reports(), {}, PipelineConfig{}, backend);
    ASSERT_EQ(prompts.size(), 4U);
    EXPECT_NE(prompts[0].find(std::string(kNoHistoryMarker)), std::string::npos);
    for (std::size_t it = 1; it < 4; ++it) {
        for (std::size_t k = 0; k < 5 * it; ++k) {
            EXPECT_NE(prompts[it].find("Q: " + set.pairs[k].question + "\nA: " + set.pairs[k].answer + "\n"),
                      std::string::npos);
        }
        EXPECT_EQ(prompts[it].find(set.pairs[5 * it].question), std::string::npos);
    }
}

TEST(GenerateQa, RepairRetriesAreCounted)
{
    TempDir dir;
    std::vector<std::string> prompts;
    ScriptedBackend backend([&](const ModelRequest& r, int call) -> std::optional<ModelResponse> {
        prompts.push_back(prompt_text(r));
        if (call <= 2) {
            return reply("I cannot answer that.");
        }
        return std::nullopt;
    });
    auto set = generate_qa(sample_claim(dir, 1), sample_reports(), {}, PipelineConfig{}, backend);
    EXPECT_EQ(set.size(), 20U);
    EXPECT_EQ(set.retries, 2);
    EXPECT_EQ(backend.generate_calls(), 6);
    EXPECT_EQ(prompts[0].find("# Repair"), std::string::npos);
    EXPECT_NE(prompts[1].find("# Repair"), std::string::npos);
    EXPECT_NE(prompts[2].find("# Repair"), std::string::npos);
}

TEST(GenerateQa, NonStopFinishIsRetried)
{
    TempDir dir;
    ScriptedBackend backend([](const ModelRequest&, int call) -> std::optional<ModelResponse> {
        if (call == 1) {
            return reply("", "content_filter");
        }
        return std::nullopt;
    });
    auto set = generate_qa(sample_claim(dir, 1), sample_reports(), {}, PipelineConfig{}, backend);
    EXPECT_EQ(set.size(), 20U);
    EXPECT_EQ(set.retries, 1);
}

TEST(GenerateQa, ExhaustedRetriesNameTheIteration)
{
    TempDir dir;
    ScriptedBackend always_bad([](const ModelRequest&, int) { return std::optional(reply("nope")); });
    try {
        generate_qa(sample_claim(dir, 1), sample_reports(), {}, PipelineConfig{}, always_bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::QaGenerationFailed);
        EXPECT_EQ(e.detail().rfind("iteration 1:", 0), 0U);
    }
    EXPECT_EQ(always_bad.generate_calls(), 3);

    ScriptedBackend third_bad([](const ModelRequest&, int call) -> std::optional<ModelResponse> {
        if (call > 2) {
            return reply("nope");
        }
        return std::nullopt;
    });
    try {
        generate_qa(sample_claim(dir, 1), sample_reports(), {}, PipelineConfig{}, third_bad);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::QaGenerationFailed);
        EXPECT_EQ(e.detail().rfind("iteration 3:", 0), 0U);
    }
}

TEST(GenerateQa, ExtraPairsAreTruncated)
{
    TempDir dir;
    ScriptedBackend backend([](const ModelRequest&, int call) {
        nlohmann::json j;
        for (int i = 0; i < 7; ++i) {
            j["qa_pairs"].push_back({{"question", "c" + std::to_string(call) + "q" + std::to_string(i)}, {"answer", "a"}});
        }
        return std::optional(reply(j.dump()));
    });
    auto set = generate_qa(sample_claim(dir, 1), sample_reports(), {}, PipelineConfig{}, backend);
    EXPECT_EQ(set.size(), 20U);
    EXPECT_TRUE(set.count_deviation);
    EXPECT_EQ(set.pairs[5].question, "c2q0");
}

TEST(GenerateQa, BackendErrorsPropagate)
{
    TempDir dir;
    DownBackend down;
    EXPECT_EQ(code_of([&] { generate_qa(sample_claim(dir, 1), sample_reports(), {}, PipelineConfig{}, down); }),
              ErrorCode::BackendUnavailable);
}

TEST(Verdict, PublishedExampleSelectsFromTheSet)
{
    TempDir dir;
    QASet set;
    auto parsed = parse_qa_output(kPublishedQaOutput, 4);
    for (std::size_t i = 0; i < parsed.pairs.size(); ++i) {
        auto qa = parsed.pairs[i];
        qa.position = static_cast<int>(i) + 1;
        set.pairs.push_back(qa);
    }
    ScriptedBackend backend([](const ModelRequest&, int) { return std::optional(reply(kPublishedVerdictOutput)); });
    auto v = predict_verdict(sample_claim(dir, 1), set, PipelineConfig{}, backend);
    EXPECT_EQ(v.label, Label::Refuted);
    ASSERT_EQ(v.selected.size(), 3U);
    EXPECT_EQ(v.selected[0], set.pairs[0]);
    EXPECT_EQ(v.selected[1], set.pairs[2]);
    EXPECT_EQ(v.selected[2], set.pairs[1]);
    EXPECT_EQ(backend.generate_calls(), 1);
}

TEST(Verdict, SelectionIsCappedAtTen)
{
    TempDir dir;
    auto set = numbered_set(20);
    ScriptedBackend backend([&](const ModelRequest&, int) {
        std::vector<std::string> qs;
        for (int i = 0; i < 14; ++i) {
            qs.push_back(set.pairs[static_cast<std::size_t>(19 - i)].question);
        }
        return std::optional(reply(verdict_json(qs, "Supported")));
    });
    auto v = predict_verdict(sample_claim(dir, 1), set, PipelineConfig{}, backend);
    ASSERT_EQ(v.selected.size(), 10U);
    EXPECT_EQ(v.selected.front(), set.pairs[19]);
    EXPECT_EQ(v.selected.back(), set.pairs[10]);
}

TEST(Verdict, NormalizedQuestionsMatch)
{
    TempDir dir;
    auto set = numbered_set(3);
    ScriptedBackend backend([](const ModelRequest&, int) {
        return std::optional(reply(verdict_json({"  QUESTION   number 2? ", "question number 2?"}, "refuted")));
    });
    auto v = predict_verdict(sample_claim(dir, 1), set, PipelineConfig{}, backend);
    ASSERT_EQ(v.selected.size(), 1U);
    EXPECT_EQ(v.selected[0], set.pairs[1]);
    EXPECT_EQ(v.label, Label::Refuted);
}

TEST(Verdict, InvalidLabelExhaustsRetries)
{
    TempDir dir;
    ScriptedBackend backend([](const ModelRequest&, int) {
        return std::optional(reply(verdict_json({"Question number 1?"}, "maybe")));
    });
    EXPECT_EQ(code_of([&] { predict_verdict(sample_claim(dir, 1), numbered_set(2), PipelineConfig{}, backend); }),
              ErrorCode::VerdictFailed);
    EXPECT_EQ(backend.generate_calls(), 3);
}

TEST(Verdict, InvalidLabelRecoversOnRetry)
{
    TempDir dir;
    ScriptedBackend backend([](const ModelRequest&, int call) {
        return std::optional(reply(verdict_json({"Question number 1?"}, call == 1 ? "True" : "Supported")));
    });
    auto v = predict_verdict(sample_claim(dir, 1), numbered_set(2), PipelineConfig{}, backend);
    EXPECT_EQ(v.label, Label::Supported);
    EXPECT_EQ(backend.generate_calls(), 2);
}

TEST(Verdict, UnknownSelectionGetsOneRepair)
{
    TempDir dir;
    std::vector<std::string> prompts;
    ScriptedBackend once([&](const ModelRequest& r, int call) {
        prompts.push_back(prompt_text(r));
        return std::optional(reply(verdict_json({call == 1 ? "Invented question?" : "Question number 1?"}, "Refuted")));
    });
    auto v = predict_verdict(sample_claim(dir, 1), numbered_set(2), PipelineConfig{}, once);
    EXPECT_EQ(v.selected.size(), 1U);
    ASSERT_EQ(prompts.size(), 2U);
    EXPECT_NE(prompts[1].find("Invented question?"), std::string::npos);

    ScriptedBackend always([](const ModelRequest&, int) {
        return std::optional(reply(verdict_json({"Invented question?"}, "Refuted")));
    });
    EXPECT_EQ(code_of([&] { predict_verdict(sample_claim(dir, 1), numbered_set(2), PipelineConfig{}, always); }),
              ErrorCode::SelectedNotInSet);
    EXPECT_EQ(always.generate_calls(), 2);
}

TEST(Verdict, EmptySetIsRejected)
{
    TempDir dir;
    ScriptedBackend backend;
    EXPECT_EQ(code_of([&] { predict_verdict(sample_claim(dir, 1), QASet{}, PipelineConfig{}, backend); }),
              ErrorCode::InvalidArgument);
    EXPECT_EQ(backend.generate_calls(), 0);
}

TEST(Verdict, StubSelectsSubsetWithHashedLabel)
{
    TempDir dir;
    Gen gen(5);
    for (int round = 0; round < 20; ++round) {
        auto claim = sample_claim(dir, 0);
        claim.text = gen.sentence(3, 12);
        QASet set;
        for (int i = gen.integer(1, 20); i > 0; --i) {
            set.pairs.push_back({gen.sentence(2, 8) + " " + std::to_string(i) + "?", gen.sentence(2, 10), 1, i});
        }
        ScriptedBackend backend;
        auto v = predict_verdict(claim, set, PipelineConfig{}, backend);
        EXPECT_EQ(v.label, kAllLabels[fnv1a64(claim.text) % 4]);
        EXPECT_LE(v.selected.size(), 10U);
        EXPECT_EQ(v.selected.size(), std::min<std::size_t>(10, set.size()));
        for (const auto& qa : v.selected) {
            EXPECT_TRUE(set.contains(qa));
        }
    }
}

TEST(Analysis, StubReportsHaveExpectedSections)
{
    TempDir dir;
    ScriptedBackend backend;
    auto reports = run_analysis_agents(sample_claim(dir, 1), full_bundle(dir), PipelineConfig{}, backend);
    EXPECT_EQ(backend.generate_calls(), 3);
    ASSERT_TRUE(reports.tt.sections && reports.it.sections && reports.cm.sections);
    EXPECT_TRUE(reports.tt.sections->count("Key Verification Facts"));
    EXPECT_TRUE(reports.it.sections->count("Missing Context"));
    EXPECT_TRUE(reports.cm.sections->count("Conflict Alert"));
    EXPECT_NE(reports.tt.sections->at("Key Verification Facts").find("(snopes.com)"), std::string::npos);
}

TEST(Analysis, FailingAgentIsNamed)
{
    TempDir dir;
    ScriptedBackend backend([](const ModelRequest& r, int) -> std::optional<ModelResponse> {
        if (prompt_text(r).find("## 2. All Retrieved Evidence") != std::string::npos) {
            return reply("", "error");
        }
        return std::nullopt;
    });
    try {
        run_analysis_agents(sample_claim(dir, 1), full_bundle(dir), PipelineConfig{}, backend);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "analysis");
        EXPECT_EQ(e.code(), ErrorCode::BackendMalformed);
        EXPECT_EQ(e.detail().rfind("agent CM:", 0), 0U);
    }
}

TEST(Analysis, MissingSetFailsBeforeAnyCall)
{
    TempDir dir;
    auto bundle = full_bundle(dir);
    bundle.images.reset();
    ScriptedBackend backend;
    try {
        run_analysis_agents(sample_claim(dir, 1), bundle, PipelineConfig{}, backend);
        FAIL();
    } catch (const StageError& e) {
        EXPECT_EQ(e.stage(), "analysis");
        EXPECT_EQ(e.code(), ErrorCode::MissingEvidenceSet);
        EXPECT_NE(e.detail().find("agent CM"), std::string::npos);
    }
    EXPECT_EQ(backend.generate_calls(), 0);
}
