#include <fmt/format.h>

#include "veristack/agents.hpp"
#include "veristack/errors.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

std::string_view to_string(AgentKind kind)
{
    switch (kind) {
    case AgentKind::TT: return "TT";
    case AgentKind::IT: return "IT";
    case AgentKind::CM: return "CM";
    case AgentKind::QA: return "QA";
    case AgentKind::V: return "V";
    }
    return "?";
}

std::string PromptSegment::placeholder() const
{
    switch (type) {
    case Type::ClaimImage: return fmt::format("[CLAIM_IMG_{}]", number);
    case Type::RetrievedImage: return fmt::format("[RETRIEVED_IMG_{}]", number);
    case Type::Text: break;
    }
    return text;
}

PromptTemplate& PromptTemplate::text(std::string_view s)
{
    if (!segments_.empty() && segments_.back().type == PromptSegment::Type::Text) {
        segments_.back().text += s;
    } else {
        segments_.push_back(PromptSegment{PromptSegment::Type::Text, std::string(s), 0, std::nullopt});
    }
    return *this;
}

PromptTemplate& PromptTemplate::claim_image(int number, std::optional<std::string> b64)
{
    segments_.push_back(PromptSegment{PromptSegment::Type::ClaimImage, {}, number, std::move(b64)});
    return *this;
}

PromptTemplate& PromptTemplate::retrieved_image(int number, std::optional<std::string> b64)
{
    segments_.push_back(PromptSegment{PromptSegment::Type::RetrievedImage, {}, number, std::move(b64)});
    return *this;
}

std::string PromptTemplate::render_text() const
{
    std::string out;
    for (const auto& s : segments_) {
        out += s.placeholder();
    }
    return out;
}

std::vector<int> PromptTemplate::image_numbers(PromptSegment::Type type) const
{
    std::vector<int> out;
    for (const auto& s : segments_) {
        if (s.type == type) {
            out.push_back(s.number);
        }
    }
    return out;
}

ModelRequest PromptTemplate::to_request(const std::string& model, const PipelineConfig& cfg) const
{
    ModelRequest r;
    r.model = model;
    r.max_tokens = cfg.max_tokens;
    r.temperature = cfg.temperature;
    std::string pending;
    for (const auto& s : segments_) {
        pending += s.placeholder();
        if (s.type != PromptSegment::Type::Text && s.image_b64) {
            r.segments.push_back(Segment::of_text(std::move(pending)));
            pending.clear();
            r.segments.push_back(Segment::of_image(*s.image_b64));
        }
    }
    if (!pending.empty()) {
        r.segments.push_back(Segment::of_text(std::move(pending)));
    }
    return r;
}

std::vector<std::string> required_headers(AgentKind kind)
{
    std::vector<std::string> h = {"# Role", "# Input Data", "## 1. The Claim (Target for Verification)",
                                  "# Instructions"};
    switch (kind) {
    case AgentKind::TT:
        h.insert(h.end(), {"## 2. Retrieved Evidence", "# Output Format", "## 1. Key Verification Facts",
                           "## 2. Missing Information", "## 3. Analysis"});
        break;
    case AgentKind::IT:
        h.insert(h.end(), {"## 2. Retrieved Evidence", "# Output Format", "## 1. Visual-Text Corroboration",
                           "## 2. Missing Context", "## 3. Analysis"});
        break;
    case AgentKind::CM:
        h.insert(h.end(), {"## 2. All Retrieved Evidence", "# Output Format", "## 1. Evidence Consistency Check",
                           "## 2. Global Context Summary", "## 3. Conflict Alert"});
        break;
    case AgentKind::QA:
        h.insert(h.end(), {"## 2. Preliminary Analyses", "## 3. Few-shot Learning Examples",
                           "## 4. Previously Generated QA Pairs", "## Synthesize Diagnostic QAs (The Reasoning Basis)",
                           "# Output Format (JSON Only)", "\"qa_pairs\""});
        break;
    case AgentKind::V:
        h.insert(h.end(), {"## 2. Generated Question-Answer Pairs", "# Output Format (JSON Only)", "\"questions\"",
                           "\"veracity_verdict\"", "\"justification\""});
        break;
    }
    return h;
}

namespace {

std::string one_line(std::string_view s)
{
    return collapse_whitespace(s);
}

void claim_block(PromptTemplate& p, const Claim& claim)
{
    p.text("## 1. The Claim (Target for Verification)\n");
    p.text("- Claimant (Speaker): " + (claim.claimant && !trim(*claim.claimant).empty() ? one_line(*claim.claimant)
                                                                                          : std::string("Unknown")) +
           "\n");
    p.text("- Claim Date: " +
           (claim.date && !trim(*claim.date).empty() ? one_line(*claim.date) : std::string("Unknown")) + "\n");
    p.text("- Claim Text: " + one_line(claim.text) + "\n");
    p.text("- Claim Images: ");
    if (claim.images.empty()) {
        p.text("None");
    }
    for (std::size_t i = 0; i < claim.images.size(); ++i) {
        if (i > 0) {
            p.text(", ");
        }
        p.claim_image(static_cast<int>(i) + 1, load_image_b64(claim.images[i].location));
    }
    p.text("\n\n");
}

std::string source_domain(const std::string& url)
{
    auto d = display_domain(url);
    return d.empty() ? std::string("unknown source") : d;
}

// Numbered "[n] (domain) text" lines starting at `first`; returns the next number.
int text_sources(PromptTemplate& p, const std::vector<TextEvidenceItem>& items, int first, const PipelineConfig& cfg)
{
    for (const auto& item : items) {
        auto body = truncate_scalars(one_line(item.combined_text), static_cast<std::size_t>(cfg.evidence_char_cap));
        p.text(fmt::format("[{}] ({}) {}\n", first++, source_domain(item.center.doc_url), body));
    }
    return first;
}

void role(PromptTemplate& p, std::string_view description)
{
    p.text("# Role\n");
    p.text(description);
    p.text("\n\n# Input Data\n");
}

}  // namespace

PromptTemplate build_analysis_prompt(AgentKind kind, const Claim& claim, const EvidenceBundle& evidence,
                                     const PipelineConfig& cfg)
{
    auto require = [&](bool present, const char* set) {
        if (!present) {
            throw Error(ErrorCode::MissingEvidenceSet,
                        fmt::format("{} prompt needs the {} evidence set", to_string(kind), set));
        }
    };
    PromptTemplate p(kind);
    switch (kind) {
    case AgentKind::TT: {
        require(evidence.text_text.has_value(), "text-query text");
        role(p, "You are an expert AI Fact-Checker. Your specific task is to verify the textual assertions of a "
                "claim using the provided text-based sources.");
        claim_block(p, claim);
        p.text("(Note: Use images for context, but focus verification on the text.)\n\n");
        p.text("## 2. Retrieved Evidence\n- Retrieved Text Sources:\n");
        if (evidence.text_text->empty()) {
            p.text(std::string(kNoSourcesMarker) + "\n");
        }
        text_sources(p, *evidence.text_text, 1, cfg);
        p.text("\n# Instructions\n"
               "1. Contextual Understanding: Analyze the Claim Text in conjunction with the Claim Images to fully "
               "understand the user's intent.\n"
               "2. Textual Verification: Compare the factual claims made in the Claim Text against the Retrieved "
               "Text Sources. Look for: Factual support (dates, names, events); Contradictions or logical "
               "fallacies.\n"
               "3. Identify Information Gaps: Explicitly state what information is missing from the sources that "
               "is needed to verify the text claim fully.\n\n"
               "# Output Format\n"
               "## 1. Key Verification Facts\n"
               "* [Fact]: (Evidence from sources supporting/refuting the text claim)\n\n"
               "## 2. Missing Information\n"
               "* [Gap]: (Crucial info missing from sources)\n\n"
               "## 3. Analysis\n"
               "(Summary of how text sources align with the claim text)\n");
        break;
    }
    case AgentKind::IT: {
        require(evidence.image_text.has_value(), "reverse-image-search text");
        role(p, "You are an expert AI Fact-Checker. Your specific task is to verify the visual content of the claim "
                "using the provided text-based sources.");
        claim_block(p, claim);
        p.text("(Note: Use claim text to understand what the image purports to show.)\n\n");
        p.text("## 2. Retrieved Evidence\n- Retrieved Text Sources:\n");
        if (evidence.image_text->empty()) {
            p.text(std::string(kNoSourcesMarker) + "\n");
        }
        text_sources(p, *evidence.image_text, 1, cfg);
        p.text("\n# Instructions\n"
               "1. Visual Analysis: Analyze the visual elements in the Claim Images (landmarks, people, signs, "
               "weather).\n"
               "2. Cross-Modal Verification: Check if the events or descriptions in the Retrieved Text Sources "
               "explain or contradict the visual elements.\n"
               "   Example: Does the text report mention the specific objects or environment seen in the images?\n"
               "3. Identify Gaps: What visual details are not explained by the text sources?\n\n"
               "# Output Format\n"
               "## 1. Visual-Text Corroboration\n"
               "* [Point]: (How text sources confirm/deny specific visual elements)\n\n"
               "## 2. Missing Context\n"
               "* [Gap]: (Visual details not mentioned in the text sources)\n\n"
               "## 3. Analysis\n"
               "(Summary of the consistency between the image and the text reports)\n");
        break;
    }
    case AgentKind::CM: {
        require(evidence.text_text.has_value(), "text-query text");
        require(evidence.image_text.has_value(), "reverse-image-search text");
        require(evidence.images.has_value(), "text-query image");
        role(p, "You are an expert AI Fact-Checker. Your specific task is to analyze the cross-modal relationships "
                "of the claim using the provided text and image sources.");
        claim_block(p, claim);
        p.text("## 2. All Retrieved Evidence\n- Retrieved Text Sources:\n");
        if (evidence.text_text->empty() && evidence.image_text->empty()) {
            p.text(std::string(kNoSourcesMarker) + "\n");
        }
        auto next = text_sources(p, *evidence.text_text, 1, cfg);
        text_sources(p, *evidence.image_text, next, cfg);
        p.text("\n- Retrieved Source Images: ");
        if (evidence.images->empty()) {
            p.text(kNoSourcesMarker);
        }
        for (std::size_t i = 0; i < evidence.images->size(); ++i) {
            const auto& img = (*evidence.images)[i];
            if (i > 0) {
                p.text(", ");
            }
            p.retrieved_image(static_cast<int>(i) + 1, load_image_b64(img.image.location));
            p.text(" (" + source_domain(img.source_url) + ")");
        }
        p.text("\n\n(Note: [CLAIM_IMG_n] tags represent claim images, and [RETRIEVED_IMG_n] tags represent retrieved "
               "source images. Treat these tags as placeholders for the actual visual data.)\n\n");
        p.text("# Instructions\n"
               "1. Source-to-Source Text Analysis: Compare the retrieved text sources. Do they agree on key facts "
               "(dates, locations, names)? Identify any contradictions between sources.\n"
               "2. Cross-Modal Alignment: Analyze if the Retrieved Source Images align with the narratives in the "
               "Retrieved Text Sources.\n"
               "   Example: If Text Source A describes a \"sunny protest,\" does Image Source B show a sunny "
               "environment?\n"
               "3. Global Narrative Reconstruction: Synthesize a coherent timeline or event description based on all "
               "available evidence.\n"
               "4. Reliability Assessment: Identify if any source seems like an outlier or low-quality compared to "
               "others.\n\n"
               "# Output Format\n"
               "## 1. Evidence Consistency Check\n"
               "* [Text-Text]: (Do text sources agree? Note contradictions.)\n"
               "* [Image-Text]: (Do source images support the source texts?)\n"
               "* [Image-Image]: (Is there visual consistency between the claim image and sources, and among "
               "sources themselves?)\n\n"
               "## 2. Global Context Summary\n"
               "(A unified summary of the event based on the combined evidence, independent of the user's claim)\n\n"
               "## 3. Conflict Alert\n"
               "* [Conflict]: (Critical discrepancies between sources, if any)\n");
        break;
    }
    case AgentKind::QA:
    case AgentKind::V:
        throw Error(ErrorCode::InvalidArgument, "not an analysis agent: " + std::string(to_string(kind)));
    }
    return p;
}

PromptTemplate build_qa_prompt(const Claim& claim, const AnalysisReports& reports, const QASet& history,
                               const std::vector<FewShotExample>& fewshot, const PipelineConfig& cfg)
{
    if (fewshot.size() > static_cast<std::size_t>(std::max(cfg.fewshot_k, 0))) {
        throw Error(ErrorCode::InvalidArgument,
                    fmt::format("{} few-shot examples exceed fewshot_k = {}", fewshot.size(), cfg.fewshot_k));
    }
    PromptTemplate p(AgentKind::QA);
    role(p, "You are the Lead Fact-Checking Adjudicator. Your task is to synthesize preliminary analyses into "
            "decisive Question-Answer (QA) pairs that consolidate the key evidence and reasoning required to form a "
            "final verdict.");
    claim_block(p, claim);

    p.text("## 2. Preliminary Analyses\n");
    int agent = 0;
    for (const auto* report : {&reports.tt, &reports.it, &reports.cm}) {
        p.text(fmt::format("[Agent {} Output]:\n", ++agent));
        for (auto line : split(report->raw, '\n')) {
            p.text("> " + std::string(line) + "\n");
        }
    }

    p.text("\n## 3. Few-shot Learning Examples\n(Retrieved via BM25 from training set based on claim similarity)\n");
    if (fewshot.empty()) {
        p.text("(no examples available)\n");
    }
    for (std::size_t i = 0; i < fewshot.size(); ++i) {
        const auto& ex = fewshot[i];
        p.text(fmt::format("Example {}:\n- Claim: {}\n", i + 1, one_line(ex.claim)));
        if (ex.label) {
            p.text(fmt::format("- Verdict: {}\n", canonical_name(*ex.label)));
        }
        for (const auto& qa : ex.qa) {
            p.text(fmt::format("- Question: {}\n  Answer: {}\n", one_line(qa.question), one_line(qa.answer)));
        }
        if (ex.justification) {
            p.text(fmt::format("- Justification: {}\n", one_line(*ex.justification)));
        }
    }

    p.text("\n## 4. Previously Generated QA Pairs\n(Do NOT repeat these or ask similar questions)\n");
    if (history.pairs.empty()) {
        p.text(std::string(kNoHistoryMarker) + "\n");
    }
    for (const auto& qa : history.pairs) {
        p.text("Q: " + qa.question + "\nA: " + qa.answer + "\n");
    }

    p.text(fmt::format(
        "\n# Instructions\n"
        "## Synthesize Diagnostic QAs (The Reasoning Basis)\n"
        "Analyze the provided forensic reports to extract the core information necessary to predict the verdict. "
        "Formulate {} high-impact QA pairs that:\n"
        "- Isolate Key Evidence: Focus on dates, locations, inconsistencies, or manipulation traces that act as "
        "\"smoking guns.\"\n"
        "- Resolve Ambiguity: Ask and answer questions that clarify whether the evidence is sufficient or "
        "conflicting.\n"
        "- Serve as Proof: Each QA must act as a logical premise supporting your final decision.\n\n"
        "# Output Format (JSON Only)\n"
        "{{\"qa_pairs\": [{{\"question\": \"<Question 1>\", \"answer\": \"<Full statement answer 1>\"}}, "
        "{{\"question\": \"<Question 2>\", \"answer\": \"<Full statement answer 2>\"}}]}}\n",
        cfg.qa_per_iteration));
    return p;
}

PromptTemplate build_verdict_prompt(const Claim& claim, const QASet& qaset, const PipelineConfig& cfg)
{
    PromptTemplate p(AgentKind::V);
    role(p, "You are the Lead Fact-Checking Adjudicator. Your task is to select the most relevant QA pairs, assess "
            "veracity, and provide a final verdict with justification.");
    claim_block(p, claim);
    p.text("## 2. Generated Question-Answer Pairs\n");
    for (std::size_t i = 0; i < qaset.pairs.size(); ++i) {
        p.text(fmt::format("{}. Q: {}\n   A: {}\n", i + 1, qaset.pairs[i].question, qaset.pairs[i].answer));
    }
    p.text(fmt::format(
        "\n---\n# Instructions\n"
        "1. Select Best QA Pairs: From the generated QA pairs above, select the {} most relevant and informative "
        "pairs for verification.\n"
        "2. Determine Verdict: Choose the single best label:\n"
        "   - Supported\n"
        "   - Refuted\n"
        "   - Not Enough Evidence\n"
        "   - Conflicting Evidence/Cherrypicking\n"
        "3. Write Justification: A cohesive summary explaining the verdict based on the selected QA pairs.\n"
        "4. JSON Output: Output ONLY a valid JSON object matching the format below.\n\n"
        "# Output Format (JSON Only)\n"
        "{{\"questions\": [{{\"question\": \"<Selected question 1>\", \"answer\": \"<Answer 1>\"}}, ...], "
        "\"veracity_verdict\": \"<Label>\", \"justification\": \"<Explanation>\"}}\n",
        cfg.verdict_select_k));
    return p;
}

}  // namespace veristack
