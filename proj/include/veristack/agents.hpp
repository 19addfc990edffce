#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "veristack/backend.hpp"
#include "veristack/config.hpp"
#include "veristack/core.hpp"
#include "veristack/retrieval.hpp"

namespace veristack {

enum class AgentKind { TT, IT, CM, QA, V };

std::string_view to_string(AgentKind kind);

struct PromptSegment {
    enum class Type { Text, ClaimImage, RetrievedImage };
    Type type = Type::Text;
    std::string text;  // Type::Text
    int number = 0;    // placeholder number for image types
    std::optional<std::string> image_b64;

    std::string placeholder() const;
};

class PromptTemplate {
  public:
    explicit PromptTemplate(AgentKind kind) : kind_(kind) {}

    AgentKind kind() const noexcept { return kind_; }
    const std::vector<PromptSegment>& segments() const noexcept { return segments_; }

    PromptTemplate& text(std::string_view s);
    PromptTemplate& claim_image(int number, std::optional<std::string> b64);
    PromptTemplate& retrieved_image(int number, std::optional<std::string> b64);

    /// Text with image placeholders in place of the images.
    std::string render_text() const;
    /// Placeholder numbers for one image type, in segment order.
    std::vector<int> image_numbers(PromptSegment::Type type) const;

    /// Each placeholder tag is followed by its image when one was loaded.
    ModelRequest to_request(const std::string& model, const PipelineConfig& cfg) const;

  private:
    AgentKind kind_;
    std::vector<PromptSegment> segments_;
};

/// Headers every rendered prompt of the kind must contain.
std::vector<std::string> required_headers(AgentKind kind);

inline constexpr std::string_view kNoSourcesMarker = "(no sources retrieved)";
inline constexpr std::string_view kNoHistoryMarker = "(none yet: this is the first iteration)";

struct AnalysisReport {
    AgentKind kind = AgentKind::TT;
    std::string raw;
    std::optional<std::map<std::string, std::string>> sections;
};

struct AnalysisReports {
    AnalysisReport tt{AgentKind::TT, {}, {}};
    AnalysisReport it{AgentKind::IT, {}, {}};
    AnalysisReport cm{AgentKind::CM, {}, {}};
};

/// "## " headers mapped to their bodies; nullopt when the text has none.
std::optional<std::map<std::string, std::string>> parse_report_sections(std::string_view raw);

/// Throws MissingEvidenceSet when the kind's evidence sets are absent.
PromptTemplate build_analysis_prompt(AgentKind kind, const Claim& claim, const EvidenceBundle& evidence,
                                     const PipelineConfig& cfg = {});

/// The three analysis calls run concurrently. Failures throw StageError("analysis")
/// naming the agent.
AnalysisReports run_analysis_agents(const Claim& claim, const EvidenceBundle& bundle, const PipelineConfig& cfg,
                                    Backend& backend);

PromptTemplate build_qa_prompt(const Claim& claim, const AnalysisReports& reports, const QASet& history,
                               const std::vector<FewShotExample>& fewshot, const PipelineConfig& cfg = {});

/// Strips code fences, then returns the first balanced JSON object that parses
/// (and has required_key, when given).
std::optional<nlohmann::json> recover_json_object(std::string_view raw, std::string_view required_key = {});

struct ParsedQA {
    std::vector<QAPair> pairs;  // iteration/position left at defaults
    bool count_deviation = false;
};

/// Throws ParseFailure when no valid {"qa_pairs": [...]} object is recoverable.
ParsedQA parse_qa_output(std::string_view raw, int expected_n);

/// Iterative QA generation with repair retries. Throws QaGenerationFailed.
QASet generate_qa(const Claim& claim, const AnalysisReports& reports, const std::vector<FewShotExample>& fewshot,
                  const PipelineConfig& cfg, Backend& backend);

PromptTemplate build_verdict_prompt(const Claim& claim, const QASet& qaset, const PipelineConfig& cfg = {});

struct ParsedVerdict {
    Label label = Label::NotEnoughEvidence;
    std::string justification;
    std::vector<QAPair> echoed;  // as returned by the model
};

/// Throws ParseFailure or LabelInvalid.
ParsedVerdict parse_verdict_output(std::string_view raw);

/// Throws VerdictFailed after retries, SelectedNotInSet when a selection
/// survives one repair retry unmatched.
Verdict predict_verdict(const Claim& claim, const QASet& qaset, const PipelineConfig& cfg, Backend& backend);

}  // namespace veristack
