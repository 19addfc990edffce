#include <future>

#include <fmt/format.h>

#include "veristack/agents.hpp"
#include "veristack/errors.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

std::optional<std::map<std::string, std::string>> parse_report_sections(std::string_view raw)
{
    std::map<std::string, std::string> out;
    std::string* body = nullptr;
    for (auto line : split(raw, '\n')) {
        auto t = trim(line);
        if (t.rfind("## ", 0) == 0) {
            auto header = std::string(trim(t.substr(3)));
            // "1. Key Verification Facts" -> "Key Verification Facts"
            auto dot = header.find(". ");
            if (dot != std::string::npos && dot > 0 &&
                header.find_first_not_of("0123456789") == dot) {
                header = header.substr(dot + 2);
            }
            body = &out[header];
            continue;
        }
        if (body) {
            *body += std::string(line) + "\n";
        }
    }
    if (out.empty()) {
        return std::nullopt;
    }
    for (auto& [header, text] : out) {
        text = std::string(trim(text));
    }
    return out;
}

namespace {

AnalysisReport call_agent(AgentKind kind, const PromptTemplate& prompt, const PipelineConfig& cfg, Backend& backend)
{
    auto resp = backend.generate(prompt.to_request(cfg.generate_model, cfg));
    if (!resp.succeeded() || trim(resp.text).empty()) {
        throw Error(ErrorCode::BackendMalformed,
                    fmt::format("empty response (finish_reason '{}')", resp.finish_reason));
    }
    AnalysisReport r;
    r.kind = kind;
    r.raw = std::move(resp.text);
    r.sections = parse_report_sections(r.raw);
    return r;
}

}  // namespace

AnalysisReports run_analysis_agents(const Claim& claim, const EvidenceBundle& bundle, const PipelineConfig& cfg,
                                    Backend& backend)
{
    constexpr AgentKind kinds[] = {AgentKind::TT, AgentKind::IT, AgentKind::CM};
    std::vector<PromptTemplate> prompts;
    for (auto kind : kinds) {
        try {
            prompts.push_back(build_analysis_prompt(kind, claim, bundle, cfg));
        } catch (const Error& e) {
            throw StageError("analysis", e.code(), fmt::format("agent {}: {}", to_string(kind), e.detail()));
        }
    }
    std::vector<std::future<AnalysisReport>> pending;
    for (std::size_t i = 0; i < 3; ++i) {
        pending.push_back(std::async(std::launch::async,
                                     [&, i] { return call_agent(kinds[i], prompts[i], cfg, backend); }));
    }
    std::vector<AnalysisReport> reports;
    std::optional<StageError> failure;
    for (std::size_t i = 0; i < 3; ++i) {
        try {
            reports.push_back(pending[i].get());
        } catch (const Error& e) {
            if (!failure) {
                failure.emplace("analysis", e.code(), fmt::format("agent {}: {}", to_string(kinds[i]), e.detail()));
            }
        }
    }
    if (failure) {
        throw *failure;
    }
    return AnalysisReports{std::move(reports[0]), std::move(reports[1]), std::move(reports[2])};
}

namespace {

// End of the balanced object starting at `open`, honouring JSON strings.
std::optional<std::size_t> balanced_end(std::string_view s, std::size_t open)
{
    int depth = 0;
    bool in_string = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        char c = s[i];
        if (in_string) {
            if (c == '\\') {
                ++i;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}' && --depth == 0) {
            return i;
        }
    }
    return std::nullopt;
}

std::optional<nlohmann::json> scan_objects(std::string_view s, std::string_view required_key)
{
    for (auto open = s.find('{'); open != std::string_view::npos; open = s.find('{', open + 1)) {
        auto end = balanced_end(s, open);
        if (!end) {
            continue;
        }
        auto j = nlohmann::json::parse(s.substr(open, *end - open + 1), nullptr, false);
        if (j.is_discarded() || !j.is_object()) {
            continue;
        }
        if (required_key.empty() || j.contains(std::string(required_key))) {
            return j;
        }
    }
    return std::nullopt;
}

std::optional<std::string_view> fenced_body(std::string_view raw)
{
    auto open = raw.find("```");
    if (open == std::string_view::npos) {
        return std::nullopt;
    }
    auto line_end = raw.find('\n', open);
    if (line_end == std::string_view::npos) {
        return std::nullopt;
    }
    auto close = raw.find("```", line_end + 1);
    if (close == std::string_view::npos) {
        return raw.substr(line_end + 1);
    }
    return raw.substr(line_end + 1, close - line_end - 1);
}

std::string required_string(const nlohmann::json& j, const char* key, const char* what)
{
    if (!j.is_object() || !j.contains(key) || !j[key].is_string()) {
        throw Error(ErrorCode::ParseFailure, fmt::format("{} lacks a string \"{}\"", what, key));
    }
    auto value = j[key].get<std::string>();
    if (trim(value).empty()) {
        throw Error(ErrorCode::ParseFailure, fmt::format("{} has an empty \"{}\"", what, key));
    }
    return value;
}

std::string repair_instruction(const std::string& problem)
{
    return fmt::format("\n# Repair\nYour previous response could not be used: {}. Respond again with only the JSON "
                       "object described under Output Format.\n",
                       problem);
}

}  // namespace

std::optional<nlohmann::json> recover_json_object(std::string_view raw, std::string_view required_key)
{
    if (auto body = fenced_body(raw)) {
        if (auto j = scan_objects(*body, required_key)) {
            return j;
        }
    }
    return scan_objects(raw, required_key);
}

ParsedQA parse_qa_output(std::string_view raw, int expected_n)
{
    auto j = recover_json_object(raw, "qa_pairs");
    if (!j) {
        throw Error(ErrorCode::ParseFailure, "no JSON object with \"qa_pairs\" found");
    }
    const auto& list = (*j)["qa_pairs"];
    if (!list.is_array()) {
        throw Error(ErrorCode::ParseFailure, "\"qa_pairs\" is not a list");
    }
    if (list.empty()) {
        throw Error(ErrorCode::ParseFailure, "\"qa_pairs\" is empty");
    }
    ParsedQA out;
    for (const auto& item : list) {
        QAPair qa;
        qa.question = required_string(item, "question", "QA pair");
        qa.answer = required_string(item, "answer", "QA pair");
        out.pairs.push_back(std::move(qa));
    }
    out.count_deviation = static_cast<int>(out.pairs.size()) != expected_n;
    return out;
}

QASet generate_qa(const Claim& claim, const AnalysisReports& reports, const std::vector<FewShotExample>& fewshot,
                  const PipelineConfig& cfg, Backend& backend)
{
    QASet set;
    for (int iteration = 1; iteration <= cfg.qa_iterations; ++iteration) {
        auto prompt = build_qa_prompt(claim, reports, set, fewshot, cfg);
        std::string problem;
        std::optional<ParsedQA> parsed;
        for (int attempt = 0; attempt <= cfg.retry_budget && !parsed; ++attempt) {
            auto request = prompt.to_request(cfg.generate_model, cfg);
            if (attempt > 0) {
                ++set.retries;
                request.segments.push_back(Segment::of_text(repair_instruction(problem)));
            }
            auto resp = backend.generate(request);
            try {
                if (!resp.succeeded()) {
                    throw Error(ErrorCode::ParseFailure, "generation ended with '" + resp.finish_reason + "'");
                }
                parsed = parse_qa_output(resp.text, cfg.qa_per_iteration);
            } catch (const Error& e) {
                if (e.code() != ErrorCode::ParseFailure) {
                    throw;
                }
                problem = e.detail();
            }
        }
        if (!parsed) {
            throw Error(ErrorCode::QaGenerationFailed, fmt::format("iteration {}: {}", iteration, problem));
        }
        set.count_deviation = set.count_deviation || parsed->count_deviation;
        auto keep = std::min(parsed->pairs.size(), static_cast<std::size_t>(std::max(cfg.qa_per_iteration, 0)));
        for (std::size_t k = 0; k < keep; ++k) {
            auto qa = std::move(parsed->pairs[k]);
            qa.iteration = iteration;
            qa.position = static_cast<int>(k) + 1;
            set.pairs.push_back(std::move(qa));
        }
    }
    return set;
}

ParsedVerdict parse_verdict_output(std::string_view raw)
{
    auto j = recover_json_object(raw, "veracity_verdict");
    if (!j) {
        throw Error(ErrorCode::ParseFailure, "no JSON object with \"veracity_verdict\" found");
    }
    ParsedVerdict out;
    if (!(*j)["veracity_verdict"].is_string()) {
        throw Error(ErrorCode::ParseFailure, "\"veracity_verdict\" is not a string");
    }
    out.label = parse_label((*j)["veracity_verdict"].get<std::string>());
    out.justification = required_string(*j, "justification", "verdict");
    if (!j->contains("questions") || !(*j)["questions"].is_array()) {
        throw Error(ErrorCode::ParseFailure, "\"questions\" is not a list");
    }
    for (const auto& item : (*j)["questions"]) {
        QAPair qa;
        qa.question = required_string(item, "question", "selected pair");
        if (item.contains("answer") && item["answer"].is_string()) {
            qa.answer = item["answer"].get<std::string>();
        }
        out.echoed.push_back(std::move(qa));
    }
    return out;
}

namespace {

std::string normalized(std::string_view s)
{
    return to_lower_ascii(collapse_whitespace(s));
}

const QAPair* match_question(const QASet& set, const std::string& question)
{
    for (const auto& qa : set.pairs) {
        if (qa.question == question) {
            return &qa;
        }
    }
    auto key = normalized(question);
    for (const auto& qa : set.pairs) {
        if (normalized(qa.question) == key) {
            return &qa;
        }
    }
    return nullptr;
}

}  // namespace

Verdict predict_verdict(const Claim& claim, const QASet& qaset, const PipelineConfig& cfg, Backend& backend)
{
    if (qaset.pairs.empty()) {
        throw Error(ErrorCode::InvalidArgument, "verdict needs at least one QA pair");
    }
    auto prompt = build_verdict_prompt(claim, qaset, cfg);
    auto limit = static_cast<std::size_t>(std::max(cfg.verdict_select_k, 0));
    int parse_retries = 0;
    bool selection_retried = false;
    std::string problem;
    for (bool first = true;; first = false) {
        auto request = prompt.to_request(cfg.generate_model, cfg);
        if (!first) {
            request.segments.push_back(Segment::of_text(repair_instruction(problem)));
        }
        auto resp = backend.generate(request);
        ParsedVerdict parsed;
        try {
            if (!resp.succeeded()) {
                throw Error(ErrorCode::ParseFailure, "generation ended with '" + resp.finish_reason + "'");
            }
            parsed = parse_verdict_output(resp.text);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::ParseFailure && e.code() != ErrorCode::LabelInvalid) {
                throw;
            }
            if (parse_retries++ >= cfg.retry_budget) {
                throw Error(ErrorCode::VerdictFailed, e.what());
            }
            problem = e.detail();
            continue;
        }

        Verdict v;
        v.label = parsed.label;
        v.justification = parsed.justification;
        std::optional<std::string> unmatched;
        for (const auto& echoed : parsed.echoed) {
            if (v.selected.size() == limit) {
                break;
            }
            const auto* qa = match_question(qaset, echoed.question);
            if (!qa) {
                unmatched = echoed.question;
                break;
            }
            if (std::find(v.selected.begin(), v.selected.end(), *qa) == v.selected.end()) {
                v.selected.push_back(*qa);
            }
        }
        if (!unmatched) {
            return v;
        }
        if (selection_retried) {
            throw Error(ErrorCode::SelectedNotInSet, "selected question not among generated pairs: " + *unmatched);
        }
        selection_retried = true;
        problem = "the selected question \"" + *unmatched +
                  "\" is not one of the generated pairs; copy selected questions exactly";
    }
}

}  // namespace veristack
