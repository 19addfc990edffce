#include "veristack/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "veristack/agents.hpp"
#include "veristack/errors.hpp"
#include "veristack/store_io.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

std::vector<GoldRecord> read_gold_jsonl(const std::filesystem::path& path)
{
    std::vector<GoldRecord> out;
    int line_no = 0;
    const auto content = read_text_file(path);
    for (auto line : split(content, '\n')) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            auto j = nlohmann::json::parse(line);
            GoldRecord g;
            const auto& id = j.at("claim_id");
            g.claim_id = id.is_string() ? id.get<std::string>() : id.dump();
            g.label = parse_label(j.contains("label") ? j["label"].get<std::string>()
                                                      : j.at("veracity_verdict").get<std::string>());
            int position = 0;
            for (const auto& q : j.value("questions", nlohmann::json::array())) {
                g.qa.push_back(QAPair{q.at("question").get<std::string>(), q.value("answer", std::string()), 1,
                                      ++position});
            }
            g.justification = j.value("justification", std::string());
            out.push_back(std::move(g));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        } catch (const Error& e) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.detail());
        }
    }
    return out;
}

double token_f1(std::string_view gold, std::string_view system)
{
    auto g = tokenize(gold);
    auto s = tokenize(system);
    std::set<std::string> gs(g.begin(), g.end());
    std::set<std::string> ss(s.begin(), s.end());
    if (gs.empty() && ss.empty()) {
        return 1.0;
    }
    std::size_t overlap = 0;
    for (const auto& t : gs) {
        overlap += ss.count(t);
    }
    if (overlap == 0) {
        return 0.0;
    }
    auto precision = static_cast<double>(overlap) / static_cast<double>(ss.size());
    auto recall = static_cast<double>(overlap) / static_cast<double>(gs.size());
    return 2.0 * precision * recall / (precision + recall);
}

double lexical_recall(const std::vector<std::string>& gold_items, const std::vector<std::string>& system_items)
{
    if (gold_items.empty()) {
        return 1.0;
    }
    if (system_items.empty()) {
        return 0.0;
    }
    double total = 0.0;
    for (const auto& g : gold_items) {
        double best = 0.0;
        for (const auto& s : system_items) {
            best = std::max(best, token_f1(g, s));
        }
        total += best;
    }
    return total / static_cast<double>(gold_items.size());
}

namespace {

std::vector<std::string> questions_of(const std::vector<QAPair>& pairs)
{
    std::vector<std::string> out;
    for (const auto& qa : pairs) {
        out.push_back(qa.question);
    }
    return out;
}

std::vector<std::string> answers_of(const std::vector<QAPair>& pairs)
{
    std::vector<std::string> out;
    for (const auto& qa : pairs) {
        out.push_back(qa.answer);
    }
    return out;
}

}  // namespace

double LexicalJudge::question_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system)
{
    return lexical_recall(questions_of(gold), questions_of(system));
}

double LexicalJudge::evidence_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system)
{
    return lexical_recall(answers_of(gold), answers_of(system));
}

double LexicalJudge::justification_similarity(const std::string& gold, const std::string& system)
{
    return token_f1(gold, system);
}

double BackendJudge::ask(const std::string& task, const std::vector<std::string>& reference,
                         const std::vector<std::string>& candidate)
{
    std::string prompt = "# Role\nYou are an evaluation judge for fact-checking outputs.\n\n# Task\n" + task + "\n\n";
    prompt += "## Reference\n";
    for (const auto& r : reference) {
        prompt += "- " + collapse_whitespace(r) + "\n";
    }
    prompt += "\n## Candidate\n";
    for (const auto& c : candidate) {
        prompt += "- " + collapse_whitespace(c) + "\n";
    }
    prompt += "\n# Output Format (JSON Only)\n{\"score\": <number between 0 and 1>}\n";
    ModelRequest request{cfg_.generate_model, {Segment::of_text(prompt)}, cfg_.max_tokens, cfg_.temperature};
    auto resp = backend_.generate(request);
    auto j = recover_json_object(resp.text, "score");
    if (!j || !(*j)["score"].is_number()) {
        throw Error(ErrorCode::ParseFailure, "judge response lacks a numeric \"score\"");
    }
    return std::clamp((*j)["score"].get<double>(), 0.0, 1.0);
}

double BackendJudge::question_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system)
{
    if (gold.empty()) {
        return 1.0;
    }
    return ask("Score the fraction of reference questions that are covered by the candidate questions.",
               questions_of(gold), questions_of(system));
}

double BackendJudge::evidence_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system)
{
    if (gold.empty()) {
        return 1.0;
    }
    return ask("Score the fraction of reference evidence statements that are supported by the candidate answers.",
               answers_of(gold), answers_of(system));
}

double BackendJudge::justification_similarity(const std::string& gold, const std::string& system)
{
    return ask("Score how closely the candidate justification matches the reasoning of the reference.", {gold},
               {system});
}

double conditional_veracity(const std::vector<InstanceScore>& instances, double lambda)
{
    if (instances.empty()) {
        throw Error(ErrorCode::EmptyInstances, "no instances to score");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("lambda {} is outside [0, 1]", lambda));
    }
    std::size_t correct = 0;
    for (const auto& s : instances) {
        correct += (s.label_correct && s.evidence_score >= lambda) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(instances.size());
}

double conditional_justification(const std::vector<InstanceScore>& instances, double lambda)
{
    if (instances.empty()) {
        throw Error(ErrorCode::EmptyInstances, "no instances to score");
    }
    if (!(lambda >= 0.0 && lambda <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, fmt::format("lambda {} is outside [0, 1]", lambda));
    }
    double total = 0.0;
    for (const auto& s : instances) {
        total += s.evidence_score >= lambda ? s.justification_score : 0.0;
    }
    return total / static_cast<double>(instances.size());
}

InstanceScore score_instance(const SubmissionRecord& result, const GoldRecord& gold, Judge& judge)
{
    InstanceScore s;
    s.question_score = judge.question_recall(gold.qa, result.questions);
    s.evidence_score = judge.evidence_recall(gold.qa, result.questions);
    s.label_correct = result.label == gold.label;
    s.justification_score = judge.justification_similarity(gold.justification, result.justification);
    return s;
}

namespace {

struct RunScores {
    double q_eval = 0.0;
    double evid_eval = 0.0;
    std::map<double, double> veracity;
    std::map<double, double> justification;
};

std::pair<double, double> mean_std(const std::vector<double>& xs)
{
    double mean = 0.0;
    for (double x : xs) {
        mean += x;
    }
    mean /= static_cast<double>(xs.size());
    if (xs.size() < 2) {
        return {mean, 0.0};
    }
    double var = 0.0;
    for (double x : xs) {
        var += (x - mean) * (x - mean);
    }
    return {mean, std::sqrt(var / static_cast<double>(xs.size() - 1))};
}

}  // namespace

EvalReport score_run(const std::vector<SubmissionRecord>& results, const std::vector<GoldRecord>& golds, Judge& judge,
                     const PipelineConfig& cfg)
{
    std::map<std::string, const GoldRecord*> by_id;
    for (const auto& g : golds) {
        by_id.emplace(g.claim_id, &g);
    }
    std::vector<const GoldRecord*> aligned;
    for (const auto& r : results) {
        auto it = by_id.find(r.claim_id);
        if (it == by_id.end()) {
            throw Error(ErrorCode::MissingGold, "no gold record for claim " + r.claim_id);
        }
        aligned.push_back(it->second);
    }
    if (results.empty()) {
        throw Error(ErrorCode::EmptyInstances, "no results to score");
    }

    EvalReport report;
    report.judge = judge.name();
    report.runs = judge.deterministic() ? 1 : std::max(cfg.judge_runs, 1);
    report.instances = results.size();

    std::vector<RunScores> runs;
    for (int run = 0; run < report.runs; ++run) {
        std::vector<InstanceScore> scores;
        for (std::size_t i = 0; i < results.size(); ++i) {
            scores.push_back(score_instance(results[i], *aligned[i], judge));
        }
        RunScores rs;
        for (const auto& s : scores) {
            rs.q_eval += s.question_score;
            rs.evid_eval += s.evidence_score;
        }
        rs.q_eval /= static_cast<double>(scores.size());
        rs.evid_eval /= static_cast<double>(scores.size());
        for (double lambda : cfg.lambdas) {
            rs.veracity[lambda] = conditional_veracity(scores, lambda);
            rs.justification[lambda] = conditional_justification(scores, lambda);
        }
        runs.push_back(std::move(rs));
    }

    auto collect = [&](auto getter) {
        std::vector<double> xs;
        for (const auto& r : runs) {
            xs.push_back(getter(r));
        }
        return mean_std(xs);
    };
    std::tie(report.q_eval, report.q_eval_std) = collect([](const RunScores& r) { return r.q_eval; });
    std::tie(report.evid_eval, report.evid_eval_std) = collect([](const RunScores& r) { return r.evid_eval; });
    for (double lambda : cfg.lambdas) {
        std::tie(report.veracity[lambda], report.veracity_std[lambda]) =
            collect([&](const RunScores& r) { return r.veracity.at(lambda); });
        std::tie(report.justification[lambda], report.justification_std[lambda]) =
            collect([&](const RunScores& r) { return r.justification.at(lambda); });
    }
    return report;
}

std::string lambda_key(double lambda)
{
    auto s = fmt::format("{}", lambda);
    if (s.find_first_of(".e") == std::string::npos) {
        s += ".0";
    }
    return s;
}

nlohmann::ordered_json report_json(const EvalReport& report)
{
    auto by_lambda = [](const std::map<double, double>& m) {
        nlohmann::ordered_json j = nlohmann::ordered_json::object();
        for (const auto& [lambda, value] : m) {
            j[lambda_key(lambda)] = value;
        }
        return j;
    };
    nlohmann::ordered_json j;
    j["q_eval"] = report.q_eval;
    j["evid_eval"] = report.evid_eval;
    j["veracity"] = by_lambda(report.veracity);
    j["justification"] = by_lambda(report.justification);
    j["judge"] = report.judge;
    j["runs"] = report.runs;
    j["std"] = {{"q_eval", report.q_eval_std},
                {"evid_eval", report.evid_eval_std},
                {"veracity", by_lambda(report.veracity_std)},
                {"justification", by_lambda(report.justification_std)}};
    j["instances"] = report.instances;
    j["image_matching"] = "skipped";
    return j;
}

}  // namespace veristack
