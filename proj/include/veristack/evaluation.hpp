#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "veristack/backend.hpp"
#include "veristack/config.hpp"
#include "veristack/core.hpp"
#include "veristack/submission.hpp"

namespace veristack {

struct GoldRecord {
    std::string claim_id;
    Label label = Label::NotEnoughEvidence;
    std::vector<QAPair> qa;
    std::string justification;
};

/// JSON-lines: claim_id, label (or veracity_verdict), questions: [{question, answer}], justification.
std::vector<GoldRecord> read_gold_jsonl(const std::filesystem::path& path);

struct InstanceScore {
    double evidence_score = 0.0;
    double question_score = 0.0;
    bool label_correct = false;
    double justification_score = 0.0;
};

/// F1 between the token sets of two strings. Two token-less strings score 1.
double token_f1(std::string_view gold, std::string_view system);

/// Mean over gold items of the best token F1 against any system item.
/// Empty gold gives 1; empty system with non-empty gold gives 0.
double lexical_recall(const std::vector<std::string>& gold_items, const std::vector<std::string>& system_items);

class Judge {
  public:
    virtual ~Judge() = default;
    virtual double question_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system) = 0;
    virtual double evidence_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system) = 0;
    virtual double justification_similarity(const std::string& gold, const std::string& system) = 0;
    virtual std::string name() const = 0;
    virtual bool deterministic() const = 0;
};

/// Questions are compared with questions, evidence with answers.
class LexicalJudge : public Judge {
  public:
    double question_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system) override;
    double evidence_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system) override;
    double justification_similarity(const std::string& gold, const std::string& system) override;
    std::string name() const override { return "lexical"; }
    bool deterministic() const override { return true; }
};

/// Asks the generate endpoint for {"score": x}; scores are clamped to [0, 1].
class BackendJudge : public Judge {
  public:
    BackendJudge(Backend& backend, PipelineConfig cfg) : backend_(backend), cfg_(std::move(cfg)) {}

    double question_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system) override;
    double evidence_recall(const std::vector<QAPair>& gold, const std::vector<QAPair>& system) override;
    double justification_similarity(const std::string& gold, const std::string& system) override;
    std::string name() const override { return "backend"; }
    bool deterministic() const override { return false; }

  private:
    double ask(const std::string& task, const std::vector<std::string>& reference,
               const std::vector<std::string>& candidate);

    Backend& backend_;
    PipelineConfig cfg_;
};

/// Accuracy counting an instance only when its label is right and evidence >= lambda.
/// Throws EmptyInstances.
double conditional_veracity(const std::vector<InstanceScore>& instances, double lambda);

/// Mean justification score, zeroed for instances whose evidence is below lambda.
double conditional_justification(const std::vector<InstanceScore>& instances, double lambda);

InstanceScore score_instance(const SubmissionRecord& result, const GoldRecord& gold, Judge& judge);

struct EvalReport {
    std::string judge;
    int runs = 1;
    std::size_t instances = 0;
    double q_eval = 0.0;
    double evid_eval = 0.0;
    std::map<double, double> veracity;       // lambda -> value
    std::map<double, double> justification;  // lambda -> value
    // Standard deviations across runs (zero for a single run).
    double q_eval_std = 0.0;
    double evid_eval_std = 0.0;
    std::map<double, double> veracity_std;
    std::map<double, double> justification_std;
};

/// Scores every result against its gold record. Deterministic judges run once,
/// others cfg.judge_runs times. Throws MissingGold.
EvalReport score_run(const std::vector<SubmissionRecord>& results, const std::vector<GoldRecord>& golds, Judge& judge,
                     const PipelineConfig& cfg);

/// Lambda keys are rendered with at least one decimal ("0.0", "0.3").
std::string lambda_key(double lambda);

/// {q_eval, evid_eval, veracity: {"0.0": x, ...}, justification: {...}, judge, runs, std: {...},
///  instances, image_matching: "skipped"}
nlohmann::ordered_json report_json(const EvalReport& report);

}  // namespace veristack
