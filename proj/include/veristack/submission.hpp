#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "veristack/core.hpp"

namespace veristack {

/// One line of a submission file.
struct SubmissionRecord {
    std::string claim_id;
    std::vector<QAPair> questions;
    Label label = Label::NotEnoughEvidence;
    std::string justification;

    bool operator==(const SubmissionRecord&) const = default;
};

/// {"claim_id", "questions": [{"question", "answer"}], "veracity_verdict", "justification"}
std::string submission_line(const SubmissionRecord& record);
SubmissionRecord parse_submission_line(std::string_view line);

std::vector<SubmissionRecord> read_submission(const std::filesystem::path& path);

}  // namespace veristack
