#include "veristack/submission.hpp"

#include <json.hpp>

#include "veristack/errors.hpp"
#include "veristack/store_io.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

std::string submission_line(const SubmissionRecord& record)
{
    nlohmann::ordered_json j;
    j["claim_id"] = record.claim_id;
    j["questions"] = nlohmann::ordered_json::array();
    for (const auto& qa : record.questions) {
        j["questions"].push_back({{"question", qa.question}, {"answer", qa.answer}});
    }
    j["veracity_verdict"] = canonical_name(record.label);
    j["justification"] = record.justification;
    return j.dump();
}

SubmissionRecord parse_submission_line(std::string_view line)
{
    try {
        auto j = nlohmann::json::parse(line);
        SubmissionRecord r;
        const auto& id = j.at("claim_id");
        r.claim_id = id.is_string() ? id.get<std::string>() : id.dump();
        int position = 0;
        for (const auto& q : j.at("questions")) {
            r.questions.push_back(QAPair{q.at("question").get<std::string>(), q.value("answer", std::string()), 1,
                                         ++position});
        }
        r.label = parse_label(j.at("veracity_verdict").get<std::string>());
        r.justification = j.value("justification", std::string());
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ParseFailure, std::string("submission line: ") + e.what());
    }
}

std::vector<SubmissionRecord> read_submission(const std::filesystem::path& path)
{
    std::vector<SubmissionRecord> out;
    int line_no = 0;
    const auto content = read_text_file(path);
    for (auto line : split(content, '\n')) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            out.push_back(parse_submission_line(line));
        } catch (const Error& e) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + e.detail());
        }
    }
    return out;
}

}  // namespace veristack
