#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "veristack/errors.hpp"
#include "veristack/retrieval.hpp"
#include "veristack/serialization.hpp"
#include "veristack/store_io.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

Bm25Index::Bm25Index(std::vector<std::string> documents, double k1, double b) : k1_(k1), b_(b)
{
    if (!(k1 > 0.0) || b < 0.0 || b > 1.0) {
        throw Error(ErrorCode::InvalidArgument, "BM25 needs k1 > 0 and 0 <= b <= 1");
    }
    std::size_t total = 0;
    for (const auto& doc : documents) {
        auto tokens = tokenize(doc);
        std::map<std::string, int> tf;
        for (auto& t : tokens) {
            ++tf[t];
        }
        for (const auto& [term, count] : tf) {
            ++df_[term];
        }
        lengths_.push_back(tokens.size());
        total += tokens.size();
        docs_.push_back(std::move(tf));
    }
    avgdl_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());
}

std::size_t Bm25Index::document_frequency(const std::string& term) const
{
    auto it = df_.find(term);
    return it == df_.end() ? 0 : it->second;
}

double Bm25Index::score(std::size_t doc, const std::vector<std::string>& query_terms) const
{
    std::set<std::string> distinct(query_terms.begin(), query_terms.end());
    const auto& tf = docs_.at(doc);
    auto n = static_cast<double>(docs_.size());
    auto norm = avgdl_ > 0.0 ? static_cast<double>(lengths_[doc]) / avgdl_ : 0.0;
    double total = 0.0;
    for (const auto& term : distinct) {
        auto it = tf.find(term);
        if (it == tf.end()) {
            continue;
        }
        auto df = static_cast<double>(document_frequency(term));
        auto idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        auto f = static_cast<double>(it->second);
        total += idf * f * (k1_ + 1.0) / (f + k1_ * (1.0 - b_ + b_ * norm));
    }
    return total;
}

std::vector<std::pair<std::size_t, double>> bm25_topk(const Bm25Index& index, std::string_view query, int k)
{
    auto terms = tokenize(query);
    std::vector<std::pair<std::size_t, double>> hits;
    for (std::size_t d = 0; d < index.size(); ++d) {
        auto s = index.score(d, terms);
        if (s > 0.0) {
            hits.emplace_back(d, s);
        }
    }
    std::stable_sort(hits.begin(), hits.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    hits.resize(std::min(hits.size(), static_cast<std::size_t>(std::max(k, 0))));
    return hits;
}

std::vector<FewShotExample> read_fewshot_jsonl(const std::filesystem::path& path)
{
    std::vector<FewShotExample> out;
    int line_no = 0;
    const auto content = read_text_file(path);
    for (auto line : split(content, '\n')) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            auto j = nlohmann::json::parse(line);
            FewShotExample ex;
            ex.claim = j.contains("claim_text") ? j.at("claim_text").get<std::string>() : j.at("claim").get<std::string>();
            if (j.contains("label") && !j["label"].is_null()) {
                ex.label = parse_label(j["label"].get<std::string>());
            }
            int position = 0;
            for (const auto& q : j.value("questions", nlohmann::json::array())) {
                ex.qa.push_back(QAPair{q.at("question").get<std::string>(), q.at("answer").get<std::string>(), 1,
                                       ++position});
            }
            if (j.contains("justification") && j["justification"].is_string()) {
                ex.justification = j["justification"].get<std::string>();
            }
            out.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& ex) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        }
    }
    return out;
}

std::vector<std::string> FewShotSelector::claim_texts(const std::vector<FewShotExample>& examples)
{
    std::vector<std::string> out;
    for (const auto& e : examples) {
        out.push_back(e.claim);
    }
    return out;
}

FewShotSelector::FewShotSelector(std::vector<FewShotExample> examples, double k1, double b)
    : examples_(std::move(examples)), index_(claim_texts(examples_), k1, b)
{}

std::vector<FewShotExample> FewShotSelector::select(std::string_view claim_text, int k) const
{
    std::vector<FewShotExample> out;
    for (const auto& [doc, score] : bm25_topk(index_, claim_text, k)) {
        out.push_back(examples_[doc]);
    }
    return out;
}

}  // namespace veristack
