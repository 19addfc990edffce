#include "veristack/stub.hpp"

#include <algorithm>
#include <cmath>
#include <regex>
#include <set>

#include <fmt/format.h>
#include <json.hpp>

#include "veristack/backend.hpp"
#include "veristack/core.hpp"
#include "veristack/hashing.hpp"
#include "veristack/text_util.hpp"

namespace veristack::stub {

namespace {

std::vector<float> hash_features(const std::vector<std::string>& features, int dim)
{
    std::vector<double> acc(static_cast<std::size_t>(dim), 0.0);
    for (const auto& f : features) {
        auto h = fnv1a64(f);
        auto bucket = static_cast<std::size_t>(h % static_cast<std::uint64_t>(dim));
        acc[bucket] += ((h >> 32) & 1U) ? -1.0 : 1.0;
    }
    double norm = 0.0;
    for (double x : acc) {
        norm += x * x;
    }
    std::vector<float> out(acc.size(), 0.0F);
    if (norm == 0.0) {
        out[0] = 1.0F;
        return out;
    }
    norm = std::sqrt(norm);
    for (std::size_t i = 0; i < acc.size(); ++i) {
        out[i] = static_cast<float>(acc[i] / norm);
    }
    return out;
}

std::vector<std::string> lines_of(std::string_view text)
{
    std::vector<std::string> out;
    for (auto line : split(text, '\n')) {
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        out.emplace_back(line);
    }
    return out;
}

// Lines after the heading line `heading` up to the next heading line.
std::vector<std::string> section(const std::vector<std::string>& lines, std::string_view heading)
{
    std::vector<std::string> out;
    bool inside = false;
    for (const auto& line : lines) {
        if (inside) {
            if (!line.empty() && line.front() == '#') {
                break;
            }
            out.push_back(line);
        } else if (trim(line) == heading) {
            inside = true;
        }
    }
    return out;
}

std::string field_value(const std::vector<std::string>& lines, std::string_view prefix)
{
    for (const auto& line : lines) {
        if (line.rfind(prefix, 0) == 0) {
            return std::string(trim(std::string_view(line).substr(prefix.size())));
        }
    }
    return {};
}

std::string first_words(std::string_view text, std::size_t n)
{
    std::string out;
    std::size_t count = 0;
    const auto collapsed = collapse_whitespace(text);
    for (auto word : split(collapsed, ' ')) {
        if (count++ == n) {
            break;
        }
        out += (out.empty() ? "" : " ") + std::string(word);
    }
    return out;
}

int number_after(std::string_view prompt, const std::regex& re, int fallback)
{
    std::match_results<std::string_view::const_iterator> m;
    if (std::regex_search(prompt.begin(), prompt.end(), m, re)) {
        return std::stoi(m[1].str());
    }
    return fallback;
}

std::string verdict_rule(std::string_view prompt, const std::vector<std::string>& lines)
{
    static const std::regex select_re(R"(select the (\d+) most relevant)");
    static const std::regex question_re(R"(^\d+\. Q: (.*)$)");
    static const std::regex answer_re(R"(^\s+A: (.*)$)");
    auto claim = field_value(lines, "- Claim Text: ");
    auto wanted = number_after(prompt, select_re, 10);

    struct Pair {
        std::string question, answer;
        std::size_t score;
    };
    std::vector<Pair> pairs;
    std::set<std::string> claim_tokens;
    for (auto& t : tokenize(claim)) {
        claim_tokens.insert(std::move(t));
    }
    auto body = section(lines, "## 2. Generated Question-Answer Pairs");
    for (std::size_t i = 0; i < body.size(); ++i) {
        std::smatch q;
        if (!std::regex_match(body[i], q, question_re)) {
            continue;
        }
        std::smatch a;
        std::string answer;
        if (i + 1 < body.size() && std::regex_match(body[i + 1], a, answer_re)) {
            answer = a[1].str();
            ++i;
        }
        std::set<std::string> seen;
        std::size_t score = 0;
        for (auto& t : tokenize(q[1].str() + " " + answer)) {
            if (claim_tokens.count(t) && seen.insert(t).second) {
                ++score;
            }
        }
        pairs.push_back({q[1].str(), answer, score});
    }
    std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.score > b.score; });
    if (pairs.size() > static_cast<std::size_t>(std::max(wanted, 0))) {
        pairs.resize(static_cast<std::size_t>(std::max(wanted, 0)));
    }

    auto label = kAllLabels[fnv1a64(claim) % kAllLabels.size()];
    nlohmann::ordered_json out;
    out["questions"] = nlohmann::ordered_json::array();
    for (const auto& p : pairs) {
        out["questions"].push_back({{"question", p.question}, {"answer", p.answer}});
    }
    out["veracity_verdict"] = canonical_name(label);
    out["justification"] = fmt::format("Assessed as {} from {} selected question-answer pairs. {}", canonical_name(label),
                                       pairs.size(),
                                       pairs.empty() ? "No question-answer pairs were available." : pairs.front().answer);
    return out.dump();
}

std::string qa_rule(std::string_view prompt, const std::vector<std::string>& lines)
{
    static const std::regex count_re(R"(Formulate (\d+) high-impact)");
    auto wanted = number_after(prompt, count_re, 5);
    auto claim = field_value(lines, "- Claim Text: ");

    std::vector<std::string> facts;
    for (const auto& line : section(lines, "## 2. Preliminary Analyses")) {
        std::string_view s = line;
        if (s.rfind("> ", 0) == 0) {
            s.remove_prefix(2);
        }
        if (s.rfind("* ", 0) != 0) {
            continue;
        }
        s.remove_prefix(2);
        if (!s.empty() && s.front() == '[') {
            auto close = s.find("]: ");
            if (close != std::string_view::npos) {
                s.remove_prefix(close + 3);
            }
        }
        if (!trim(s).empty()) {
            facts.emplace_back(trim(s));
        }
    }
    std::size_t history = 0;
    for (const auto& line : section(lines, "## 4. Previously Generated QA Pairs")) {
        history += line.rfind("Q: ", 0) == 0 ? 1 : 0;
    }

    nlohmann::ordered_json out;
    out["qa_pairs"] = nlohmann::ordered_json::array();
    for (int j = 0; j < wanted; ++j) {
        auto idx = history + static_cast<std::size_t>(j);
        const auto& fact = facts.empty() ? claim : facts[idx % facts.size()];
        out["qa_pairs"].push_back(
            {{"question", fmt::format("Q{}: What do the sources report about \"{}\"?", idx + 1, first_words(fact, 8))},
             {"answer", first_words(fact, 60)}});
    }
    return "```json\n" + out.dump() + "\n```";
}

std::string analysis_rule(const std::vector<std::string>& lines)
{
    static const std::regex source_re(R"(^\[(\d+)\] \(([^)]*)\) (.*)$)");
    std::vector<std::pair<std::string, std::string>> sources;  // (domain, text)
    for (const auto& line : lines) {
        std::smatch m;
        if (std::regex_match(line, m, source_re)) {
            sources.emplace_back(m[2].str(), m[3].str());
        }
    }
    std::vector<std::string> headers;
    bool inside = false;
    for (const auto& line : lines) {
        if (trim(line) == "# Output Format") {
            inside = true;
            continue;
        }
        if (inside && line.rfind("## ", 0) == 0) {
            headers.push_back(line);
        }
    }
    auto claim = field_value(lines, "- Claim Text: ");

    std::string out;
    for (std::size_t h = 0; h < headers.size(); ++h) {
        out += headers[h] + "\n";
        if (h == 0) {
            if (sources.empty()) {
                out += "* No sources retrieved.\n";
            }
            for (std::size_t s = 0; s < sources.size() && s < 3; ++s) {
                out += fmt::format("* [Fact]: {} ({})\n", first_words(sources[s].second, 25), sources[s].first);
            }
        } else if (h + 1 < headers.size()) {
            out += fmt::format("* [Gap]: {} sources reviewed; no further corroboration located.\n", sources.size());
        } else {
            out += fmt::format("The claim \"{}\" was compared against {} retrieved sources.\n", first_words(claim, 12),
                               sources.size());
        }
        out += "\n";
    }
    return out;
}

}  // namespace

std::vector<float> embed_text(std::string_view text, int dim)
{
    auto tokens = tokenize(text);
    std::vector<std::string> features = tokens;
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) {
        features.push_back(tokens[i] + " " + tokens[i + 1]);
    }
    return hash_features(features, dim);
}

std::vector<float> embed_image(std::string_view image_b64, int dim)
{
    std::vector<std::string> features;
    if (!image_b64.empty() && image_b64.size() < 8) {
        features.push_back("img:" + std::string(image_b64));
    }
    for (std::size_t i = 0; i + 8 <= image_b64.size(); i += 4) {
        features.push_back("img:" + std::string(image_b64.substr(i, 8)));
    }
    return hash_features(features, dim);
}

double rerank_score(std::string_view query, std::string_view document)
{
    auto q = tokenize(query);
    auto d = tokenize(document);
    std::set<std::string> qs(q.begin(), q.end());
    std::set<std::string> ds(d.begin(), d.end());
    std::size_t overlap = 0;
    for (const auto& t : qs) {
        overlap += ds.count(t);
    }
    return static_cast<double>(overlap);
}

std::string generate(std::string_view prompt)
{
    auto lines = lines_of(prompt);
    if (prompt.find("\"veracity_verdict\"") != std::string_view::npos) {
        return verdict_rule(prompt, lines);
    }
    if (prompt.find("\"qa_pairs\"") != std::string_view::npos) {
        return qa_rule(prompt, lines);
    }
    if (std::any_of(lines.begin(), lines.end(), [](const std::string& l) { return trim(l) == "# Output Format"; })) {
        return analysis_rule(lines);
    }
    return fmt::format("ECHO[{:016x}]: {}", fnv1a64(prompt), truncate_scalars(collapse_whitespace(prompt), 80));
}

}  // namespace veristack::stub

namespace veristack {

Embeddings FakeBackend::embed(const std::string&, const std::vector<std::string>& texts)
{
    Embeddings e{{}, dim_};
    for (const auto& t : texts) {
        e.vectors.push_back(stub::embed_text(t, dim_));
    }
    return e;
}

Embeddings FakeBackend::mm_embed(const std::string&, const std::vector<MultimodalItem>& items)
{
    Embeddings e{{}, dim_};
    for (const auto& item : items) {
        e.vectors.push_back(item.text ? stub::embed_text(*item.text, dim_)
                                      : stub::embed_image(item.image_b64.value_or(""), dim_));
    }
    return e;
}

std::vector<double> FakeBackend::rerank(const std::string&, const std::string& query,
                                        const std::vector<std::string>& documents)
{
    std::vector<double> scores;
    scores.reserve(documents.size());
    for (const auto& d : documents) {
        scores.push_back(stub::rerank_score(query, d));
    }
    return scores;
}

ModelResponse FakeBackend::generate(const ModelRequest& request)
{
    std::string prompt;
    for (const auto& s : request.segments) {
        if (s.type == Segment::Type::Text) {
            prompt += s.text;
        }
    }
    ModelResponse r;
    r.text = stub::generate(prompt);
    r.finish_reason = "stop";
    r.prompt_tokens = static_cast<int>(tokenize(prompt).size());
    r.output_tokens = static_cast<int>(tokenize(r.text).size());
    return r;
}

}  // namespace veristack
