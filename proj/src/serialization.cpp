#include "veristack/serialization.hpp"

namespace veristack {

using nlohmann::json;

namespace {

template <typename T>
json optional_to_json(const std::optional<T>& v)
{
    return v ? json(*v) : json(nullptr);
}

template <typename T>
std::optional<T> optional_from_json(const json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    return it->get<T>();
}

}  // namespace

void to_json(json& j, const ImageRef& v)
{
    j = json{{"id", v.id}, {"location", v.location}, {"bytes_digest", optional_to_json(v.bytes_digest)}};
}

void from_json(const json& j, ImageRef& v)
{
    v.id = j.at("id").get<std::string>();
    v.location = j.at("location").get<std::string>();
    v.bytes_digest = optional_from_json<std::string>(j, "bytes_digest");
}

void to_json(json& j, const Claim& v)
{
    j = json{{"id", v.id},
             {"text", v.text},
             {"claimant", optional_to_json(v.claimant)},
             {"date", optional_to_json(v.date)},
             {"images", v.images},
             {"metadata", v.metadata}};
}

void from_json(const json& j, Claim& v)
{
    v.id = j.at("id").get<std::string>();
    v.text = j.at("text").get<std::string>();
    v.claimant = optional_from_json<std::string>(j, "claimant");
    v.date = optional_from_json<std::string>(j, "date");
    v.images = j.value("images", std::vector<ImageRef>{});
    v.metadata = j.value("metadata", std::map<std::string, std::string>{});
}

void to_json(json& j, const QAPair& v)
{
    j = json{{"question", v.question}, {"answer", v.answer}, {"iteration", v.iteration}, {"position", v.position}};
}

void from_json(const json& j, QAPair& v)
{
    v.question = j.at("question").get<std::string>();
    v.answer = j.at("answer").get<std::string>();
    v.iteration = j.value("iteration", 1);
    v.position = j.value("position", 1);
}

void to_json(json& j, const QASet& v)
{
    j = json{{"pairs", v.pairs}, {"retries", v.retries}, {"count_deviation", v.count_deviation}};
}

void from_json(const json& j, QASet& v)
{
    v.pairs = j.at("pairs").get<std::vector<QAPair>>();
    v.retries = j.value("retries", 0);
    v.count_deviation = j.value("count_deviation", false);
}

void to_json(json& j, const Verdict& v)
{
    j = json{{"label", std::string(canonical_name(v.label))},
             {"justification", v.justification},
             {"selected", v.selected}};
}

void from_json(const json& j, Verdict& v)
{
    v.label = parse_label(j.at("label").get<std::string>());
    v.justification = j.at("justification").get<std::string>();
    v.selected = j.at("selected").get<std::vector<QAPair>>();
}

void to_json(json& j, const StoreEntry& v)
{
    j = json{{"url", v.url},
             {"text", optional_to_json(v.text)},
             {"image", v.image ? json(*v.image) : json(nullptr)},
             {"fill_status", std::string(to_string(v.fill_status))},
             {"usefulness", std::string(to_string(v.usefulness))}};
}

void to_json(json& j, const KnowledgeStore& v)
{
    j = json{{"kind", std::string(to_string(v.kind()))}, {"entries", v.entries()}};
}

}  // namespace veristack
