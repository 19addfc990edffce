#pragma once

#include <json.hpp>

#include "veristack/core.hpp"

// nlohmann adapters for the domain types.
namespace veristack {

void to_json(nlohmann::json& j, const ImageRef& v);
void from_json(const nlohmann::json& j, ImageRef& v);
void to_json(nlohmann::json& j, const Claim& v);
void from_json(const nlohmann::json& j, Claim& v);
void to_json(nlohmann::json& j, const QAPair& v);
void from_json(const nlohmann::json& j, QAPair& v);
void to_json(nlohmann::json& j, const QASet& v);
void from_json(const nlohmann::json& j, QASet& v);
void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);
void to_json(nlohmann::json& j, const StoreEntry& v);
void to_json(nlohmann::json& j, const KnowledgeStore& v);

}  // namespace veristack
