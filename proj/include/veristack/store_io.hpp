#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "veristack/core.hpp"
#include "veristack/store_filler.hpp"

namespace veristack {

// Layout: <root>/<claim_id>/<kind>.jsonl, e.g. stores/c17/text_query_text.jsonl.
// Each line: {"url": ..., "url2text": string|null, "image_path": string|null}.
// Filled files add fill_status, usefulness, fill_reason and original_url2text.

std::string store_file_name(StoreKind kind, bool filled);

/// Relative image paths resolve against the file's directory. Throws IoError.
KnowledgeStore read_store_jsonl(const std::filesystem::path& path, StoreKind kind);
void write_store_jsonl(const std::filesystem::path& path, const KnowledgeStore& store);

/// Missing files load as empty stores. With prefer_filled, a sibling
/// ".filled.jsonl" replaces the original when present.
ClaimStores load_claim_stores(const std::filesystem::path& claim_dir, bool prefer_filled = true);

/// Sorted names of the claim subdirectories under root.
std::vector<std::string> list_claim_dirs(const std::filesystem::path& root);

/// Claims JSON-lines: claim_id, claim_text, claimant?, claim_date?, image_paths?.
/// Relative image paths resolve against the claims file's directory.
std::vector<Claim> read_claims_jsonl(const std::filesystem::path& path);

/// One row of the fill statistics report.
struct FillStatsRow {
    std::string split;
    StoreKind store;
    std::string status;  // "Original" | "Filled"
    SnapshotStats stats;
};

std::vector<FillStatsRow> stats_rows(const std::string& split, StoreKind kind, const FillStats& stats);

/// JSON array of {split, store, status, avg, min, max}.
void write_fill_stats_report(const std::filesystem::path& path, const std::vector<FillStatsRow>& rows);
std::vector<FillStatsRow> read_fill_stats_report(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);
/// Writes via a temporary sibling and rename.
void write_text_file(const std::filesystem::path& path, const std::string& content);

}  // namespace veristack
