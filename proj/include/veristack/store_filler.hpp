#pragma once

#include <cstdint>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veristack/config.hpp"
#include "veristack/core.hpp"
#include "veristack/fetcher.hpp"

namespace veristack {

/// Boilerplate patterns plus the thresholds the usefulness check applies.
class UsefulnessRules {
  public:
    /// Compiled from the shipped pattern lists with the default thresholds.
    static const UsefulnessRules& defaults();

    /// Pattern documents use one regex per line; blank lines and `#` comments are skipped.
    UsefulnessRules(std::string_view generic_patterns, std::string_view login_patterns);

    UsefulnessRules with_thresholds(int min_chars, double line_ratio) const;
    UsefulnessRules with_thresholds(const PipelineConfig& cfg) const
    {
        return with_thresholds(cfg.usefulness_min_chars, cfg.generic_line_ratio);
    }

    bool is_generic_line(std::string_view line) const;
    bool is_login_line(std::string_view line) const;

    int min_chars() const noexcept { return min_chars_; }
    double line_ratio() const noexcept { return line_ratio_; }

    static constexpr std::size_t kMaxPatternLineChars = 120;

  private:
    std::regex generic_;
    std::regex login_;
    bool has_generic_ = false;
    bool has_login_ = false;
    int min_chars_ = 200;
    double line_ratio_ = 0.5;
};

/// Empty, Restricted (login lines dominate), Generic (generic lines dominate or
/// the normalized text is too short), otherwise Useful.
Usefulness assess_usefulness(const std::optional<std::string>& text,
                             const UsefulnessRules& rules = UsefulnessRules::defaults());

/// ScriptedBrowser when the registered domain is on the shipped browser list. Throws UrlInvalid.
FetchRoute classify_fetch_route(std::string_view url);

/// Visible body text with navigation/footer/cookie/login boilerplate removed;
/// one paragraph per line. Throws ExtractEmpty when nothing substantive remains.
std::string extract_main_content(std::string_view html, const UsefulnessRules& rules = UsefulnessRules::defaults());

struct SnapshotStats {
    double avg = 0.0;
    std::int64_t min = 0;
    std::int64_t max = 0;
};

/// Per-claim counts of entries with non-empty text, before and after filling.
struct FillStats {
    SnapshotStats original;
    SnapshotStats filled;
    std::size_t claims = 0;
};

/// Entries with non-empty text as the store was loaded (before any fill).
std::int64_t original_evidence_count(const KnowledgeStore& store);
/// Entries with non-empty text now.
std::int64_t filled_evidence_count(const KnowledgeStore& store);

/// Throws StatsEmptyInput on an empty list.
FillStats compute_fill_stats(std::span<const KnowledgeStore> stores);

struct FillOptions {
    const UsefulnessRules* rules = &UsefulnessRules::defaults();
    int workers = 8;
};

struct FillResult {
    KnowledgeStore store;
    FillStats stats;
    int attempted = 0;  // entries that went to the fetcher
};

/// Re-fetches every Empty/Generic/Restricted entry of a textual store. Entries
/// that are already Useful or were marked Unfillable are left alone.
FillResult fill_store(const KnowledgeStore& store, Fetcher& fetcher, const FillOptions& options = {});

}  // namespace veristack
