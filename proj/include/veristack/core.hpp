#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace veristack {

struct ImageRef {
    std::string id;
    std::string location;  // file path or URL
    std::optional<std::string> bytes_digest;

    bool operator==(const ImageRef&) const = default;
};

struct Claim {
    std::string id;
    std::string text;
    std::optional<std::string> claimant;
    std::optional<std::string> date;  // ISO-8601, compared lexically
    std::vector<ImageRef> images;
    std::map<std::string, std::string> metadata;

    bool operator==(const Claim&) const = default;
};

/// Throws InvalidArgument when id/text are empty or an image has no location.
void validate_claim(const Claim& claim);

enum class StoreKind {
    TextQueryText,   // web text found with the claim text
    ImageQueryText,  // web text found by reverse image search
    TextQueryImage,  // web images found with the claim text
};

std::string_view to_string(StoreKind kind);
StoreKind parse_store_kind(std::string_view raw);
inline bool is_textual(StoreKind kind) { return kind != StoreKind::TextQueryImage; }

enum class FillStatus { Original, Filled, Unfillable };
enum class Usefulness { Useful, Empty, Generic, Restricted };

std::string_view to_string(FillStatus status);
std::string_view to_string(Usefulness usefulness);
FillStatus parse_fill_status(std::string_view raw);
Usefulness parse_usefulness(std::string_view raw);

struct StoreEntry {
    std::string url;
    std::optional<std::string> text;
    std::optional<ImageRef> image;
    FillStatus fill_status = FillStatus::Original;
    Usefulness usefulness = Usefulness::Empty;
    // Text present before the filler replaced it; only set when fill_status == Filled.
    std::optional<std::string> original_text;
    std::optional<std::string> fill_reason;

    bool operator==(const StoreEntry&) const = default;
};

class KnowledgeStore {
  public:
    explicit KnowledgeStore(StoreKind kind) : kind_(kind) {}
    KnowledgeStore(StoreKind kind, std::vector<StoreEntry> entries);

    StoreKind kind() const noexcept { return kind_; }
    const std::vector<StoreEntry>& entries() const noexcept { return entries_; }
    std::vector<StoreEntry>& entries() noexcept { return entries_; }

    /// Throws InvalidArgument if an entry carries the wrong payload for the kind.
    void add(StoreEntry entry);

    bool operator==(const KnowledgeStore&) const = default;

  private:
    StoreKind kind_;
    std::vector<StoreEntry> entries_;
};

/// The three per-claim stores.
struct ClaimStores {
    KnowledgeStore text_query_text{StoreKind::TextQueryText};
    KnowledgeStore image_query_text{StoreKind::ImageQueryText};
    KnowledgeStore text_query_image{StoreKind::TextQueryImage};
};

struct QAPair {
    std::string question;
    std::string answer;
    int iteration = 1;
    int position = 1;

    bool operator==(const QAPair&) const = default;
};

struct QASet {
    std::vector<QAPair> pairs;
    int retries = 0;              // repair retries spent across all iterations
    bool count_deviation = false; // some iteration returned a count other than requested

    std::size_t size() const noexcept { return pairs.size(); }
    bool contains(const QAPair& pair) const;
};

enum class Label { Supported, Refuted, NotEnoughEvidence, ConflictingEvidenceCherrypicking };

inline constexpr std::array<Label, 4> kAllLabels = {
    Label::Supported, Label::Refuted, Label::NotEnoughEvidence, Label::ConflictingEvidenceCherrypicking};

/// Submission-facing names: "Supported", "Refuted", "Not Enough Evidence",
/// "Conflicting Evidence/Cherrypicking".
std::string_view canonical_name(Label label);

/// Tolerant of case, whitespace, and punctuation. Throws LabelInvalid.
Label parse_label(std::string_view raw);

struct Verdict {
    Label label = Label::NotEnoughEvidence;
    std::string justification;
    std::vector<QAPair> selected;
};

}  // namespace veristack
