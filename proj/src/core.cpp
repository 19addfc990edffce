#include "veristack/core.hpp"

#include <algorithm>
#include <cctype>

#include "veristack/errors.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::LabelInvalid: return "LabelInvalid";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::UrlInvalid: return "UrlInvalid";
    case ErrorCode::ExtractEmpty: return "ExtractEmpty";
    case ErrorCode::FetchFailed: return "FetchFailed";
    case ErrorCode::StatsEmptyInput: return "StatsEmptyInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ChunkNotInDocument: return "ChunkNotInDocument";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::BackendMalformed: return "BackendMalformed";
    case ErrorCode::BackendRejected: return "BackendRejected";
    case ErrorCode::MissingEvidenceSet: return "MissingEvidenceSet";
    case ErrorCode::ParseFailure: return "ParseFailure";
    case ErrorCode::QaGenerationFailed: return "QaGenerationFailed";
    case ErrorCode::VerdictFailed: return "VerdictFailed";
    case ErrorCode::SelectedNotInSet: return "SelectedNotInSet";
    case ErrorCode::EmptyInstances: return "EmptyInstances";
    case ErrorCode::MissingGold: return "MissingGold";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

void validate_claim(const Claim& claim)
{
    if (claim.id.empty()) {
        throw Error(ErrorCode::InvalidArgument, "claim id is empty");
    }
    if (trim(claim.text).empty()) {
        throw Error(ErrorCode::InvalidArgument, "claim " + claim.id + " has empty text");
    }
    for (const auto& image : claim.images) {
        if (image.location.empty()) {
            throw Error(ErrorCode::InvalidArgument, "claim " + claim.id + " has an image without location");
        }
    }
}

std::string_view to_string(StoreKind kind)
{
    switch (kind) {
    case StoreKind::TextQueryText: return "text_query_text";
    case StoreKind::ImageQueryText: return "image_query_text";
    case StoreKind::TextQueryImage: return "text_query_image";
    }
    return "unknown";
}

StoreKind parse_store_kind(std::string_view raw)
{
    for (auto kind : {StoreKind::TextQueryText, StoreKind::ImageQueryText, StoreKind::TextQueryImage}) {
        if (raw == to_string(kind)) {
            return kind;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown store kind '" + std::string(raw) + "'");
}

std::string_view to_string(FillStatus status)
{
    switch (status) {
    case FillStatus::Original: return "original";
    case FillStatus::Filled: return "filled";
    case FillStatus::Unfillable: return "unfillable";
    }
    return "unknown";
}

std::string_view to_string(Usefulness usefulness)
{
    switch (usefulness) {
    case Usefulness::Useful: return "useful";
    case Usefulness::Empty: return "empty";
    case Usefulness::Generic: return "generic";
    case Usefulness::Restricted: return "restricted";
    }
    return "unknown";
}

FillStatus parse_fill_status(std::string_view raw)
{
    for (auto s : {FillStatus::Original, FillStatus::Filled, FillStatus::Unfillable}) {
        if (raw == to_string(s)) {
            return s;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown fill status '" + std::string(raw) + "'");
}

Usefulness parse_usefulness(std::string_view raw)
{
    for (auto u : {Usefulness::Useful, Usefulness::Empty, Usefulness::Generic, Usefulness::Restricted}) {
        if (raw == to_string(u)) {
            return u;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown usefulness '" + std::string(raw) + "'");
}

namespace {

void check_entry(StoreKind kind, const StoreEntry& entry)
{
    if (kind == StoreKind::TextQueryImage) {
        if (!entry.image || entry.text) {
            throw Error(ErrorCode::InvalidArgument, "image store entry " + entry.url + " must carry an image only");
        }
        if (entry.image->location.empty()) {
            throw Error(ErrorCode::InvalidArgument, "image store entry " + entry.url + " has no image location");
        }
    } else if (entry.image) {
        throw Error(ErrorCode::InvalidArgument, "text store entry " + entry.url + " must not carry an image");
    }
}

}  // namespace

KnowledgeStore::KnowledgeStore(StoreKind kind, std::vector<StoreEntry> entries) : kind_(kind)
{
    for (const auto& e : entries) {
        check_entry(kind_, e);
    }
    entries_ = std::move(entries);
}

void KnowledgeStore::add(StoreEntry entry)
{
    check_entry(kind_, entry);
    entries_.push_back(std::move(entry));
}

bool QASet::contains(const QAPair& pair) const
{
    return std::any_of(pairs.begin(), pairs.end(), [&](const QAPair& p) {
        return p.question == pair.question && p.answer == pair.answer;
    });
}

std::string_view canonical_name(Label label)
{
    switch (label) {
    case Label::Supported: return "Supported";
    case Label::Refuted: return "Refuted";
    case Label::NotEnoughEvidence: return "Not Enough Evidence";
    case Label::ConflictingEvidenceCherrypicking: return "Conflicting Evidence/Cherrypicking";
    }
    return "";
}

namespace {

// Lowercase alphanumerics only: "Conflicting Evidence / Cherry-picking" -> "conflictingevidencecherrypicking".
std::string squash(std::string_view raw)
{
    std::string out;
    for (unsigned char c : raw) {
        if (std::isalnum(c)) {
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

}  // namespace

Label parse_label(std::string_view raw)
{
    const auto key = squash(raw);
    if (!key.empty()) {
        for (auto label : kAllLabels) {
            if (key == squash(canonical_name(label))) {
                return label;
            }
        }
        // Short forms models commonly emit.
        if (key == "nei" || key == "notenoughinfo" || key == "notenoughinformation") {
            return Label::NotEnoughEvidence;
        }
        if (key == "conflictingevidence" || key == "cherrypicking" || key == "conflicting") {
            return Label::ConflictingEvidenceCherrypicking;
        }
    }
    throw Error(ErrorCode::LabelInvalid, "'" + std::string(raw) + "' is not one of the four verdict labels");
}

}  // namespace veristack
