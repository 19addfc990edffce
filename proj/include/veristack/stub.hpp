#pragma once

#include <string>
#include <string_view>
#include <vector>

// Deterministic stand-ins for the model endpoints. schema/stub_rules.md is the
// normative description; any stub server must reproduce these byte-for-byte.
namespace veristack::stub {

/// Signed feature hashing of unigrams and bigrams into `dim` buckets, L2-normalized.
/// Text without tokens maps to the first basis vector.
std::vector<float> embed_text(std::string_view text, int dim);

/// Same hashing over 8-character shingles (stride 4) of the base64 payload.
std::vector<float> embed_image(std::string_view image_b64, int dim);

/// Number of distinct query tokens present in the document.
double rerank_score(std::string_view query, std::string_view document);

/// First matching rule: verdict prompt, QA prompt, analysis prompt, echo.
std::string generate(std::string_view prompt);

}  // namespace veristack::stub
