#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace veristack {

std::vector<std::string_view> split(std::string_view text, char sep);
std::string_view trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

/// Collapses runs of whitespace to one space and trims.
std::string collapse_whitespace(std::string_view text);

/// Lowercased tokens split on ASCII non-alphanumerics. Bytes >= 0x80 are kept
/// inside tokens so non-Latin words survive intact.
std::vector<std::string> tokenize(std::string_view text);

// UTF-8 helpers. Malformed sequences are treated as one scalar per byte.

/// Byte offsets where each Unicode scalar value starts.
std::vector<std::size_t> scalar_offsets(std::string_view text);
std::size_t scalar_count(std::string_view text);

/// First `max_scalars` scalars of text, with `marker` appended when cut.
std::string truncate_scalars(std::string_view text, std::size_t max_scalars, std::string_view marker = "...");

struct UrlParts {
    std::string scheme;
    std::string host;  // lowercased, no port
    int port = 0;      // 0 when absent
    std::string target;  // path + query, "/" when absent
};

/// Throws UrlInvalid for anything that is not scheme://host[...].
UrlParts parse_url(std::string_view url);

/// Host with a leading "www." removed; empty when the url does not parse.
std::string display_domain(std::string_view url);

/// Registrable domain: last two labels, or last three when the second-level
/// label is a common public suffix ("co.uk", "com.au").
std::string registered_domain(std::string_view host);

}  // namespace veristack
