#include "veristack/text_util.hpp"

#include <algorithm>
#include <cctype>

#include "veristack/errors.hpp"

namespace veristack {

std::vector<std::string_view> split(std::string_view text, char sep)
{
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
        auto pos = text.find(sep, start);
        if (pos == std::string_view::npos) {
            parts.push_back(text.substr(start));
            return parts;
        }
        parts.push_back(text.substr(start, pos - start));
        start = pos + 1;
    }
}

namespace {
bool is_space(char c)
{
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}
}  // namespace

std::string_view trim(std::string_view text)
{
    while (!text.empty() && is_space(text.front())) {
        text.remove_prefix(1);
    }
    while (!text.empty() && is_space(text.back())) {
        text.remove_suffix(1);
    }
    return text;
}

std::string to_lower_ascii(std::string_view text)
{
    std::string out(text);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string collapse_whitespace(std::string_view text)
{
    std::string out;
    out.reserve(text.size());
    bool pending_space = false;
    for (char c : text) {
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(c);
    }
    return out;
}

std::vector<std::string> tokenize(std::string_view text)
{
    std::vector<std::string> tokens;
    std::string current;
    for (unsigned char c : text) {
        if (std::isalnum(c) || c >= 0x80) {
            current.push_back(static_cast<char>(std::tolower(c)));
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) {
        tokens.push_back(std::move(current));
    }
    return tokens;
}

namespace {

// Length of the well-formed UTF-8 sequence starting at text[i], or 1.
std::size_t sequence_length(std::string_view text, std::size_t i)
{
    auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = 1;
    if (lead >= 0xF0 && lead <= 0xF4) {
        len = 4;
    } else if (lead >= 0xE0) {
        len = lead <= 0xEF ? 3 : 1;
    } else if (lead >= 0xC2 && lead <= 0xDF) {
        len = 2;
    }
    if (len == 1 || i + len > text.size()) {
        return 1;
    }
    for (std::size_t k = 1; k < len; ++k) {
        if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
            return 1;
        }
    }
    return len;
}

}  // namespace

std::vector<std::size_t> scalar_offsets(std::string_view text)
{
    std::vector<std::size_t> offsets;
    offsets.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); i += sequence_length(text, i)) {
        offsets.push_back(i);
    }
    return offsets;
}

std::size_t scalar_count(std::string_view text)
{
    std::size_t n = 0;
    for (std::size_t i = 0; i < text.size(); i += sequence_length(text, i)) {
        ++n;
    }
    return n;
}

std::string truncate_scalars(std::string_view text, std::size_t max_scalars, std::string_view marker)
{
    std::size_t i = 0;
    std::size_t n = 0;
    while (i < text.size() && n < max_scalars) {
        i += sequence_length(text, i);
        ++n;
    }
    if (i >= text.size()) {
        return std::string(text);
    }
    return std::string(text.substr(0, i)) + std::string(marker);
}

UrlParts parse_url(std::string_view url)
{
    auto fail = [&] { return Error(ErrorCode::UrlInvalid, "cannot parse url '" + std::string(url) + "'"); };
    url = trim(url);
    auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos || scheme_end == 0) {
        throw fail();
    }
    UrlParts parts;
    parts.scheme = to_lower_ascii(url.substr(0, scheme_end));
    for (char c : parts.scheme) {
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '+' && c != '-' && c != '.') {
            throw fail();
        }
    }
    auto rest = url.substr(scheme_end + 3);
    auto authority_end = rest.find_first_of("/?#");
    auto authority = rest.substr(0, authority_end);
    parts.target = authority_end == std::string_view::npos ? "/" : std::string(rest.substr(authority_end));
    if (parts.target.front() != '/') {
        parts.target.insert(parts.target.begin(), '/');
    }
    if (auto at = authority.rfind('@'); at != std::string_view::npos) {
        authority = authority.substr(at + 1);
    }
    auto colon = authority.rfind(':');
    std::string_view host = authority;
    if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        host = authority.substr(0, colon);
        auto port_text = authority.substr(colon + 1);
        if (port_text.empty() || port_text.size() > 5 ||
            !std::all_of(port_text.begin(), port_text.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
            throw fail();
        }
        parts.port = std::stoi(std::string(port_text));
    }
    if (host.empty()) {
        throw fail();
    }
    for (char c : host) {
        auto uc = static_cast<unsigned char>(c);
        if (!std::isalnum(uc) && c != '-' && c != '.' && c != '_' && c != '[' && c != ']' && c != ':' && uc < 0x80) {
            throw fail();
        }
    }
    parts.host = to_lower_ascii(host);
    while (!parts.host.empty() && parts.host.back() == '.') {
        parts.host.pop_back();
    }
    if (parts.host.empty()) {
        throw fail();
    }
    return parts;
}

std::string display_domain(std::string_view url)
{
    try {
        auto host = parse_url(url).host;
        if (host.rfind("www.", 0) == 0) {
            host.erase(0, 4);
        }
        return host;
    } catch (const Error&) {
        return {};
    }
}

std::string registered_domain(std::string_view host)
{
    auto labels = split(host, '.');
    if (labels.size() <= 2) {
        return std::string(host);
    }
    static const std::vector<std::string_view> second_level = {"co", "com", "org", "net", "ac", "gov", "edu", "ne", "or"};
    auto n = labels.size();
    std::size_t keep = 2;
    if (labels[n - 1].size() == 2 &&
        std::find(second_level.begin(), second_level.end(), labels[n - 2]) != second_level.end()) {
        keep = 3;
    }
    std::string out;
    for (auto i = n - keep; i < n; ++i) {
        out += (out.empty() ? "" : ".") + std::string(labels[i]);
    }
    return out;
}

}  // namespace veristack
