#include <algorithm>
#include <set>

#include "veristack/errors.hpp"
#include "veristack/resources.hpp"
#include "veristack/store_filler.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

namespace {

// Joins the non-comment lines of a pattern document into one alternation.
std::optional<std::regex> compile_patterns(std::string_view document)
{
    std::string alternation;
    for (auto line : split(document, '\n')) {
        auto pattern = trim(line);
        if (pattern.empty() || pattern.front() == '#') {
            continue;
        }
        alternation += (alternation.empty() ? "(?:" : "|(?:") + std::string(pattern) + ")";
    }
    if (alternation.empty()) {
        return std::nullopt;
    }
    try {
        return std::regex(alternation, std::regex::ECMAScript | std::regex::icase | std::regex::optimize);
    } catch (const std::regex_error& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("bad boilerplate pattern: ") + e.what());
    }
}

bool matches_short_line(const std::regex& re, std::string_view line)
{
    auto trimmed = trim(line);
    if (trimmed.empty() || scalar_count(trimmed) > UsefulnessRules::kMaxPatternLineChars) {
        return false;
    }
    return std::regex_search(trimmed.begin(), trimmed.end(), re);
}

}  // namespace

UsefulnessRules::UsefulnessRules(std::string_view generic_patterns, std::string_view login_patterns)
{
    if (auto re = compile_patterns(generic_patterns)) {
        generic_ = std::move(*re);
        has_generic_ = true;
    }
    if (auto re = compile_patterns(login_patterns)) {
        login_ = std::move(*re);
        has_login_ = true;
    }
}

const UsefulnessRules& UsefulnessRules::defaults()
{
    static const UsefulnessRules rules(resources::generic_patterns(), resources::login_patterns());
    return rules;
}

UsefulnessRules UsefulnessRules::with_thresholds(int min_chars, double line_ratio) const
{
    UsefulnessRules copy = *this;
    copy.min_chars_ = min_chars;
    copy.line_ratio_ = line_ratio;
    return copy;
}

bool UsefulnessRules::is_generic_line(std::string_view line) const
{
    return has_generic_ && matches_short_line(generic_, line);
}

bool UsefulnessRules::is_login_line(std::string_view line) const
{
    return has_login_ && matches_short_line(login_, line);
}

Usefulness assess_usefulness(const std::optional<std::string>& text, const UsefulnessRules& rules)
{
    if (!text || trim(*text).empty()) {
        return Usefulness::Empty;
    }
    std::size_t lines = 0;
    std::size_t login = 0;
    std::size_t generic = 0;
    for (auto line : split(*text, '\n')) {
        if (trim(line).empty()) {
            continue;
        }
        ++lines;
        login += rules.is_login_line(line) ? 1 : 0;
        generic += rules.is_generic_line(line) ? 1 : 0;
    }
    const auto ratio = [lines](std::size_t n) { return static_cast<double>(n) / static_cast<double>(lines); };
    if (ratio(login) > rules.line_ratio()) {
        return Usefulness::Restricted;
    }
    if (ratio(generic) > rules.line_ratio()) {
        return Usefulness::Generic;
    }
    if (scalar_count(collapse_whitespace(*text)) < static_cast<std::size_t>(rules.min_chars())) {
        return Usefulness::Generic;
    }
    return Usefulness::Useful;
}

namespace {

const std::set<std::string>& browser_domains()
{
    static const std::set<std::string> domains = [] {
        std::set<std::string> out;
        for (auto line : split(resources::browser_domains(), '\n')) {
            auto d = trim(line);
            if (!d.empty() && d.front() != '#') {
                out.insert(to_lower_ascii(d));
            }
        }
        return out;
    }();
    return domains;
}

}  // namespace

std::string_view to_string(FetchRoute route)
{
    return route == FetchRoute::Static ? "static" : "scripted_browser";
}

FetchRoute classify_fetch_route(std::string_view url)
{
    auto parts = parse_url(url);
    if (parts.scheme != "http" && parts.scheme != "https") {
        throw Error(ErrorCode::UrlInvalid, "unsupported scheme in '" + std::string(url) + "'");
    }
    return browser_domains().count(registered_domain(parts.host)) ? FetchRoute::ScriptedBrowser : FetchRoute::Static;
}

}  // namespace veristack
