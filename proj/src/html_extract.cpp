#include <algorithm>
#include <cctype>
#include <set>
#include <string>
#include <vector>

#include "veristack/errors.hpp"
#include "veristack/store_filler.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

namespace {

// Contents dropped wholesale; the tokenizer skips straight to the close tag.
const std::set<std::string> kRawTextTags = {"script", "style", "noscript", "template", "svg",
                                            "iframe", "textarea", "title", "object", "canvas"};

const std::set<std::string> kVoidTags = {"area", "base", "br", "col", "embed", "hr", "img", "input",
                                         "link", "meta", "source", "track", "wbr", "param"};

const std::set<std::string> kBlockTags = {
    "address", "article", "aside", "blockquote", "body", "br", "center", "dd", "details", "div", "dl",
    "dt", "figcaption", "figure", "footer", "h1", "h2", "h3", "h4", "h5", "h6", "header", "hr", "html",
    "li", "main", "nav", "ol", "p", "pre", "section", "summary", "table", "td", "th", "tr", "ul"};

const std::set<std::string> kBoilerplateTags = {"nav", "footer", "aside", "form", "button", "select",
                                                "label", "dialog", "menu", "head", "fieldset"};

// Matched against tokens of class/id values.
const std::set<std::string> kBoilerplateTokens = {
    "nav", "navbar", "navigation", "menu", "footer", "cookie", "cookies", "consent", "gdpr", "banner",
    "login", "signin", "signup", "subscribe", "newsletter", "breadcrumb", "breadcrumbs", "sidebar",
    "share", "sharing", "social", "popup", "modal", "overlay", "advert", "advertisement", "ads", "promo",
    "paywall", "skip", "masthead"};

const std::set<std::string> kBoilerplateRoles = {"navigation", "banner", "contentinfo", "complementary",
                                                 "dialog", "alertdialog", "search", "menu", "menubar"};

// Containers never suppressed by attributes alone.
const std::set<std::string> kContentRoots = {"html", "body", "main", "article"};

struct Tag {
    std::string name;
    bool closing = false;
    bool self_closing = false;
    std::vector<std::pair<std::string, std::string>> attributes;
};

void append_utf8(std::string& out, unsigned long cp)
{
    if (cp == 0 || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        cp = 0xFFFD;
    }
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

std::string decode_entities(std::string_view text)
{
    static const std::pair<std::string_view, unsigned long> named[] = {
        {"amp", '&'},      {"lt", '<'},        {"gt", '>'},        {"quot", '"'},     {"apos", '\''},
        {"nbsp", 0xA0},    {"copy", 0xA9},     {"reg", 0xAE},      {"mdash", 0x2014}, {"ndash", 0x2013},
        {"hellip", 0x2026}, {"lsquo", 0x2018}, {"rsquo", 0x2019},  {"ldquo", 0x201C}, {"rdquo", 0x201D},
        {"trade", 0x2122}, {"eacute", 0xE9},   {"laquo", 0xAB},    {"raquo", 0xBB},   {"middot", 0xB7}};
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        if (text[i] != '&') {
            out.push_back(text[i]);
            continue;
        }
        auto semi = text.find(';', i + 1);
        if (semi == std::string_view::npos || semi - i > 10) {
            out.push_back('&');
            continue;
        }
        auto name = text.substr(i + 1, semi - i - 1);
        bool decoded = false;
        if (!name.empty() && name[0] == '#') {
            try {
                unsigned long cp = (name.size() > 1 && (name[1] == 'x' || name[1] == 'X'))
                                       ? std::stoul(std::string(name.substr(2)), nullptr, 16)
                                       : std::stoul(std::string(name.substr(1)), nullptr, 10);
                append_utf8(out, cp == 0xA0 ? ' ' : cp);
                decoded = true;
            } catch (const std::exception&) {
            }
        } else {
            for (const auto& [entity, cp] : named) {
                if (name == entity) {
                    append_utf8(out, cp == 0xA0 ? ' ' : cp);
                    decoded = true;
                    break;
                }
            }
        }
        if (decoded) {
            i = semi;
        } else {
            out.push_back('&');
        }
    }
    return out;
}

bool starts_tag(std::string_view html, std::size_t i)
{
    if (html[i] != '<' || i + 1 >= html.size()) {
        return false;
    }
    auto c = static_cast<unsigned char>(html[i + 1]);
    return std::isalpha(c) || c == '/' || c == '!' || c == '?';
}

// Parses the tag starting at html[i] == '<'; returns the index past '>'.
std::size_t parse_tag(std::string_view html, std::size_t i, Tag& tag)
{
    std::size_t p = i + 1;
    if (p < html.size() && html[p] == '/') {
        tag.closing = true;
        ++p;
    }
    while (p < html.size() && (std::isalnum(static_cast<unsigned char>(html[p])) || html[p] == '-' || html[p] == ':')) {
        tag.name.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(html[p]))));
        ++p;
    }
    while (p < html.size() && html[p] != '>') {
        auto c = static_cast<unsigned char>(html[p]);
        if (std::isspace(c)) {
            ++p;
            continue;
        }
        if (c == '/') {
            tag.self_closing = true;
            ++p;
            continue;
        }
        std::string key;
        while (p < html.size() && !std::isspace(static_cast<unsigned char>(html[p])) && html[p] != '=' &&
               html[p] != '>' && html[p] != '/') {
            key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(html[p]))));
            ++p;
        }
        std::string value;
        if (p < html.size() && html[p] == '=') {
            ++p;
            if (p < html.size() && (html[p] == '"' || html[p] == '\'')) {
                char quote = html[p++];
                auto end = html.find(quote, p);
                if (end == std::string_view::npos) {
                    end = html.size();
                }
                value = std::string(html.substr(p, end - p));
                p = std::min(end + 1, html.size());
            } else {
                while (p < html.size() && !std::isspace(static_cast<unsigned char>(html[p])) && html[p] != '>') {
                    value.push_back(html[p++]);
                }
            }
        }
        if (!key.empty()) {
            tag.attributes.emplace_back(std::move(key), std::move(value));
        } else if (p < html.size() && html[p] != '>') {
            ++p;
        }
    }
    return std::min(p + 1, html.size());
}

bool attribute_marks_boilerplate(const Tag& tag)
{
    if (kContentRoots.count(tag.name)) {
        return false;
    }
    for (const auto& [key, value] : tag.attributes) {
        if (key == "hidden" || (key == "aria-hidden" && to_lower_ascii(value) == "true")) {
            return true;
        }
        if (key == "role" && kBoilerplateRoles.count(to_lower_ascii(trim(value)))) {
            return true;
        }
        if (key == "class" || key == "id") {
            std::string token;
            auto flush = [&] {
                bool hit = kBoilerplateTokens.count(token) > 0;
                token.clear();
                return hit;
            };
            for (char c : value) {
                if (std::isalnum(static_cast<unsigned char>(c))) {
                    token.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
                } else if (flush()) {
                    return true;
                }
            }
            if (flush()) {
                return true;
            }
        }
    }
    return false;
}

struct OpenElement {
    std::string name;
    bool suppressed;
};

// Position of "</name" at or after `from`, case-insensitive.
std::size_t find_close_tag(std::string_view html, std::size_t from, const std::string& name)
{
    for (auto p = html.find("</", from); p != std::string_view::npos; p = html.find("</", p + 2)) {
        if (p + 2 + name.size() > html.size()) {
            break;
        }
        bool match = true;
        for (std::size_t k = 0; k < name.size() && match; ++k) {
            match = std::tolower(static_cast<unsigned char>(html[p + 2 + k])) == name[k];
        }
        if (match) {
            return p;
        }
    }
    return std::string_view::npos;
}

bool looks_like_markup(std::string_view html)
{
    for (std::size_t i = 0; i + 1 < html.size(); ++i) {
        if (starts_tag(html, i)) {
            return true;
        }
    }
    return false;
}

std::string finish(const std::vector<std::string>& paragraphs, const UsefulnessRules& rules)
{
    std::string out;
    for (const auto& raw : paragraphs) {
        auto line = collapse_whitespace(raw);
        if (line.empty() || rules.is_generic_line(line) || rules.is_login_line(line)) {
            continue;
        }
        if (!out.empty()) {
            out.push_back('\n');
        }
        out += line;
    }
    if (out.empty()) {
        throw Error(ErrorCode::ExtractEmpty, "no substantive text after boilerplate removal");
    }
    return out;
}

}  // namespace

std::string extract_main_content(std::string_view html, const UsefulnessRules& rules)
{
    if (!looks_like_markup(html)) {
        std::vector<std::string> lines;
        for (auto line : split(html, '\n')) {
            lines.emplace_back(line);
        }
        return finish(lines, rules);
    }

    std::vector<std::string> paragraphs(1);
    std::vector<OpenElement> stack;
    int suppressed_depth = 0;
    auto in_content_root = [&] {
        return std::any_of(stack.begin(), stack.end(),
                           [](const OpenElement& e) { return e.name == "article" || e.name == "main"; });
    };
    auto pop_to = [&](const std::string& name) {
        auto it = std::find_if(stack.rbegin(), stack.rend(), [&](const OpenElement& e) { return e.name == name; });
        if (it == stack.rend()) {
            return;
        }
        auto keep = static_cast<std::size_t>(stack.rend() - it) - 1;
        for (auto k = keep; k < stack.size(); ++k) {
            suppressed_depth -= stack[k].suppressed ? 1 : 0;
        }
        stack.resize(keep);
    };
    auto paragraph_break = [&] {
        if (!paragraphs.back().empty()) {
            paragraphs.emplace_back();
        }
    };

    std::size_t i = 0;
    while (i < html.size()) {
        if (html.compare(i, 4, "<!--") == 0) {
            auto end = html.find("-->", i + 4);
            i = end == std::string_view::npos ? html.size() : end + 3;
            continue;
        }
        if (starts_tag(html, i) && (html[i + 1] == '!' || html[i + 1] == '?')) {
            auto end = html.find('>', i);
            i = end == std::string_view::npos ? html.size() : end + 1;
            continue;
        }
        if (!starts_tag(html, i)) {
            auto next = html.find('<', i + 1);
            while (next != std::string_view::npos && !starts_tag(html, next)) {
                next = html.find('<', next + 1);
            }
            auto end = next == std::string_view::npos ? html.size() : next;
            if (suppressed_depth == 0) {
                paragraphs.back() += decode_entities(html.substr(i, end - i));
            }
            i = end;
            continue;
        }

        Tag tag;
        i = parse_tag(html, i, tag);
        if (tag.name.empty()) {
            continue;
        }
        if (tag.closing) {
            pop_to(tag.name);
            if (kBlockTags.count(tag.name)) {
                paragraph_break();
            }
            continue;
        }
        if (tag.name == "body") {
            stack.clear();
            suppressed_depth = 0;
        }
        if (kBlockTags.count(tag.name)) {
            paragraph_break();
        }
        if (kRawTextTags.count(tag.name) && !tag.self_closing) {
            auto end = find_close_tag(html, i, tag.name);
            if (end == std::string_view::npos) {
                i = html.size();
            } else {
                auto gt = html.find('>', end);
                i = gt == std::string_view::npos ? html.size() : gt + 1;
            }
            continue;
        }
        if (kVoidTags.count(tag.name) || tag.self_closing) {
            continue;
        }
        bool suppress = kBoilerplateTags.count(tag.name) > 0 || attribute_marks_boilerplate(tag) ||
                        (tag.name == "header" && !in_content_root());
        stack.push_back({tag.name, suppress});
        suppressed_depth += suppress ? 1 : 0;
    }
    return finish(paragraphs, rules);
}

}  // namespace veristack
