#include "veristack/fetcher.hpp"

#include <array>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "veristack/errors.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

namespace {

std::string origin_of(const UrlParts& parts)
{
    std::string origin = parts.scheme + "://" + parts.host;
    if (parts.port != 0) {
        origin += ":" + std::to_string(parts.port);
    }
    return origin;
}

std::string shell_quote(const std::string& s)
{
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    return out + "'";
}

std::optional<std::filesystem::path> find_on_path(const std::vector<std::string>& names)
{
    const char* path = std::getenv("PATH");
    if (!path) {
        return std::nullopt;
    }
    for (const auto& name : names) {
        for (auto dir : split(path, ':')) {
            if (dir.empty()) {
                continue;
            }
            std::filesystem::path candidate = std::filesystem::path(std::string(dir)) / name;
            std::error_code ec;
            if (std::filesystem::is_regular_file(candidate, ec)) {
                return candidate;
            }
        }
    }
    return std::nullopt;
}

}  // namespace

std::string HttpFetcher::fetch(const std::string& url, FetchRoute)
{
    UrlParts parts;
    try {
        parts = parse_url(url);
    } catch (const Error& e) {
        throw Error(ErrorCode::FetchFailed, e.detail());
    }
    httplib::Client client(origin_of(parts));
    client.set_follow_location(true);
    client.set_connection_timeout(timeout_s_, 0);
    client.set_read_timeout(timeout_s_, 0);
    client.enable_server_certificate_verification(false);
    httplib::Headers headers = {
        {"User-Agent",
         "Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/124.0 Safari/537.36"},
        {"Accept", "text/html,application/xhtml+xml,application/xml;q=0.9,*/*;q=0.8"},
        {"Accept-Language", "en-US,en;q=0.9"},
    };
    auto res = client.Get(parts.target, headers);
    if (!res) {
        throw Error(ErrorCode::FetchFailed, url + ": " + httplib::to_string(res.error()));
    }
    if (res->status < 200 || res->status >= 300) {
        throw Error(ErrorCode::FetchFailed, url + ": HTTP " + std::to_string(res->status));
    }
    return res->body;
}

BrowserFetcher::BrowserFetcher(int timeout_s, std::optional<std::filesystem::path> browser)
    : timeout_s_(timeout_s), browser_(std::move(browser)), http_(timeout_s)
{
    if (!browser_) {
        if (const char* env = std::getenv("VERISTACK_BROWSER"); env && *env) {
            browser_ = std::filesystem::path(env);
        } else {
            browser_ = find_on_path({"chromium", "chromium-browser", "google-chrome", "google-chrome-stable"});
        }
    }
}

std::string BrowserFetcher::fetch(const std::string& url, FetchRoute route)
{
    if (route == FetchRoute::Static || !browser_) {
        return http_.fetch(url, route);
    }
    auto command = "timeout " + std::to_string(timeout_s_) + " " + shell_quote(browser_->string()) +
                   " --headless --disable-gpu --no-sandbox --dump-dom " + shell_quote(url) + " 2>/dev/null";
    FILE* pipe = popen(command.c_str(), "r");
    if (!pipe) {
        throw Error(ErrorCode::FetchFailed, url + ": cannot launch browser");
    }
    std::string html;
    std::array<char, 8192> buf{};
    while (auto n = std::fread(buf.data(), 1, buf.size(), pipe)) {
        html.append(buf.data(), n);
    }
    int status = pclose(pipe);
    if (status != 0 || html.empty()) {
        throw Error(ErrorCode::FetchFailed, url + ": browser exited with status " + std::to_string(status));
    }
    return html;
}

ScriptedFetcher::ScriptedFetcher(ScriptedFetcher&& other) noexcept
    : replies_(std::move(other.replies_)), per_url_(std::move(other.per_url_)), calls_(other.calls_.load())
{}

void ScriptedFetcher::add_page(std::string url, std::string html)
{
    std::lock_guard lock(mutex_);
    replies_[std::move(url)] = Reply{std::move(html), {}};
}

void ScriptedFetcher::add_failure(std::string url, std::string reason)
{
    std::lock_guard lock(mutex_);
    replies_[std::move(url)] = Reply{std::nullopt, std::move(reason)};
}

ScriptedFetcher ScriptedFetcher::from_directory(const std::filesystem::path& dir)
{
    std::ifstream in(dir / "index.json");
    if (!in) {
        throw Error(ErrorCode::IoError, "missing " + (dir / "index.json").string());
    }
    nlohmann::json index;
    try {
        index = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, "bad fake-page index: " + std::string(e.what()));
    }
    ScriptedFetcher fetcher;
    for (const auto& [url, value] : index.items()) {
        if (value.is_string()) {
            std::ifstream page(dir / value.get<std::string>(), std::ios::binary);
            if (!page) {
                throw Error(ErrorCode::IoError, "missing fake page " + value.get<std::string>());
            }
            std::ostringstream buf;
            buf << page.rdbuf();
            fetcher.add_page(url, buf.str());
        } else {
            fetcher.add_failure(url, value.value("error", "scripted failure"));
        }
    }
    return fetcher;
}

std::string ScriptedFetcher::fetch(const std::string& url, FetchRoute)
{
    ++calls_;
    std::lock_guard lock(mutex_);
    ++per_url_[url];
    auto it = replies_.find(url);
    if (it == replies_.end()) {
        throw Error(ErrorCode::FetchFailed, url + ": no scripted page");
    }
    if (!it->second.html) {
        throw Error(ErrorCode::FetchFailed, url + ": " + it->second.error);
    }
    return *it->second.html;
}

int ScriptedFetcher::calls_for(const std::string& url) const
{
    std::lock_guard lock(mutex_);
    auto it = per_url_.find(url);
    return it == per_url_.end() ? 0 : it->second;
}

}  // namespace veristack
