#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

namespace veristack {

enum class FetchRoute { Static, ScriptedBrowser };

std::string_view to_string(FetchRoute route);

/// fetch(url, route) -> html. Failures throw Error(FetchFailed). Implementations
/// must tolerate concurrent calls.
class Fetcher {
  public:
    virtual ~Fetcher() = default;
    virtual std::string fetch(const std::string& url, FetchRoute route) = 0;

    /// Attempts per route: Static gets one retry, ScriptedBrowser none.
    static int attempts_for(FetchRoute route) { return route == FetchRoute::Static ? 2 : 1; }
};

/// Plain HTTP(S) GET with browser-like headers, following redirects.
class HttpFetcher : public Fetcher {
  public:
    explicit HttpFetcher(int timeout_s = 30) : timeout_s_(timeout_s) {}
    std::string fetch(const std::string& url, FetchRoute route) override;

  private:
    int timeout_s_;
};

/// Renders pages with a headless Chromium (`--dump-dom`). Routes Static URLs,
/// and everything when no browser binary is found, through HttpFetcher.
class BrowserFetcher : public Fetcher {
  public:
    /// `browser` overrides discovery; otherwise VERISTACK_BROWSER, then PATH.
    explicit BrowserFetcher(int timeout_s = 30, std::optional<std::filesystem::path> browser = std::nullopt);
    std::string fetch(const std::string& url, FetchRoute route) override;

    bool has_browser() const noexcept { return browser_.has_value(); }

  private:
    int timeout_s_;
    std::optional<std::filesystem::path> browser_;
    HttpFetcher http_;
};

/// In-memory fetcher serving canned pages. Unknown URLs fail.
class ScriptedFetcher : public Fetcher {
  public:
    void add_page(std::string url, std::string html);
    void add_failure(std::string url, std::string reason);

    /// Reads DIR/index.json: {"<url>": "<file relative to DIR>" | {"error": "<reason>"}}.
    static ScriptedFetcher from_directory(const std::filesystem::path& dir);

    std::string fetch(const std::string& url, FetchRoute route) override;

    int calls() const noexcept { return calls_.load(); }
    int calls_for(const std::string& url) const;

    ScriptedFetcher() = default;
    ScriptedFetcher(ScriptedFetcher&& other) noexcept;

  private:
    struct Reply {
        std::optional<std::string> html;
        std::string error;
    };
    std::map<std::string, Reply> replies_;
    mutable std::mutex mutex_;
    std::map<std::string, int> per_url_;
    std::atomic<int> calls_{0};
};

}  // namespace veristack
