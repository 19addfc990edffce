#include <algorithm>
#include <atomic>
#include <thread>

#include <spdlog/spdlog.h>

#include "veristack/errors.hpp"
#include "veristack/store_filler.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

namespace {

bool has_text(const std::optional<std::string>& text)
{
    return text && !trim(*text).empty();
}

struct FetchOutcome {
    std::optional<std::string> text;  // set when the fetched page passed the usefulness check
    std::string reason;
};

FetchOutcome fetch_one(const std::string& url, Fetcher& fetcher, const UsefulnessRules& rules)
{
    FetchRoute route;
    try {
        route = classify_fetch_route(url);
    } catch (const Error& e) {
        return {std::nullopt, e.detail()};
    }
    std::string html;
    std::string last_error;
    bool fetched = false;
    for (int attempt = 0; attempt < Fetcher::attempts_for(route) && !fetched; ++attempt) {
        try {
            html = fetcher.fetch(url, route);
            fetched = true;
        } catch (const std::exception& e) {
            last_error = e.what();
        }
    }
    if (!fetched) {
        return {std::nullopt, "fetch failed: " + last_error};
    }
    std::string content;
    try {
        content = extract_main_content(html, rules);
    } catch (const Error& e) {
        return {std::nullopt, "extraction empty: " + e.detail()};
    }
    auto usefulness = assess_usefulness(content, rules);
    if (usefulness != Usefulness::Useful) {
        return {std::nullopt, "fetched content is " + std::string(to_string(usefulness))};
    }
    return {std::move(content), {}};
}

SnapshotStats summarize(const std::vector<std::int64_t>& counts)
{
    SnapshotStats s;
    s.min = *std::min_element(counts.begin(), counts.end());
    s.max = *std::max_element(counts.begin(), counts.end());
    double sum = 0.0;
    for (auto c : counts) {
        sum += static_cast<double>(c);
    }
    s.avg = sum / static_cast<double>(counts.size());
    return s;
}

}  // namespace

std::int64_t original_evidence_count(const KnowledgeStore& store)
{
    return std::count_if(store.entries().begin(), store.entries().end(), [](const StoreEntry& e) {
        return has_text(e.fill_status == FillStatus::Filled ? e.original_text : e.text);
    });
}

std::int64_t filled_evidence_count(const KnowledgeStore& store)
{
    return std::count_if(store.entries().begin(), store.entries().end(),
                         [](const StoreEntry& e) { return has_text(e.text); });
}

FillStats compute_fill_stats(std::span<const KnowledgeStore> stores)
{
    if (stores.empty()) {
        throw Error(ErrorCode::StatsEmptyInput, "no stores to summarize");
    }
    std::vector<std::int64_t> original;
    std::vector<std::int64_t> filled;
    for (const auto& store : stores) {
        original.push_back(original_evidence_count(store));
        filled.push_back(filled_evidence_count(store));
    }
    return FillStats{summarize(original), summarize(filled), stores.size()};
}

FillResult fill_store(const KnowledgeStore& store, Fetcher& fetcher, const FillOptions& options)
{
    if (!is_textual(store.kind())) {
        throw Error(ErrorCode::InvalidArgument, "image stores are not filled");
    }
    const auto& rules = *options.rules;
    KnowledgeStore out = store;
    auto& entries = out.entries();

    std::vector<std::size_t> pending;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        auto& e = entries[i];
        if (e.fill_status == FillStatus::Unfillable) {
            continue;
        }
        e.usefulness = assess_usefulness(e.text, rules);
        if (e.usefulness != Usefulness::Useful) {
            pending.push_back(i);
        }
    }

    // Fetch concurrently; entries are only written in the merge below.
    std::vector<FetchOutcome> outcomes(pending.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto k = next++; k < pending.size(); k = next++) {
            outcomes[k] = fetch_one(entries[pending[k]].url, fetcher, rules);
        }
    };
    auto n_workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, options.workers)), pending.size());
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < n_workers; ++w) {
            pool.emplace_back(worker);
        }
        if (n_workers > 0) {
            worker();
        }
    }

    for (std::size_t k = 0; k < pending.size(); ++k) {
        auto& e = entries[pending[k]];
        auto& outcome = outcomes[k];
        if (outcome.text) {
            e.original_text = std::move(e.text);
            e.text = std::move(outcome.text);
            e.fill_status = FillStatus::Filled;
            e.usefulness = Usefulness::Useful;
            e.fill_reason.reset();
        } else {
            e.fill_status = FillStatus::Unfillable;
            e.fill_reason = outcome.reason;
            spdlog::debug("unfillable {}: {}", e.url, outcome.reason);
        }
    }

    FillResult result{out, {}, static_cast<int>(pending.size())};
    result.stats = compute_fill_stats(std::span<const KnowledgeStore>(&result.store, 1));
    return result;
}

}  // namespace veristack
