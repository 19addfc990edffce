#include "veristack/store_io.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "veristack/errors.hpp"
#include "veristack/text_util.hpp"

namespace veristack {

namespace fs = std::filesystem;
using nlohmann::json;

std::string read_text_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text_file(const fs::path& path, const std::string& content)
{
    std::error_code ec;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path(), ec);
    }
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::IoError, "cannot write " + tmp.string());
        }
        out << content;
        if (!out.flush()) {
            throw Error(ErrorCode::IoError, "short write to " + tmp.string());
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot rename onto " + path.string() + ": " + ec.message());
    }
}

std::string store_file_name(StoreKind kind, bool filled)
{
    return std::string(to_string(kind)) + (filled ? ".filled.jsonl" : ".jsonl");
}

namespace {

std::optional<std::string> optional_string(const json& j, const char* key)
{
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        return std::nullopt;
    }
    if (!it->is_string()) {
        throw Error(ErrorCode::IoError, std::string(key) + " must be a string or null");
    }
    return it->get<std::string>();
}

std::string resolve(const fs::path& base, const std::string& raw)
{
    fs::path p(raw);
    if (p.is_absolute() || raw.find("://") != std::string::npos) {
        return raw;
    }
    return (base / p).lexically_normal().string();
}

}  // namespace

KnowledgeStore read_store_jsonl(const fs::path& path, StoreKind kind)
{
    KnowledgeStore store(kind);
    auto content = read_text_file(path);
    int line_no = 0;
    for (auto line : split(content, '\n')) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            auto j = json::parse(line);
            StoreEntry e;
            e.url = j.at("url").get<std::string>();
            if (kind == StoreKind::TextQueryImage) {
                auto image_path = optional_string(j, "image_path");
                if (!image_path) {
                    throw Error(ErrorCode::IoError, "image store line without image_path");
                }
                e.image = ImageRef{*image_path, resolve(path.parent_path(), *image_path), std::nullopt};
                e.usefulness = Usefulness::Useful;
            } else {
                e.text = optional_string(j, "url2text");
                e.original_text = optional_string(j, "original_url2text");
                e.fill_reason = optional_string(j, "fill_reason");
                e.fill_status = j.contains("fill_status") ? parse_fill_status(j["fill_status"].get<std::string>())
                                                          : FillStatus::Original;
                e.usefulness = j.contains("usefulness") ? parse_usefulness(j["usefulness"].get<std::string>())
                                                        : assess_usefulness(e.text);
            }
            store.add(std::move(e));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        } catch (const Error& ex) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + ex.detail());
        }
    }
    return store;
}

void write_store_jsonl(const fs::path& path, const KnowledgeStore& store)
{
    std::string out;
    for (const auto& e : store.entries()) {
        nlohmann::ordered_json j;
        j["url"] = e.url;
        j["url2text"] = e.text ? json(*e.text) : json(nullptr);
        j["image_path"] = e.image ? json(e.image->id) : json(nullptr);
        if (is_textual(store.kind())) {
            j["fill_status"] = to_string(e.fill_status);
            j["usefulness"] = to_string(e.usefulness);
            if (e.fill_reason) {
                j["fill_reason"] = *e.fill_reason;
            }
            if (e.fill_status == FillStatus::Filled) {
                j["original_url2text"] = e.original_text ? json(*e.original_text) : json(nullptr);
            }
        }
        out += j.dump() + "\n";
    }
    write_text_file(path, out);
}

ClaimStores load_claim_stores(const fs::path& claim_dir, bool prefer_filled)
{
    auto load = [&](StoreKind kind) {
        auto filled = claim_dir / store_file_name(kind, true);
        auto original = claim_dir / store_file_name(kind, false);
        if (prefer_filled && fs::exists(filled)) {
            return read_store_jsonl(filled, kind);
        }
        if (fs::exists(original)) {
            return read_store_jsonl(original, kind);
        }
        return KnowledgeStore(kind);
    };
    ClaimStores stores;
    stores.text_query_text = load(StoreKind::TextQueryText);
    stores.image_query_text = load(StoreKind::ImageQueryText);
    stores.text_query_image = load(StoreKind::TextQueryImage);
    return stores;
}

std::vector<std::string> list_claim_dirs(const fs::path& root)
{
    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(root, ec)) {
        if (entry.is_directory() && entry.path().filename().string().front() != '.') {
            names.push_back(entry.path().filename().string());
        }
    }
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot list " + root.string() + ": " + ec.message());
    }
    std::sort(names.begin(), names.end());
    return names;
}

std::vector<Claim> read_claims_jsonl(const fs::path& path)
{
    std::vector<Claim> claims;
    auto content = read_text_file(path);
    int line_no = 0;
    for (auto line : split(content, '\n')) {
        ++line_no;
        if (trim(line).empty()) {
            continue;
        }
        try {
            auto j = json::parse(line);
            Claim c;
            const auto& id = j.at("claim_id");
            c.id = id.is_string() ? id.get<std::string>() : id.dump();
            c.text = j.at("claim_text").get<std::string>();
            c.claimant = optional_string(j, "claimant");
            c.date = optional_string(j, "claim_date");
            if (auto it = j.find("image_paths"); it != j.end() && !it->is_null()) {
                int n = 0;
                for (const auto& p : *it) {
                    auto raw = p.get<std::string>();
                    c.images.push_back(ImageRef{c.id + "/img" + std::to_string(++n), resolve(path.parent_path(), raw),
                                                std::nullopt});
                }
            }
            validate_claim(c);
            claims.push_back(std::move(c));
        } catch (const json::exception& ex) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + ex.what());
        } catch (const Error& ex) {
            throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(line_no) + ": " + ex.detail());
        }
    }
    return claims;
}

std::vector<FillStatsRow> stats_rows(const std::string& split_name, StoreKind kind, const FillStats& stats)
{
    return {FillStatsRow{split_name, kind, "Original", stats.original},
            FillStatsRow{split_name, kind, "Filled", stats.filled}};
}

void write_fill_stats_report(const fs::path& path, const std::vector<FillStatsRow>& rows)
{
    nlohmann::ordered_json out = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["split"] = r.split;
        j["store"] = to_string(r.store);
        j["status"] = r.status;
        j["avg"] = r.stats.avg;
        j["min"] = r.stats.min;
        j["max"] = r.stats.max;
        out.push_back(std::move(j));
    }
    write_text_file(path, out.dump(2) + "\n");
}

std::vector<FillStatsRow> read_fill_stats_report(const fs::path& path)
{
    std::vector<FillStatsRow> rows;
    try {
        for (const auto& j : json::parse(read_text_file(path))) {
            rows.push_back(FillStatsRow{j.at("split").get<std::string>(),
                                        parse_store_kind(j.at("store").get<std::string>()),
                                        j.at("status").get<std::string>(),
                                        {j.at("avg").get<double>(), j.at("min").get<std::int64_t>(),
                                         j.at("max").get<std::int64_t>()}});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::IoError, path.string() + ": " + e.what());
    }
    return rows;
}

}  // namespace veristack
