#include "swarmwatch/feed.hpp"

#include <algorithm>
#include <fstream>

#include "nlohmann/json.hpp"

namespace swarmwatch {

namespace {

namespace fs = std::filesystem;

class FileFeed final : public InjectionFeed {
public:
    explicit FileFeed(fs::path file) : file_(std::move(file)), dir_(file_.parent_path()) {}

    std::vector<FeedItem> list(std::int64_t now) override {
        std::ifstream in(file_, std::ios::binary);
        if (!in) throw FeedError("feed unavailable: " + file_.string());
        std::vector<FeedItem> out;
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            if (line.empty()) continue;
            auto doc = nlohmann::json::parse(line, nullptr, false);
            if (doc.is_discarded() || !doc.is_object())
                throw FeedError(file_.string() + ":" + std::to_string(lineno) + ": malformed feed line");
            try {
                FeedItem item;
                auto id = ContentId::from_hex(doc.at("content").get<std::string>());
                if (!id) throw FeedError(file_.string() + ":" + std::to_string(lineno) + ": bad content id");
                item.content = *id;
                item.login = doc.at("login").get<std::string>();
                item.listed_at = doc.at("listed_at").get<std::int64_t>();
                item.torrent_locator = doc.value("torrent", "");
                if (item.listed_at <= now) out.push_back(std::move(item));
            } catch (const nlohmann::json::exception& e) {
                throw FeedError(file_.string() + ":" + std::to_string(lineno) + ": " + e.what());
            }
        }
        std::stable_sort(out.begin(), out.end(),
                         [](const FeedItem& a, const FeedItem& b) { return a.listed_at < b.listed_at; });
        return out;
    }

    std::optional<Bytes> fetch_torrent(const FeedItem& item) override {
        if (item.torrent_locator.empty()) return std::nullopt;
        fs::path p = item.torrent_locator;
        if (p.is_relative()) p = dir_ / p;
        std::ifstream in(p, std::ios::binary);
        if (!in) return std::nullopt;
        return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }

private:
    fs::path file_;
    fs::path dir_;
};

} // namespace

std::unique_ptr<InjectionFeed> make_file_feed(const std::filesystem::path& file) {
    return std::make_unique<FileFeed>(file);
}

} // namespace swarmwatch
