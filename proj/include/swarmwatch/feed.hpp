#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "swarmwatch/bytes.hpp"
#include "swarmwatch/content_id.hpp"

namespace swarmwatch {

/// Raised when the feed cannot be read at all; the crawler logs it and
/// retries at the next poll period.
class FeedError : public std::runtime_error {
public:
    explicit FeedError(const std::string& what) : std::runtime_error(what) {}
};

struct FeedItem {
    ContentId content;
    std::string login;
    std::int64_t listed_at = 0;
    std::string torrent_locator;  // file path or simulator handle

    bool operator==(const FeedItem&) const = default;
};

/// The "newly injected contents" page, abstracted. Implementations: a JSON
/// lines file and the simulated world's feed.
class InjectionFeed {
public:
    virtual ~InjectionFeed() = default;

    /// Every item listed at or before `now`, in listing order.
    virtual std::vector<FeedItem> list(std::int64_t now) = 0;

    /// The .torrent bytes behind an item; nullopt when unavailable.
    virtual std::optional<Bytes> fetch_torrent(const FeedItem& item) = 0;
};

/// Feed backed by a JSON-lines file; one record per line with keys
/// content (40-hex), login, listed_at, torrent (path relative to the feed
/// file). Re-reads the file on every poll, so a live process can append.
[[nodiscard]] std::unique_ptr<InjectionFeed> make_file_feed(const std::filesystem::path& file);

} // namespace swarmwatch
