#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>

#include "swarmwatch/bytes.hpp"

namespace swarmwatch {

struct TransportResult {
    int status = 0;     // HTTP status; 0 when the request never completed
    Bytes body;
    std::string error;  // transport-level failure text, empty on success
    [[nodiscard]] bool ok() const { return error.empty() && status == 200; }
};

/// "Send GET to a URL, receive the body." Retry and pacing policy live in
/// the crawler; implementations are the real HTTP client and the simulated
/// tracker's in-process binding.
class TrackerTransport {
public:
    virtual ~TrackerTransport() = default;
    virtual TransportResult get(const std::string& url) = 0;
};

struct UrlParts {
    std::string host;
    std::uint16_t port = 80;
    std::string path = "/";  // path plus any query string
};

/// Accepts http:// URLs only (the tracker protocol in scope is plain HTTP).
[[nodiscard]] std::optional<UrlParts> parse_http_url(std::string_view url);

/// Swaps a trailing "announce" path segment for "scrape" (the conventional
/// derivation); nullopt when the URL has no such segment.
[[nodiscard]] std::optional<std::string> scrape_url_from_announce(std::string_view announce_url);

/// Real-socket client. Accepts identity and gzip response bodies.
[[nodiscard]] std::unique_ptr<TrackerTransport> make_http_transport(int timeout_ms = 15000);

} // namespace swarmwatch
