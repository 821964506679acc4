#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "swarmwatch/bytes.hpp"
#include "swarmwatch/content_id.hpp"
#include "swarmwatch/net.hpp"

namespace swarmwatch::tracker {

using PeerId = std::array<std::uint8_t, 20>;

enum class AnnounceEvent { none, started, stopped };

struct AnnounceRequest {
    ContentId content;
    PeerId peer_id{};
    std::uint16_t listen_port = 0;
    AnnounceEvent event = AnnounceEvent::none;
    std::uint32_t numwant = 200;
    std::int64_t uploaded = 0;
    std::int64_t downloaded = 0;
    std::int64_t left = 0;
};

struct AnnounceResponse {
    std::int64_t interval = 0;
    std::int64_t seeds = 0;     // "complete"
    std::int64_t leechers = 0;  // "incomplete"
    std::vector<Endpoint> peers;
};

struct SwarmStats {
    std::int64_t seeds = 0;
    std::int64_t leechers = 0;
    std::int64_t downloaded = 0;
};

struct ScrapeAllResponse {
    std::unordered_map<ContentId, SwarmStats> entries;
};

class Error : public std::runtime_error {
public:
    enum class Kind { malformed, failure, bad_peers_length, missing_files, bad_key_length };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Announce query string, percent-encoded byte-for-byte. The "event="
/// parameter appears only for started/stopped.
[[nodiscard]] std::string build_announce_query(const AnnounceRequest& req);

[[nodiscard]] std::string percent_encode(ByteSpan raw);

/// Inverse of percent_encode; nullopt on truncated or non-hex escapes.
[[nodiscard]] std::optional<Bytes> percent_decode(std::string_view s);

/// Parses a bencoded announce body. Compact peer strings and the
/// dictionary peer model are both accepted; endpoints are normalized.
/// A "failure reason" body raises Error{failure} carrying the reason.
[[nodiscard]] AnnounceResponse parse_announce_response(ByteSpan body);

/// Parses a full-scrape body ("files" dictionary). Streams straight off
/// the buffer, so multi-million-entry responses stay cheap.
[[nodiscard]] ScrapeAllResponse parse_scrape_all(ByteSpan body);

/// 6 octets per peer: IPv4 big-endian, then port big-endian.
[[nodiscard]] Bytes encode_compact_peers(std::span<const Endpoint> peers);
[[nodiscard]] std::vector<Endpoint> decode_compact_peers(ByteSpan blob);

} // namespace swarmwatch::tracker
