#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "swarmwatch/bytes.hpp"
#include "swarmwatch/content_id.hpp"
#include "swarmwatch/tracker_wire.hpp"

namespace swarmwatch::peerwire {

using tracker::PeerId;

inline constexpr std::string_view kProtocolName = "BitTorrent protocol";
inline constexpr std::size_t kHandshakeSize = 68;
inline constexpr std::uint32_t kBlockSize = 16384;

struct Handshake {
    ContentId content;
    PeerId peer_id{};
};

enum class MsgType : std::uint8_t {
    choke = 0,
    unchoke = 1,
    interested = 2,
    not_interested = 3,
    have = 4,
    bitfield = 5,
    request = 6,
    piece = 7,
};

struct Message {
    MsgType type;
    Bytes payload;  // everything after the id octet
};

/// 68 octets: 19, "BitTorrent protocol", 8 reserved zeros, info-hash, peer id.
[[nodiscard]] Bytes encode_handshake(const Handshake& hs);
[[nodiscard]] std::optional<Handshake> decode_handshake(ByteSpan buf);

/// Length-prefixed frame: 4-octet big-endian length, id octet, payload.
[[nodiscard]] Bytes encode_message(MsgType type, ByteSpan payload);
[[nodiscard]] Bytes encode_keepalive();
[[nodiscard]] Bytes encode_request(std::uint32_t piece, std::uint32_t offset, std::uint32_t length);
[[nodiscard]] Bytes encode_bitfield(std::uint32_t piece_count, std::uint32_t first_set_piece);
[[nodiscard]] Bytes encode_piece(std::uint32_t piece, std::uint32_t offset, ByteSpan block);

struct PieceMessage {
    std::uint32_t piece = 0;
    std::uint32_t offset = 0;
    ByteSpan block;
};
[[nodiscard]] std::optional<PieceMessage> parse_piece(const Message& msg);

struct RequestMessage {
    std::uint32_t piece = 0;
    std::uint32_t offset = 0;
    std::uint32_t length = 0;
};
[[nodiscard]] std::optional<RequestMessage> parse_request(const Message& msg);

/// Lowest set piece index in a bitfield payload; nullopt when empty.
[[nodiscard]] std::optional<std::uint32_t> first_set_piece(ByteSpan bitfield);

/// Incremental framer: feed stream bytes, poll complete messages.
/// Keep-alives are consumed silently.
class FrameReader {
public:
    void feed(ByteSpan data) { buf_.insert(buf_.end(), data.begin(), data.end()); }

    /// nullopt = need more bytes; throws std::runtime_error on an oversized
    /// or unknown frame (peer is not speaking the protocol we expect).
    [[nodiscard]] std::optional<Message> next();

private:
    Bytes buf_;
    std::size_t pos_ = 0;
};

} // namespace swarmwatch::peerwire
