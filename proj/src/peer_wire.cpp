#include "swarmwatch/peer_wire.hpp"

#include <algorithm>
#include <stdexcept>

namespace swarmwatch::peerwire {

namespace {

void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

std::uint32_t get_u32(ByteSpan buf, std::size_t at) {
    return (static_cast<std::uint32_t>(buf[at]) << 24) | (static_cast<std::uint32_t>(buf[at + 1]) << 16) |
           (static_cast<std::uint32_t>(buf[at + 2]) << 8) | static_cast<std::uint32_t>(buf[at + 3]);
}

// Bound on a single frame; the probe only ever requests one 16 KiB block.
constexpr std::uint32_t kMaxFrame = kBlockSize + 1024;

} // namespace

Bytes encode_handshake(const Handshake& hs) {
    Bytes out;
    out.reserve(kHandshakeSize);
    out.push_back(static_cast<std::uint8_t>(kProtocolName.size()));
    out.insert(out.end(), kProtocolName.begin(), kProtocolName.end());
    out.insert(out.end(), 8, 0);
    out.insert(out.end(), hs.content.digest.begin(), hs.content.digest.end());
    out.insert(out.end(), hs.peer_id.begin(), hs.peer_id.end());
    return out;
}

std::optional<Handshake> decode_handshake(ByteSpan buf) {
    if (buf.size() < kHandshakeSize) return std::nullopt;
    if (buf[0] != kProtocolName.size()) return std::nullopt;
    if (!std::equal(kProtocolName.begin(), kProtocolName.end(), buf.begin() + 1)) return std::nullopt;
    Handshake hs;
    std::copy_n(buf.begin() + 28, 20, hs.content.digest.begin());
    std::copy_n(buf.begin() + 48, 20, hs.peer_id.begin());
    return hs;
}

Bytes encode_message(MsgType type, ByteSpan payload) {
    Bytes out;
    out.reserve(5 + payload.size());
    put_u32(out, static_cast<std::uint32_t>(payload.size() + 1));
    out.push_back(static_cast<std::uint8_t>(type));
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Bytes encode_keepalive() {
    Bytes out;
    put_u32(out, 0);
    return out;
}

Bytes encode_request(std::uint32_t piece, std::uint32_t offset, std::uint32_t length) {
    Bytes payload;
    payload.reserve(12);
    put_u32(payload, piece);
    put_u32(payload, offset);
    put_u32(payload, length);
    return encode_message(MsgType::request, payload);
}

Bytes encode_bitfield(std::uint32_t piece_count, std::uint32_t first_set_piece) {
    Bytes payload((piece_count + 7) / 8, 0);
    if (first_set_piece < piece_count)
        payload[first_set_piece / 8] |= static_cast<std::uint8_t>(0x80u >> (first_set_piece % 8));
    return encode_message(MsgType::bitfield, payload);
}

Bytes encode_piece(std::uint32_t piece, std::uint32_t offset, ByteSpan block) {
    Bytes payload;
    payload.reserve(8 + block.size());
    put_u32(payload, piece);
    put_u32(payload, offset);
    payload.insert(payload.end(), block.begin(), block.end());
    return encode_message(MsgType::piece, payload);
}

std::optional<PieceMessage> parse_piece(const Message& msg) {
    if (msg.type != MsgType::piece || msg.payload.size() < 8) return std::nullopt;
    PieceMessage out;
    out.piece = get_u32(msg.payload, 0);
    out.offset = get_u32(msg.payload, 4);
    out.block = ByteSpan(msg.payload).subspan(8);
    return out;
}

std::optional<RequestMessage> parse_request(const Message& msg) {
    if (msg.type != MsgType::request || msg.payload.size() != 12) return std::nullopt;
    return RequestMessage{get_u32(msg.payload, 0), get_u32(msg.payload, 4), get_u32(msg.payload, 8)};
}

std::optional<std::uint32_t> first_set_piece(ByteSpan bitfield) {
    for (std::size_t i = 0; i < bitfield.size(); ++i) {
        if (bitfield[i] == 0) continue;
        for (int bit = 0; bit < 8; ++bit)
            if (bitfield[i] & (0x80u >> bit)) return static_cast<std::uint32_t>(i * 8 + bit);
    }
    return std::nullopt;
}

std::optional<Message> FrameReader::next() {
    // Reclaim consumed prefix lazily so feed() stays amortized O(1).
    if (pos_ > 0 && pos_ == buf_.size()) {
        buf_.clear();
        pos_ = 0;
    }
    for (;;) {
        if (buf_.size() - pos_ < 4) return std::nullopt;
        std::uint32_t len = get_u32(buf_, pos_);
        if (len == 0) {  // keep-alive
            pos_ += 4;
            continue;
        }
        if (len > kMaxFrame) throw std::runtime_error("peerwire: oversized frame");
        if (buf_.size() - pos_ < 4 + len) return std::nullopt;
        std::uint8_t id = buf_[pos_ + 4];
        if (id > static_cast<std::uint8_t>(MsgType::piece)) throw std::runtime_error("peerwire: unknown message id");
        Message msg;
        msg.type = static_cast<MsgType>(id);
        msg.payload.assign(buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 5),
                           buf_.begin() + static_cast<std::ptrdiff_t>(pos_ + 4 + len));
        pos_ += 4 + len;
        return msg;
    }
}

} // namespace swarmwatch::peerwire
