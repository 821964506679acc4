#include "swarmwatch/simnet/peers_sim.hpp"

#include <algorithm>
#include <cstring>

#include "swarmwatch/peer_wire.hpp"

namespace swarmwatch::simnet {
namespace {

Bytes full_bitfield(std::int32_t piece_count) {
    const auto pc = std::uint32_t(piece_count);
    Bytes bits((pc + 7) / 8, 0xff);
    if (pc % 8 != 0) bits.back() = std::uint8_t(0xff << (8 - pc % 8));
    return peerwire::encode_message(peerwire::MsgType::bitfield, ByteSpan(bits.data(), bits.size()));
}

/// Scripted remote peer. Replies land in an output buffer the probe drains
/// via recv; an empty buffer means the remote has gone quiet (-1) or hung
/// up (0).
class SimPeerStream final : public probe::PeerStream {
public:
    SimPeerStream(const SimWorld& world, Role role,
                  const std::unordered_set<std::int32_t>& contents, std::int32_t primary)
        : world_(&world), role_(role), contents_(&contents), primary_(primary) {}

    bool send(ByteSpan data) override {
        if (closed_) return false;
        in_.insert(in_.end(), data.begin(), data.end());
        pump();
        return true;
    }

    int recv(std::span<std::uint8_t> buf, int timeout_ms) override {
        (void)timeout_ms;
        if (out_pos_ < out_.size()) {
            const auto n = std::min(buf.size(), out_.size() - out_pos_);
            std::memcpy(buf.data(), out_.data() + out_pos_, n);
            out_pos_ += n;
            return int(n);
        }
        return closed_ ? 0 : -1;  // -1 reads as "nothing until the deadline"
    }

private:
    void reply(const Bytes& bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }

    void pump() {
        if (!handshaken_) {
            if (in_.size() < peerwire::kHandshakeSize) return;
            const auto hs = peerwire::decode_handshake(ByteSpan(in_.data(), peerwire::kHandshakeSize));
            if (!hs) {
                closed_ = true;
                return;
            }
            handshaken_ = true;
            peerwire::Handshake mine;
            mine.peer_id = remote_peer_id();
            const auto* c = world_->find_content(hs->content);
            const auto idx = c ? std::int32_t(c - world_->contents.data()) : -1;
            if (idx >= 0 && contents_->contains(idx)) {
                content_ = idx;
                mine.content = hs->content;
                reply(peerwire::encode_handshake(mine));
                if (role_ != Role::monitor) {
                    reply(full_bitfield(world_->contents[std::size_t(idx)].piece_count));
                }
            } else {
                // A client we do run, but for some other torrent.
                mine.content = primary_ >= 0 ? world_->contents[std::size_t(primary_)].id
                                             : hs->content;
                reply(peerwire::encode_handshake(mine));
                closed_ = true;
                return;
            }
            frames_.feed(ByteSpan(in_.data() + peerwire::kHandshakeSize,
                                  in_.size() - peerwire::kHandshakeSize));
            in_.clear();
        } else {
            frames_.feed(ByteSpan(in_.data(), in_.size()));
            in_.clear();
        }
        try {
            while (auto msg = frames_.next()) handle(*msg);
        } catch (const std::runtime_error&) {
            closed_ = true;
        }
    }

    void handle(const peerwire::Message& msg) {
        if (role_ == Role::monitor) return;  // speaks the protocol, never serves
        switch (msg.type) {
            case peerwire::MsgType::interested:
                if (!unchoked_) {
                    unchoked_ = true;
                    reply(peerwire::encode_message(peerwire::MsgType::unchoke, {}));
                }
                break;
            case peerwire::MsgType::request: {
                if (!unchoked_ || content_ < 0) break;
                const auto req = peerwire::parse_request(msg);
                if (!req || req->length == 0 || req->length > peerwire::kBlockSize) break;
                Bytes block(req->length, 0x5a);
                reply(peerwire::encode_piece(req->piece, req->offset,
                                             ByteSpan(block.data(), block.size())));
                break;
            }
            default:
                break;
        }
    }

    static peerwire::PeerId remote_peer_id() {
        peerwire::PeerId id{};
        const char tag[] = "-SN1000-simpeer00000";
        std::memcpy(id.data(), tag, id.size());
        return id;
    }

    const SimWorld* world_;
    Role role_;
    const std::unordered_set<std::int32_t>* contents_;
    std::int32_t primary_;
    Bytes in_;
    Bytes out_;
    std::size_t out_pos_ = 0;
    peerwire::FrameReader frames_;
    bool handshaken_ = false;
    bool unchoked_ = false;
    bool closed_ = false;
    std::int32_t content_ = -1;
};

} // namespace

SimConnector::SimConnector(const SimWorld& world) : world_(&world) {
    for (const auto& s : world.sessions) {
        auto& host = hosts_[s.ep];
        host.role = world.roles.at(s.ep.ip);
        host.contents.insert(s.content);
        if (host.primary < 0) host.primary = s.content;
    }
}

std::unique_ptr<probe::PeerStream> SimConnector::connect(Endpoint ep, int timeout_ms,
                                                         probe::ConnectError& err) {
    (void)timeout_ms;
    if (unreachable_.contains(ep.ip)) {
        err = probe::ConnectError::timeout;
        return nullptr;
    }
    const auto it = hosts_.find(ep);
    if (it == hosts_.end()) {
        err = probe::ConnectError::refused;
        return nullptr;
    }
    err = probe::ConnectError::none;
    return std::make_unique<SimPeerStream>(*world_, it->second.role, it->second.contents,
                                           it->second.primary);
}

} // namespace swarmwatch::simnet
