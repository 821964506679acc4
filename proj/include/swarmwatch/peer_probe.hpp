#pragma once

#include <cstdint>
#include <memory>

#include "swarmwatch/content_id.hpp"
#include "swarmwatch/net.hpp"
#include "swarmwatch/peer_wire.hpp"

namespace swarmwatch::probe {

enum class ConnectError { none, refused, timeout };

/// One established peer connection. recv returns the number of bytes read,
/// 0 on orderly close, -1 on timeout or error.
class PeerStream {
public:
    virtual ~PeerStream() = default;
    virtual bool send(ByteSpan data) = 0;
    virtual int recv(std::span<std::uint8_t> buf, int timeout_ms) = 0;
};

class PeerConnector {
public:
    virtual ~PeerConnector() = default;
    virtual std::unique_ptr<PeerStream> connect(Endpoint ep, int timeout_ms, ConnectError& err) = 0;
};

enum class HandshakeResult { ok, refused, timeout, wrong_hash };

enum class ProbeResult { served_piece, handshake_only, refused, timeout };

struct ProbeOutcome {
    ProbeResult result = ProbeResult::timeout;
    int elapsed_ms = 0;
};

inline constexpr int kDefaultTimeoutMs = 10000;

/// Sends the 68-octet handshake; ok iff the peer echoes one naming the same
/// content. Never throws.
HandshakeResult handshake(PeerConnector& connector, Endpoint ep, const ContentId& content,
                          int timeout_ms = kDefaultTimeoutMs);

/// Handshake, interested, wait for unchoke, request a single 16 KiB block of
/// the first piece the peer advertises (piece 0 if it sent no bitfield).
/// served_piece iff a non-empty piece message arrives in time. At most one
/// block request per probe. Never throws.
ProbeOutcome probe_download(PeerConnector& connector, Endpoint ep, const ContentId& content,
                            int timeout_ms = kDefaultTimeoutMs);

/// Real-socket connector (IPv4 TCP, bounded connect/read timeouts).
[[nodiscard]] std::unique_ptr<PeerConnector> make_tcp_connector();

} // namespace swarmwatch::probe
