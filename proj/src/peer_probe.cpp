#include "swarmwatch/peer_probe.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

namespace swarmwatch::probe {

namespace {

using Clock = std::chrono::steady_clock;

struct Deadline {
    Clock::time_point end;

    explicit Deadline(int timeout_ms) : end(Clock::now() + std::chrono::milliseconds(timeout_ms)) {}

    [[nodiscard]] int remaining_ms() const {
        auto left = std::chrono::duration_cast<std::chrono::milliseconds>(end - Clock::now()).count();
        return left > 0 ? static_cast<int>(left) : 0;
    }
    [[nodiscard]] bool expired() const { return remaining_ms() == 0; }
};

int elapsed_ms_since(Clock::time_point start, int cap_ms) {
    auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() - start).count();
    if (ms < 0) ms = 0;
    if (ms > cap_ms) ms = cap_ms;
    return static_cast<int>(ms);
}

constexpr peerwire::PeerId kProbePeerId = {'-', 'S', 'W', '0', '1', '0', '0', '-', 'p', 'r',
                                           'o', 'b', 'e', '0', '0', '0', '0', '0', '0', '0'};

/// Reads exactly buf.size() octets or reports failure. 1 = ok, 0 = closed,
/// -1 = timeout/error.
int recv_exact(PeerStream& stream, std::span<std::uint8_t> buf, const Deadline& deadline) {
    std::size_t got = 0;
    while (got < buf.size()) {
        if (deadline.expired()) return -1;
        int n = stream.recv(buf.subspan(got), deadline.remaining_ms());
        if (n == 0) return 0;
        if (n < 0) return -1;
        got += static_cast<std::size_t>(n);
    }
    return 1;
}

/// Shared first phase of both probe operations.
struct HandshakeSession {
    HandshakeResult result = HandshakeResult::timeout;
    std::unique_ptr<PeerStream> stream;
};

HandshakeSession open_session(PeerConnector& connector, Endpoint ep, const ContentId& content,
                              const Deadline& deadline) {
    HandshakeSession session;
    ConnectError cerr = ConnectError::none;
    session.stream = connector.connect(ep, deadline.remaining_ms(), cerr);
    if (!session.stream) {
        session.result = cerr == ConnectError::refused ? HandshakeResult::refused : HandshakeResult::timeout;
        return session;
    }
    peerwire::Handshake hello{content, kProbePeerId};
    if (!session.stream->send(peerwire::encode_handshake(hello))) {
        session.result = HandshakeResult::refused;
        session.stream.reset();
        return session;
    }
    std::array<std::uint8_t, peerwire::kHandshakeSize> reply{};
    int r = recv_exact(*session.stream, reply, deadline);
    if (r <= 0) {
        session.result = r == 0 ? HandshakeResult::refused : HandshakeResult::timeout;
        session.stream.reset();
        return session;
    }
    auto decoded = peerwire::decode_handshake(reply);
    if (!decoded) {
        session.result = HandshakeResult::refused;  // not speaking the protocol
        session.stream.reset();
        return session;
    }
    session.result = decoded->content == content ? HandshakeResult::ok : HandshakeResult::wrong_hash;
    return session;
}

ProbeOutcome probe_once(PeerConnector& connector, Endpoint ep, const ContentId& content, int timeout_ms) {
    Deadline deadline(timeout_ms);
    auto start = Clock::now();
    auto finish = [&](ProbeResult result) {
        return ProbeOutcome{result, elapsed_ms_since(start, timeout_ms)};
    };

    auto session = open_session(connector, ep, content, deadline);
    switch (session.result) {
        case HandshakeResult::refused: return finish(ProbeResult::refused);
        case HandshakeResult::timeout: return finish(ProbeResult::timeout);
        case HandshakeResult::wrong_hash: return finish(ProbeResult::handshake_only);
        case HandshakeResult::ok: break;
    }
    PeerStream& stream = *session.stream;
    if (!stream.send(peerwire::encode_message(peerwire::MsgType::interested, {})))
        return finish(ProbeResult::handshake_only);

    peerwire::FrameReader frames;
    std::uint32_t target_piece = 0;  // piece 0 unless a bitfield says otherwise
    bool requested = false;
    std::array<std::uint8_t, 4096> chunk{};
    while (!deadline.expired()) {
        std::optional<peerwire::Message> msg;
        try {
            msg = frames.next();
        } catch (const std::runtime_error&) {
            return finish(ProbeResult::handshake_only);
        }
        if (!msg) {
            int n = stream.recv(chunk, deadline.remaining_ms());
            if (n <= 0) return finish(ProbeResult::handshake_only);
            frames.feed(ByteSpan(chunk.data(), static_cast<std::size_t>(n)));
            continue;
        }
        switch (msg->type) {
            case peerwire::MsgType::bitfield:
                if (auto first = peerwire::first_set_piece(msg->payload)) target_piece = *first;
                break;
            case peerwire::MsgType::unchoke:
                // Politeness bound: a single block request per probe.
                if (!requested) {
                    requested = true;
                    if (!stream.send(peerwire::encode_request(target_piece, 0, peerwire::kBlockSize)))
                        return finish(ProbeResult::handshake_only);
                }
                break;
            case peerwire::MsgType::piece:
                if (auto piece = peerwire::parse_piece(*msg); piece && !piece->block.empty())
                    return finish(ProbeResult::served_piece);
                break;
            default:
                break;  // choke / have / others: keep listening
        }
    }
    return finish(ProbeResult::handshake_only);
}

class TcpStream final : public PeerStream {
public:
    explicit TcpStream(int fd) : fd_(fd) {}
    ~TcpStream() override { ::close(fd_); }
    TcpStream(const TcpStream&) = delete;
    TcpStream& operator=(const TcpStream&) = delete;

    bool send(ByteSpan data) override {
        std::size_t sent = 0;
        while (sent < data.size()) {
            ssize_t n = ::send(fd_, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
            if (n > 0) {
                sent += static_cast<std::size_t>(n);
                continue;
            }
            if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) {
                pollfd pfd{fd_, POLLOUT, 0};
                if (::poll(&pfd, 1, 1000) <= 0) return false;
                continue;
            }
            return false;
        }
        return true;
    }

    int recv(std::span<std::uint8_t> buf, int timeout_ms) override {
        pollfd pfd{fd_, POLLIN, 0};
        int p = ::poll(&pfd, 1, timeout_ms);
        if (p <= 0) return -1;
        ssize_t n = ::recv(fd_, buf.data(), buf.size(), 0);
        if (n < 0) return -1;
        return static_cast<int>(n);
    }

private:
    int fd_;
};

class TcpConnector final : public PeerConnector {
public:
    std::unique_ptr<PeerStream> connect(Endpoint ep, int timeout_ms, ConnectError& err) override {
        err = ConnectError::timeout;
        int fd = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd < 0) return nullptr;
        int flags = ::fcntl(fd, F_GETFL, 0);
        ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);

        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(ep.port);
        addr.sin_addr.s_addr = htonl(ep.ip.value);

        int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
        if (rc != 0) {
            if (errno == ECONNREFUSED) {
                err = ConnectError::refused;
                ::close(fd);
                return nullptr;
            }
            if (errno != EINPROGRESS) {
                ::close(fd);
                return nullptr;
            }
            pollfd pfd{fd, POLLOUT, 0};
            if (::poll(&pfd, 1, timeout_ms) <= 0) {
                ::close(fd);
                return nullptr;
            }
            int soerr = 0;
            socklen_t len = sizeof(soerr);
            ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &soerr, &len);
            if (soerr != 0) {
                err = soerr == ECONNREFUSED ? ConnectError::refused : ConnectError::timeout;
                ::close(fd);
                return nullptr;
            }
        }
        err = ConnectError::none;
        return std::make_unique<TcpStream>(fd);
    }
};

} // namespace

HandshakeResult handshake(PeerConnector& connector, Endpoint ep, const ContentId& content, int timeout_ms) {
    Deadline deadline(timeout_ms);
    return open_session(connector, ep, content, deadline).result;
}

ProbeOutcome probe_download(PeerConnector& connector, Endpoint ep, const ContentId& content, int timeout_ms) {
    ProbeOutcome outcome = probe_once(connector, ep, content, timeout_ms);
    if (outcome.result == ProbeResult::timeout)  // one retry on timeout
        outcome = probe_once(connector, ep, content, timeout_ms);
    return outcome;
}

std::unique_ptr<PeerConnector> make_tcp_connector() {
    return std::make_unique<TcpConnector>();
}

} // namespace swarmwatch::probe
