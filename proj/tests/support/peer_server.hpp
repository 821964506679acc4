#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

#include "swarmwatch/bytes.hpp"
#include "swarmwatch/net.hpp"

namespace testutil {

/// Blocking socket helpers for scripting a fake peer. All reads are
/// poll-bounded so a buggy client cannot hang the test binary.
inline bool write_all(int fd, swarmwatch::ByteSpan data) {
    std::size_t off = 0;
    while (off < data.size()) {
        ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
        if (n <= 0) return false;
        off += static_cast<std::size_t>(n);
    }
    return true;
}

inline std::optional<swarmwatch::Bytes> read_exact(int fd, std::size_t want, int timeout_ms) {
    swarmwatch::Bytes buf(want);
    std::size_t off = 0;
    while (off < want) {
        pollfd pfd{fd, POLLIN, 0};
        if (::poll(&pfd, 1, timeout_ms) <= 0) return std::nullopt;
        ssize_t n = ::recv(fd, buf.data() + off, want - off, 0);
        if (n <= 0) return std::nullopt;
        off += static_cast<std::size_t>(n);
    }
    return buf;
}

/// One length-prefixed peer-wire frame: id octet plus payload (empty =
/// keep-alive). nullopt on close or timeout.
inline std::optional<swarmwatch::Bytes> read_frame(int fd, int timeout_ms) {
    auto head = read_exact(fd, 4, timeout_ms);
    if (!head) return std::nullopt;
    std::uint32_t len = (std::uint32_t((*head)[0]) << 24) | (std::uint32_t((*head)[1]) << 16) |
                        (std::uint32_t((*head)[2]) << 8) | std::uint32_t((*head)[3]);
    if (len == 0) return swarmwatch::Bytes{};
    if (len > 1 << 20) return std::nullopt;
    return read_exact(fd, len, timeout_ms);
}

/// Drains until the peer closes or `timeout_ms` of silence passes.
inline void drain(int fd, int timeout_ms) {
    std::uint8_t sink[512];
    for (;;) {
        pollfd pfd{fd, POLLIN, 0};
        if (::poll(&pfd, 1, timeout_ms) <= 0) return;
        if (::recv(fd, sink, sizeof(sink), 0) <= 0) return;
    }
}

/// A scripted BitTorrent peer on a loopback TCP port. Each accepted
/// connection is handed to the script on a worker thread; the test drives
/// the real probe client against `endpoint()` from the main thread.
class PeerServer {
public:
    using Script = std::function<void(int fd)>;

    PeerServer() {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw std::runtime_error("peer server: socket");
        int one = 1;
        ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
            ::listen(fd_, 4) != 0)
            throw std::runtime_error("peer server: bind/listen");
        socklen_t len = sizeof(addr);
        ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
    }

    ~PeerServer() {
        join();
        close_listener();
    }

    PeerServer(const PeerServer&) = delete;
    PeerServer& operator=(const PeerServer&) = delete;

    [[nodiscard]] std::uint16_t port() const { return port_; }
    [[nodiscard]] swarmwatch::Endpoint endpoint() const {
        return {swarmwatch::IpAddr::from_octets(127, 0, 0, 1), port_};
    }

    /// Accepts `connections` clients in sequence, running `script` on each.
    void serve(int connections, Script script) {
        worker_ = std::thread([this, connections, script = std::move(script)] {
            for (int i = 0; i < connections; ++i) {
                pollfd pfd{fd_, POLLIN, 0};
                if (::poll(&pfd, 1, 5000) <= 0) return;
                int conn = ::accept(fd_, nullptr, nullptr);
                if (conn < 0) return;
                script(conn);
                ::close(conn);
                ++served_;
            }
        });
    }

    void join() {
        if (worker_.joinable()) worker_.join();
    }

    /// Closes the listening socket; later connects are refused.
    void close_listener() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

    [[nodiscard]] int served() const { return served_.load(); }

private:
    int fd_ = -1;
    std::uint16_t port_ = 0;
    std::atomic<int> served_{0};
    std::thread worker_;
};

} // namespace testutil
