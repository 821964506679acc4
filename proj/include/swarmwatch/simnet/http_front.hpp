#pragma once

#include <memory>
#include <string>

#include "swarmwatch/clock.hpp"
#include "swarmwatch/net.hpp"
#include "swarmwatch/simnet/tracker_sim.hpp"

namespace swarmwatch::simnet {

/// Serves a SimTracker over a real loopback socket so the stock HTTP
/// transport can be exercised against the same tracker state that the
/// in-process binding sees. The caller identity is fixed at construction
/// (loopback connections all look alike).
class HttpFront {
public:
    HttpFront(SimTracker& tracker, const Clock& clock, IpAddr caller);
    ~HttpFront();
    HttpFront(const HttpFront&) = delete;
    HttpFront& operator=(const HttpFront&) = delete;

    [[nodiscard]] int port() const { return port_; }
    [[nodiscard]] std::string announce_url() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/announce";
    }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
};

} // namespace swarmwatch::simnet
