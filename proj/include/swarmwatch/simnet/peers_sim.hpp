#pragma once

#include <memory>
#include <unordered_map>
#include <unordered_set>

#include "swarmwatch/peer_probe.hpp"
#include "swarmwatch/simnet/world.hpp"

namespace swarmwatch::simnet {

/// Probe-side view of the population: answers peer-wire handshakes the way
/// each role's client software would. Endpoints keep answering for contents
/// they carried at any point (a client stays running after leaving a swarm),
/// which keeps probe evidence independent of when the prober gets around to
/// a target.
class SimConnector final : public probe::PeerConnector {
public:
    explicit SimConnector(const SimWorld& world);

    std::unique_ptr<probe::PeerStream> connect(Endpoint ep, int timeout_ms,
                                               probe::ConnectError& err) override;

    /// Endpoints on this address stop answering at all (probe sees timeout).
    void set_unreachable(IpAddr ip) { unreachable_.insert(ip); }

private:
    struct HostProfile {
        Role role = Role::user;
        std::unordered_set<std::int32_t> contents;
        std::int32_t primary = -1;  // content whose hash it names on a mismatch
    };

    const SimWorld* world_;
    std::unordered_map<Endpoint, HostProfile> hosts_;
    std::unordered_set<IpAddr> unreachable_;
};

} // namespace swarmwatch::simnet
