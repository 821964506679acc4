#pragma once

#include <cstdint>
#include <memory>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "swarmwatch/clock.hpp"
#include "swarmwatch/rng.hpp"
#include "swarmwatch/simnet/world.hpp"
#include "swarmwatch/transport.hpp"

namespace swarmwatch::simnet {

enum class BanReason { concurrent, cumulative };

struct BlacklistEvent {
    IpAddr ip;
    std::int64_t at = 0;
    BanReason reason = BanReason::concurrent;
    int count = 0;  // subscriptions counted when the ban fired
};

/// In-process model of the studied tracker: swarm membership, scrape
/// counters and the anti-monitoring blacklist in both of its eras. World
/// churn is replayed lazily; every entry point first advances to `now`.
class SimTracker {
public:
    explicit SimTracker(const SimWorld& world);

    void advance(std::int64_t now);

    /// GET /announce handler; `query` is the raw (still escaped) string.
    [[nodiscard]] std::string announce(IpAddr caller, std::string_view query, std::int64_t now);
    /// GET /scrape with no parameters: every swarm the tracker knows.
    [[nodiscard]] std::string scrape_all(std::int64_t now);
    /// GET /scrape with one or more info_hash parameters.
    [[nodiscard]] std::string scrape(const std::vector<ContentId>& hashes, std::int64_t now);

    [[nodiscard]] bool is_blacklisted(IpAddr ip) const;
    [[nodiscard]] const std::vector<BlacklistEvent>& blacklist_events() const { return events_; }

    struct SwarmCounts {
        std::int64_t seeds = 0;
        std::int64_t leechers = 0;
    };
    [[nodiscard]] SwarmCounts swarm_counts(std::int32_t content) const;
    [[nodiscard]] std::size_t unstopped_count(IpAddr ip) const;

    /// Announce-session lifetime without a stopped event or re-announce.
    static constexpr std::int64_t kSessionExpiry = 3600;

private:
    struct Member {
        Endpoint ep;
        std::uint64_t key = 0;
        bool is_seed = false;
    };

    struct Swarm {
        std::vector<Member> members;
        std::unordered_map<std::uint64_t, std::size_t> pos;
        std::int64_t seeds = 0;
        std::int64_t downloaded = 0;
        bool seen = false;
    };

    struct IpState {
        int active = 0;
        std::unordered_set<std::int32_t> unstopped;
        std::unordered_set<std::uint64_t> keys;
        bool blacklisted = false;
    };

    struct WireSession {
        std::int32_t content = 0;
        Endpoint ep;
        bool is_seed = false;
        std::int64_t expires = 0;
        std::uint64_t generation = 0;
    };

    struct Expiry {
        std::int64_t at = 0;
        std::uint64_t key = 0;
        std::uint64_t generation = 0;
        bool operator>(const Expiry& o) const { return at > o.at; }
    };

    void start_session(std::int64_t now, std::int32_t content, Endpoint ep, std::uint64_t key,
                       bool is_seed, bool count_unstopped);
    void end_session(std::int32_t content, Endpoint ep, std::uint64_t key, bool is_seed,
                     bool clears_unstopped);
    bool policy_rejects(std::int64_t now, IpAddr ip, std::int32_t content);
    void blacklist(std::int64_t now, IpAddr ip, BanReason reason, int count);
    void run_cumulative_sweep(std::int64_t now);
    [[nodiscard]] std::string announce_body(std::int32_t content, Endpoint caller,
                                            std::uint32_t numwant, bool caller_active,
                                            bool caller_is_seed);
    [[nodiscard]] std::string failure(std::string_view reason) const;
    [[nodiscard]] std::string scrape_body(const std::vector<std::int32_t>& contents) const;

    const SimWorld* world_;
    Rng rng_;
    std::vector<Swarm> swarms_;
    std::unordered_map<IpAddr, IpState> ips_;
    std::vector<std::uint8_t> session_state_;  // 0 pending, 1 active, 2 finished
    std::vector<std::uint32_t> end_order_;     // session indices sorted by end time
    std::size_t start_cursor_ = 0;
    std::size_t end_cursor_ = 0;
    std::unordered_map<std::uint64_t, WireSession> wire_;
    std::unordered_map<std::uint64_t, std::uint64_t> wire_by_ep_;  // (content, ep) -> wire id
    std::priority_queue<Expiry, std::vector<Expiry>, std::greater<Expiry>> expiries_;
    std::uint64_t next_wire_id_ = 0;
    std::uint64_t generation_ = 0;
    std::int64_t policy_change_time_ = 0;
    bool policy_pending_ = false;
    bool cumulative_active_ = false;
    std::int64_t clock_ = 0;
    std::vector<BlacklistEvent> events_;
};

/// TrackerTransport that short-circuits into a SimTracker. The crawler's
/// HTTP stack sees the same URLs and bodies it would over the wire.
class SimTransport final : public TrackerTransport {
public:
    SimTransport(SimTracker& tracker, const Clock& clock, IpAddr caller)
        : tracker_(&tracker), clock_(&clock), caller_(caller) {}

    TransportResult get(const std::string& url) override;

private:
    SimTracker* tracker_;
    const Clock* clock_;
    IpAddr caller_;
};

} // namespace swarmwatch::simnet
