#include "swarmwatch/simnet/tracker_sim.hpp"

#include <algorithm>
#include <charconv>
#include <limits>

#include "swarmwatch/bencode.hpp"
#include "swarmwatch/tracker_wire.hpp"

namespace swarmwatch::simnet {
namespace {

constexpr std::int64_t kAnnounceInterval = 1800;
constexpr std::uint64_t kWireBit = std::uint64_t(1) << 63;

std::uint64_t wire_ep_key(std::int32_t content, Endpoint ep) {
    return (std::uint64_t(std::uint32_t(content)) << 48) | (std::uint64_t(ep.ip.value) << 16) |
           ep.port;
}

struct ParsedAnnounce {
    ContentId content;
    std::uint16_t port = 0;
    tracker::AnnounceEvent event = tracker::AnnounceEvent::none;
    std::uint32_t numwant = 50;
    std::int64_t left = 0;
};

std::optional<std::int64_t> to_int(std::string_view s) {
    std::int64_t v = 0;
    const auto* end = s.data() + s.size();
    auto [p, ec] = std::from_chars(s.data(), end, v);
    if (ec != std::errc() || p != end) return std::nullopt;
    return v;
}

/// Splits a raw query string and percent-decodes each value.
std::optional<ParsedAnnounce> parse_announce_query(std::string_view query) {
    ParsedAnnounce out;
    bool have_hash = false;
    bool have_port = false;
    std::size_t pos = 0;
    while (pos <= query.size()) {
        const auto amp = query.find('&', pos);
        const auto part = query.substr(pos, amp == std::string_view::npos ? amp : amp - pos);
        pos = amp == std::string_view::npos ? query.size() + 1 : amp + 1;
        if (part.empty()) continue;
        const auto eq = part.find('=');
        if (eq == std::string_view::npos) return std::nullopt;
        const auto key = part.substr(0, eq);
        const auto raw = tracker::percent_decode(part.substr(eq + 1));
        if (!raw) return std::nullopt;
        const std::string value(raw->begin(), raw->end());
        if (key == "info_hash") {
            if (raw->size() != 20) return std::nullopt;
            out.content = ContentId::from_bytes(ByteSpan(raw->data(), raw->size()));
            have_hash = true;
        } else if (key == "port") {
            const auto v = to_int(value);
            if (!v || *v < 1 || *v > 65535) return std::nullopt;
            out.port = std::uint16_t(*v);
            have_port = true;
        } else if (key == "event") {
            if (value == "started") {
                out.event = tracker::AnnounceEvent::started;
            } else if (value == "stopped") {
                out.event = tracker::AnnounceEvent::stopped;
            } else if (value != "completed" && !value.empty()) {
                return std::nullopt;
            }
        } else if (key == "numwant") {
            const auto v = to_int(value);
            if (!v || *v < 0) return std::nullopt;
            out.numwant = std::uint32_t(std::min<std::int64_t>(*v, 1000));
        } else if (key == "left") {
            const auto v = to_int(value);
            if (!v || *v < 0) return std::nullopt;
            out.left = *v;
        }
        // peer_id, uploaded, downloaded, compact: accepted, not used.
    }
    if (!have_hash || !have_port) return std::nullopt;
    return out;
}

} // namespace

SimTracker::SimTracker(const SimWorld& world)
    : world_(&world), rng_(world.cfg.seed ^ 0x7261636b65723233ULL), clock_(world.cfg.start_time - 1) {
    swarms_.resize(world.contents.size());
    session_state_.assign(world.sessions.size(), 0);
    end_order_.resize(world.sessions.size());
    for (std::size_t i = 0; i < end_order_.size(); ++i) end_order_[i] = std::uint32_t(i);
    std::stable_sort(end_order_.begin(), end_order_.end(), [&](std::uint32_t a, std::uint32_t b) {
        return world.sessions[a].end < world.sessions[b].end;
    });
    if (world.cfg.blacklist.policy_change_at) {
        policy_change_time_ = world.cfg.start_time +
                              *world.cfg.blacklist.policy_change_at * world.cfg.snapshot_period;
        policy_pending_ = true;
    }
}

void SimTracker::advance(std::int64_t now) {
    const auto& sessions = world_->sessions;
    while (true) {
        std::int64_t t_start = start_cursor_ < sessions.size()
                                   ? sessions[start_cursor_].start
                                   : std::numeric_limits<std::int64_t>::max();
        std::int64_t t_end = end_cursor_ < end_order_.size()
                                 ? sessions[end_order_[end_cursor_]].end
                                 : std::numeric_limits<std::int64_t>::max();
        std::int64_t t_exp =
            expiries_.empty() ? std::numeric_limits<std::int64_t>::max() : expiries_.top().at;
        std::int64_t t_pol =
            policy_pending_ ? policy_change_time_ : std::numeric_limits<std::int64_t>::max();
        const auto t = std::min(std::min(t_start, t_end), std::min(t_exp, t_pol));
        if (t > now) break;

        // Phase order at one instant: departures, expiries, the policy
        // switch, then arrivals.
        while (end_cursor_ < end_order_.size() && sessions[end_order_[end_cursor_]].end == t) {
            const auto idx = end_order_[end_cursor_++];
            if (session_state_[idx] != 1) continue;
            session_state_[idx] = 2;
            const auto& s = sessions[idx];
            end_session(s.content, s.ep, idx, s.is_seed, s.sends_stopped);
        }
        while (!expiries_.empty() && expiries_.top().at == t) {
            const auto e = expiries_.top();
            expiries_.pop();
            const auto it = wire_.find(e.key);
            if (it == wire_.end() || it->second.generation != e.generation) continue;
            const auto ws = it->second;
            wire_.erase(it);
            wire_by_ep_.erase(wire_ep_key(ws.content, ws.ep));
            // An expiring session was abandoned, not stopped: the content
            // stays on the cumulative ledger.
            end_session(ws.content, ws.ep, e.key | kWireBit, ws.is_seed, false);
        }
        if (policy_pending_ && policy_change_time_ == t) {
            policy_pending_ = false;
            cumulative_active_ = true;
            run_cumulative_sweep(t);
        }
        while (start_cursor_ < sessions.size() && sessions[start_cursor_].start == t) {
            const auto idx = std::uint32_t(start_cursor_++);
            const auto& s = sessions[idx];
            if (session_state_[idx] != 0) continue;
            if (policy_rejects(t, s.ep.ip, s.content)) {
                session_state_[idx] = 2;
                continue;
            }
            session_state_[idx] = 1;
            start_session(t, s.content, s.ep, idx, s.is_seed, true);
        }
        clock_ = t;
    }
    clock_ = std::max(clock_, now);
}

void SimTracker::start_session(std::int64_t now, std::int32_t content, Endpoint ep,
                               std::uint64_t key, bool is_seed, bool count_unstopped) {
    (void)now;
    auto& swarm = swarms_[std::size_t(content)];
    swarm.pos.emplace(key, swarm.members.size());
    swarm.members.push_back(Member{ep, key, is_seed});
    swarm.seen = true;
    if (is_seed) {
        swarm.seeds++;
        swarm.downloaded++;
    }
    auto& st = ips_[ep.ip];
    st.active++;
    st.keys.insert(key);
    if (count_unstopped) st.unstopped.insert(content);
}

void SimTracker::end_session(std::int32_t content, Endpoint ep, std::uint64_t key, bool is_seed,
                             bool clears_unstopped) {
    auto& swarm = swarms_[std::size_t(content)];
    if (const auto it = swarm.pos.find(key); it != swarm.pos.end()) {
        const auto at = it->second;
        swarm.pos.erase(it);
        if (at + 1 != swarm.members.size()) {
            swarm.members[at] = swarm.members.back();
            swarm.pos[swarm.members[at].key] = at;
        }
        swarm.members.pop_back();
        if (is_seed) swarm.seeds--;
    }
    auto& st = ips_[ep.ip];
    if (st.keys.erase(key) != 0) st.active--;
    if (clears_unstopped) st.unstopped.erase(content);
}

bool SimTracker::policy_rejects(std::int64_t now, IpAddr ip, std::int32_t content) {
    auto& st = ips_[ip];
    if (st.blacklisted) return true;
    const auto& bl = world_->cfg.blacklist;
    if (st.active + 1 > bl.threshold_concurrent) {
        blacklist(now, ip, BanReason::concurrent, st.active + 1);
        return true;
    }
    if (cumulative_active_) {
        const int unstopped = int(st.unstopped.size()) + (st.unstopped.contains(content) ? 0 : 1);
        if (unstopped > bl.cumulative_threshold) {
            blacklist(now, ip, BanReason::cumulative, unstopped);
            return true;
        }
    }
    return false;
}

void SimTracker::blacklist(std::int64_t now, IpAddr ip, BanReason reason, int count) {
    auto& st = ips_[ip];
    if (st.blacklisted) return;
    st.blacklisted = true;
    events_.push_back(BlacklistEvent{ip, now, reason, count});
    // Drop every live subscription the address holds.
    const auto keys = st.keys;
    for (const auto key : keys) {
        if (key & kWireBit) {
            const auto it = wire_.find(key & ~kWireBit);
            if (it == wire_.end()) continue;
            const auto ws = it->second;
            wire_.erase(it);
            wire_by_ep_.erase(wire_ep_key(ws.content, ws.ep));
            end_session(ws.content, ws.ep, key, ws.is_seed, false);
        } else {
            const auto idx = std::uint32_t(key);
            const auto& s = world_->sessions[idx];
            session_state_[idx] = 2;
            end_session(s.content, s.ep, key, s.is_seed, false);
        }
    }
}

void SimTracker::run_cumulative_sweep(std::int64_t now) {
    std::vector<IpAddr> offenders;
    for (const auto& [ip, st] : ips_) {
        if (!st.blacklisted && int(st.unstopped.size()) > world_->cfg.blacklist.cumulative_threshold) {
            offenders.push_back(ip);
        }
    }
    std::sort(offenders.begin(), offenders.end());
    for (const auto ip : offenders) {
        blacklist(now, ip, BanReason::cumulative, int(ips_[ip].unstopped.size()));
    }
}

std::string SimTracker::failure(std::string_view reason) const {
    bencode::Value::Dict d;
    d.emplace("failure reason", bencode::Value(std::string(reason)));
    const auto bytes = bencode::encode(bencode::Value(std::move(d)));
    return to_string(ByteSpan(bytes.data(), bytes.size()));
}

std::string SimTracker::announce(IpAddr caller, std::string_view query, std::int64_t now) {
    advance(now);
    const auto req = parse_announce_query(query);
    if (!req) return failure("invalid request");
    const auto* content = world_->find_content(req->content);
    if (content == nullptr) return failure("unregistered torrent");
    const auto ci = std::int32_t(content - world_->contents.data());
    const Endpoint ep{caller, req->port};

    if (auto it = ips_.find(caller); it != ips_.end() && it->second.blacklisted) {
        return failure("blacklisted");
    }

    // (content, endpoint) packs into one collision-free key: content
    // indexes stay far below 2^16 and the address fills the low 48 bits.
    const std::uint64_t ep_key =
        (std::uint64_t(std::uint32_t(ci)) << 48) | (std::uint64_t(caller.value) << 16) | req->port;
    auto by_ep = wire_by_ep_.find(ep_key);

    const bool is_seed = req->left == 0;
    if (req->event == tracker::AnnounceEvent::stopped) {
        if (by_ep != wire_by_ep_.end()) {
            const auto id = by_ep->second;
            const auto ws = wire_.at(id);
            wire_.erase(id);
            wire_by_ep_.erase(by_ep);
            end_session(ws.content, ws.ep, id | kWireBit, ws.is_seed, true);
        }
        return announce_body(ci, ep, req->numwant, false, false);
    }

    if (by_ep == wire_by_ep_.end()) {
        if (policy_rejects(now, caller, ci)) return failure("blacklisted");
        const auto id = next_wire_id_++;
        wire_.emplace(id, WireSession{ci, ep, is_seed, now + kSessionExpiry, ++generation_});
        wire_by_ep_.emplace(ep_key, id);
        expiries_.push(Expiry{now + kSessionExpiry, id, generation_});
        start_session(now, ci, ep, id | kWireBit, is_seed, true);
    } else {
        const auto id = by_ep->second;
        auto& ws = wire_.at(id);
        ws.expires = now + kSessionExpiry;
        ws.generation = ++generation_;
        expiries_.push(Expiry{ws.expires, id, ws.generation});
        if (ws.is_seed != is_seed) {
            // Completion (or a rollback); adjust the swarm counters.
            auto& swarm = swarms_[std::size_t(ci)];
            swarm.seeds += is_seed ? 1 : -1;
            if (is_seed) swarm.downloaded++;
            swarm.members[swarm.pos.at(id | kWireBit)].is_seed = is_seed;
            ws.is_seed = is_seed;
        }
    }
    return announce_body(ci, ep, req->numwant, true, is_seed);
}

std::string SimTracker::announce_body(std::int32_t content, Endpoint caller, std::uint32_t numwant,
                                      bool caller_active, bool caller_is_seed) {
    const auto& swarm = swarms_[std::size_t(content)];
    const auto m = swarm.members.size();

    std::size_t caller_pos = m;
    if (caller_active) {
        for (std::size_t i = 0; i < m; ++i) {
            if (swarm.members[i].ep == caller) {
                caller_pos = i;
                break;
            }
        }
    }
    const auto candidates = std::uint32_t(caller_pos < m ? m - 1 : m);
    const auto k = std::min(numwant, candidates);
    std::vector<Endpoint> peers;
    peers.reserve(k);
    for (const auto i : rng_.sample_indices(candidates, k)) {
        const auto j = (caller_pos < m && i >= caller_pos) ? i + 1 : i;
        peers.push_back(swarm.members[j].ep);
    }

    auto seeds = swarm.seeds;
    auto active = std::int64_t(m);
    if (caller_pos < m) {
        active--;
        if (caller_is_seed) seeds--;
    }

    const auto compact = tracker::encode_compact_peers(peers);
    bencode::Value::Dict d;
    d.emplace("complete", bencode::Value(seeds));
    d.emplace("downloaded", bencode::Value(swarm.downloaded));
    d.emplace("incomplete", bencode::Value(active - seeds));
    d.emplace("interval", bencode::Value(kAnnounceInterval));
    d.emplace("peers", bencode::Value(to_string(ByteSpan(compact.data(), compact.size()))));
    const auto bytes = bencode::encode(bencode::Value(std::move(d)));
    return to_string(ByteSpan(bytes.data(), bytes.size()));
}

std::string SimTracker::scrape_body(const std::vector<std::int32_t>& contents) const {
    bencode::Value::Dict files;
    for (const auto ci : contents) {
        const auto& swarm = swarms_[std::size_t(ci)];
        if (!swarm.seen) continue;
        bencode::Value::Dict entry;
        entry.emplace("complete", bencode::Value(swarm.seeds));
        entry.emplace("downloaded", bencode::Value(swarm.downloaded));
        entry.emplace("incomplete", bencode::Value(std::int64_t(swarm.members.size()) - swarm.seeds));
        const auto id = world_->contents[std::size_t(ci)].id;
        files.emplace(to_string(id.bytes()), bencode::Value(std::move(entry)));
    }
    bencode::Value::Dict top;
    top.emplace("files", bencode::Value(std::move(files)));
    const auto bytes = bencode::encode(bencode::Value(std::move(top)));
    return to_string(ByteSpan(bytes.data(), bytes.size()));
}

std::string SimTracker::scrape_all(std::int64_t now) {
    advance(now);
    std::vector<std::int32_t> all(world_->contents.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = std::int32_t(i);
    return scrape_body(all);
}

std::string SimTracker::scrape(const std::vector<ContentId>& hashes, std::int64_t now) {
    advance(now);
    std::vector<std::int32_t> picked;
    for (const auto& h : hashes) {
        if (const auto* c = world_->find_content(h)) {
            picked.push_back(std::int32_t(c - world_->contents.data()));
        }
    }
    return scrape_body(picked);
}

bool SimTracker::is_blacklisted(IpAddr ip) const {
    const auto it = ips_.find(ip);
    return it != ips_.end() && it->second.blacklisted;
}

SimTracker::SwarmCounts SimTracker::swarm_counts(std::int32_t content) const {
    const auto& swarm = swarms_.at(std::size_t(content));
    return SwarmCounts{swarm.seeds, std::int64_t(swarm.members.size()) - swarm.seeds};
}

std::size_t SimTracker::unstopped_count(IpAddr ip) const {
    const auto it = ips_.find(ip);
    return it == ips_.end() ? 0 : it->second.unstopped.size();
}

TransportResult SimTransport::get(const std::string& url) {
    const auto parts = parse_http_url(url);
    if (!parts) return TransportResult{0, {}, "unsupported url: " + url};
    const auto q = parts->path.find('?');
    const auto path = parts->path.substr(0, q);
    const auto query = q == std::string::npos ? std::string() : parts->path.substr(q + 1);
    const auto now = clock_->now();

    std::string body;
    if (path == "/announce") {
        body = tracker_->announce(caller_, query, now);
    } else if (path == "/scrape") {
        std::vector<ContentId> hashes;
        std::size_t pos = 0;
        while (pos <= query.size()) {
            const auto amp = query.find('&', pos);
            const auto part =
                query.substr(pos, amp == std::string::npos ? amp : amp - pos);
            pos = amp == std::string::npos ? query.size() + 1 : amp + 1;
            if (part.rfind("info_hash=", 0) != 0) continue;
            const auto raw = tracker::percent_decode(std::string_view(part).substr(10));
            if (raw && raw->size() == 20) {
                hashes.push_back(ContentId::from_bytes(ByteSpan(raw->data(), raw->size())));
            }
        }
        body = hashes.empty() ? tracker_->scrape_all(now) : tracker_->scrape(hashes, now);
    } else {
        return TransportResult{404, {}, "no handler for " + path};
    }
    return TransportResult{200, Bytes(body.begin(), body.end()), ""};
}

} // namespace swarmwatch::simnet
