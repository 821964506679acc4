#include <algorithm>
#include <set>

#include "doctest.h"
#include "support/tempdir.hpp"
#include "swarmwatch/metainfo.hpp"
#include "swarmwatch/peer_probe.hpp"
#include "swarmwatch/simnet/peers_sim.hpp"
#include "swarmwatch/simnet/tracker_sim.hpp"
#include "swarmwatch/simnet/world.hpp"
#include "swarmwatch/store.hpp"

using namespace swarmwatch;
using namespace swarmwatch::simnet;

namespace {

WorldConfig tiny_world() {
    WorldConfig cfg;
    cfg.seed = 11;
    cfg.duration_days = 1;
    cfg.content_count = 20;
    cfg.provider_count = 5;
    cfg.mean_swarm_sessions = 8;
    cfg.population.honest_users = 40;
    cfg.population.nat_boxes = 3;
    cfg.population.proxy_contents_min = 5;
    cfg.population.proxy_contents_max = 10;
    cfg.population.bd_contents_min = 5;
    cfg.population.bd_contents_max = 10;
    cfg.population.seedbox_contents_min = 5;
    cfg.population.seedbox_contents_max = 10;
    return cfg;
}

std::string announce_query(const ContentId& id, std::string_view peer_tag, std::uint16_t port,
                           tracker::AnnounceEvent event, std::int64_t left = 1,
                           std::uint32_t numwant = 50) {
    tracker::AnnounceRequest req;
    req.content = id;
    const std::string tag = "-SW0100-" + std::string(peer_tag) +
                            std::string(12 - peer_tag.size(), '0');
    std::copy(tag.begin(), tag.end(), req.peer_id.begin());
    req.listen_port = port;
    req.event = event;
    req.numwant = numwant;
    req.left = left;
    return tracker::build_announce_query(req);
}

tracker::AnnounceResponse parse_announce(const std::string& body) {
    return tracker::parse_announce_response(ByteSpan(
        reinterpret_cast<const std::uint8_t*>(body.data()), body.size()));
}

} // namespace

TEST_CASE("world generation is deterministic and structurally sound") {
    const auto cfg = tiny_world();
    const auto a = generate_world(cfg);
    const auto b = generate_world(cfg);

    REQUIRE(a.contents.size() == 20);
    REQUIRE(a.providers.size() == 5);
    REQUIRE(b.contents.size() == a.contents.size());
    CHECK(a.sessions.size() == b.sessions.size());
    for (std::size_t i = 0; i < a.contents.size(); ++i) {
        CHECK(a.contents[i].id == b.contents[i].id);
        CHECK(a.contents[i].name == b.contents[i].name);
    }

    auto other = cfg;
    other.seed = 12;
    const auto c = generate_world(other);
    CHECK(c.contents[0].id != a.contents[0].id);

    CHECK(std::is_sorted(a.sessions.begin(), a.sessions.end(),
                         [](const SimSession& x, const SimSession& y) { return x.start < y.start; }));
    for (const auto& content : a.contents) {
        CHECK(content.login >= 0);
        CHECK(content.provider >= 0);
        CHECK(content.listed_at >= content.injected_at);
        CHECK(a.find_content(content.id) != nullptr);
    }
    // Every content gets a provider session that superseeds (leecher flag).
    std::set<std::int32_t> provided;
    for (const auto& s : a.sessions) {
        const auto role = a.roles.at(s.ep.ip);
        if (role == Role::provider) {
            CHECK_FALSE(s.is_seed);
            provided.insert(s.content);
        }
    }
    CHECK(provided.size() == a.contents.size());
}

TEST_CASE("world config json roundtrip is strict") {
    auto cfg = tiny_world();
    cfg.blacklist.policy_change_at = 9;
    cfg.proxy_activation_at = 17;
    const auto doc = cfg.to_json();
    const auto back = WorldConfig::from_json(doc);
    CHECK(back.to_json() == doc);
    CHECK(back.blacklist.policy_change_at == 9);
    CHECK(back.proxy_activation_at == 17);

    auto bad = doc;
    bad["content_cout"] = 5;  // typo must be caught, not ignored
    CHECK_THROWS_AS((void)WorldConfig::from_json(bad), InfeasibleConfig);

    auto infeasible = tiny_world();
    infeasible.provider_count = 0;
    CHECK_THROWS_AS((void)generate_world(infeasible), InfeasibleConfig);
}

TEST_CASE("synthesized torrents hash to their content id") {
    const auto world = generate_world(tiny_world());
    for (const std::int32_t i : {0, 7, 19}) {
        const auto bytes = synthesize_torrent(world, i);
        const auto meta = meta::parse_torrent(ByteSpan(bytes.data(), bytes.size()));
        CHECK(meta.announce_url == kSimAnnounceUrl);
        CHECK(meta.content_name == world.contents[std::size_t(i)].name);
        CHECK(meta.total_size == world.contents[std::size_t(i)].total_size);
        CHECK(meta::content_id(meta) == world.contents[std::size_t(i)].id);
    }
}

TEST_CASE("sim feed lists in listing order and serves torrents") {
    const auto world = generate_world(tiny_world());
    const auto feed = make_sim_feed(world);

    CHECK(feed->list(world.cfg.start_time - 1).empty());
    const auto all = feed->list(world.cfg.end_time());
    REQUIRE(all.size() == world.contents.size());
    CHECK(std::is_sorted(all.begin(), all.end(), [](const FeedItem& a, const FeedItem& b) {
        return a.listed_at < b.listed_at;
    }));

    const auto mid = feed->list(all[4].listed_at);
    CHECK(mid.size() >= 5);

    const auto bytes = feed->fetch_torrent(all[0]);
    REQUIRE(bytes.has_value());
    const auto meta = meta::parse_torrent(ByteSpan(bytes->data(), bytes->size()));
    CHECK(meta::content_id(meta) == all[0].content);
}

TEST_CASE("tracker answers announces with other peers, never the caller") {
    const auto world = generate_world(tiny_world());
    SimTracker tracker(world);
    const auto& content = world.contents[0];
    const auto t0 = content.listed_at + 600;

    const auto caller = IpAddr::from_octets(10, 0, 0, 1);
    const auto body = tracker.announce(
        caller, announce_query(content.id, "a", 6881, tracker::AnnounceEvent::started), t0);
    const auto resp = parse_announce(body);
    CHECK(resp.interval > 0);
    CHECK(resp.seeds + resp.leechers >= 1);  // at least the provider
    for (const auto ep : resp.peers) CHECK(ep.ip != caller);

    // Reported counts are the swarm minus the caller itself.
    const auto counts = tracker.swarm_counts(0);
    CHECK(resp.seeds == counts.seeds);
    CHECK(resp.leechers == counts.leechers - 1);  // caller announced left=1

    // A second crawler host sees the first one.
    const auto other = IpAddr::from_octets(10, 0, 0, 2);
    const auto seen = parse_announce(tracker.announce(
        other, announce_query(content.id, "b", 7000, tracker::AnnounceEvent::started), t0 + 5));
    const auto me = std::find_if(seen.peers.begin(), seen.peers.end(),
                                 [&](Endpoint ep) { return ep.ip == caller; });
    CHECK(me != seen.peers.end());
}

TEST_CASE("tracker failure bodies") {
    const auto world = generate_world(tiny_world());
    SimTracker tracker(world);
    const auto now = world.cfg.start_time + 3600;

    const auto caller = IpAddr::from_octets(10, 0, 0, 1);
    CHECK_THROWS_WITH_AS((void)parse_announce(tracker.announce(caller, "not_a_query", now)),
                         "tracker failure: invalid request", tracker::Error);

    ContentId ghost;  // all-zero id is registered nowhere
    CHECK_THROWS_WITH_AS(
        (void)parse_announce(tracker.announce(
            caller, announce_query(ghost, "a", 6881, tracker::AnnounceEvent::started), now)),
        "tracker failure: unregistered torrent", tracker::Error);
}

TEST_CASE("stopped and expiry both clear a crawler session") {
    const auto world = generate_world(tiny_world());
    SimTracker tracker(world);
    const auto& content = world.contents[0];
    const auto t0 = content.listed_at + 600;
    const auto caller = IpAddr::from_octets(10, 0, 0, 1);
    const auto watcher = IpAddr::from_octets(10, 0, 0, 2);

    // started + stopped -> gone immediately.
    (void)tracker.announce(caller, announce_query(content.id, "a", 6881,
                                                  tracker::AnnounceEvent::started), t0);
    CHECK(tracker.unstopped_count(caller) == 1);
    (void)tracker.announce(caller, announce_query(content.id, "a", 6881,
                                                  tracker::AnnounceEvent::stopped), t0 + 1);
    CHECK(tracker.unstopped_count(caller) == 0);
    auto view = parse_announce(tracker.announce(
        watcher, announce_query(content.id, "w", 7000, tracker::AnnounceEvent::started), t0 + 2));
    for (const auto ep : view.peers) CHECK(ep.ip != caller);

    // started, never stopped -> swept after kSessionExpiry.
    (void)tracker.announce(caller, announce_query(content.id, "a", 6881,
                                                  tracker::AnnounceEvent::started), t0 + 10);
    view = parse_announce(tracker.announce(
        watcher, announce_query(content.id, "w", 7000, tracker::AnnounceEvent::none), t0 + 20));
    CHECK(std::any_of(view.peers.begin(), view.peers.end(),
                      [&](Endpoint ep) { return ep.ip == caller; }));
    view = parse_announce(tracker.announce(
        watcher,
        announce_query(content.id, "w", 7000, tracker::AnnounceEvent::none),
        t0 + 10 + SimTracker::kSessionExpiry + 1));
    for (const auto ep : view.peers) CHECK(ep.ip != caller);
    // Abandonment is not politeness: the cumulative ledger still remembers.
    CHECK(tracker.unstopped_count(caller) == 1);
}

TEST_CASE("concurrent-subscription blacklist fires at the threshold") {
    auto cfg = tiny_world();
    cfg.content_count = 30;
    // Keep every world IP far from the line: no NAT fan-in, and enough
    // providers that the Zipf head stays well under the threshold.
    cfg.population.nat_boxes = 0;
    cfg.provider_count = 10;
    cfg.blacklist.threshold_concurrent = 20;
    const auto world = generate_world(cfg);
    SimTracker tracker(world);
    const auto caller = IpAddr::from_octets(10, 0, 0, 9);
    const auto now = world.cfg.end_time() - 3600;

    int accepted = 0;
    bool banned = false;
    for (const auto& content : world.contents) {
        const auto body = tracker.announce(
            caller, announce_query(content.id, "m", 6881, tracker::AnnounceEvent::started), now);
        try {
            (void)parse_announce(body);
            ++accepted;
        } catch (const tracker::Error&) {
            banned = true;
            break;
        }
    }
    CHECK(banned);
    CHECK(accepted == 20);  // the 21st concurrent subscription crosses the line
    CHECK(tracker.is_blacklisted(caller));
    REQUIRE(tracker.blacklist_events().size() == 1);
    CHECK(tracker.blacklist_events()[0].ip == caller);
    CHECK(tracker.blacklist_events()[0].reason == BanReason::concurrent);

    // Banned callers stay banned, and their sessions are dropped.
    CHECK_THROWS_WITH_AS(
        (void)parse_announce(tracker.announce(
            caller,
            announce_query(world.contents[0].id, "m", 6881, tracker::AnnounceEvent::none),
            now + 5)),
        "tracker failure: blacklisted", tracker::Error);
    const auto watcher = IpAddr::from_octets(10, 0, 0, 2);
    const auto view = parse_announce(tracker.announce(
        watcher,
        announce_query(world.contents[0].id, "w", 7000, tracker::AnnounceEvent::started),
        now + 6));
    for (const auto ep : view.peers) CHECK(ep.ip != caller);
}

TEST_CASE("paired started/stopped never accumulates against the crawler") {
    auto cfg = tiny_world();
    cfg.content_count = 30;
    const auto world = generate_world(cfg);
    SimTracker tracker(world);
    const auto caller = IpAddr::from_octets(10, 0, 0, 1);
    const auto now = world.cfg.end_time() - 3600;

    for (const auto& content : world.contents) {
        (void)parse_announce(tracker.announce(
            caller, announce_query(content.id, "a", 6881, tracker::AnnounceEvent::started), now));
        (void)tracker.announce(
            caller, announce_query(content.id, "a", 6881, tracker::AnnounceEvent::stopped), now);
    }
    CHECK_FALSE(tracker.is_blacklisted(caller));
    CHECK(tracker.unstopped_count(caller) == 0);
    CHECK(tracker.blacklist_events().empty());
}

TEST_CASE("cumulative policy bans after the switch, not before") {
    auto cfg = tiny_world();
    cfg.content_count = 30;
    cfg.population.nat_boxes = 0;
    cfg.blacklist.threshold_concurrent = 100;   // concurrent rule never fires here
    cfg.blacklist.cumulative_threshold = 10;
    cfg.blacklist.policy_change_at = 2;         // start + 2 snapshot periods
    const auto world = generate_world(cfg);
    SimTracker tracker(world);
    const auto change_at = cfg.start_time + 2 * cfg.snapshot_period;

    // A monitor-style caller abandons 14 sessions before the switch: legal
    // under the concurrent rule (they expire one by one).
    const auto monitor = IpAddr::from_octets(10, 0, 0, 7);
    for (int i = 0; i < 14; ++i) {
        (void)parse_announce(tracker.announce(
            monitor,
            announce_query(world.contents[std::size_t(i)].id, "m", 6881,
                           tracker::AnnounceEvent::started),
            cfg.start_time + 60 + i));
    }
    CHECK_FALSE(tracker.is_blacklisted(monitor));

    // The switch sweeps the ledger retroactively.
    tracker.advance(change_at + 1);
    CHECK(tracker.is_blacklisted(monitor));
    REQUIRE_FALSE(tracker.blacklist_events().empty());
    CHECK(tracker.blacklist_events()[0].ip == monitor);
    CHECK(tracker.blacklist_events()[0].reason == BanReason::cumulative);

    // After the switch a fresh caller is banned as soon as its lifetime
    // unstopped set crosses the threshold.
    const auto late = IpAddr::from_octets(10, 0, 0, 8);
    int ok = 0;
    for (int i = 0; i < 14; ++i) {
        const auto body = tracker.announce(
            late,
            announce_query(world.contents[std::size_t(i)].id, "x", 6881,
                           tracker::AnnounceEvent::started),
            change_at + 100 + i);
        try {
            (void)parse_announce(body);
            ++ok;
        } catch (const tracker::Error&) {
            break;
        }
    }
    CHECK(ok == 10);
    CHECK(tracker.is_blacklisted(late));

    // Politeness still protects: a paired caller outlives the switch.
    const auto polite = IpAddr::from_octets(10, 0, 0, 9);
    for (const auto& content : world.contents) {
        (void)parse_announce(tracker.announce(
            polite, announce_query(content.id, "p", 6881, tracker::AnnounceEvent::started),
            change_at + 400));
        (void)tracker.announce(
            polite, announce_query(content.id, "p", 6881, tracker::AnnounceEvent::stopped),
            change_at + 400);
    }
    CHECK_FALSE(tracker.is_blacklisted(polite));
}

TEST_CASE("scrape-all and single scrape agree with announce state") {
    const auto world = generate_world(tiny_world());
    SimTracker tracker(world);
    const auto now = world.cfg.start_time + 12 * 3600;

    const auto all_body = tracker.scrape_all(now);
    const auto all = tracker::parse_scrape_all(
        ByteSpan(reinterpret_cast<const std::uint8_t*>(all_body.data()), all_body.size()));
    CHECK(!all.entries.empty());

    const auto& [id, stats] = *all.entries.begin();
    const auto one_body = tracker.scrape({id}, now);
    const auto one = tracker::parse_scrape_all(
        ByteSpan(reinterpret_cast<const std::uint8_t*>(one_body.data()), one_body.size()));
    REQUIRE(one.entries.size() == 1);
    CHECK(one.entries.begin()->second.seeds == stats.seeds);
    CHECK(one.entries.begin()->second.leechers == stats.leechers);

    const auto idx = world.content_index.at(id);
    const auto counts = tracker.swarm_counts(idx);
    CHECK(counts.seeds == stats.seeds);
    CHECK(counts.leechers == stats.leechers);
}

TEST_CASE("sim transport speaks the tracker URL dialect") {
    const auto world = generate_world(tiny_world());
    SimTracker tracker(world);
    SimClock clock(world.cfg.start_time + 6 * 3600);
    SimTransport transport(tracker, clock, IpAddr::from_octets(10, 0, 0, 1));

    tracker::AnnounceRequest req;
    req.content = world.contents[0].id;
    req.peer_id = {'-', 'S', 'W', '0', '1', '0', '0', '-', 'a', 'a',
                   'a', 'a', 'a', 'a', 'a', 'a', 'a', 'a', 'a', 'a'};
    req.listen_port = 6881;
    req.event = tracker::AnnounceEvent::started;
    req.left = 1;
    const auto url = std::string(kSimAnnounceUrl) + "?" + tracker::build_announce_query(req);
    const auto res = transport.get(url);
    REQUIRE(res.ok());
    (void)tracker::parse_announce_response(ByteSpan(res.body.data(), res.body.size()));

    const auto scrape = transport.get("http://tracker.simnet.invalid/scrape");
    REQUIRE(scrape.ok());
    CHECK(!tracker::parse_scrape_all(ByteSpan(scrape.body.data(), scrape.body.size()))
               .entries.empty());

    CHECK_FALSE(transport.get("http://tracker.simnet.invalid/elsewhere").ok());
}

TEST_CASE("sim peers answer probes according to role") {
    auto cfg = tiny_world();
    cfg.population.http_proxies = 1;
    cfg.population.big_downloaders = 2;
    const auto world = generate_world(cfg);
    SimConnector connector(world);

    // Provider endpoints serve a piece.
    const SimSession* provider = nullptr;
    const SimSession* aggregator = nullptr;
    for (const auto& s : world.sessions) {
        const auto role = world.roles.at(s.ep.ip);
        if (!provider && role == Role::provider) provider = &s;
        if (!aggregator && (role == Role::http_proxy || role == Role::big_downloader))
            aggregator = &s;
    }
    REQUIRE(provider != nullptr);
    const auto& pc = world.contents[std::size_t(provider->content)];
    CHECK(probe::probe_download(connector, provider->ep, pc.id, 200).result ==
          probe::ProbeResult::served_piece);
    CHECK(probe::handshake(connector, provider->ep, pc.id, 200) == probe::HandshakeResult::ok);

    if (aggregator) {
        const auto& ac = world.contents[std::size_t(aggregator->content)];
        CHECK(probe::probe_download(connector, aggregator->ep, ac.id, 200).result ==
              probe::ProbeResult::served_piece);
    }

    // Asking any peer about a content it never carried: wrong_hash handshake.
    ContentId foreign;
    for (const auto& c : world.contents) {
        bool carried = false;
        for (const auto& s : world.sessions) {
            if (s.ep == provider->ep && &world.contents[std::size_t(s.content)] == &c) {
                carried = true;
                break;
            }
        }
        if (!carried) {
            foreign = c.id;
            break;
        }
    }
    CHECK(probe::handshake(connector, provider->ep, foreign, 200) ==
          probe::HandshakeResult::wrong_hash);

    // Unknown endpoints refuse the connection.
    const Endpoint nobody{IpAddr::from_octets(203, 0, 113, 1), 9};
    CHECK(probe::probe_download(connector, nobody, pc.id, 200).result ==
          probe::ProbeResult::refused);

    // Unreachable hosts time out.
    connector.set_unreachable(provider->ep.ip);
    CHECK(probe::probe_download(connector, provider->ep, pc.id, 200).result ==
          probe::ProbeResult::timeout);
}

TEST_CASE("monitor peers handshake but never serve") {
    auto cfg = tiny_world();
    cfg.population.monitors = 30;
    cfg.population.monitor_targets = 10;
    cfg.blacklist.threshold_concurrent = 40;
    const auto world = generate_world(cfg);
    SimConnector connector(world);

    const SimSession* monitor = nullptr;
    for (const auto& s : world.sessions) {
        if (world.roles.at(s.ep.ip) == Role::monitor) {
            monitor = &s;
            break;
        }
    }
    REQUIRE(monitor != nullptr);
    CHECK_FALSE(monitor->sends_stopped);
    CHECK_FALSE(monitor->serves);
    const auto& mc = world.contents[std::size_t(monitor->content)];
    CHECK(probe::handshake(connector, monitor->ep, mc.id, 200) == probe::HandshakeResult::ok);
    CHECK(probe::probe_download(connector, monitor->ep, mc.id, 200).result ==
          probe::ProbeResult::handshake_only);
}

TEST_CASE("ground truth and lists export") {
    testutil::TempDir tmp;
    auto cfg = tiny_world();
    cfg.population.monitors = 25;
    cfg.population.monitor_targets = 8;
    cfg.blacklist.threshold_concurrent = 40;
    cfg.population.http_proxies = 2;
    cfg.population.socks_proxies = 2;
    cfg.population.tor_exits = 3;
    cfg.population.vpn_egresses = 2;
    cfg.population.big_downloaders = 2;
    const auto world = generate_world(cfg);

    export_ground_truth(world, tmp / "ground_truth.json");
    const auto truth = store::read_json(tmp / "ground_truth.json");
    CHECK(truth.at("contents").size() == world.contents.size());
    CHECK(truth.at("roles").size() == world.roles.size());
    const auto& first = truth.at("contents").at(0);
    CHECK(first.contains("provider_ip"));
    CHECK(first.contains("login"));

    export_lists(world, tmp / "lists");
    const auto http = store::read_ip_list(tmp / "lists" / "http_proxies.txt");
    CHECK(http.size() == 2);
    for (const auto ip : world.http_proxy_ips) CHECK(http.contains(ip));
    const auto tor = store::read_ip_list(tmp / "lists" / "tor_exits.txt");
    CHECK(tor.size() == world.tor_listed_ips.size());
    const auto rdns = store::read_rdns(tmp / "lists" / "rdns.tsv");
    CHECK(rdns.size() == world.rdns.size());
    const auto asmap = store::read_asmap(tmp / "lists" / "asmap.tsv");
    CHECK(asmap.size() == world.as_of.size());
}
