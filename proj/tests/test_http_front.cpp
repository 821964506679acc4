#include "doctest.h"

#include <algorithm>
#include <string>

#include "support/peer_server.hpp"
#include "swarmwatch/clock.hpp"
#include "swarmwatch/simnet/http_front.hpp"
#include "swarmwatch/simnet/tracker_sim.hpp"
#include "swarmwatch/simnet/world.hpp"
#include "swarmwatch/tracker_wire.hpp"
#include "swarmwatch/transport.hpp"

using namespace swarmwatch;
using namespace swarmwatch::simnet;

namespace {

WorldConfig front_world() {
    WorldConfig cfg;
    cfg.seed = 19;
    cfg.duration_days = 1;
    cfg.content_count = 16;
    cfg.provider_count = 4;
    cfg.mean_swarm_sessions = 8;
    cfg.population.honest_users = 30;
    cfg.population.nat_boxes = 2;
    cfg.population.proxy_contents_min = 4;
    cfg.population.proxy_contents_max = 8;
    cfg.population.bd_contents_min = 4;
    cfg.population.bd_contents_max = 8;
    cfg.population.seedbox_contents_min = 4;
    cfg.population.seedbox_contents_max = 8;
    return cfg;
}

std::string announce_query(const ContentId& id) {
    tracker::AnnounceRequest req;
    req.content = id;
    const std::string tag = "-SW0100-front0000000";
    std::copy(tag.begin(), tag.end(), req.peer_id.begin());
    req.listen_port = 16881;
    req.event = tracker::AnnounceEvent::started;
    req.numwant = 50;
    req.left = 1;
    return tracker::build_announce_query(req);
}

std::string body_str(const TransportResult& r) {
    return std::string(reinterpret_cast<const char*>(r.body.data()), r.body.size());
}

/// Minimal raw HTTP/1.1 GET so response headers stay visible.
std::string raw_get(int port, const std::string& target, const std::string& extra_header) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    REQUIRE(fd >= 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(std::uint16_t(port));
    REQUIRE(::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
    std::string req = "GET " + target + " HTTP/1.1\r\nHost: 127.0.0.1\r\nConnection: close\r\n" +
                      extra_header + "\r\n";
    REQUIRE(testutil::write_all(
        fd, ByteSpan(reinterpret_cast<const std::uint8_t*>(req.data()), req.size())));
    std::string response;
    char buf[4096];
    for (;;) {
        pollfd pfd{fd, POLLIN, 0};
        if (::poll(&pfd, 1, 5000) <= 0) break;
        ssize_t n = ::recv(fd, buf, sizeof(buf), 0);
        if (n <= 0) break;
        response.append(buf, std::size_t(n));
    }
    ::close(fd);
    return response;
}

} // namespace

// Two trackers over the same world replay identically, so the loopback HTTP
// route and the in-process binding must produce byte-identical bodies for an
// identical request sequence.
TEST_CASE("loopback HTTP front matches the in-process binding byte for byte") {
    const auto world = generate_world(front_world());
    SimTracker over_http(world);
    SimTracker in_process(world);
    SimClock clock(world.cfg.start_time + 6 * 3600);
    const auto caller = IpAddr::from_octets(10, 0, 0, 1);

    HttpFront front(over_http, clock, caller);
    SimTransport direct(in_process, clock, caller);
    auto http = make_http_transport(5000);

    auto pair_get = [&](const std::string& path_and_query) {
        const auto a = http->get("http://127.0.0.1:" + std::to_string(front.port()) +
                                 path_and_query);
        const auto b = direct.get("http://tracker.simnet.invalid" + path_and_query);
        REQUIRE(a.ok());
        REQUIRE(b.ok());
        CHECK(a.body == b.body);
        return a;
    };

    const auto query = announce_query(world.contents[0].id);
    const auto started = pair_get("/announce?" + query);
    const auto resp = tracker::parse_announce_response(ByteSpan(started.body));
    CHECK(resp.interval == 1800);

    // Renewal for the now-live session, then read-only endpoints.
    pair_get("/announce?" + query);
    const auto h0 = "info_hash=" + tracker::percent_encode(world.contents[0].id.bytes());
    const auto h1 = "info_hash=" + tracker::percent_encode(world.contents[1].id.bytes());
    pair_get("/scrape?" + h0 + "&" + h1);
    const auto all = pair_get("/scrape");
    CHECK(all.body.size() > 100);
}

TEST_CASE("malformed announce comes back as the tracker failure body") {
    const auto world = generate_world(front_world());
    SimTracker tracker(world);
    SimClock clock(world.cfg.start_time + 3600);
    HttpFront front(tracker, clock, IpAddr::from_octets(10, 0, 0, 2));
    auto http = make_http_transport(5000);

    const auto r = http->get(front.announce_url() + "?garbage=1");
    REQUIRE(r.ok());
    CHECK(body_str(r) == "d14:failure reason15:invalid requeste");
    CHECK_THROWS_AS((void)tracker::parse_announce_response(ByteSpan(r.body)), tracker::Error);
}

TEST_CASE("unknown paths 404") {
    const auto world = generate_world(front_world());
    SimTracker tracker(world);
    SimClock clock(world.cfg.start_time + 3600);
    HttpFront front(tracker, clock, IpAddr::from_octets(10, 0, 0, 3));
    auto http = make_http_transport(5000);

    const auto r = http->get("http://127.0.0.1:" + std::to_string(front.port()) + "/nope");
    CHECK(r.status == 404);
    CHECK_FALSE(r.ok());
}

TEST_CASE("gzip responses are produced on request and decoded transparently") {
    const auto world = generate_world(front_world());
    SimTracker tracker(world);
    SimTracker replica(world);
    SimClock clock(world.cfg.start_time + 6 * 3600);
    const auto caller = IpAddr::from_octets(10, 0, 0, 4);
    HttpFront front(tracker, clock, caller);

    // On the wire: asking for gzip gets gzip (scrape-all of a whole world is
    // comfortably above any compression floor).
    const auto raw = raw_get(front.port(), "/scrape", "Accept-Encoding: gzip\r\n");
    const auto header_end = raw.find("\r\n\r\n");
    REQUIRE(header_end != std::string::npos);
    CHECK(raw.substr(0, header_end).find("Content-Encoding: gzip") != std::string::npos);
    REQUIRE(raw.size() >= header_end + 6);
    CHECK(std::uint8_t(raw[header_end + 4]) == 0x1f);
    CHECK(std::uint8_t(raw[header_end + 5]) == 0x8b);

    // Through the client: the same resource arrives decoded, identical to
    // what the in-process binding yields.
    auto http = make_http_transport(5000);
    const auto via_client = http->get(scrape_url_from_announce(front.announce_url()).value());
    REQUIRE(via_client.ok());
    SimTransport direct(replica, clock, caller);
    const auto expect = direct.get("http://tracker.simnet.invalid/scrape");
    REQUIRE(expect.ok());
    CHECK(via_client.body == expect.body);
}
