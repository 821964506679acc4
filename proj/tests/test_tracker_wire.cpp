#include <set>

#include "doctest.h"
#include "support/fixtures.hpp"
#include "swarmwatch/bencode.hpp"
#include "swarmwatch/rng.hpp"
#include "swarmwatch/tracker_wire.hpp"
#include "swarmwatch/transport.hpp"

using namespace swarmwatch;
using tracker::AnnounceEvent;
using tracker::AnnounceRequest;
using tracker::Error;

namespace {

AnnounceRequest sample_request() {
    AnnounceRequest req;
    req.content = *ContentId::from_hex("00ff102030405060708090a0b0c0d0e0f0112233");
    for (std::size_t i = 0; i < req.peer_id.size(); ++i)
        req.peer_id[i] = static_cast<std::uint8_t>('A' + i);
    req.listen_port = 6881;
    req.left = 1000;
    return req;
}

} // namespace

TEST_CASE("announce query layout") {
    auto req = sample_request();
    req.event = AnnounceEvent::started;

    std::string q = build_announce_query(req);
    CHECK(q.find("event=started&numwant=200&compact=1") != std::string::npos);
    // digest 00 ff 10 20 30 40 50 60 70 80 90 a0 ... : unreserved octets
    // ('0', 'P', 'p', '3') pass through, everything else escapes.
    CHECK(q.find("info_hash=%00%FF%10%200%40P%60p%80%90%A0%B0%C0%D0%E0%F0%11%223&") == 0);
    CHECK(q.find("&peer_id=ABCDEFGHIJKLMNOPQRST&") != std::string::npos);
    CHECK(q.find("&port=6881&") != std::string::npos);
    CHECK(q.find("&uploaded=0&downloaded=0&left=1000&") != std::string::npos);

    req.event = AnnounceEvent::none;
    CHECK(build_announce_query(req).find("event=") == std::string::npos);

    req.event = AnnounceEvent::stopped;
    CHECK(build_announce_query(req).find("&event=stopped&") != std::string::npos);
}

TEST_CASE("announce query validation") {
    auto req = sample_request();
    req.listen_port = 0;
    CHECK_THROWS_AS((void)build_announce_query(req), std::invalid_argument);

    req = sample_request();
    req.numwant = 1001;
    CHECK_THROWS_AS((void)build_announce_query(req), std::invalid_argument);
}

TEST_CASE("query building is injective over content/event/numwant") {
    auto req = sample_request();
    std::set<std::string> seen;
    for (auto event : {AnnounceEvent::none, AnnounceEvent::started, AnnounceEvent::stopped}) {
        for (std::uint32_t numwant : {0u, 50u, 200u}) {
            for (std::uint8_t tag : {0, 1, 2}) {
                req.event = event;
                req.numwant = numwant;
                req.content.digest[0] = tag;
                seen.insert(build_announce_query(req));
            }
        }
    }
    CHECK(seen.size() == 27);
}

TEST_CASE("announce fixture parses") {
    auto res = tracker::parse_announce_response(testutil::read_file("announce2.ben"));
    CHECK(res.interval == 1800);
    CHECK(res.seeds == 4);
    CHECK(res.leechers == 9);
    REQUIRE(res.peers.size() == 2);
    CHECK(format_endpoint(res.peers[0]) == "10.0.0.1:6699");
    CHECK(format_endpoint(res.peers[1]) == "192.0.2.17:9000");
}

TEST_CASE("announce failure reason and malformed bodies") {
    auto body = to_bytes("d14:failure reason6:bannede");
    try {
        (void)tracker::parse_announce_response(body);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::failure);
        CHECK(std::string(e.what()).find("banned") != std::string::npos);
    }

    try {
        (void)tracker::parse_announce_response(to_bytes("d5:peers5:aaaaae"));
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind() == Error::Kind::bad_peers_length);
    }

    CHECK_THROWS_AS((void)tracker::parse_announce_response(to_bytes("not bencode")), Error);
    CHECK_THROWS_AS((void)tracker::parse_announce_response(to_bytes("i42e")), Error);
    // missing peers key entirely
    CHECK_THROWS_AS((void)tracker::parse_announce_response(to_bytes("d8:intervali1800ee")), Error);
}

TEST_CASE("dictionary-model peers are normalized") {
    auto body = to_bytes(
        "d8:completei1e10:incompletei1e8:intervali60e"
        "5:peersl"
        "d2:ip8:10.0.0.24:porti6881ee"
        "d2:ip11:192.168.1.94:porti51413ee"
        "ee");
    auto res = tracker::parse_announce_response(body);
    REQUIRE(res.peers.size() == 2);
    CHECK(format_endpoint(res.peers[0]) == "10.0.0.2:6881");
    CHECK(format_endpoint(res.peers[1]) == "192.168.1.9:51413");

    auto bad_port = to_bytes("d5:peersld2:ip8:10.0.0.24:porti0eeee");
    CHECK_THROWS_AS((void)tracker::parse_announce_response(bad_port), Error);
}

TEST_CASE("compact peers roundtrip property") {
    Rng rng(77);
    std::vector<Endpoint> peers;
    for (int i = 0; i < 1000; ++i) {
        Endpoint ep;
        ep.ip.value = static_cast<std::uint32_t>(rng.next());
        ep.port = static_cast<std::uint16_t>(rng.range(1, 65535));
        peers.push_back(ep);
    }
    Bytes blob = tracker::encode_compact_peers(peers);
    CHECK(blob.size() == peers.size() * 6);
    CHECK(tracker::decode_compact_peers(blob) == peers);

    CHECK(tracker::encode_compact_peers({}).empty());
    CHECK(tracker::decode_compact_peers({}).empty());
}

TEST_CASE("scrape fixture parses with frozen counts") {
    auto res = tracker::parse_scrape_all(testutil::read_file("scrape3.ben"));
    REQUIRE(res.entries.size() == 3);

    auto stats_of = [&](std::string_view hex) {
        auto id = ContentId::from_hex(hex);
        REQUIRE(id.has_value());
        auto it = res.entries.find(*id);
        REQUIRE(it != res.entries.end());
        return it->second;
    };

    auto a = stats_of("21012219fac908b495561b7ef806ed75022cb14c");
    CHECK(a.seeds == 3);
    CHECK(a.leechers == 5);
    CHECK(a.downloaded == 7);
    auto b = stats_of("420282061a23bee00122d83b5e50221f45d20cea");
    CHECK(b.seeds == 1);
    CHECK(b.leechers == 1);
    CHECK(b.downloaded == 0);
    auto c = stats_of("6303a01fe0eab6549474c345a656cf6a47febda6");
    CHECK(c.seeds == 12);
    CHECK(c.leechers == 40);
    CHECK(c.downloaded == 99);
}

TEST_CASE("scrape error kinds") {
    auto kind_of = [](std::string_view wire) {
        try {
            (void)tracker::parse_scrape_all(to_bytes(wire));
        } catch (const Error& e) {
            return e.kind();
        }
        FAIL("expected throw");
        return Error::Kind::malformed;
    };

    CHECK(kind_of("d5:filesd19:aaaaaaaaaaaaaaaaaaad8:completei1eeee") == Error::Kind::bad_key_length);
    CHECK(kind_of("de") == Error::Kind::missing_files);
    CHECK(kind_of("le") == Error::Kind::malformed);
    CHECK(kind_of("d5:filesi42ee") == Error::Kind::malformed);
    CHECK(kind_of("d14:failure reason8:overloade") == Error::Kind::failure);

    // empty files dictionary is fine
    CHECK(tracker::parse_scrape_all(to_bytes("d5:filesdee")).entries.empty());
}

TEST_CASE("scrape ignores unknown keys at both levels") {
    std::string wire =
        "d5:filesd20:aaaaaaaaaaaaaaaaaaaad8:completei2e10:downloadedi3e5:extrali1ee10:incompletei4eee"
        "5:flagsd20:min_request_intervali900eee";
    auto res = tracker::parse_scrape_all(to_bytes(wire));
    REQUIRE(res.entries.size() == 1);
    auto& stats = res.entries.begin()->second;
    CHECK(stats.seeds == 2);
    CHECK(stats.downloaded == 3);
    CHECK(stats.leechers == 4);
}

TEST_CASE("url helpers") {
    auto parts = parse_http_url("http://tracker.example.invalid/announce?a=1");
    REQUIRE(parts.has_value());
    CHECK(parts->host == "tracker.example.invalid");
    CHECK(parts->port == 80);
    CHECK(parts->path == "/announce?a=1");

    parts = parse_http_url("http://127.0.0.1:8080/ann");
    REQUIRE(parts.has_value());
    CHECK(parts->host == "127.0.0.1");
    CHECK(parts->port == 8080);
    CHECK(parts->path == "/ann");

    CHECK_FALSE(parse_http_url("https://x/").has_value());
    CHECK_FALSE(parse_http_url("http://").has_value());
    CHECK_FALSE(parse_http_url("http://host:0/").has_value());
    CHECK_FALSE(parse_http_url("http://host:99999/").has_value());

    CHECK(scrape_url_from_announce("http://t.example/announce") == "http://t.example/scrape");
    CHECK(scrape_url_from_announce("http://t.example:8080/announce?key=1") == "http://t.example:8080/scrape?key=1");
    CHECK(scrape_url_from_announce("http://t.example/a/announce") == "http://t.example/a/scrape");
    CHECK_FALSE(scrape_url_from_announce("http://t.example/ann").has_value());
    CHECK_FALSE(scrape_url_from_announce("http://t.example/xannounce").has_value());
}
