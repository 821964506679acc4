#include <algorithm>

#include "doctest.h"
#include "swarmwatch/providers.hpp"

using namespace swarmwatch;
using namespace swarmwatch::providers;

namespace {

ContentId cid(std::uint8_t tag) {
    Bytes b(20, tag);
    return ContentId::from_bytes(ByteSpan(b.data(), b.size()));
}

IpAddr ip(std::uint8_t d) { return IpAddr::from_octets(10, 3, 0, d); }

Endpoint epo(std::uint8_t d, std::uint16_t port = 4000) { return Endpoint{ip(d), port}; }

InjectionRecord rec(std::uint8_t tag, std::vector<Endpoint> first_join,
                    const std::string& login = "box", std::int64_t listed_at = 1000) {
    InjectionRecord r;
    r.content = cid(tag);
    r.login = login;
    r.listed_at = listed_at;
    r.first_join_at = listed_at + 60;
    r.first_join_peers = std::move(first_join);
    r.swarm_size_at_24h = 5;
    return r;
}

PeerObservation obs(std::uint8_t tag, IpAddr addr, std::int64_t at) {
    return PeerObservation{cid(tag), Endpoint{addr, 4000}, at, 0};
}

} // namespace

TEST_CASE("alone exploit fires only for a swarm of exactly one") {
    CHECK(alone_exploit(rec(1, {epo(7)})) == ip(7));
    CHECK_FALSE(alone_exploit(rec(2, {})).has_value());
    CHECK_FALSE(alone_exploit(rec(3, {epo(7), epo(8)})).has_value());

    // Two endpoints count as two peers even on one address.
    CHECK_FALSE(alone_exploit(rec(4, {epo(7, 4000), epo(7, 4001)})).has_value());

    // The crawler's own endpoint never counts.
    const auto self = Endpoint{IpAddr::from_octets(10, 0, 0, 1), 6881};
    CHECK(alone_exploit(rec(5, {self, epo(9)}), self) == ip(9));
    CHECK_FALSE(alone_exploit(rec(6, {self}), self).has_value());
}

TEST_CASE("observation index keeps the earliest sighting per content and ip") {
    ObservationIndex index;
    index.add(obs(1, ip(7), 500));
    index.add(obs(1, ip(7), 300));  // earlier sighting wins
    index.add(obs(1, ip(8), 400));
    index.add(obs(2, ip(7), 900));

    CHECK(index.contents() == 2);
    const auto* one = index.find(cid(1));
    REQUIRE(one != nullptr);
    CHECK(one->size() == 2);
    CHECK(one->at(ip(7)) == 300);
    CHECK(one->at(ip(8)) == 400);
    CHECK(index.find(cid(9)) == nullptr);
}

TEST_CASE("login exploit: majority ip across a login's swarms") {
    std::vector<InjectionRecord> records;
    ObservationIndex index;
    // Login "alpha": 12 contents; ip(1) shows up in 11 of them, a popular
    // leecher ip(2) in 6, scattered others once each.
    for (std::uint8_t i = 0; i < 12; ++i) {
        records.push_back(rec(i, {}, "alpha", 1000 + i * 10));
        if (i != 3) index.add(obs(i, ip(1), 2000 + i));
        if (i % 2 == 0) index.add(obs(i, ip(2), 1500 + i));
        index.add(obs(i, ip(std::uint8_t(50 + i)), 3000));
    }
    // Login "beta": below the content threshold.
    for (std::uint8_t i = 100; i < 105; ++i) {
        records.push_back(rec(i, {}, "beta", 4000));
        index.add(obs(i, ip(9), 4100));
    }

    const auto verdicts = login_exploit(records, index);
    REQUIRE(verdicts.size() == 1);
    const auto& v = verdicts.at("alpha");
    CHECK(v.ip == ip(1));
    CHECK(v.contents_with_ip == 11);
    CHECK(v.contents_total == 12);
    CHECK(v.first_seen == 2000);

    // Lowering the threshold lets beta through too.
    const auto low = login_exploit(records, index, 5);
    CHECK(low.size() == 2);
    CHECK(low.at("beta").ip == ip(9));
    CHECK(low.at("beta").contents_with_ip == 5);
}

TEST_CASE("login exploit tie-breaks by earliest sighting then lowest ip") {
    std::vector<InjectionRecord> records;
    ObservationIndex index;
    for (std::uint8_t i = 0; i < 10; ++i) {
        records.push_back(rec(i, {}, "alpha", 1000));
        index.add(obs(i, ip(5), i == 0 ? 1500 : 2000));  // 10 swarms, first at 1500
        index.add(obs(i, ip(4), 2000));                  // 10 swarms, first at 2000
    }
    const auto tie_time = login_exploit(records, index);
    CHECK(tie_time.at("alpha").ip == ip(5));  // earlier first sighting wins

    ObservationIndex even;
    for (std::uint8_t i = 0; i < 10; ++i) {
        even.add(obs(i, ip(5), 2000));
        even.add(obs(i, ip(4), 2000));
    }
    const auto tie_ip = login_exploit(records, even);
    CHECK(tie_ip.at("alpha").ip == ip(4));  // identical history: lowest ip

    // Permuting the record order changes nothing.
    auto shuffled = records;
    std::reverse(shuffled.begin(), shuffled.end());
    CHECK(login_exploit(shuffled, even).at("alpha").ip == ip(4));
}

TEST_CASE("login exploit ignores sightings outside the listing window") {
    std::vector<InjectionRecord> records;
    ObservationIndex index;
    for (std::uint8_t i = 0; i < 10; ++i) {
        records.push_back(rec(i, {}, "alpha", 1000));
        index.add(obs(i, ip(6), 1000 + kLoginWindow));      // first instant outside
        index.add(obs(i, ip(7), 999 + kLoginWindow));       // last instant inside
    }
    const auto verdicts = login_exploit(records, index);
    REQUIRE(verdicts.contains("alpha"));
    CHECK(verdicts.at("alpha").ip == ip(7));
    CHECK(verdicts.at("alpha").contents_with_ip == 10);
}

TEST_CASE("merge_verdicts: alone wins disagreements and flags them") {
    std::vector<InjectionRecord> records;
    ObservationIndex index;
    // alpha publishes 10 contents from ip(1); the first two also have alone
    // evidence, one agreeing and one (stale swarm data) disagreeing.
    for (std::uint8_t i = 0; i < 10; ++i) {
        std::vector<Endpoint> first;
        if (i == 0) first = {epo(1)};
        if (i == 1) first = {epo(2)};
        records.push_back(rec(i, first, "alpha", 1000));
        index.add(obs(i, ip(1), 1200));
    }
    const auto logins = login_exploit(records, index);
    REQUIRE(logins.contains("alpha"));
    const auto merged = merge_verdicts(records, logins);

    CHECK(merged.total_contents == 10);
    CHECK(merged.verdicts.size() == 10);
    REQUIRE(merged.disagreements.size() == 1);
    CHECK(merged.disagreements[0] == cid(1));

    for (const auto& v : merged.verdicts) {
        REQUIRE(v.provider_ip.has_value());
        REQUIRE(v.login.has_value());
        CHECK(*v.login == "alpha");
        if (v.content == cid(0)) {
            CHECK(v.method == Method::both);
            CHECK(*v.provider_ip == ip(1));
        } else if (v.content == cid(1)) {
            CHECK(v.method == Method::alone);  // direct observation wins
            CHECK(*v.provider_ip == ip(2));
        } else {
            CHECK(v.method == Method::login);
            CHECK(*v.provider_ip == ip(1));
        }
    }
}

TEST_CASE("merge_verdicts covers alone-only contents from unknown logins") {
    std::vector<InjectionRecord> records;
    records.push_back(rec(1, {epo(3)}, "tiny", 1000));
    records.push_back(rec(2, {}, "tiny", 1000));  // nothing fires here
    const auto merged = merge_verdicts(records, {});
    CHECK(merged.total_contents == 2);
    REQUIRE(merged.verdicts.size() == 1);
    CHECK(merged.verdicts[0].content == cid(1));
    CHECK(merged.verdicts[0].method == Method::alone);
    CHECK(merged.verdicts[0].provider_ip == ip(3));
    CHECK(merged.disagreements.empty());
}

TEST_CASE("cross validation counts overlap and agreement") {
    std::unordered_map<ContentId, IpAddr> alone{
        {cid(1), ip(1)}, {cid(2), ip(2)}, {cid(3), ip(3)}};
    std::unordered_map<ContentId, IpAddr> login{
        {cid(2), ip(2)}, {cid(3), ip(9)}, {cid(4), ip(4)}};
    const auto cv = cross_validate(alone, login);
    CHECK(cv.alone_count == 3);
    CHECK(cv.login_count == 3);
    CHECK(cv.overlap == 2);
    CHECK(cv.agreement_count == 1);
    REQUIRE(cv.agreement_fraction.has_value());
    CHECK(*cv.agreement_fraction == doctest::Approx(0.5));

    const auto disjoint = cross_validate(alone, {{cid(9), ip(9)}});
    CHECK(disjoint.overlap == 0);
    CHECK_FALSE(disjoint.agreement_fraction.has_value());  // absent, not 0/0
}

TEST_CASE("alone and login result maps feed cross validation") {
    std::vector<InjectionRecord> records;
    ObservationIndex index;
    for (std::uint8_t i = 0; i < 10; ++i) {
        records.push_back(rec(i, i < 2 ? std::vector<Endpoint>{epo(1)} : std::vector<Endpoint>{},
                              "alpha", 1000));
        index.add(obs(i, ip(1), 1100));
    }
    const auto alone = alone_results(records);
    CHECK(alone.size() == 2);
    const auto logins = login_exploit(records, index);
    const auto login = login_results(records, logins);
    CHECK(login.size() == 10);
    const auto cv = cross_validate(alone, login);
    CHECK(cv.overlap == 2);
    CHECK(cv.agreement_count == 2);
    CHECK(*cv.agreement_fraction == doctest::Approx(1.0));
}

TEST_CASE("multi-login histogram and suspect lists") {
    std::map<std::string, LoginVerdict> logins;
    logins["a"] = LoginVerdict{ip(1), 10, 10, 0};
    logins["b"] = LoginVerdict{ip(1), 10, 10, 0};
    logins["c"] = LoginVerdict{ip(2), 10, 10, 0};
    logins["d"] = LoginVerdict{ip(3), 10, 10, 0};
    logins["e"] = LoginVerdict{ip(3), 10, 10, 0};
    logins["f"] = LoginVerdict{ip(3), 10, 10, 0};
    logins["g"] = LoginVerdict{ip(3), 10, 10, 0};

    const auto stats = multi_login_check(logins);
    CHECK(stats.ips_by_login_count.at(1) == 1);  // ip(2)
    CHECK(stats.ips_by_login_count.at(2) == 1);  // ip(1)
    CHECK(stats.ips_by_login_count.at(4) == 1);  // ip(3)
    REQUIRE(stats.suspects_gt1.size() == 2);
    CHECK(stats.suspects_gt1[0] == ip(1));
    CHECK(stats.suspects_gt1[1] == ip(3));
    REQUIRE(stats.suspects_gt3.size() == 1);
    CHECK(stats.suspects_gt3[0] == ip(3));
}

TEST_CASE("popularity bins partition the records") {
    std::vector<InjectionRecord> records;
    VerdictSet set;
    const auto add = [&](std::uint8_t tag, std::int64_t swarm, std::optional<Method> method) {
        auto r = rec(tag, {}, "box", 1000);
        r.swarm_size_at_24h = swarm;
        records.push_back(r);
        if (method) {
            set.verdicts.push_back(ProviderVerdict{cid(tag), ip(1), *method, std::nullopt});
        }
    };
    add(1, 3, Method::alone);
    add(2, 10, Method::both);      // boundary: <=10 bin, counts as alone
    add(3, 11, Method::login);     // boundary: 11-100 bin
    add(4, 55, std::nullopt);
    add(5, 100, Method::login);
    add(6, 5000, Method::alone);
    set.total_contents = std::int64_t(records.size());

    const auto bins = identification_rate_by_popularity(set, records);
    REQUIRE(bins.size() == 5);

    CHECK(bins[0].label == "<=10");
    CHECK(bins[0].total == 2);
    CHECK(bins[0].alone == 2);
    CHECK(bins[0].login_only == 0);
    CHECK(bins[0].identified == 2);

    CHECK(bins[1].label == "11-100");
    CHECK(bins[1].total == 3);
    CHECK(bins[1].alone == 0);
    CHECK(bins[1].login_only == 2);
    CHECK(bins[1].identified == 2);

    // Nothing fell in 101-1000: reports drop it, the op reports zero.
    CHECK(bins[2].label == "101-1000");
    CHECK(bins[2].total == 0);

    CHECK(bins[3].label == ">1000");
    CHECK(bins[3].lo == 1001);
    CHECK_FALSE(bins[3].hi.has_value());
    CHECK(bins[3].total == 1);
    CHECK(bins[3].alone == 1);

    CHECK(bins[4].label == "all");
    CHECK(bins[4].total == 6);
    CHECK(bins[4].identified == 5);
    CHECK(bins[4].alone == 3);
    CHECK(bins[4].login_only == 2);
    // alone + login_only + unidentified partition every bin.
    for (const auto& b : bins) {
        CHECK(b.alone + b.login_only == b.identified);
        CHECK(b.identified <= b.total);
    }
}

TEST_CASE("provider profiles aggregate volume and rank by contribution") {
    VerdictSet set;
    std::vector<CatalogEntry> catalog;
    // ip(1): 3 contents; ip(2): 1 content. One content lacks catalog data.
    const auto add = [&](std::uint8_t tag, IpAddr provider, std::optional<std::string> login,
                         std::optional<std::int64_t> size) {
        set.verdicts.push_back(
            ProviderVerdict{cid(tag), provider, Method::login, std::move(login)});
        if (size) catalog.push_back(CatalogEntry{cid(tag), "n", *size, 1 << 18});
    };
    add(1, ip(1), "a", 100);
    add(2, ip(1), "b", 200);
    add(3, ip(1), std::nullopt, std::nullopt);
    add(4, ip(2), "c", 1000);
    set.total_contents = 10;

    const auto resolver = [](IpAddr addr) -> std::optional<store::AsInfo> {
        if (addr == ip(1)) return store::AsInfo{64001, "HOSTY", "NL"};
        return std::nullopt;  // ip(2) misses
    };
    const auto prof = provider_profile(set, catalog, resolver);

    CHECK(prof.total_contents == 10);
    CHECK(prof.attributed == 4);
    REQUIRE(prof.profiles.size() == 2);
    CHECK(prof.profiles[0].ip == ip(1));
    CHECK(prof.profiles[0].content_count == 3);
    CHECK(prof.profiles[0].total_volume == 300);
    CHECK(prof.profiles[0].country == "NL");
    CHECK(prof.profiles[0].as_name == "HOSTY");
    CHECK(prof.profiles[0].logins == std::set<std::string>{"a", "b"});
    CHECK(prof.profiles[1].ip == ip(2));
    CHECK(prof.profiles[1].country == "??");      // resolver miss stays marked
    CHECK(prof.profiles[1].as_name == "unknown");

    REQUIRE(prof.cdf.size() == 2);
    CHECK(prof.cdf[0] == doctest::Approx(0.3));
    CHECK(prof.cdf[1] == doctest::Approx(0.4));
}

TEST_CASE("profile ranking breaks count ties by ip") {
    VerdictSet set;
    set.verdicts.push_back(ProviderVerdict{cid(1), ip(9), Method::alone, std::nullopt});
    set.verdicts.push_back(ProviderVerdict{cid(2), ip(2), Method::alone, std::nullopt});
    set.total_contents = 2;
    const auto prof = provider_profile(set, {}, nullptr);
    REQUIRE(prof.profiles.size() == 2);
    CHECK(prof.profiles[0].ip == ip(2));
    CHECK(prof.profiles[1].ip == ip(9));
}
