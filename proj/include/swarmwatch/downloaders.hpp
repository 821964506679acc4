#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "swarmwatch/content_id.hpp"
#include "swarmwatch/net.hpp"
#include "swarmwatch/peer_probe.hpp"
#include "swarmwatch/records.hpp"

namespace swarmwatch::downloaders {

// ---- aggregation ----

struct IpAggregate {
    IpAddr ip;
    std::set<std::uint16_t> ports;
    std::set<ContentId> contents;
    std::set<std::int32_t> snapshots_present;
    std::int64_t first_seen = 0;
    std::int64_t last_seen = 0;
};

/// Exact distinct counts, built by streaming observations through add().
class Aggregator {
public:
    void add(const PeerObservation& o);

    /// All aggregates, sorted by ip. Leaves the aggregator empty.
    [[nodiscard]] std::vector<IpAggregate> take();

private:
    std::unordered_map<IpAddr, IpAggregate> by_ip_;
};

/// Streams every snapshot file of the campaign through an Aggregator.
[[nodiscard]] std::vector<IpAggregate> aggregate(const std::filesystem::path& campaign);

/// Two-pass sort-merge variant holding one IP's state at a time; for logs
/// too large for per-IP hash sets. Same output as aggregate().
[[nodiscard]] std::vector<IpAggregate> aggregate_lowmem(const std::filesystem::path& campaign);

/// Top k by |contents| descending, ties by ip ascending. k beyond the
/// population returns everyone.
[[nodiscard]] std::vector<IpAggregate> top_k(const std::vector<IpAggregate>& aggregates,
                                             std::size_t k);

// ---- middlebox baseline (Fig. 4 shape) ----

struct BaselineBucket {
    std::int64_t lo = 0;  // port-count interval, inclusive
    std::int64_t hi = 0;
    double midpoint = 0.0;
    std::int64_t ips = 0;
    double mean_contents = 0.0;
};

struct Baseline {
    std::int64_t interval = 2000;
    std::vector<BaselineBucket> buckets;  // occupied buckets only
    std::optional<double> slope;          // absent with fewer than two buckets
    std::optional<double> intercept;

    [[nodiscard]] double expected(std::int64_t ports) const;  // clamped below at 1
};

[[nodiscard]] Baseline middlebox_baseline(const std::vector<IpAggregate>& aggregates,
                                          std::int64_t interval = 2000);

/// (contents - expected(ports)) / expected(ports). Requires a fitted slope.
[[nodiscard]] double deviation_score(const IpAggregate& agg, const Baseline& baseline);

// ---- evidence + classification (Fig. 5 / §4.2 shape) ----

enum class ProxyList { none, http, socks };

struct Evidence {
    ProxyList proxy_list = ProxyList::none;
    std::optional<std::string> reverse_dns;
    bool tor_listed = false;
    std::vector<probe::ProbeResult> probe_outcomes;
    std::optional<std::uint32_t> as_number;
};

inline const std::vector<std::string> kDefaultVpnKeywords = {
    "itshidden", "cyberghostvpn", "peer2me", "ipredate", "mullvad", "perfect-privacy",
};

/// Fixture-backed evidence: proxy/tor IP lists, a reverse-DNS map, an AS
/// map, and the probe log. An IP with no probe record counts as missing.
class EvidenceStore {
public:
    /// Reads http_proxies.txt, socks_proxies.txt, tor_exits.txt, rdns.tsv,
    /// asmap.tsv, and vpn_keywords.txt from `lists_dir` (absent files are
    /// treated as empty; absent keyword file falls back to the defaults).
    [[nodiscard]] static EvidenceStore load(const std::filesystem::path& lists_dir,
                                            const std::vector<ProbeRecord>& probes);

    [[nodiscard]] std::optional<Evidence> find(IpAddr ip) const;
    [[nodiscard]] const std::vector<std::string>& vpn_keywords() const { return vpn_keywords_; }

    std::unordered_set<IpAddr> http_proxies;
    std::unordered_set<IpAddr> socks_proxies;
    std::unordered_set<IpAddr> tor_exits;
    std::unordered_map<IpAddr, std::string> rdns;
    std::unordered_map<IpAddr, std::uint32_t> as_numbers;
    std::unordered_map<IpAddr, std::vector<probe::ProbeResult>> probes;

private:
    std::vector<std::string> vpn_keywords_ = kDefaultVpnKeywords;
};

enum class PlayerCategory {
    http_proxy,
    socks_proxy,
    tor_exit,
    monitor,
    vpn,
    big_downloader,
    unclassified,
};

[[nodiscard]] std::string_view category_name(PlayerCategory c);
[[nodiscard]] std::optional<PlayerCategory> category_from_name(std::string_view name);

/// True when some dot/dash/underscore-delimited label of the name equals
/// "tor" ("monitor42.example" must not match).
[[nodiscard]] bool dns_has_tor_token(std::string_view name);

struct ClassifyConfig {
    int max_bd_ports = 10;    // big downloaders use fewer than this many ports
    int as_cluster_min = 20;  // other single-port never-serving IPs in the AS
};

struct ClassificationResult {
    std::vector<std::pair<IpAddr, PlayerCategory>> categories;  // top-K order
    std::vector<IpAddr> missing_evidence;                       // left unclassified
    std::map<PlayerCategory, std::int64_t> counts;

    [[nodiscard]] PlayerCategory category_of(IpAddr ip) const;
};

[[nodiscard]] ClassificationResult classify_players(const std::vector<IpAggregate>& topk,
                                                    const EvidenceStore& evidence,
                                                    const ClassifyConfig& cfg = {});

// ---- per-category activity across snapshots (Fig. 6 shape) ----

struct SeriesPoint {
    std::int32_t snapshot = 0;
    double instantaneous = 0.0;  // top-K of this snapshot alone (dashed)
    double cumulative = 0.0;     // top-K of snapshots 0..s (solid)
};

struct ActivitySeries {
    PlayerCategory category = PlayerCategory::unclassified;
    std::vector<SeriesPoint> points;
};

/// For each category with members in the all-snapshot top-K: the fraction
/// of those members present in the top-K of each snapshot (and of each
/// cumulative prefix). Empty categories are omitted.
[[nodiscard]] std::vector<ActivitySeries> activity_timeseries(
    const std::vector<IpAggregate>& topk_all, const ClassificationResult& classes,
    const std::filesystem::path& campaign, std::size_t k);

} // namespace swarmwatch::downloaders
