#include "swarmwatch/downloaders.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <queue>
#include <random>

#include "swarmwatch/store.hpp"

namespace swarmwatch::downloaders {
namespace {

namespace fs = std::filesystem;

void fold_into(IpAggregate& agg, const PeerObservation& o) {
    if (agg.contents.empty() && agg.ports.empty()) {
        agg.ip = o.ep.ip;
        agg.first_seen = o.observed_at;
        agg.last_seen = o.observed_at;
    }
    agg.ports.insert(o.ep.port);
    agg.contents.insert(o.content);
    agg.snapshots_present.insert(o.snapshot_index);
    agg.first_seen = std::min(agg.first_seen, o.observed_at);
    agg.last_seen = std::max(agg.last_seen, o.observed_at);
}

// ---- fixed-width record for the external sort ----

constexpr std::size_t kRawSize = 4 + 2 + 20 + 4 + 8;
constexpr std::size_t kRunRecords = 1u << 20;  // ~40 MB sort buffer

struct RawObs {
    std::uint32_t ip = 0;
    std::uint16_t port = 0;
    std::array<std::uint8_t, 20> content{};
    std::int32_t snapshot = 0;
    std::int64_t at = 0;
};

void pack(const RawObs& r, char* out) {
    std::memcpy(out, &r.ip, 4);
    std::memcpy(out + 4, &r.port, 2);
    std::memcpy(out + 6, r.content.data(), 20);
    std::memcpy(out + 26, &r.snapshot, 4);
    std::memcpy(out + 30, &r.at, 8);
}

RawObs unpack(const char* in) {
    RawObs r;
    std::memcpy(&r.ip, in, 4);
    std::memcpy(&r.port, in + 4, 2);
    std::memcpy(r.content.data(), in + 6, 20);
    std::memcpy(&r.snapshot, in + 26, 4);
    std::memcpy(&r.at, in + 30, 8);
    return r;
}

PeerObservation to_observation(const RawObs& r) {
    PeerObservation o;
    o.content = ContentId::from_bytes(ByteSpan(r.content.data(), r.content.size()));
    o.ep = Endpoint{IpAddr{r.ip}, r.port};
    o.observed_at = r.at;
    o.snapshot_index = r.snapshot;
    return o;
}

/// Buffered reader over one sorted run file.
class RunReader {
public:
    explicit RunReader(const fs::path& file) : in_(file, std::ios::binary) { refill(); }

    [[nodiscard]] bool empty() const { return pos_ >= buf_.size() && done_; }
    [[nodiscard]] RawObs peek() const { return unpack(buf_.data() + pos_); }
    void pop() {
        pos_ += kRawSize;
        if (pos_ >= buf_.size() && !done_) refill();
    }

private:
    void refill() {
        buf_.resize(kRawSize * 4096);
        in_.read(buf_.data(), std::streamsize(buf_.size()));
        buf_.resize(std::size_t(in_.gcount()));
        pos_ = 0;
        done_ = buf_.empty() || in_.eof();
        if (buf_.empty()) done_ = true;
    }

    std::ifstream in_;
    std::vector<char> buf_;
    std::size_t pos_ = 0;
    bool done_ = false;
};

struct TempDir {
    fs::path path;
    explicit TempDir() {
        std::random_device rd;
        path = fs::temp_directory_path() /
               ("swarmwatch-agg-" + std::to_string(std::uint64_t(rd()) << 32 | rd()));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::pair<double, double> least_squares(const std::vector<std::pair<double, double>>& pts) {
    double sx = 0, sy = 0;
    for (const auto& [x, y] : pts) {
        sx += x;
        sy += y;
    }
    const double mx = sx / double(pts.size());
    const double my = sy / double(pts.size());
    double num = 0, den = 0;
    for (const auto& [x, y] : pts) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    const double slope = num / den;
    return {slope, my - slope * mx};
}

} // namespace

void Aggregator::add(const PeerObservation& o) { fold_into(by_ip_[o.ep.ip], o); }

std::vector<IpAggregate> Aggregator::take() {
    std::vector<IpAggregate> out;
    out.reserve(by_ip_.size());
    for (auto& [ip, agg] : by_ip_) out.push_back(std::move(agg));
    by_ip_.clear();
    std::sort(out.begin(), out.end(),
              [](const IpAggregate& a, const IpAggregate& b) { return a.ip < b.ip; });
    return out;
}

std::vector<IpAggregate> aggregate(const std::filesystem::path& campaign) {
    Aggregator agg;
    for (const auto& file : store::snapshot_files(campaign)) {
        store::for_each_observation(file, [&](const PeerObservation& o) { agg.add(o); });
    }
    return agg.take();
}

std::vector<IpAggregate> aggregate_lowmem(const std::filesystem::path& campaign) {
    TempDir tmp;

    // Pass 1: fixed-width records into ip-sorted run files.
    std::vector<fs::path> runs;
    std::vector<RawObs> buf;
    buf.reserve(kRunRecords);
    const auto flush_run = [&] {
        if (buf.empty()) return;
        std::sort(buf.begin(), buf.end(),
                  [](const RawObs& a, const RawObs& b) { return a.ip < b.ip; });
        const auto file = tmp.path / ("run" + std::to_string(runs.size()));
        std::ofstream out(file, std::ios::binary);
        std::vector<char> packed(buf.size() * kRawSize);
        for (std::size_t i = 0; i < buf.size(); ++i) pack(buf[i], packed.data() + i * kRawSize);
        out.write(packed.data(), std::streamsize(packed.size()));
        if (!out) throw store::Error("aggregate: cannot write sort run");
        runs.push_back(file);
        buf.clear();
    };
    for (const auto& file : store::snapshot_files(campaign)) {
        store::for_each_observation(file, [&](const PeerObservation& o) {
            RawObs r;
            r.ip = o.ep.ip.value;
            r.port = o.ep.port;
            const auto bytes = o.content.bytes();
            std::copy(bytes.begin(), bytes.end(), r.content.begin());
            r.snapshot = o.snapshot_index;
            r.at = o.observed_at;
            buf.push_back(r);
            if (buf.size() >= kRunRecords) flush_run();
        });
    }
    flush_run();

    // Pass 2: merge runs by ip, holding one aggregate at a time.
    std::vector<RunReader> readers;
    readers.reserve(runs.size());
    for (const auto& file : runs) readers.emplace_back(file);
    const auto order = [&](std::size_t a, std::size_t b) {
        return readers[a].peek().ip > readers[b].peek().ip;
    };
    std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(order)> heap(order);
    for (std::size_t i = 0; i < readers.size(); ++i) {
        if (!readers[i].empty()) heap.push(i);
    }

    std::vector<IpAggregate> out;
    IpAggregate current;
    bool open = false;
    while (!heap.empty()) {
        const auto i = heap.top();
        heap.pop();
        const auto raw = readers[i].peek();
        readers[i].pop();
        if (!readers[i].empty()) heap.push(i);
        if (open && current.ip.value != raw.ip) {
            out.push_back(std::move(current));
            current = IpAggregate{};
            open = false;
        }
        fold_into(current, to_observation(raw));
        open = true;
    }
    if (open) out.push_back(std::move(current));
    return out;  // merge order is ip-ascending already
}

std::vector<IpAggregate> top_k(const std::vector<IpAggregate>& aggregates, std::size_t k) {
    std::vector<IpAggregate> out(aggregates);
    const auto rank = [](const IpAggregate& a, const IpAggregate& b) {
        if (a.contents.size() != b.contents.size()) return a.contents.size() > b.contents.size();
        return a.ip < b.ip;
    };
    if (k < out.size()) {
        std::partial_sort(out.begin(), out.begin() + std::ptrdiff_t(k), out.end(), rank);
        out.resize(k);
    } else {
        std::sort(out.begin(), out.end(), rank);
    }
    return out;
}

double Baseline::expected(std::int64_t ports) const {
    const double raw = *intercept + *slope * double(ports);
    return std::max(raw, 1.0);
}

Baseline middlebox_baseline(const std::vector<IpAggregate>& aggregates, std::int64_t interval) {
    Baseline out;
    out.interval = interval;
    std::map<std::int64_t, std::pair<std::int64_t, std::int64_t>> acc;  // bucket -> (ips, contents)
    for (const auto& agg : aggregates) {
        const auto ports = std::int64_t(agg.ports.size());
        auto& [ips, contents] = acc[(ports - 1) / interval];
        ++ips;
        contents += std::int64_t(agg.contents.size());
    }
    std::vector<std::pair<double, double>> pts;
    for (const auto& [bucket, ic] : acc) {
        BaselineBucket b;
        b.lo = bucket * interval + 1;
        b.hi = (bucket + 1) * interval;
        b.midpoint = double(b.lo + b.hi) / 2.0;
        b.ips = ic.first;
        b.mean_contents = double(ic.second) / double(ic.first);
        pts.emplace_back(b.midpoint, b.mean_contents);
        out.buckets.push_back(b);
    }
    if (pts.size() >= 2) {
        const auto [slope, intercept] = least_squares(pts);
        out.slope = slope;
        out.intercept = intercept;
    }
    return out;
}

double deviation_score(const IpAggregate& agg, const Baseline& baseline) {
    const double expected = baseline.expected(std::int64_t(agg.ports.size()));
    return (double(agg.contents.size()) - expected) / expected;
}

EvidenceStore EvidenceStore::load(const std::filesystem::path& lists_dir,
                                  const std::vector<ProbeRecord>& probes) {
    EvidenceStore ev;
    const auto read_list = [&](const char* name) -> std::unordered_set<IpAddr> {
        const auto file = lists_dir / name;
        return fs::exists(file) ? store::read_ip_list(file) : std::unordered_set<IpAddr>{};
    };
    ev.http_proxies = read_list("http_proxies.txt");
    ev.socks_proxies = read_list("socks_proxies.txt");
    ev.tor_exits = read_list("tor_exits.txt");
    if (const auto file = lists_dir / "rdns.tsv"; fs::exists(file)) {
        ev.rdns = store::read_rdns(file);
    }
    if (const auto file = lists_dir / "asmap.tsv"; fs::exists(file)) {
        for (const auto& [ip, info] : store::read_asmap(file)) ev.as_numbers.emplace(ip, info.asn);
    }
    if (const auto file = lists_dir / "vpn_keywords.txt"; fs::exists(file)) {
        std::ifstream in(file);
        std::vector<std::string> keywords;
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            keywords.push_back(line);
        }
        if (!keywords.empty()) ev.vpn_keywords_ = std::move(keywords);
    }
    for (const auto& p : probes) ev.probes[p.ep.ip].push_back(p.result);
    return ev;
}

std::optional<Evidence> EvidenceStore::find(IpAddr ip) const {
    Evidence out;
    bool known = false;
    if (http_proxies.contains(ip)) {
        out.proxy_list = ProxyList::http;
        known = true;
    } else if (socks_proxies.contains(ip)) {
        out.proxy_list = ProxyList::socks;
        known = true;
    }
    if (tor_exits.contains(ip)) {
        out.tor_listed = true;
        known = true;
    }
    if (const auto it = rdns.find(ip); it != rdns.end()) {
        out.reverse_dns = it->second;
        known = true;
    }
    if (const auto it = as_numbers.find(ip); it != as_numbers.end()) {
        out.as_number = it->second;
        known = true;
    }
    if (const auto it = probes.find(ip); it != probes.end()) {
        out.probe_outcomes = it->second;
        known = true;
    }
    if (!known) return std::nullopt;
    return out;
}

std::string_view category_name(PlayerCategory c) {
    switch (c) {
        case PlayerCategory::http_proxy: return "http_proxy";
        case PlayerCategory::socks_proxy: return "socks_proxy";
        case PlayerCategory::tor_exit: return "tor_exit";
        case PlayerCategory::monitor: return "monitor";
        case PlayerCategory::vpn: return "vpn";
        case PlayerCategory::big_downloader: return "big_downloader";
        case PlayerCategory::unclassified: return "unclassified";
    }
    return "unclassified";
}

std::optional<PlayerCategory> category_from_name(std::string_view name) {
    for (const auto c :
         {PlayerCategory::http_proxy, PlayerCategory::socks_proxy, PlayerCategory::tor_exit,
          PlayerCategory::monitor, PlayerCategory::vpn, PlayerCategory::big_downloader,
          PlayerCategory::unclassified}) {
        if (category_name(c) == name) return c;
    }
    return std::nullopt;
}

bool dns_has_tor_token(std::string_view name) {
    std::size_t start = 0;
    for (std::size_t i = 0; i <= name.size(); ++i) {
        if (i < name.size() && name[i] != '.' && name[i] != '-' && name[i] != '_') continue;
        const auto token = name.substr(start, i - start);
        if (token.size() == 3 && (token[0] | 0x20) == 't' && (token[1] | 0x20) == 'o' &&
            (token[2] | 0x20) == 'r') {
            return true;
        }
        start = i + 1;
    }
    return false;
}

PlayerCategory ClassificationResult::category_of(IpAddr ip) const {
    for (const auto& [addr, cat] : categories) {
        if (addr == ip) return cat;
    }
    return PlayerCategory::unclassified;
}

ClassificationResult classify_players(const std::vector<IpAggregate>& topk,
                                      const EvidenceStore& evidence, const ClassifyConfig& cfg) {
    struct Behavior {
        bool single_port = false;
        bool served = false;
        bool probed = false;
    };
    std::vector<std::pair<const IpAggregate*, std::optional<Evidence>>> rows;
    rows.reserve(topk.size());
    std::unordered_map<std::uint32_t, int> cluster;  // AS -> single-port never-serving count
    for (const auto& agg : topk) {
        auto ev = evidence.find(agg.ip);
        if (ev && !ev->probe_outcomes.empty()) {
            const bool served = std::any_of(
                ev->probe_outcomes.begin(), ev->probe_outcomes.end(),
                [](probe::ProbeResult r) { return r == probe::ProbeResult::served_piece; });
            if (!served && agg.ports.size() == 1 && ev->as_number) ++cluster[*ev->as_number];
        }
        rows.emplace_back(&agg, std::move(ev));
    }

    const auto has_vpn_keyword = [&](const std::string& name) {
        for (const auto& kw : evidence.vpn_keywords()) {
            if (name.find(kw) != std::string::npos) return true;
        }
        return false;
    };

    ClassificationResult out;
    out.categories.reserve(rows.size());
    for (const auto& [agg, ev] : rows) {
        PlayerCategory cat = PlayerCategory::unclassified;
        if (!ev) {
            out.missing_evidence.push_back(agg->ip);
        } else if (ev->proxy_list == ProxyList::http) {
            cat = PlayerCategory::http_proxy;
        } else if (ev->proxy_list == ProxyList::socks) {
            cat = PlayerCategory::socks_proxy;
        } else if (ev->tor_listed || (ev->reverse_dns && dns_has_tor_token(*ev->reverse_dns))) {
            cat = PlayerCategory::tor_exit;
        } else if (ev->reverse_dns && has_vpn_keyword(*ev->reverse_dns)) {
            cat = PlayerCategory::vpn;
        } else if (ev->probe_outcomes.empty()) {
            // Behavioral rules need probe data we never gathered.
            out.missing_evidence.push_back(agg->ip);
        } else {
            const bool served = std::any_of(
                ev->probe_outcomes.begin(), ev->probe_outcomes.end(),
                [](probe::ProbeResult r) { return r == probe::ProbeResult::served_piece; });
            if (!served && agg->ports.size() == 1 && ev->as_number &&
                cluster[*ev->as_number] >= cfg.as_cluster_min + 1) {
                cat = PlayerCategory::monitor;
            } else if (served && std::int64_t(agg->ports.size()) < cfg.max_bd_ports) {
                cat = PlayerCategory::big_downloader;
            }
        }
        out.categories.emplace_back(agg->ip, cat);
        ++out.counts[cat];
    }
    return out;
}

std::vector<ActivitySeries> activity_timeseries(const std::vector<IpAggregate>& topk_all,
                                                const ClassificationResult& classes,
                                                const std::filesystem::path& campaign,
                                                std::size_t k) {
    std::map<PlayerCategory, std::unordered_set<IpAddr>> members;
    {
        std::unordered_set<IpAddr> in_top;
        in_top.reserve(topk_all.size());
        for (const auto& agg : topk_all) in_top.insert(agg.ip);
        for (const auto& [ip, cat] : classes.categories) {
            if (in_top.contains(ip)) members[cat].insert(ip);
        }
    }

    const auto topk_ips = [&](const std::unordered_map<IpAddr, std::unordered_set<ContentId>>&
                                  counts) {
        std::vector<std::pair<std::size_t, IpAddr>> ranked;
        ranked.reserve(counts.size());
        for (const auto& [ip, contents] : counts) ranked.emplace_back(contents.size(), ip);
        const auto rank = [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        };
        if (k < ranked.size()) {
            std::partial_sort(ranked.begin(), ranked.begin() + std::ptrdiff_t(k), ranked.end(),
                              rank);
            ranked.resize(k);
        }
        std::unordered_set<IpAddr> out;
        out.reserve(ranked.size());
        for (const auto& [n, ip] : ranked) out.insert(ip);
        return out;
    };

    std::map<PlayerCategory, ActivitySeries> series;
    std::unordered_map<IpAddr, std::unordered_set<ContentId>> cumulative;
    const auto files = store::snapshot_files(campaign);
    for (std::size_t s = 0; s < files.size(); ++s) {
        std::unordered_map<IpAddr, std::unordered_set<ContentId>> snap;
        store::for_each_observation(files[s], [&](const PeerObservation& o) {
            snap[o.ep.ip].insert(o.content);
            cumulative[o.ep.ip].insert(o.content);
        });
        const auto inst_top = topk_ips(snap);
        const auto cum_top = topk_ips(cumulative);
        for (const auto& [cat, ips] : members) {
            if (ips.empty()) continue;
            std::size_t inst = 0;
            std::size_t cum = 0;
            for (const auto ip : ips) {
                if (inst_top.contains(ip)) ++inst;
                if (cum_top.contains(ip)) ++cum;
            }
            auto& entry = series[cat];
            entry.category = cat;
            entry.points.push_back(SeriesPoint{std::int32_t(s), double(inst) / double(ips.size()),
                                               double(cum) / double(ips.size())});
        }
    }

    std::vector<ActivitySeries> out;
    out.reserve(series.size());
    for (auto& [cat, entry] : series) out.push_back(std::move(entry));
    return out;
}

} // namespace swarmwatch::downloaders
