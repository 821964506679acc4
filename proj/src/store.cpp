#include "swarmwatch/store.hpp"

#include <charconv>
#include <cinttypes>
#include <cstdio>

namespace swarmwatch::store {

namespace {

void ensure_parent(const fs::path& file) {
    auto parent = file.parent_path();
    if (!parent.empty()) fs::create_directories(parent);
}

std::ofstream open_for_write(const fs::path& file) {
    ensure_parent(file);
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open for writing: " + file.string());
    return out;
}

std::ofstream open_for_append(const fs::path& file) {
    ensure_parent(file);
    std::ofstream out(file, std::ios::binary | std::ios::app);
    if (!out) throw Error("cannot open for append: " + file.string());
    return out;
}

std::ifstream open_for_read(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw Error("cannot open: " + file.string());
    return in;
}

/// Fixed-format scanner for the observation fast path. Returns nullopt to
/// fall back to a full JSON parse.
class LineScanner {
public:
    explicit LineScanner(std::string_view s) : s_(s) {}

    bool literal(std::string_view lit) {
        if (s_.substr(pos_, lit.size()) != lit) return false;
        pos_ += lit.size();
        return true;
    }

    template <typename T>
    bool integer(T& out) {
        auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + s_.size(), out);
        if (ec != std::errc()) return false;
        pos_ = static_cast<std::size_t>(ptr - s_.data());
        return true;
    }

    bool until_quote(std::string_view& out) {
        auto end = s_.find('"', pos_);
        if (end == std::string_view::npos) return false;
        out = s_.substr(pos_, end - pos_);
        pos_ = end;
        return true;
    }

    [[nodiscard]] bool done() const { return pos_ == s_.size(); }

private:
    std::string_view s_;
    std::size_t pos_ = 0;
};

nlohmann::json parse_json_line(const std::string& line, const char* what) {
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded()) throw Error(std::string("malformed ") + what + " line: " + line);
    return doc;
}

std::string endpoint_string(Endpoint ep) { return format_endpoint(ep); }

Endpoint parse_endpoint_string(const std::string& s) {
    auto colon = s.rfind(':');
    if (colon == std::string::npos) throw Error("malformed endpoint: " + s);
    auto ip = parse_ip(s.substr(0, colon));
    unsigned port = 0;
    auto [ptr, ec] = std::from_chars(s.data() + colon + 1, s.data() + s.size(), port);
    if (!ip || ec != std::errc() || ptr != s.data() + s.size() || port == 0 || port > 65535)
        throw Error("malformed endpoint: " + s);
    return Endpoint{*ip, static_cast<std::uint16_t>(port)};
}

} // namespace

fs::path snapshot_dir(const fs::path& campaign) { return campaign / "snapshots"; }

fs::path snapshot_file(const fs::path& campaign, std::int32_t index) {
    char name[32];
    std::snprintf(name, sizeof(name), "snap-%06d.jsonl", index);
    return snapshot_dir(campaign) / name;
}

fs::path injections_file(const fs::path& campaign) { return campaign / "injections.jsonl"; }
fs::path monitoring_file(const fs::path& campaign) { return campaign / "monitoring.jsonl"; }
fs::path catalog_file(const fs::path& campaign) { return campaign / "catalog.jsonl"; }
fs::path probes_file(const fs::path& campaign) { return campaign / "probes.tsv"; }
fs::path manifest_file(const fs::path& campaign) { return campaign / "manifest.json"; }
fs::path analysis_dir(const fs::path& campaign) { return campaign / "analysis"; }

std::vector<fs::path> snapshot_files(const fs::path& campaign) {
    std::vector<fs::path> out;
    auto dir = snapshot_dir(campaign);
    if (!fs::exists(dir)) return out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (name.starts_with("snap-") && name.ends_with(".jsonl")) out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string format_observation(const PeerObservation& o) {
    char buf[160];
    int n = std::snprintf(buf, sizeof(buf), "{\"snapshot\":%d,\"content\":\"%s\",\"ip\":\"%s\",\"port\":%u,\"ts\":%lld}",
                          o.snapshot_index, o.content.hex().c_str(), format_ip(o.ep.ip).c_str(), o.ep.port,
                          static_cast<long long>(o.observed_at));
    return std::string(buf, static_cast<std::size_t>(n));
}

std::optional<PeerObservation> parse_observation(std::string_view line) {
    PeerObservation o;
    LineScanner s(line);
    std::string_view hex, ip;
    unsigned port = 0;
    bool ok = s.literal("{\"snapshot\":") && s.integer(o.snapshot_index) && s.literal(",\"content\":\"") &&
              s.until_quote(hex) && s.literal("\",\"ip\":\"") && s.until_quote(ip) && s.literal("\",\"port\":") &&
              s.integer(port) && s.literal(",\"ts\":") && s.integer(o.observed_at) && s.literal("}") && s.done();
    if (ok) {
        auto id = ContentId::from_hex(hex);
        auto addr = parse_ip(ip);
        if (id && addr && port >= 1 && port <= 65535) {
            o.content = *id;
            o.ep = Endpoint{*addr, static_cast<std::uint16_t>(port)};
            return o;
        }
        return std::nullopt;
    }
    // Tolerant fallback: any JSON object with the five fields.
    auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) return std::nullopt;
    try {
        o.snapshot_index = doc.at("snapshot").get<std::int32_t>();
        o.observed_at = doc.at("ts").get<std::int64_t>();
        auto id = ContentId::from_hex(doc.at("content").get<std::string>());
        auto addr = parse_ip(doc.at("ip").get<std::string>());
        auto port64 = doc.at("port").get<std::int64_t>();
        if (!id || !addr || port64 < 1 || port64 > 65535) return std::nullopt;
        o.content = *id;
        o.ep = Endpoint{*addr, static_cast<std::uint16_t>(port64)};
        return o;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
}

void for_each_observation(const fs::path& file, const std::function<void(const PeerObservation&)>& fn) {
    auto in = open_for_read(file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto o = parse_observation(line);
        if (!o) throw Error(file.string() + ":" + std::to_string(lineno) + ": malformed observation");
        fn(*o);
    }
}

SnapshotWriter::SnapshotWriter(const fs::path& campaign, std::int32_t index)
    : tmp_(snapshot_file(campaign, index).string() + ".tmp"), final_(snapshot_file(campaign, index)) {
    out_ = open_for_write(tmp_);
}

SnapshotWriter::~SnapshotWriter() {
    if (!committed_) {
        out_.close();
        std::error_code ec;
        fs::remove(tmp_, ec);
    }
}

void SnapshotWriter::write(const PeerObservation& o) {
    auto line = format_observation(o);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.put('\n');
}

void SnapshotWriter::commit() {
    out_.flush();
    if (!out_) throw Error("write failed: " + tmp_.string());
    out_.close();
    fs::rename(tmp_, final_);
    committed_ = true;
}

ObservationAppender::ObservationAppender(const fs::path& file) : out_(open_for_append(file)) {}

void ObservationAppender::write(const PeerObservation& o) {
    auto line = format_observation(o);
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    out_.put('\n');
}

void ObservationAppender::flush() { out_.flush(); }

std::string format_injection(const InjectionRecord& r) {
    nlohmann::json doc;
    doc["content"] = r.content.hex();
    doc["login"] = r.login;
    doc["listed_at"] = r.listed_at;
    doc["first_join_at"] = r.first_join_at;
    nlohmann::json peers = nlohmann::json::array();
    for (auto ep : r.first_join_peers) peers.push_back(endpoint_string(ep));
    doc["first_join_peers"] = std::move(peers);
    doc["swarm_size_at_24h"] = r.swarm_size_at_24h;
    doc["unreachable"] = r.unreachable;
    return doc.dump();
}

InjectionRecord parse_injection(const std::string& line) {
    auto doc = parse_json_line(line, "injection");
    InjectionRecord r;
    auto id = ContentId::from_hex(doc.at("content").get<std::string>());
    if (!id) throw Error("malformed content id in injection line");
    r.content = *id;
    r.login = doc.at("login").get<std::string>();
    r.listed_at = doc.at("listed_at").get<std::int64_t>();
    r.first_join_at = doc.at("first_join_at").get<std::int64_t>();
    for (const auto& p : doc.at("first_join_peers")) r.first_join_peers.push_back(parse_endpoint_string(p.get<std::string>()));
    r.swarm_size_at_24h = doc.at("swarm_size_at_24h").get<std::int64_t>();
    r.unreachable = doc.value("unreachable", false);
    return r;
}

void append_injection(const fs::path& file, const InjectionRecord& r) {
    auto out = open_for_append(file);
    out << format_injection(r) << '\n';
}

std::vector<InjectionRecord> read_injections(const fs::path& file) {
    std::vector<InjectionRecord> out;
    auto in = open_for_read(file);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(parse_injection(line));
    return out;
}

std::string format_catalog_entry(const CatalogEntry& e) {
    nlohmann::json doc;
    doc["content"] = e.content.hex();
    doc["name"] = e.name;
    doc["total_size"] = e.total_size;
    doc["piece_length"] = e.piece_length;
    return doc.dump();
}

CatalogEntry parse_catalog_entry(const std::string& line) {
    auto doc = parse_json_line(line, "catalog");
    CatalogEntry e;
    auto id = ContentId::from_hex(doc.at("content").get<std::string>());
    if (!id) throw Error("malformed content id in catalog line");
    e.content = *id;
    e.name = doc.at("name").get<std::string>();
    e.total_size = doc.at("total_size").get<std::int64_t>();
    e.piece_length = doc.at("piece_length").get<std::int64_t>();
    return e;
}

void append_catalog_entry(const fs::path& file, const CatalogEntry& e) {
    auto out = open_for_append(file);
    out << format_catalog_entry(e) << '\n';
}

std::vector<CatalogEntry> read_catalog(const fs::path& file) {
    std::vector<CatalogEntry> out;
    auto in = open_for_read(file);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) out.push_back(parse_catalog_entry(line));
    return out;
}

void write_probes(const fs::path& file, const std::vector<ProbeRecord>& probes) {
    auto tmp = fs::path(file.string() + ".tmp");
    {
        auto out = open_for_write(tmp);
        out << "ip\tport\tcontent\tresult\telapsed_ms\n";
        for (const auto& p : probes) {
            out << format_ip(p.ep.ip) << '\t' << p.ep.port << '\t' << p.content.hex() << '\t'
                << probe_result_name(p.result) << '\t' << p.elapsed_ms << '\n';
        }
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, file);
}

std::vector<ProbeRecord> read_probes(const fs::path& file) {
    std::vector<ProbeRecord> out;
    auto in = open_for_read(file);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || (lineno == 1 && line.starts_with("ip\t"))) continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (cols.size() != 5) throw Error(file.string() + ":" + std::to_string(lineno) + ": malformed probe line");
        ProbeRecord p;
        auto ip = parse_ip(cols[0]);
        auto id = ContentId::from_hex(cols[2]);
        auto result = probe_result_from_name(cols[3]);
        if (!ip || !id || !result) throw Error(file.string() + ":" + std::to_string(lineno) + ": malformed probe line");
        p.ep.ip = *ip;
        p.ep.port = static_cast<std::uint16_t>(std::stoul(cols[1]));
        p.content = *id;
        p.result = *result;
        p.elapsed_ms = std::stoi(cols[4]);
        out.push_back(p);
    }
    return out;
}

void write_json(const fs::path& file, const nlohmann::json& doc) {
    auto tmp = fs::path(file.string() + ".tmp");
    {
        auto out = open_for_write(tmp);
        out << doc.dump(2) << '\n';
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    fs::rename(tmp, file);
}

nlohmann::json read_json(const fs::path& file) {
    auto in = open_for_read(file);
    auto doc = nlohmann::json::parse(in, nullptr, false);
    if (doc.is_discarded()) throw Error("malformed JSON: " + file.string());
    return doc;
}

std::unordered_set<IpAddr> read_ip_list(const fs::path& file) {
    std::unordered_set<IpAddr> out;
    auto in = open_for_read(file);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (auto ip = parse_ip(line)) out.insert(*ip);
    }
    return out;
}

std::unordered_map<IpAddr, std::string> read_rdns(const fs::path& file) {
    std::unordered_map<IpAddr, std::string> out;
    auto in = open_for_read(file);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) continue;
        if (auto ip = parse_ip(line.substr(0, tab))) out.emplace(*ip, line.substr(tab + 1));
    }
    return out;
}

std::unordered_map<IpAddr, AsInfo> read_asmap(const fs::path& file) {
    std::unordered_map<IpAddr, AsInfo> out;
    auto in = open_for_read(file);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cols;
        std::size_t start = 0;
        while (true) {
            auto tab = line.find('\t', start);
            cols.push_back(line.substr(start, tab - start));
            if (tab == std::string::npos) break;
            start = tab + 1;
        }
        if (cols.size() < 4) continue;
        auto ip = parse_ip(cols[0]);
        if (!ip) continue;
        AsInfo info;
        info.asn = static_cast<std::uint32_t>(std::stoul(cols[1]));
        info.as_name = cols[2];
        info.country = cols[3];
        out.emplace(*ip, std::move(info));
    }
    return out;
}

void write_ip_list(const fs::path& file, const std::vector<IpAddr>& ips) {
    auto out = open_for_write(file);
    for (auto ip : ips) out << format_ip(ip) << '\n';
}

void write_rdns(const fs::path& file, const std::vector<std::pair<IpAddr, std::string>>& entries) {
    auto out = open_for_write(file);
    for (const auto& [ip, name] : entries) out << format_ip(ip) << '\t' << name << '\n';
}

void write_asmap(const fs::path& file, const std::vector<std::pair<IpAddr, AsInfo>>& entries) {
    auto out = open_for_write(file);
    for (const auto& [ip, info] : entries)
        out << format_ip(ip) << '\t' << info.asn << '\t' << info.as_name << '\t' << info.country << '\n';
}

} // namespace swarmwatch::store

namespace swarmwatch {

std::string_view probe_result_name(probe::ProbeResult r) {
    switch (r) {
        case probe::ProbeResult::served_piece: return "served_piece";
        case probe::ProbeResult::handshake_only: return "handshake_only";
        case probe::ProbeResult::refused: return "refused";
        case probe::ProbeResult::timeout: return "timeout";
    }
    return "unknown";
}

std::optional<probe::ProbeResult> probe_result_from_name(std::string_view name) {
    if (name == "served_piece") return probe::ProbeResult::served_piece;
    if (name == "handshake_only") return probe::ProbeResult::handshake_only;
    if (name == "refused") return probe::ProbeResult::refused;
    if (name == "timeout") return probe::ProbeResult::timeout;
    return std::nullopt;
}

} // namespace swarmwatch
