#pragma once

#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "nlohmann/json.hpp"
#include "swarmwatch/records.hpp"

namespace swarmwatch::store {

namespace fs = std::filesystem;

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// ---- campaign directory layout ----

[[nodiscard]] fs::path snapshot_dir(const fs::path& campaign);
[[nodiscard]] fs::path snapshot_file(const fs::path& campaign, std::int32_t index);
[[nodiscard]] fs::path injections_file(const fs::path& campaign);
[[nodiscard]] fs::path monitoring_file(const fs::path& campaign);
[[nodiscard]] fs::path catalog_file(const fs::path& campaign);
[[nodiscard]] fs::path probes_file(const fs::path& campaign);
[[nodiscard]] fs::path manifest_file(const fs::path& campaign);
[[nodiscard]] fs::path analysis_dir(const fs::path& campaign);

/// Snapshot files present, sorted by index.
[[nodiscard]] std::vector<fs::path> snapshot_files(const fs::path& campaign);

// ---- observation log (JSON lines, one sighting per line) ----

[[nodiscard]] std::string format_observation(const PeerObservation& o);
[[nodiscard]] std::optional<PeerObservation> parse_observation(std::string_view line);

/// Streams every observation in the file to `fn`; malformed lines throw.
void for_each_observation(const fs::path& file, const std::function<void(const PeerObservation&)>& fn);

/// Writes a whole snapshot through a temp file and renames on close, so a
/// crashed run never leaves a half-written snapshot behind.
class SnapshotWriter {
public:
    SnapshotWriter(const fs::path& campaign, std::int32_t index);
    ~SnapshotWriter();
    SnapshotWriter(const SnapshotWriter&) = delete;
    SnapshotWriter& operator=(const SnapshotWriter&) = delete;

    void write(const PeerObservation& o);
    void commit();

private:
    fs::path tmp_;
    fs::path final_;
    std::ofstream out_;
    bool committed_ = false;
};

/// Append-mode observation log (the 24 h injection-monitoring stream).
class ObservationAppender {
public:
    explicit ObservationAppender(const fs::path& file);
    void write(const PeerObservation& o);
    void flush();

private:
    std::ofstream out_;
};

// ---- injection records / catalog (JSON lines) ----

[[nodiscard]] std::string format_injection(const InjectionRecord& r);
[[nodiscard]] InjectionRecord parse_injection(const std::string& line);
void append_injection(const fs::path& file, const InjectionRecord& r);
[[nodiscard]] std::vector<InjectionRecord> read_injections(const fs::path& file);

[[nodiscard]] std::string format_catalog_entry(const CatalogEntry& e);
[[nodiscard]] CatalogEntry parse_catalog_entry(const std::string& line);
void append_catalog_entry(const fs::path& file, const CatalogEntry& e);
[[nodiscard]] std::vector<CatalogEntry> read_catalog(const fs::path& file);

// ---- probe evidence (TSV: ip, port, content, result, elapsed_ms) ----

void write_probes(const fs::path& file, const std::vector<ProbeRecord>& probes);
[[nodiscard]] std::vector<ProbeRecord> read_probes(const fs::path& file);

// ---- JSON documents (manifest, ground truth, world config) ----

/// Atomic write; 2-space indent, sorted keys, trailing newline.
void write_json(const fs::path& file, const nlohmann::json& doc);
[[nodiscard]] nlohmann::json read_json(const fs::path& file);

// ---- evidence fixtures (proxy/tor lists, reverse DNS, AS map) ----

struct AsInfo {
    std::uint32_t asn = 0;
    std::string as_name;
    std::string country;
};

[[nodiscard]] std::unordered_set<IpAddr> read_ip_list(const fs::path& file);
[[nodiscard]] std::unordered_map<IpAddr, std::string> read_rdns(const fs::path& file);
[[nodiscard]] std::unordered_map<IpAddr, AsInfo> read_asmap(const fs::path& file);

void write_ip_list(const fs::path& file, const std::vector<IpAddr>& ips);
void write_rdns(const fs::path& file, const std::vector<std::pair<IpAddr, std::string>>& entries);
void write_asmap(const fs::path& file, const std::vector<std::pair<IpAddr, AsInfo>>& entries);

} // namespace swarmwatch::store
