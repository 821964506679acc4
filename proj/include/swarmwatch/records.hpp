#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "swarmwatch/content_id.hpp"
#include "swarmwatch/net.hpp"
#include "swarmwatch/peer_probe.hpp"

namespace swarmwatch {

/// One endpoint sighted in one swarm during one snapshot.
struct PeerObservation {
    ContentId content;
    Endpoint ep;
    std::int64_t observed_at = 0;
    std::int32_t snapshot_index = 0;

    bool operator==(const PeerObservation&) const = default;
};

/// Everything learned from watching one injected content for a day.
struct InjectionRecord {
    ContentId content;
    std::string login;
    std::int64_t listed_at = 0;
    std::int64_t first_join_at = 0;
    std::vector<Endpoint> first_join_peers;
    std::int64_t swarm_size_at_24h = 0;
    bool unreachable = false;

    bool operator==(const InjectionRecord&) const = default;
};

/// Metainfo summary kept per injected content.
struct CatalogEntry {
    ContentId content;
    std::string name;
    std::int64_t total_size = 0;
    std::int64_t piece_length = 0;

    bool operator==(const CatalogEntry&) const = default;
};

struct ProbeRecord {
    Endpoint ep;
    ContentId content;
    probe::ProbeResult result = probe::ProbeResult::timeout;
    int elapsed_ms = 0;

    bool operator==(const ProbeRecord&) const = default;
};

[[nodiscard]] std::string_view probe_result_name(probe::ProbeResult r);
[[nodiscard]] std::optional<probe::ProbeResult> probe_result_from_name(std::string_view name);

} // namespace swarmwatch
