#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "swarmwatch/clock.hpp"
#include "swarmwatch/feed.hpp"
#include "swarmwatch/records.hpp"
#include "swarmwatch/tracker_wire.hpp"
#include "swarmwatch/transport.hpp"

namespace swarmwatch::crawler {

struct CampaignConfig {
    std::vector<std::string> tracker_urls;  // announce URLs; first is primary
    std::int64_t start_time = 0;
    int duration_days = 1;
    std::int64_t poll_period = 60;
    std::int64_t snapshot_period = 7200;
    std::int64_t scrape_period = 86400;
    double coverage_target = 0.9;
    std::uint32_t numwant = 200;
    int max_inflight = 64;
    int max_rounds = 200;
    std::int64_t monitor_duration = 86400;
    std::int64_t monitor_period = 600;  // re-announce cadence inside the watch
    std::int64_t inter_round_delay = 0;  // pause between coverage rounds (live: 1 s)
    std::uint16_t listen_port = 6881;
    std::uint64_t seed = 1;  // derives the campaign peer id
    /// Pair every started announce with a stopped one. Always on in real
    /// use; the negative-control test disables it to demonstrate the ban.
    bool pair_stopped = true;

    void validate() const;  // throws std::invalid_argument
    [[nodiscard]] std::int64_t end_time() const {
        return start_time + std::int64_t(duration_days) * 86400;
    }
};

/// One identity per campaign, derived from the seed.
[[nodiscard]] tracker::PeerId campaign_peer_id(std::uint64_t seed);

// ---- injection polling ----

struct FeedState {
    std::unordered_set<ContentId> seen;
};

/// Entries not present in `state`, as stub records, in listing order.
/// Updates the state. FeedError propagates (caller logs and retries).
[[nodiscard]] std::vector<InjectionRecord> poll_new_contents(InjectionFeed& feed, FeedState& state,
                                                             std::int64_t now);

// ---- scrape-all snapshot ----

/// Contents worth crawling: seeds >= 1 AND leechers >= 1, sorted by id.
[[nodiscard]] std::vector<std::pair<ContentId, tracker::SwarmStats>> filter_active(
    const tracker::ScrapeAllResponse& all);

/// Fetches and filters a full scrape. Throws tracker::Error on failure.
[[nodiscard]] std::vector<std::pair<ContentId, tracker::SwarmStats>> scrape_all_snapshot(
    TrackerTransport& transport, const std::string& scrape_url);

// ---- coverage announce rounds ----

struct CoverageResult {
    std::vector<PeerObservation> observations;  // unique endpoints
    std::int32_t rounds_used = 0;
    double coverage_achieved = 0.0;
    bool tracker_failure = false;
    std::string failure_reason;
};

/// Repeated announce(started)/announce(stopped) rounds until the unique
/// endpoint count reaches coverage_target x (seeds+leechers) from `stats`,
/// max_rounds is hit, or two consecutive rounds add nothing. Every started
/// is paired with a stopped (unless the config disables pairing).
[[nodiscard]] CoverageResult coverage_announce_loop(TrackerTransport& transport, Clock& clock,
                                                    const CampaignConfig& cfg,
                                                    const ContentId& content,
                                                    const tracker::SwarmStats& stats,
                                                    std::int32_t snapshot_index);

// ---- 24 h injection watch ----

/// Announce-level view of one watch round; shared by the blocking op and
/// the campaign scheduler.
class MonitorTask {
public:
    MonitorTask(InjectionRecord stub, std::int64_t bytes_left, const CampaignConfig& cfg);

    /// Runs one announce round at `now`. Returns the next round's time, or
    /// nullopt once the record is complete. New endpoints stream to `sink`.
    std::optional<std::int64_t> step(std::int64_t now, TrackerTransport& transport,
                                     const std::function<void(const PeerObservation&)>& sink);

    /// Finalize early (campaign end): freeze the record with the last stats.
    void finish(std::int64_t now);

    [[nodiscard]] const InjectionRecord& record() const { return rec_; }
    [[nodiscard]] bool done() const { return done_; }

private:
    InjectionRecord rec_;
    const CampaignConfig* cfg_;
    std::int64_t left_;
    std::int64_t last_swarm_ = 0;
    std::unordered_set<Endpoint> seen_;
    bool first_round_done_ = false;
    bool done_ = false;
};

/// Blocking form: drives the clock through the whole 24 h watch.
[[nodiscard]] InjectionRecord monitor_new_torrent(
    const InjectionRecord& stub, std::int64_t bytes_left, const CampaignConfig& cfg,
    TrackerTransport& transport, Clock& clock,
    const std::function<void(const PeerObservation&)>& sink = {});

// ---- campaign orchestration ----

struct ContentCoverage {
    ContentId content;
    tracker::SwarmStats stats;
    std::int32_t rounds_used = 0;
    double coverage_achieved = 0.0;
    std::int64_t observations = 0;
    bool tracker_failure = false;
};

struct Snapshot {
    std::int32_t index = 0;
    std::int64_t started_at = 0;
    std::vector<ContentCoverage> contents;
};

struct CampaignResult {
    std::vector<Snapshot> snapshots;
    std::int64_t polls = 0;
    std::int64_t scrapes = 0;
    std::int64_t injections = 0;
    std::int64_t observations = 0;
    std::int64_t feed_errors = 0;
    std::int64_t tracker_failures = 0;
};

/// Runs the three periodic procedures on the supplied clock and persists
/// the campaign directory under `out`: snapshots/, injections.jsonl,
/// monitoring.jsonl, catalog.jsonl, manifest.json.
CampaignResult run_campaign(const CampaignConfig& cfg, Clock& clock, TrackerTransport& transport,
                            InjectionFeed& feed, const std::filesystem::path& out);

} // namespace swarmwatch::crawler
