#include "swarmwatch/crawler.hpp"

#include <algorithm>
#include <queue>
#include <stdexcept>

#include "swarmwatch/metainfo.hpp"
#include "swarmwatch/rng.hpp"
#include "swarmwatch/store.hpp"

namespace swarmwatch::crawler {
namespace {

using tracker::AnnounceEvent;
using tracker::AnnounceRequest;
using tracker::AnnounceResponse;

std::string with_query(const std::string& url, const std::string& query) {
    return url + (url.find('?') == std::string::npos ? "?" : "&") + query;
}

AnnounceResponse do_announce(TrackerTransport& transport, const CampaignConfig& cfg,
                             const ContentId& content, AnnounceEvent event, std::uint32_t numwant,
                             std::int64_t left) {
    AnnounceRequest req;
    req.content = content;
    req.peer_id = campaign_peer_id(cfg.seed);
    req.listen_port = cfg.listen_port;
    req.event = event;
    req.numwant = numwant;
    req.left = left;
    const auto res = transport.get(with_query(cfg.tracker_urls.front(), tracker::build_announce_query(req)));
    if (!res.ok()) {
        throw tracker::Error(tracker::Error::Kind::failure,
                             res.error.empty() ? "http status " + std::to_string(res.status)
                                               : res.error);
    }
    return tracker::parse_announce_response(ByteSpan(res.body.data(), res.body.size()));
}

/// Best-effort stopped announce; a failure here leaves an expiring session
/// behind, which is the most the protocol lets us do.
void try_stop(TrackerTransport& transport, const CampaignConfig& cfg, const ContentId& content,
              std::int64_t left) {
    if (!cfg.pair_stopped) return;
    try {
        (void)do_announce(transport, cfg, content, AnnounceEvent::stopped, 0, left);
    } catch (const tracker::Error&) {
    }
}

std::vector<FeedItem> poll_new_items(InjectionFeed& feed, FeedState& state, std::int64_t now) {
    std::vector<FeedItem> fresh;
    for (auto& item : feed.list(now)) {
        if (state.seen.contains(item.content)) continue;
        state.seen.insert(item.content);
        fresh.push_back(std::move(item));
    }
    return fresh;
}

} // namespace

void CampaignConfig::validate() const {
    if (tracker_urls.empty()) throw std::invalid_argument("campaign: no tracker url");
    if (duration_days < 1) throw std::invalid_argument("campaign: duration_days must be >= 1");
    if (poll_period <= 0 || snapshot_period <= 0 || scrape_period <= 0 || monitor_period <= 0) {
        throw std::invalid_argument("campaign: periods must be > 0");
    }
    if (coverage_target <= 0.0 || coverage_target > 1.0) {
        throw std::invalid_argument("campaign: coverage_target must be in (0, 1]");
    }
    if (numwant > 1000) throw std::invalid_argument("campaign: numwant must be at most 1000");
    if (max_inflight < 1) throw std::invalid_argument("campaign: max_inflight must be >= 1");
    if (max_rounds < 1) throw std::invalid_argument("campaign: max_rounds must be >= 1");
    if (monitor_duration <= 0) throw std::invalid_argument("campaign: monitor_duration must be > 0");
    if (inter_round_delay < 0) throw std::invalid_argument("campaign: inter_round_delay must be >= 0");
    if (listen_port == 0) throw std::invalid_argument("campaign: listen_port must be 1-65535");
}

tracker::PeerId campaign_peer_id(std::uint64_t seed) {
    static constexpr std::string_view prefix = "-SW0100-";
    static constexpr std::string_view alphabet = "abcdefghijklmnopqrstuvwxyz0123456789";
    tracker::PeerId id{};
    std::copy(prefix.begin(), prefix.end(), id.begin());
    Rng rng(seed);
    for (std::size_t i = prefix.size(); i < id.size(); ++i) {
        id[i] = std::uint8_t(alphabet[rng.below(alphabet.size())]);
    }
    return id;
}

std::vector<InjectionRecord> poll_new_contents(InjectionFeed& feed, FeedState& state,
                                               std::int64_t now) {
    std::vector<InjectionRecord> stubs;
    for (const auto& item : poll_new_items(feed, state, now)) {
        InjectionRecord rec;
        rec.content = item.content;
        rec.login = item.login;
        rec.listed_at = item.listed_at;
        stubs.push_back(std::move(rec));
    }
    return stubs;
}

std::vector<std::pair<ContentId, tracker::SwarmStats>> filter_active(
    const tracker::ScrapeAllResponse& all) {
    std::vector<std::pair<ContentId, tracker::SwarmStats>> out;
    out.reserve(all.entries.size());
    for (const auto& [id, stats] : all.entries) {
        if (stats.seeds >= 1 && stats.leechers >= 1) out.emplace_back(id, stats);
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

std::vector<std::pair<ContentId, tracker::SwarmStats>> scrape_all_snapshot(
    TrackerTransport& transport, const std::string& scrape_url) {
    const auto res = transport.get(scrape_url);
    if (!res.ok()) {
        throw tracker::Error(tracker::Error::Kind::failure,
                             res.error.empty() ? "http status " + std::to_string(res.status)
                                               : res.error);
    }
    return filter_active(tracker::parse_scrape_all(ByteSpan(res.body.data(), res.body.size())));
}

CoverageResult coverage_announce_loop(TrackerTransport& transport, Clock& clock,
                                      const CampaignConfig& cfg, const ContentId& content,
                                      const tracker::SwarmStats& stats,
                                      std::int32_t snapshot_index) {
    CoverageResult out;
    const auto denom = stats.seeds + stats.leechers;
    if (denom <= 0) return out;

    // Coverage probes present as a fresh leecher each round.
    constexpr std::int64_t kLeft = 1;
    std::unordered_set<Endpoint> uniq;
    int zero_rounds = 0;
    while (out.rounds_used < cfg.max_rounds) {
        ++out.rounds_used;
        AnnounceResponse resp;
        try {
            resp = do_announce(transport, cfg, content, AnnounceEvent::started, cfg.numwant, kLeft);
        } catch (const tracker::Error& e) {
            if (e.kind() != tracker::Error::Kind::failure) {
                // The request went through but the body was unusable; the
                // tracker may hold a session for us.
                try_stop(transport, cfg, content, kLeft);
            }
            out.tracker_failure = true;
            out.failure_reason = e.what();
            break;
        }
        std::size_t added = 0;
        for (const auto ep : resp.peers) {
            if (!uniq.insert(ep).second) continue;
            ++added;
            out.observations.push_back(PeerObservation{content, ep, clock.now(), snapshot_index});
        }
        try_stop(transport, cfg, content, kLeft);
        if (double(uniq.size()) >= cfg.coverage_target * double(denom)) break;
        if (added == 0) {
            if (++zero_rounds >= 2) break;
        } else {
            zero_rounds = 0;
        }
        if (cfg.inter_round_delay > 0) clock.sleep_until(clock.now() + cfg.inter_round_delay);
    }
    out.coverage_achieved = double(uniq.size()) / double(denom);
    return out;
}

MonitorTask::MonitorTask(InjectionRecord stub, std::int64_t bytes_left, const CampaignConfig& cfg)
    : rec_(std::move(stub)), cfg_(&cfg), left_(std::max<std::int64_t>(bytes_left, 1)) {}

std::optional<std::int64_t> MonitorTask::step(
    std::int64_t now, TrackerTransport& transport,
    const std::function<void(const PeerObservation&)>& sink) {
    if (done_) return std::nullopt;
    AnnounceResponse resp;
    try {
        resp = do_announce(transport, *cfg_, rec_.content, AnnounceEvent::started, cfg_->numwant,
                           left_);
    } catch (const tracker::Error& e) {
        if (e.kind() != tracker::Error::Kind::failure) {
            try_stop(transport, *cfg_, rec_.content, left_);
        }
        if (!first_round_done_) {
            rec_.first_join_at = now;
            rec_.unreachable = true;
            rec_.swarm_size_at_24h = 0;
            done_ = true;
        } else {
            finish(now);
        }
        return std::nullopt;
    }
    last_swarm_ = resp.seeds + resp.leechers;
    for (const auto ep : resp.peers) {
        if (seen_.insert(ep).second && sink) {
            sink(PeerObservation{rec_.content, ep, now, -1});
        }
    }
    if (!first_round_done_) {
        first_round_done_ = true;
        rec_.first_join_at = now;
        rec_.first_join_peers = resp.peers;
    }
    try_stop(transport, *cfg_, rec_.content, left_);
    if (now >= rec_.first_join_at + cfg_->monitor_duration) {
        rec_.swarm_size_at_24h = last_swarm_;
        done_ = true;
        return std::nullopt;
    }
    return now + cfg_->monitor_period;
}

void MonitorTask::finish(std::int64_t now) {
    (void)now;
    if (done_) return;
    rec_.swarm_size_at_24h = last_swarm_;
    done_ = true;
}

InjectionRecord monitor_new_torrent(const InjectionRecord& stub, std::int64_t bytes_left,
                                    const CampaignConfig& cfg, TrackerTransport& transport,
                                    Clock& clock,
                                    const std::function<void(const PeerObservation&)>& sink) {
    MonitorTask task(stub, bytes_left, cfg);
    auto next = task.step(clock.now(), transport, sink);
    while (next) {
        clock.sleep_until(*next);
        next = task.step(clock.now(), transport, sink);
    }
    return task.record();
}

CampaignResult run_campaign(const CampaignConfig& cfg, Clock& clock, TrackerTransport& transport,
                            InjectionFeed& feed, const std::filesystem::path& out) {
    cfg.validate();
    const auto scrape_url = scrape_url_from_announce(cfg.tracker_urls.front());
    if (!scrape_url) {
        throw std::invalid_argument("campaign: tracker url has no announce segment: " +
                                    cfg.tracker_urls.front());
    }
    const auto end = cfg.end_time();
    std::filesystem::create_directories(store::snapshot_dir(out));

    CampaignResult result;
    store::ObservationAppender monitoring(store::monitoring_file(out));
    const auto monitor_sink = [&](const PeerObservation& o) { monitoring.write(o); };

    FeedState state;
    std::vector<MonitorTask> monitors;
    std::vector<std::size_t> unfinished;  // monitor indices past campaign end

    enum Prio : int { kPoll = 0, kMonitor = 1, kSnapshot = 2, kScrape = 3 };
    struct Task {
        std::int64_t ts;
        int prio;
        std::uint64_t seq;
        std::int32_t payload;
    };
    const auto later = [](const Task& a, const Task& b) {
        return std::tie(a.ts, a.prio, a.seq) > std::tie(b.ts, b.prio, b.seq);
    };
    std::priority_queue<Task, std::vector<Task>, decltype(later)> tasks(later);
    std::uint64_t seq = 0;
    const auto push = [&](std::int64_t ts, int prio, std::int32_t payload) {
        if (ts < end) tasks.push(Task{ts, prio, seq++, payload});
    };
    push(cfg.start_time, kPoll, 0);
    push(cfg.start_time, kSnapshot, 0);
    push(cfg.start_time, kScrape, 0);

    nlohmann::json snapshot_summaries = nlohmann::json::array();
    nlohmann::json scrape_summaries = nlohmann::json::array();

    const auto write_record = [&](const InjectionRecord& rec) {
        store::append_injection(store::injections_file(out), rec);
    };

    const auto run_monitor_step = [&](std::size_t idx, std::int64_t now) {
        auto& task = monitors[idx];
        const auto next = task.step(now, transport, monitor_sink);
        if (!next) {
            if (task.record().unreachable) ++result.tracker_failures;
            write_record(task.record());
        } else if (*next < end) {
            push(*next, kMonitor, std::int32_t(idx));
        } else {
            unfinished.push_back(idx);
        }
    };

    while (!tasks.empty()) {
        const auto task = tasks.top();
        tasks.pop();
        clock.sleep_until(task.ts);
        const auto now = clock.now();
        switch (task.prio) {
            case kPoll: {
                ++result.polls;
                std::vector<FeedItem> fresh;
                try {
                    fresh = poll_new_items(feed, state, now);
                } catch (const FeedError&) {
                    ++result.feed_errors;
                }
                for (const auto& item : fresh) {
                    ++result.injections;
                    InjectionRecord stub;
                    stub.content = item.content;
                    stub.login = item.login;
                    stub.listed_at = item.listed_at;
                    const auto torrent = feed.fetch_torrent(item);
                    std::int64_t left = 1;
                    bool usable = false;
                    if (torrent) {
                        try {
                            const auto m = meta::parse_torrent(ByteSpan(torrent->data(), torrent->size()));
                            CatalogEntry entry{item.content, m.content_name, m.total_size,
                                               m.piece_length};
                            store::append_catalog_entry(store::catalog_file(out), entry);
                            left = std::max<std::int64_t>(m.total_size, 1);
                            usable = true;
                        } catch (const meta::Error&) {
                        }
                    }
                    if (!usable) {
                        stub.first_join_at = now;
                        stub.unreachable = true;
                        ++result.tracker_failures;
                        write_record(stub);
                        continue;
                    }
                    monitors.emplace_back(std::move(stub), left, cfg);
                    run_monitor_step(monitors.size() - 1, now);
                }
                push(now + cfg.poll_period, kPoll, 0);
                break;
            }
            case kMonitor:
                run_monitor_step(std::size_t(task.payload), now);
                break;
            case kSnapshot: {
                Snapshot snap;
                snap.index = task.payload;
                snap.started_at = now;
                std::vector<std::pair<ContentId, tracker::SwarmStats>> actives;
                try {
                    actives = scrape_all_snapshot(transport, *scrape_url);
                } catch (const tracker::Error&) {
                    ++result.tracker_failures;
                }
                store::SnapshotWriter writer(out, task.payload);
                std::int64_t snap_obs = 0;
                std::int64_t snap_rounds = 0;
                double coverage_sum = 0.0;
                for (const auto& [cid, stats] : actives) {
                    auto cover = coverage_announce_loop(transport, clock, cfg, cid, stats,
                                                        task.payload);
                    for (const auto& obs : cover.observations) writer.write(obs);
                    snap_obs += std::int64_t(cover.observations.size());
                    snap_rounds += cover.rounds_used;
                    coverage_sum += cover.coverage_achieved;
                    if (cover.tracker_failure) ++result.tracker_failures;
                    snap.contents.push_back(ContentCoverage{
                        cid, stats, cover.rounds_used, cover.coverage_achieved,
                        std::int64_t(cover.observations.size()), cover.tracker_failure});
                }
                writer.commit();
                result.observations += snap_obs;
                snapshot_summaries.push_back(nlohmann::json{
                    {"index", snap.index},
                    {"started_at", snap.started_at},
                    {"contents", snap.contents.size()},
                    {"observations", snap_obs},
                    {"rounds", snap_rounds},
                    {"mean_coverage",
                     snap.contents.empty() ? 0.0 : coverage_sum / double(snap.contents.size())}});
                result.snapshots.push_back(std::move(snap));
                push(now + cfg.snapshot_period, kSnapshot, task.payload + 1);
                break;
            }
            case kScrape: {
                ++result.scrapes;
                std::size_t active = 0;
                try {
                    active = scrape_all_snapshot(transport, *scrape_url).size();
                } catch (const tracker::Error&) {
                    ++result.tracker_failures;
                }
                scrape_summaries.push_back(nlohmann::json{{"at", now}, {"active_contents", active}});
                push(now + cfg.scrape_period, kScrape, 0);
                break;
            }
            default:
                break;
        }
    }

    clock.sleep_until(end);
    std::sort(unfinished.begin(), unfinished.end());
    for (const auto idx : unfinished) {
        monitors[idx].finish(end);
        write_record(monitors[idx].record());
    }
    monitoring.flush();

    nlohmann::json config_echo{{"tracker_urls", cfg.tracker_urls},
                               {"start_time", cfg.start_time},
                               {"duration_days", cfg.duration_days},
                               {"poll_period", cfg.poll_period},
                               {"snapshot_period", cfg.snapshot_period},
                               {"scrape_period", cfg.scrape_period},
                               {"coverage_target", cfg.coverage_target},
                               {"numwant", cfg.numwant},
                               {"max_inflight", cfg.max_inflight},
                               {"max_rounds", cfg.max_rounds},
                               {"monitor_duration", cfg.monitor_duration},
                               {"monitor_period", cfg.monitor_period},
                               {"inter_round_delay", cfg.inter_round_delay},
                               {"listen_port", cfg.listen_port},
                               {"seed", cfg.seed},
                               {"pair_stopped", cfg.pair_stopped}};
    nlohmann::json summary{{"polls", result.polls},
                           {"scrapes", result.scrapes},
                           {"snapshots", result.snapshots.size()},
                           {"injections", result.injections},
                           {"observations", result.observations},
                           {"feed_errors", result.feed_errors},
                           {"tracker_failures", result.tracker_failures},
                           {"finished_at", end}};
    store::write_json(store::manifest_file(out),
                      nlohmann::json{{"campaign", config_echo},
                                     {"summary", summary},
                                     {"snapshots", snapshot_summaries},
                                     {"scrapes", scrape_summaries}});
    return result;
}

} // namespace swarmwatch::crawler
