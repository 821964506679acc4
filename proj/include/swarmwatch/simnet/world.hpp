#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "nlohmann/json.hpp"
#include "swarmwatch/bytes.hpp"
#include "swarmwatch/content_id.hpp"
#include "swarmwatch/feed.hpp"
#include "swarmwatch/net.hpp"
#include "swarmwatch/store.hpp"

namespace swarmwatch::simnet {

/// Announce URL every simulated torrent and tracker agrees on.
inline constexpr const char* kSimAnnounceUrl = "http://tracker.simnet.invalid/announce";

class InfeasibleConfig : public std::runtime_error {
public:
    explicit InfeasibleConfig(const std::string& what) : std::runtime_error(what) {}
};

struct PreSeedConfig {
    double fraction = 0.0;         // chance an injection is community-pre-seeded
    double popularity_bias = 0.0;  // extra chance scaled by popularity percentile
    std::int64_t delay_mean = 1800;  // listing lag behind first seeding
    int community_min = 10;
    int community_max = 60;
};

struct PopulationConfig {
    int honest_users = 800;
    int nat_boxes = 40;
    int nat_users_min = 2;
    int nat_users_max = 8;
    int monitors = 0;
    int monitor_ases = 2;
    int monitor_targets = 120;  // distinct contents each monitor covers
    int http_proxies = 0;
    int socks_proxies = 0;
    int tor_exits = 0;
    int vpn_egresses = 0;
    int big_downloaders = 0;
    int seedboxes = 0;  // many-port heavy hitters that defeat the port test
    int proxy_contents_min = 120;
    int proxy_contents_max = 300;
    int bd_contents_min = 80;
    int bd_contents_max = 200;
    int seedbox_contents_min = 60;
    int seedbox_contents_max = 150;
    double tor_listed_fraction = 0.85;  // rest carry only a "tor" reverse-DNS name
    double proxy_legacy_fraction = 0.2;  // proxies active before the activation snapshot
};

struct ChurnConfig {
    std::int64_t session_mean = 6 * 3600;
    std::int64_t arrival_mean = 6 * 3600;
    double seed_fraction = 0.35;
    int provider_days_min = 2;
    int provider_days_max = 5;
    std::int64_t first_arrival_floor = 0;  // quiet time after listing before users join
};

struct BlacklistConfig {
    int threshold_concurrent = 100;
    std::optional<int> policy_change_at;  // snapshot index
    int cumulative_threshold = 150;
};

struct WorldConfig {
    std::uint64_t seed = 1;
    std::int64_t start_time = 1262304000;  // 2010-01-01
    int duration_days = 4;
    std::int64_t snapshot_period = 7200;  // converts snapshot indices to times
    int content_count = 1000;
    int provider_count = 100;  // provider boxes (IPs)
    double zipf_exponent = 1.0;
    int multi_login_boxes = 0;  // boxes that publish under several logins
    int logins_per_box = 5;
    double injection_window_fraction = 0.75;
    double popularity_exponent = 0.8;
    double mean_swarm_sessions = 25.0;
    PreSeedConfig pre_seed;
    PopulationConfig population;
    ChurnConfig churn;
    BlacklistConfig blacklist;
    std::optional<int> proxy_activation_at;  // snapshot index (§4.3-style cohort)

    [[nodiscard]] std::int64_t end_time() const { return start_time + std::int64_t(duration_days) * 86400; }

    static WorldConfig from_json(const nlohmann::json& doc);
    [[nodiscard]] nlohmann::json to_json() const;
};

/// Generator role of an IP; exported as the ground-truth label.
enum class Role {
    user,
    nat_box,
    provider,
    monitor,
    http_proxy,
    socks_proxy,
    tor_exit,
    vpn,
    big_downloader,
    seedbox,
};

[[nodiscard]] std::string_view role_name(Role r);

struct SimContent {
    ContentId id;
    std::string name;
    std::int64_t total_size = 0;
    std::int64_t piece_length = 0;
    std::int32_t piece_count = 0;
    std::uint64_t piece_seed = 0;  // regenerates the torrent bytes on demand
    int login = -1;                // index into SimWorld::logins
    int provider = -1;             // index into SimWorld::providers
    std::int64_t injected_at = 0;
    std::int64_t listed_at = 0;
    int pre_seed_count = 0;
    double popularity = 0.0;  // normalized weight percentile, 1 = hottest
};

struct SimSession {
    std::int32_t content = 0;
    Endpoint ep;
    std::int64_t start = 0;
    std::int64_t end = 0;
    bool is_seed = false;
    bool sends_stopped = true;  // monitors vanish by expiry instead
    bool serves = true;         // answers a probe with a piece
};

struct SimProvider {
    IpAddr ip;
    std::uint16_t port = 0;
    std::vector<int> logins;  // indices into SimWorld::logins
};

struct SimWorld {
    WorldConfig cfg;
    std::vector<SimContent> contents;
    std::vector<SimProvider> providers;
    std::vector<std::string> logins;          // login -> name
    std::vector<int> login_provider;          // login -> provider index
    std::vector<SimSession> sessions;         // sorted by start time
    std::unordered_map<IpAddr, Role> roles;   // every participating IP
    std::unordered_map<IpAddr, std::uint32_t> as_of;
    std::unordered_map<IpAddr, int> nat_members;
    std::vector<IpAddr> http_proxy_ips;       // also on the exported list
    std::vector<IpAddr> socks_proxy_ips;
    std::vector<IpAddr> tor_listed_ips;
    std::vector<std::pair<IpAddr, std::string>> rdns;  // fixture rows (sorted)
    std::unordered_map<ContentId, std::int32_t> content_index;

    [[nodiscard]] const SimContent* find_content(const ContentId& id) const {
        auto it = content_index.find(id);
        return it == content_index.end() ? nullptr : &contents[std::size_t(it->second)];
    }
};

/// Deterministic for a given config (the seed lives inside it).
[[nodiscard]] SimWorld generate_world(const WorldConfig& cfg);

/// Torrent bytes for one content; info hash equals contents[i].id.
[[nodiscard]] Bytes synthesize_torrent(const SimWorld& world, std::int32_t content);

/// Feed view of the world ("webpage of newly injected contents").
[[nodiscard]] std::unique_ptr<InjectionFeed> make_sim_feed(const SimWorld& world);

/// Writes ground_truth.json next to the campaign outputs.
void export_ground_truth(const SimWorld& world, const std::filesystem::path& file);

/// Writes the evidence fixtures (proxy/tor lists, rdns.tsv, asmap.tsv).
void export_lists(const SimWorld& world, const std::filesystem::path& dir);

} // namespace swarmwatch::simnet
