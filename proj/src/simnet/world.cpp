#include "swarmwatch/simnet/world.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <utility>

#include "swarmwatch/bencode.hpp"
#include "swarmwatch/metainfo.hpp"
#include "swarmwatch/rng.hpp"

namespace swarmwatch::simnet {
namespace {

using nlohmann::json;

// ---- strict config parsing ----

class ObjReader {
public:
    ObjReader(const json& obj, std::string scope) : obj_(obj), scope_(std::move(scope)) {
        if (!obj.is_object()) throw InfeasibleConfig(scope_ + ": expected an object");
    }

    template <typename T>
    ObjReader& field(const char* key, T& out) {
        if (auto it = obj_.find(key); it != obj_.end()) {
            read(*it, key, out);
            used_.insert(key);
        }
        return *this;
    }

    ObjReader& object(const char* key, const std::function<void(const json&)>& fn) {
        if (auto it = obj_.find(key); it != obj_.end()) {
            fn(*it);
            used_.insert(key);
        }
        return *this;
    }

    void finish() const {
        for (const auto& [key, value] : obj_.items()) {
            (void)value;
            if (!used_.contains(key)) throw InfeasibleConfig(scope_ + ": unknown key \"" + key + "\"");
        }
    }

private:
    template <typename T>
    void read(const json& v, const char* key, T& out) const {
        try {
            v.get_to(out);
        } catch (const json::exception&) {
            throw InfeasibleConfig(scope_ + "." + key + ": wrong type");
        }
    }

    void read(const json& v, const char* key, std::optional<int>& out) const {
        if (v.is_null()) {
            out.reset();
            return;
        }
        int value = 0;
        read(v, key, value);
        out = value;
    }

    const json& obj_;
    std::string scope_;
    std::set<std::string> used_;
};

void check(bool ok, const char* what) {
    if (!ok) throw InfeasibleConfig(what);
}

void validate(const WorldConfig& c) {
    check(c.duration_days >= 1, "duration_days must be >= 1");
    check(c.snapshot_period > 0, "snapshot_period must be > 0");
    check(c.content_count >= 1, "content_count must be >= 1");
    check(c.provider_count >= 1, "provider_count must be >= 1");
    check(c.zipf_exponent > 0.0, "zipf_exponent must be > 0");
    check(c.multi_login_boxes >= 0 && c.multi_login_boxes <= c.provider_count,
          "multi_login_boxes out of range");
    check(c.multi_login_boxes == 0 || c.logins_per_box >= 2, "logins_per_box must be >= 2");
    check(c.injection_window_fraction > 0.0 && c.injection_window_fraction <= 1.0,
          "injection_window_fraction must be in (0, 1]");
    check(c.popularity_exponent >= 0.0, "popularity_exponent must be >= 0");
    check(c.mean_swarm_sessions >= 0.0, "mean_swarm_sessions must be >= 0");
    check(c.pre_seed.fraction >= 0.0 && c.pre_seed.fraction <= 1.0, "pre_seed.fraction must be in [0, 1]");
    check(c.pre_seed.popularity_bias >= 0.0, "pre_seed.popularity_bias must be >= 0");
    check(c.pre_seed.community_min >= 1 && c.pre_seed.community_max >= c.pre_seed.community_min,
          "pre_seed community bounds out of order");
    const auto& p = c.population;
    check(p.honest_users >= 1, "population.honest_users must be >= 1");
    check(p.nat_boxes >= 0, "population.nat_boxes must be >= 0");
    check(p.nat_users_min >= 1 && p.nat_users_max >= p.nat_users_min, "nat user bounds out of order");
    check(p.monitor_ases >= 1 && p.monitor_ases <= 8, "population.monitor_ases must be in [1, 8]");
    check(p.monitor_targets >= 1, "population.monitor_targets must be >= 1");
    check(p.tor_listed_fraction >= 0.0 && p.tor_listed_fraction <= 1.0,
          "population.tor_listed_fraction must be in [0, 1]");
    check(p.proxy_legacy_fraction >= 0.0 && p.proxy_legacy_fraction <= 1.0,
          "population.proxy_legacy_fraction must be in [0, 1]");
    check(c.churn.session_mean > 0 && c.churn.arrival_mean > 0, "churn means must be > 0");
    check(c.churn.seed_fraction >= 0.0 && c.churn.seed_fraction <= 1.0,
          "churn.seed_fraction must be in [0, 1]");
    check(c.churn.provider_days_min >= 1 && c.churn.provider_days_max >= c.churn.provider_days_min,
          "churn provider day bounds out of order");
    check(c.churn.first_arrival_floor >= 0, "churn.first_arrival_floor must be >= 0");
    check(c.blacklist.threshold_concurrent >= 2, "blacklist.threshold_concurrent must be >= 2");
    check(c.blacklist.cumulative_threshold >= 1, "blacklist.cumulative_threshold must be >= 1");
    if (p.monitors > 0) {
        check(c.blacklist.threshold_concurrent > 13,
              "threshold_concurrent too low for monitor batch rotation");
    }
    const int logins = c.provider_count - c.multi_login_boxes + c.multi_login_boxes * c.logins_per_box;
    check(logins <= c.content_count, "more logins than contents to publish");
}

// ---- address plan: 10.<block>.x.y, one block per role ----

constexpr std::uint8_t kBlockUsers = 1;
constexpr std::uint8_t kBlockNat = 2;
constexpr std::uint8_t kBlockProviders = 3;
constexpr std::uint8_t kBlockMonitors = 16;  // one block per monitor AS, 16..23
constexpr std::uint8_t kBlockHttp = 24;
constexpr std::uint8_t kBlockSocks = 25;
constexpr std::uint8_t kBlockTor = 26;
constexpr std::uint8_t kBlockVpn = 27;
constexpr std::uint8_t kBlockBd = 28;
constexpr std::uint8_t kBlockSeedbox = 29;

IpAddr block_ip(std::uint8_t block, int index) {
    check(index < 250 * 256, "role population exceeds its address block");
    return IpAddr::from_octets(10, block, std::uint8_t(index / 250), std::uint8_t(1 + index % 250));
}

std::uint32_t block_asn(std::uint8_t block) { return 64000 + block; }

const char* block_as_name(std::uint8_t block) {
    switch (block) {
        case kBlockUsers: return "HOMENET-DSL";
        case kBlockNat: return "CABLECO-REGIONAL";
        case kBlockProviders: return "HOSTFARM";
        case kBlockHttp: return "OPENPROXY-NET";
        case kBlockSocks: return "SOCKSGATE";
        case kBlockTor: return "RELAY-COLLECTIVE";
        case kBlockVpn: return "TUNNELWORKS";
        case kBlockBd: return "FIBER-METRO";
        case kBlockSeedbox: return "BOXHOSTING";
        default: return "COLO-DC";  // monitor blocks
    }
}

const char* block_country(std::uint8_t block) {
    static const char* kCountries[] = {"US", "GB", "FR", "DE", "NL", "SE", "CA", "ES", "IT", "PL"};
    return kCountries[block % (sizeof(kCountries) / sizeof(kCountries[0]))];
}

// ---- content naming ----

const std::vector<std::string>& word_pool() {
    static const std::vector<std::string> kWords = {
        "Granite",  "Harbor",  "Midnight", "Ember",   "Falcon",  "Hollow",  "Crimson", "Atlas",
        "Verdict",  "Mirage",  "Lantern",  "Drifter", "Orchid",  "Saber",   "Tempest", "Quarry",
        "Velvet",   "Monarch", "Cobalt",   "Raven",   "Sundown", "Glacier", "Harvest", "Specter",
        "Bastion",  "Cinder",  "Meridian", "Nomad",   "Opal",    "Pinnacle","Rogue",   "Sentinel",
        "Thicket",  "Umber",   "Vagrant",  "Warden",  "Zephyr",  "Beacon",  "Cascade", "Dagger",
        "Echo",     "Foxglove","Gambit",   "Heron",   "Ivory",   "Jackal",  "Kestrel", "Ledger",
        "Mantle",   "Nightjar","Outpost",  "Paragon", "Quiver",  "Rampart", "Skylark", "Tundra",
        "Undertow", "Vortex",  "Wildfire", "Yonder",  "Zenith",  "Argosy",  "Boreal",  "Citadel",
    };
    return kWords;
}

const std::vector<std::string>& language_pool() {
    static const std::vector<std::string> kLangs = {
        "FRENCH", "GERMAN", "SPANISH", "ITALIAN", "SWEDISH", "FR", "NL",
    };
    return kLangs;
}

const std::vector<std::string>& tag_pool() {
    static const std::vector<std::string> kTags = {
        "DVDRip", "BDRip", "WEBRip", "HDTV", "720p", "1080p", "x264", "XviD",
    };
    return kTags;
}

const std::vector<std::string>& group_pool() {
    static const std::vector<std::string> kGroups = {"GRP", "RLZ", "FTW", "NOX", "VAULT"};
    return kGroups;
}

struct LoginStyle {
    std::vector<int> signature_words;  // indices into word_pool
    int favored_language = -1;         // index into language_pool, -1 = none
};

std::string make_content_name(Rng& rng, const LoginStyle& style) {
    const auto& words = word_pool();
    std::string name;
    const int sig = int(style.signature_words.size());
    const bool use_sig = sig > 0 && rng.unit() < 0.5;
    const int w1 = use_sig ? style.signature_words[std::size_t(rng.below(std::uint64_t(sig)))]
                           : int(rng.below(words.size()));
    name += words[std::size_t(w1)];
    name += '.';
    name += words[rng.below(words.size())];
    if (rng.unit() < 0.3) {
        name += '.';
        name += words[rng.below(words.size())];
    }
    char year[8];
    std::snprintf(year, sizeof year, ".%d", int(2005 + rng.below(6)));
    name += year;
    const double lang_chance = style.favored_language >= 0 ? 0.6 : 0.1;
    if (rng.unit() < lang_chance) {
        const auto& langs = language_pool();
        const int li = style.favored_language >= 0 ? style.favored_language : int(rng.below(langs.size()));
        name += '.';
        name += langs[std::size_t(li)];
    }
    name += '.';
    name += tag_pool()[rng.below(tag_pool().size())];
    if (rng.unit() < 0.5) {
        name += '.';
        name += tag_pool()[rng.below(tag_pool().size())];
    }
    name += '-';
    name += group_pool()[rng.below(group_pool().size())];
    return name;
}

// ---- zipf quota with largest-remainder rounding ----

std::vector<int> zipf_quota(int total, int buckets, double exponent) {
    std::vector<double> w(static_cast<std::size_t>(buckets));
    double sum = 0.0;
    for (int r = 0; r < buckets; ++r) {
        w[std::size_t(r)] = std::pow(double(r + 1), -exponent);
        sum += w[std::size_t(r)];
    }
    std::vector<int> quota(static_cast<std::size_t>(buckets));
    std::vector<std::pair<double, int>> rema(static_cast<std::size_t>(buckets));
    int assigned = 0;
    for (int r = 0; r < buckets; ++r) {
        const double target = double(total) * w[std::size_t(r)] / sum;
        quota[std::size_t(r)] = int(target);
        assigned += quota[std::size_t(r)];
        rema[std::size_t(r)] = {target - double(quota[std::size_t(r)]), r};
    }
    std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; i < total - assigned; ++i) quota[std::size_t(rema[std::size_t(i)].second)]++;
    for (int r = 0; r < buckets; ++r) {
        check(quota[std::size_t(r)] >= 1, "content_count too small to give every login a content");
    }
    return quota;
}

std::int64_t clamp64(double v, std::int64_t lo, std::int64_t hi) {
    if (v < double(lo)) return lo;
    if (v > double(hi)) return hi;
    return std::int64_t(v);
}

struct Builder {
    const WorldConfig& cfg;
    SimWorld w;
    std::int64_t world_start;
    std::int64_t world_end;

    std::vector<Endpoint> pool;  // honest users + NAT members
    std::vector<double> weight;  // per-content popularity weight
    double mean_weight = 0.0;

    explicit Builder(const WorldConfig& c)
        : cfg(c), world_start(c.start_time), world_end(c.end_time()) {
        w.cfg = c;
    }

    void place(IpAddr ip, Role role, std::uint8_t block) {
        w.roles.emplace(ip, role);
        w.as_of.emplace(ip, block_asn(block));
    }

    void build_logins(Rng& rng) {
        const int boxes = cfg.provider_count;
        w.providers.resize(std::size_t(boxes));
        for (int b = 0; b < boxes; ++b) {
            auto& p = w.providers[std::size_t(b)];
            p.ip = block_ip(kBlockProviders, b);
            p.port = std::uint16_t(51000 + b % 4000);
            place(p.ip, Role::provider, kBlockProviders);
        }
        const auto& words = word_pool();
        auto add_login = [&](int box) {
            const int l = int(w.logins.size());
            std::string handle = words[rng.below(words.size())];
            for (auto& ch : handle) ch = char(std::tolower(static_cast<unsigned char>(ch)));
            handle += std::to_string(l);
            w.logins.push_back(handle);
            w.login_provider.push_back(box);
            w.providers[std::size_t(box)].logins.push_back(l);
        };
        for (int b = 0; b < cfg.multi_login_boxes; ++b) {
            for (int i = 0; i < cfg.logins_per_box; ++i) add_login(b);
        }
        for (int b = cfg.multi_login_boxes; b < boxes; ++b) add_login(b);
    }

    std::vector<LoginStyle> login_styles(Rng& rng) const {
        std::vector<LoginStyle> styles(w.logins.size());
        for (auto& s : styles) {
            const auto picks = rng.sample_indices(std::uint32_t(word_pool().size()), 2);
            s.signature_words.assign(picks.begin(), picks.end());
            if (rng.unit() < 0.3) s.favored_language = int(rng.below(language_pool().size()));
        }
        return styles;
    }

    void build_contents(Rng& rng) {
        const int n = cfg.content_count;
        const auto styles = login_styles(rng);

        // Injection schedule over the front of the run.
        const auto span = std::int64_t(double(world_end - world_start) * cfg.injection_window_fraction);
        std::vector<std::int64_t> at(static_cast<std::size_t>(n));
        for (auto& t : at) t = world_start + std::int64_t(rng.below(std::uint64_t(std::max<std::int64_t>(span, 1))));
        std::sort(at.begin(), at.end());

        // Which login publishes which content, interleaved over time.
        auto quota = zipf_quota(n, int(w.logins.size()), cfg.zipf_exponent);
        std::vector<int> perm(w.logins.size());
        for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = int(i);
        rng.shuffle(perm);  // which login gets which rank's quota
        std::vector<std::int32_t> publisher;
        publisher.reserve(std::size_t(n));
        for (std::size_t r = 0; r < perm.size(); ++r) {
            for (int k = 0; k < quota[r]; ++k) publisher.push_back(perm[r]);
        }
        rng.shuffle(publisher);

        // Popularity ranks decoupled from injection order.
        std::vector<int> rank(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) rank[std::size_t(i)] = i;
        rng.shuffle(rank);
        weight.resize(std::size_t(n));

        w.contents.resize(std::size_t(n));
        for (int i = 0; i < n; ++i) {
            auto& c = w.contents[std::size_t(i)];
            c.login = publisher[std::size_t(i)];
            c.provider = w.login_provider[std::size_t(c.login)];
            c.injected_at = at[std::size_t(i)];
            c.name = make_content_name(rng, styles[std::size_t(c.login)]);
            c.total_size = std::int64_t(300 + rng.below(1700)) << 20;
            c.piece_length = c.total_size >= (std::int64_t(1) << 30) ? (1 << 22) : (1 << 21);
            c.piece_count = std::int32_t((c.total_size + c.piece_length - 1) / c.piece_length);
            c.piece_seed = rng.next();

            weight[std::size_t(i)] = std::pow(double(rank[std::size_t(i)] + 1), -cfg.popularity_exponent);
            c.popularity = 1.0 - double(rank[std::size_t(i)]) / double(n);

            const double chance =
                std::min(cfg.pre_seed.fraction + cfg.pre_seed.popularity_bias * c.popularity, 0.97);
            if (chance > 0.0 && rng.unit() < chance) {
                c.pre_seed_count = int(rng.range(cfg.pre_seed.community_min, cfg.pre_seed.community_max));
                const double lag = rng.exponential(double(cfg.pre_seed.delay_mean));
                c.listed_at = c.injected_at + clamp64(lag, 300, 4 * cfg.pre_seed.delay_mean);
            } else {
                c.listed_at = c.injected_at;
            }

            Bytes info = info_dict(c);
            c.id = meta::info_hash(ByteSpan(info.data(), info.size()));
            w.content_index.emplace(c.id, i);
        }
        double sum = 0.0;
        for (double v : weight) sum += v;
        mean_weight = sum / double(n);
    }

    static Bytes info_dict(const SimContent& c) {
        std::string pieces(std::size_t(c.piece_count) * 20, '\0');
        Rng prng(c.piece_seed);
        for (std::size_t i = 0; i + 8 <= pieces.size(); i += 8) {
            const std::uint64_t v = prng.next();
            std::memcpy(pieces.data() + i, &v, 8);
        }
        if (const auto tail = pieces.size() % 8; tail != 0) {
            const std::uint64_t v = prng.next();
            std::memcpy(pieces.data() + pieces.size() - tail, &v, tail);
        }
        bencode::Value::Dict d;
        d.emplace("length", bencode::Value(c.total_size));
        d.emplace("name", bencode::Value(c.name));
        d.emplace("piece length", bencode::Value(c.piece_length));
        d.emplace("pieces", bencode::Value(std::move(pieces)));
        return bencode::encode(bencode::Value(std::move(d)));
    }

    void build_pool(Rng& rng) {
        pool.reserve(std::size_t(cfg.population.honest_users));
        for (int i = 0; i < cfg.population.honest_users; ++i) {
            const IpAddr ip = block_ip(kBlockUsers, i);
            place(ip, Role::user, kBlockUsers);
            pool.push_back(Endpoint{ip, std::uint16_t(49152 + rng.below(16000))});
        }
        for (int b = 0; b < cfg.population.nat_boxes; ++b) {
            const IpAddr ip = block_ip(kBlockNat, b);
            place(ip, Role::nat_box, kBlockNat);
            const int members = int(rng.range(cfg.population.nat_users_min, cfg.population.nat_users_max));
            w.nat_members.emplace(ip, members);
            for (int m = 0; m < members; ++m) {
                pool.push_back(Endpoint{ip, std::uint16_t(10000 + m)});
            }
        }
    }

    void user_sessions(Rng& rng) {
        for (std::size_t i = 0; i < w.contents.size(); ++i) {
            const auto& c = w.contents[i];
            const double lam = cfg.mean_swarm_sessions * weight[i] / mean_weight;
            int n = rng.poisson(lam);
            n = std::min<int>(n, int(pool.size()));
            if (n <= 0) continue;
            const auto chosen = rng.sample_indices(std::uint32_t(pool.size()), std::uint32_t(n));
            for (const auto u : chosen) {
                const std::int64_t start = c.listed_at + cfg.churn.first_arrival_floor +
                                           std::int64_t(rng.exponential(double(cfg.churn.arrival_mean)));
                if (start >= world_end) continue;
                const auto dur = clamp64(rng.exponential(double(cfg.churn.session_mean)), 600, 2 * 86400);
                w.sessions.push_back(SimSession{
                    .content = std::int32_t(i),
                    .ep = pool[u],
                    .start = start,
                    .end = start + dur,
                    .is_seed = rng.unit() < cfg.churn.seed_fraction,
                    .sends_stopped = true,
                    .serves = true,
                });
            }
        }
    }

    void pre_seed_sessions(Rng& rng) {
        for (std::size_t i = 0; i < w.contents.size(); ++i) {
            const auto& c = w.contents[i];
            if (c.pre_seed_count <= 0) continue;
            const auto chosen =
                rng.sample_indices(std::uint32_t(pool.size()),
                                   std::uint32_t(std::min<int>(c.pre_seed_count, int(pool.size()))));
            const auto lead = c.listed_at - c.injected_at;
            for (const auto u : chosen) {
                const auto start = c.injected_at + std::int64_t(rng.unit() * double(lead) * 0.5);
                const auto dur =
                    clamp64(double(lead) + rng.exponential(double(cfg.churn.session_mean)), 1800, 3 * 86400);
                w.sessions.push_back(SimSession{
                    .content = std::int32_t(i),
                    .ep = pool[u],
                    .start = start,
                    .end = start + dur,
                    .is_seed = true,
                    .sends_stopped = true,
                    .serves = true,
                });
            }
        }
    }

    void provider_sessions(Rng& rng) {
        for (std::size_t i = 0; i < w.contents.size(); ++i) {
            const auto& c = w.contents[i];
            const auto& p = w.providers[std::size_t(c.provider)];
            const auto days = rng.range(cfg.churn.provider_days_min, cfg.churn.provider_days_max);
            w.sessions.push_back(SimSession{
                .content = std::int32_t(i),
                .ep = Endpoint{p.ip, p.port},
                .start = c.injected_at,
                .end = c.injected_at + days * 86400,
                // Superseeding: never reports itself complete.
                .is_seed = false,
                .sends_stopped = true,
                .serves = true,
            });
        }
    }

    void monitor_sessions(Rng& rng) {
        const auto& p = cfg.population;
        if (p.monitors <= 0) return;
        const int n = int(w.contents.size());
        const int targets = std::min(p.monitor_targets, n);
        const int batch = std::min(88, cfg.blacklist.threshold_concurrent - 12);
        const int windows = (targets + batch - 1) / batch;
        const std::int64_t win = (world_end - world_start) / windows;
        for (int m = 0; m < p.monitors; ++m) {
            const auto block = std::uint8_t(kBlockMonitors + m % p.monitor_ases);
            const IpAddr ip = block_ip(block, m / p.monitor_ases);
            place(ip, Role::monitor, block);
            const Endpoint ep{ip, 6881};
            const auto chosen = rng.sample_indices(std::uint32_t(n), std::uint32_t(targets));
            const auto stagger = std::int64_t(rng.below(600));
            for (int t = 0; t < targets; ++t) {
                const int window = t / batch;
                const std::int64_t t0 = world_start + window * win + stagger;
                const std::int64_t t1 = world_start + (window + 1) * win + stagger - 60;
                const auto& c = w.contents[chosen[std::size_t(t)]];
                const auto start = std::max(t0, c.listed_at + 30);
                if (start >= t1) continue;  // listed too late for its window
                w.sessions.push_back(SimSession{
                    .content = std::int32_t(chosen[std::size_t(t)]),
                    .ep = ep,
                    .start = start,
                    .end = t1,
                    .is_seed = false,
                    .sends_stopped = false,  // vanishes by tracker expiry
                    .serves = false,
                });
            }
        }
    }

    void aggregator_sessions(Rng& rng, std::uint8_t block, Role role, int count, int cmin, int cmax,
                             std::vector<IpAddr>* out_ips, bool activation_gated) {
        const int n = int(w.contents.size());
        std::int64_t gate = world_start;
        if (activation_gated && cfg.proxy_activation_at) {
            gate = world_start + std::int64_t(*cfg.proxy_activation_at) * cfg.snapshot_period;
        }
        for (int i = 0; i < count; ++i) {
            const IpAddr ip = block_ip(block, i);
            place(ip, role, block);
            if (out_ips) out_ips->push_back(ip);
            const bool legacy = !activation_gated || !cfg.proxy_activation_at ||
                                rng.unit() < cfg.population.proxy_legacy_fraction;
            const std::int64_t lo = legacy ? world_start : gate;
            const int contents = int(rng.range(std::min(cmin, n), std::min(cmax, n)));
            const auto chosen = rng.sample_indices(std::uint32_t(n), std::uint32_t(contents));
            int seq = 0;
            for (const auto ci : chosen) {
                const auto& c = w.contents[ci];
                std::int64_t start = lo + std::int64_t(rng.unit() * double(std::max<std::int64_t>(world_end - lo - 1800, 1)));
                start = std::max(start, c.listed_at + 60);
                if (start >= world_end) continue;
                const auto dur = clamp64(rng.exponential(4 * 3600.0), 1200, 12 * 3600);
                w.sessions.push_back(SimSession{
                    .content = std::int32_t(ci),
                    .ep = Endpoint{ip, std::uint16_t(20000 + seq++ % 40000)},
                    .start = start,
                    .end = start + dur,
                    .is_seed = rng.unit() < 0.3,
                    .sends_stopped = true,
                    .serves = true,
                });
            }
        }
    }

    void heavy_sessions(Rng& rng, std::uint8_t block, Role role, int count, int cmin, int cmax,
                        int ports_lo, int ports_hi, double session_mean_h) {
        const int n = int(w.contents.size());
        for (int i = 0; i < count; ++i) {
            const IpAddr ip = block_ip(block, i);
            place(ip, role, block);
            const int nports = int(rng.range(ports_lo, ports_hi));
            std::vector<std::uint16_t> ports(static_cast<std::size_t>(nports));
            for (int j = 0; j < nports; ++j) ports[std::size_t(j)] = std::uint16_t(30000 + i * 32 + j);
            const int contents = int(rng.range(std::min(cmin, n), std::min(cmax, n)));
            const auto chosen = rng.sample_indices(std::uint32_t(n), std::uint32_t(contents));
            for (const auto ci : chosen) {
                const auto& c = w.contents[ci];
                std::int64_t start =
                    world_start + std::int64_t(rng.unit() * double(world_end - world_start - 1800));
                start = std::max(start, c.listed_at + 60);
                if (start >= world_end) continue;
                const auto dur = clamp64(rng.exponential(session_mean_h * 3600.0), 1800, 36 * 3600);
                w.sessions.push_back(SimSession{
                    .content = std::int32_t(ci),
                    .ep = Endpoint{ip, ports[rng.below(std::uint64_t(nports))]},
                    .start = start,
                    .end = start + dur,
                    .is_seed = rng.unit() < 0.5,
                    .sends_stopped = true,
                    .serves = true,
                });
            }
        }
    }

    void name_entries(Rng& rng) {
        // Reverse DNS: every VPN egress, most tor exits, plus mundane noise.
        const auto tor_count = std::size_t(cfg.population.tor_exits);
        for (std::size_t i = 0; i < tor_count; ++i) {
            const IpAddr ip = block_ip(kBlockTor, int(i));
            const bool listed = i < w.tor_listed_ips.size() &&
                                std::find(w.tor_listed_ips.begin(), w.tor_listed_ips.end(), ip) !=
                                    w.tor_listed_ips.end();
            if (!listed || rng.unit() < 0.5) {
                w.rdns.emplace_back(ip, "tor-exit-" + std::to_string(i) + ".relays.example.org");
            }
        }
        static const char* kVpnBrands[] = {"itshidden",    "cyberghostvpn", "peer2me",
                                           "ipredate",     "mullvad",       "perfect-privacy"};
        for (int i = 0; i < cfg.population.vpn_egresses; ++i) {
            const IpAddr ip = block_ip(kBlockVpn, i);
            const char* brand = kVpnBrands[std::size_t(i) % 6];
            w.rdns.emplace_back(ip, "gw" + std::to_string(i) + "." + brand + ".example.net");
        }
        for (int i = 0; i < cfg.population.honest_users; ++i) {
            if (rng.unit() >= 0.1) continue;
            const IpAddr ip = block_ip(kBlockUsers, i);
            w.rdns.emplace_back(ip, "cpe-" + std::to_string(i) + ".dyn.homenet.example.com");
        }
        for (int i = 0; i < cfg.population.big_downloaders; ++i) {
            if (rng.unit() >= 0.3) continue;
            const IpAddr ip = block_ip(kBlockBd, i);
            w.rdns.emplace_back(ip, "static-" + std::to_string(i) + ".fiber.example.net");
        }
        std::sort(w.rdns.begin(), w.rdns.end());
    }

    SimWorld finish(Rng& rng) {
        // Proxy/tor lists the way an operator would assemble them.
        const auto& p = cfg.population;
        const auto listed = std::size_t(double(p.tor_exits) * p.tor_listed_fraction + 0.5);
        const auto picks = rng.sample_indices(std::uint32_t(p.tor_exits), std::uint32_t(listed));
        auto sorted = picks;
        std::sort(sorted.begin(), sorted.end());
        for (const auto i : sorted) w.tor_listed_ips.push_back(block_ip(kBlockTor, int(i)));

        name_entries(rng);

        std::stable_sort(w.sessions.begin(), w.sessions.end(), [](const SimSession& a, const SimSession& b) {
            if (a.start != b.start) return a.start < b.start;
            if (a.content != b.content) return a.content < b.content;
            return a.ep < b.ep;
        });
        return std::move(w);
    }
};

class SimFeed final : public InjectionFeed {
public:
    explicit SimFeed(const SimWorld& world) : world_(&world) {
        order_.resize(world.contents.size());
        for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = std::int32_t(i);
        std::stable_sort(order_.begin(), order_.end(), [&](std::int32_t a, std::int32_t b) {
            return world.contents[std::size_t(a)].listed_at < world.contents[std::size_t(b)].listed_at;
        });
    }

    std::vector<FeedItem> list(std::int64_t now) override {
        std::vector<FeedItem> items;
        for (const auto i : order_) {
            const auto& c = world_->contents[std::size_t(i)];
            if (c.listed_at > now) break;
            items.push_back(FeedItem{
                .content = c.id,
                .login = world_->logins[std::size_t(c.login)],
                .listed_at = c.listed_at,
                .torrent_locator = "sim:" + std::to_string(i),
            });
        }
        return items;
    }

    std::optional<Bytes> fetch_torrent(const FeedItem& item) override {
        const auto* c = world_->find_content(item.content);
        if (!c) return std::nullopt;
        return synthesize_torrent(*world_, std::int32_t(c - world_->contents.data()));
    }

private:
    const SimWorld* world_;
    std::vector<std::int32_t> order_;
};

} // namespace

std::string_view role_name(Role r) {
    switch (r) {
        case Role::user: return "user";
        case Role::nat_box: return "nat_box";
        case Role::provider: return "provider";
        case Role::monitor: return "monitor";
        case Role::http_proxy: return "http_proxy";
        case Role::socks_proxy: return "socks_proxy";
        case Role::tor_exit: return "tor_exit";
        case Role::vpn: return "vpn";
        case Role::big_downloader: return "big_downloader";
        case Role::seedbox: return "seedbox";
    }
    return "unknown";
}

WorldConfig WorldConfig::from_json(const json& doc) {
    WorldConfig c;
    ObjReader r(doc, "world");
    r.field("seed", c.seed)
        .field("start_time", c.start_time)
        .field("duration_days", c.duration_days)
        .field("snapshot_period", c.snapshot_period)
        .field("content_count", c.content_count)
        .field("provider_count", c.provider_count)
        .field("zipf_exponent", c.zipf_exponent)
        .field("multi_login_boxes", c.multi_login_boxes)
        .field("logins_per_box", c.logins_per_box)
        .field("injection_window_fraction", c.injection_window_fraction)
        .field("popularity_exponent", c.popularity_exponent)
        .field("mean_swarm_sessions", c.mean_swarm_sessions)
        .field("proxy_activation_at", c.proxy_activation_at)
        .object("pre_seed",
                [&](const json& o) {
                    ObjReader pr(o, "pre_seed");
                    pr.field("fraction", c.pre_seed.fraction)
                        .field("popularity_bias", c.pre_seed.popularity_bias)
                        .field("delay_mean", c.pre_seed.delay_mean)
                        .field("community_min", c.pre_seed.community_min)
                        .field("community_max", c.pre_seed.community_max);
                    pr.finish();
                })
        .object("population",
                [&](const json& o) {
                    auto& p = c.population;
                    ObjReader pr(o, "population");
                    pr.field("honest_users", p.honest_users)
                        .field("nat_boxes", p.nat_boxes)
                        .field("nat_users_min", p.nat_users_min)
                        .field("nat_users_max", p.nat_users_max)
                        .field("monitors", p.monitors)
                        .field("monitor_ases", p.monitor_ases)
                        .field("monitor_targets", p.monitor_targets)
                        .field("http_proxies", p.http_proxies)
                        .field("socks_proxies", p.socks_proxies)
                        .field("tor_exits", p.tor_exits)
                        .field("vpn_egresses", p.vpn_egresses)
                        .field("big_downloaders", p.big_downloaders)
                        .field("seedboxes", p.seedboxes)
                        .field("proxy_contents_min", p.proxy_contents_min)
                        .field("proxy_contents_max", p.proxy_contents_max)
                        .field("bd_contents_min", p.bd_contents_min)
                        .field("bd_contents_max", p.bd_contents_max)
                        .field("seedbox_contents_min", p.seedbox_contents_min)
                        .field("seedbox_contents_max", p.seedbox_contents_max)
                        .field("tor_listed_fraction", p.tor_listed_fraction)
                        .field("proxy_legacy_fraction", p.proxy_legacy_fraction);
                    pr.finish();
                })
        .object("churn",
                [&](const json& o) {
                    auto& ch = c.churn;
                    ObjReader pr(o, "churn");
                    pr.field("session_mean", ch.session_mean)
                        .field("arrival_mean", ch.arrival_mean)
                        .field("seed_fraction", ch.seed_fraction)
                        .field("provider_days_min", ch.provider_days_min)
                        .field("provider_days_max", ch.provider_days_max)
                        .field("first_arrival_floor", ch.first_arrival_floor);
                    pr.finish();
                })
        .object("blacklist", [&](const json& o) {
            auto& b = c.blacklist;
            ObjReader pr(o, "blacklist");
            pr.field("threshold_concurrent", b.threshold_concurrent)
                .field("policy_change_at", b.policy_change_at)
                .field("cumulative_threshold", b.cumulative_threshold);
            pr.finish();
        });
    r.finish();
    validate(c);
    return c;
}

json WorldConfig::to_json() const {
    json pre{{"fraction", pre_seed.fraction},
             {"popularity_bias", pre_seed.popularity_bias},
             {"delay_mean", pre_seed.delay_mean},
             {"community_min", pre_seed.community_min},
             {"community_max", pre_seed.community_max}};
    json pop{{"honest_users", population.honest_users},
             {"nat_boxes", population.nat_boxes},
             {"nat_users_min", population.nat_users_min},
             {"nat_users_max", population.nat_users_max},
             {"monitors", population.monitors},
             {"monitor_ases", population.monitor_ases},
             {"monitor_targets", population.monitor_targets},
             {"http_proxies", population.http_proxies},
             {"socks_proxies", population.socks_proxies},
             {"tor_exits", population.tor_exits},
             {"vpn_egresses", population.vpn_egresses},
             {"big_downloaders", population.big_downloaders},
             {"seedboxes", population.seedboxes},
             {"proxy_contents_min", population.proxy_contents_min},
             {"proxy_contents_max", population.proxy_contents_max},
             {"bd_contents_min", population.bd_contents_min},
             {"bd_contents_max", population.bd_contents_max},
             {"seedbox_contents_min", population.seedbox_contents_min},
             {"seedbox_contents_max", population.seedbox_contents_max},
             {"tor_listed_fraction", population.tor_listed_fraction},
             {"proxy_legacy_fraction", population.proxy_legacy_fraction}};
    json ch{{"session_mean", churn.session_mean},
            {"arrival_mean", churn.arrival_mean},
            {"seed_fraction", churn.seed_fraction},
            {"provider_days_min", churn.provider_days_min},
            {"provider_days_max", churn.provider_days_max},
            {"first_arrival_floor", churn.first_arrival_floor}};
    json bl{{"threshold_concurrent", blacklist.threshold_concurrent},
            {"policy_change_at",
             blacklist.policy_change_at ? json(*blacklist.policy_change_at) : json()},
            {"cumulative_threshold", blacklist.cumulative_threshold}};
    return json{{"seed", seed},
                {"start_time", start_time},
                {"duration_days", duration_days},
                {"snapshot_period", snapshot_period},
                {"content_count", content_count},
                {"provider_count", provider_count},
                {"zipf_exponent", zipf_exponent},
                {"multi_login_boxes", multi_login_boxes},
                {"logins_per_box", logins_per_box},
                {"injection_window_fraction", injection_window_fraction},
                {"popularity_exponent", popularity_exponent},
                {"mean_swarm_sessions", mean_swarm_sessions},
                {"proxy_activation_at", proxy_activation_at ? json(*proxy_activation_at) : json()},
                {"pre_seed", pre},
                {"population", pop},
                {"churn", ch},
                {"blacklist", bl}};
}

SimWorld generate_world(const WorldConfig& cfg) {
    validate(cfg);
    Builder b(cfg);
    Rng master(cfg.seed);
    Rng rng_logins = master.fork();
    Rng rng_contents = master.fork();
    Rng rng_users = master.fork();
    Rng rng_swarms = master.fork();
    Rng rng_preseed = master.fork();
    Rng rng_providers = master.fork();
    Rng rng_monitors = master.fork();
    Rng rng_aggr = master.fork();
    Rng rng_heavy = master.fork();
    Rng rng_names = master.fork();

    b.build_logins(rng_logins);
    b.build_contents(rng_contents);
    b.build_pool(rng_users);
    b.user_sessions(rng_swarms);
    b.pre_seed_sessions(rng_preseed);
    b.provider_sessions(rng_providers);
    b.monitor_sessions(rng_monitors);
    const auto& p = cfg.population;
    b.aggregator_sessions(rng_aggr, kBlockHttp, Role::http_proxy, p.http_proxies, p.proxy_contents_min,
                          p.proxy_contents_max, &b.w.http_proxy_ips, true);
    b.aggregator_sessions(rng_aggr, kBlockSocks, Role::socks_proxy, p.socks_proxies,
                          p.proxy_contents_min, p.proxy_contents_max, &b.w.socks_proxy_ips, true);
    b.aggregator_sessions(rng_aggr, kBlockTor, Role::tor_exit, p.tor_exits, p.proxy_contents_min,
                          p.proxy_contents_max, nullptr, false);
    b.aggregator_sessions(rng_aggr, kBlockVpn, Role::vpn, p.vpn_egresses, p.proxy_contents_min,
                          p.proxy_contents_max, nullptr, false);
    b.heavy_sessions(rng_heavy, kBlockBd, Role::big_downloader, p.big_downloaders, p.bd_contents_min,
                     p.bd_contents_max, 1, 9, 12.0);
    b.heavy_sessions(rng_heavy, kBlockSeedbox, Role::seedbox, p.seedboxes, p.seedbox_contents_min,
                     p.seedbox_contents_max, 10, 24, 12.0);
    return b.finish(rng_names);
}

Bytes synthesize_torrent(const SimWorld& world, std::int32_t content) {
    const auto& c = world.contents.at(std::size_t(content));
    Bytes info = Builder::info_dict(c);
    Bytes out;
    out.reserve(info.size() + 128);
    const std::string head = "d8:announce" + std::to_string(std::string_view(kSimAnnounceUrl).size()) +
                             ":" + kSimAnnounceUrl + "4:info";
    out.insert(out.end(), head.begin(), head.end());
    out.insert(out.end(), info.begin(), info.end());
    out.push_back(std::uint8_t('e'));
    return out;
}

std::unique_ptr<InjectionFeed> make_sim_feed(const SimWorld& world) {
    return std::make_unique<SimFeed>(world);
}

void export_ground_truth(const SimWorld& world, const std::filesystem::path& file) {
    json contents = json::array();
    for (const auto& c : world.contents) {
        contents.push_back(json{{"content", c.id.hex()},
                                {"name", c.name},
                                {"login", world.logins[std::size_t(c.login)]},
                                {"provider_ip", format_ip(world.providers[std::size_t(c.provider)].ip)},
                                {"injected_at", c.injected_at},
                                {"listed_at", c.listed_at},
                                {"pre_seeded", c.pre_seed_count > 0},
                                {"popularity", c.popularity}});
    }
    json logins = json::object();
    for (std::size_t l = 0; l < world.logins.size(); ++l) {
        logins[world.logins[l]] = format_ip(world.providers[std::size_t(world.login_provider[l])].ip);
    }
    json roles = json::object();
    for (const auto& [ip, role] : world.roles) roles[format_ip(ip)] = std::string(role_name(role));
    json nat = json::object();
    for (const auto& [ip, members] : world.nat_members) nat[format_ip(ip)] = members;
    store::write_json(file, json{{"config", world.cfg.to_json()},
                                 {"contents", contents},
                                 {"logins", logins},
                                 {"roles", roles},
                                 {"nat_members", nat}});
}

void export_lists(const SimWorld& world, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    store::write_ip_list(dir / "http_proxies.txt", world.http_proxy_ips);
    store::write_ip_list(dir / "socks_proxies.txt", world.socks_proxy_ips);
    store::write_ip_list(dir / "tor_exits.txt", world.tor_listed_ips);
    store::write_rdns(dir / "rdns.tsv", world.rdns);
    std::vector<std::pair<IpAddr, store::AsInfo>> as_rows;
    as_rows.reserve(world.as_of.size());
    for (const auto& [ip, asn] : world.as_of) {
        const auto block = std::uint8_t((ip.value >> 16) & 0xff);
        as_rows.emplace_back(ip, store::AsInfo{asn, block_as_name(block), block_country(block)});
    }
    std::sort(as_rows.begin(), as_rows.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    store::write_asmap(dir / "asmap.tsv", as_rows);
}

} // namespace swarmwatch::simnet
