#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "swarmwatch/content_id.hpp"
#include "swarmwatch/net.hpp"
#include "swarmwatch/records.hpp"
#include "swarmwatch/store.hpp"

namespace swarmwatch::providers {

inline constexpr int kMinLoginContents = 10;
/// Observations attributed to a login's content are limited to this window
/// after its listing; bounds memory and matches the study granularity.
inline constexpr std::int64_t kLoginWindow = 7 * 86400;

// ---- the Alone exploit ----

/// The sole first-join peer, once the crawler's own endpoint is excluded.
/// Absent unless exactly one peer remains.
[[nodiscard]] std::optional<IpAddr> alone_exploit(const InjectionRecord& rec,
                                                  const std::optional<Endpoint>& self = {});

// ---- the Login exploit ----

/// content -> (peer IP -> first time that IP was seen in the swarm).
/// Built by streaming snapshot and monitoring logs through add().
class ObservationIndex {
public:
    void add(const PeerObservation& o);

    /// nullptr when the content was never observed.
    [[nodiscard]] const std::unordered_map<IpAddr, std::int64_t>* find(const ContentId& id) const;

    [[nodiscard]] std::size_t contents() const { return by_content_.size(); }

private:
    std::unordered_map<ContentId, std::unordered_map<IpAddr, std::int64_t>> by_content_;
};

struct LoginVerdict {
    IpAddr ip;
    std::int64_t contents_with_ip = 0;  // this login's swarms the IP appeared in
    std::int64_t contents_total = 0;    // contents listed under the login
    std::int64_t first_seen = 0;        // earliest sighting of the winning IP
};

/// For every login with at least `min_contents` contents, the IP present in
/// the most of that login's swarms. Only sightings within `window` seconds
/// of each content's listing count. Ties break by earliest first sighting,
/// then lowest IP, so the result is independent of record order.
[[nodiscard]] std::map<std::string, LoginVerdict> login_exploit(
    const std::vector<InjectionRecord>& records, const ObservationIndex& index,
    int min_contents = kMinLoginContents, std::int64_t window = kLoginWindow);

// ---- merged per-content verdicts ----

enum class Method { alone, login, both };

[[nodiscard]] std::string_view method_name(Method m);

struct ProviderVerdict {
    ContentId content;
    std::optional<IpAddr> provider_ip;
    Method method = Method::alone;
    std::optional<std::string> login;
};

struct VerdictSet {
    std::vector<ProviderVerdict> verdicts;  // identified contents, record order
    std::vector<ContentId> disagreements;   // both exploits fired with different IPs
    std::int64_t total_contents = 0;        // records considered
};

/// One verdict per identified content. When the exploits disagree the alone
/// result wins (it is direct observation) and the content is flagged.
[[nodiscard]] VerdictSet merge_verdicts(const std::vector<InjectionRecord>& records,
                                        const std::map<std::string, LoginVerdict>& logins,
                                        const std::optional<Endpoint>& self = {});

// ---- cross-validation (Table 1 shape) ----

struct CrossValidation {
    std::int64_t alone_count = 0;
    std::int64_t login_count = 0;
    std::int64_t overlap = 0;          // contents where both methods fired
    std::int64_t agreement_count = 0;  // overlap with identical IP
    std::optional<double> agreement_fraction;  // absent when overlap = 0
};

[[nodiscard]] std::unordered_map<ContentId, IpAddr> alone_results(
    const std::vector<InjectionRecord>& records, const std::optional<Endpoint>& self = {});

[[nodiscard]] std::unordered_map<ContentId, IpAddr> login_results(
    const std::vector<InjectionRecord>& records, const std::map<std::string, LoginVerdict>& logins);

[[nodiscard]] CrossValidation cross_validate(
    const std::unordered_map<ContentId, IpAddr>& alone,
    const std::unordered_map<ContentId, IpAddr>& login);

// ---- multi-login histogram ----

struct MultiLoginStats {
    std::map<int, int> ips_by_login_count;  // #logins naming the IP -> #IPs
    std::vector<IpAddr> suspects_gt1;       // named by more than one login, sorted
    std::vector<IpAddr> suspects_gt3;       // named by more than three, sorted
};

[[nodiscard]] MultiLoginStats multi_login_check(const std::map<std::string, LoginVerdict>& logins);

// ---- identification rate by popularity (Fig. 1 shape) ----

struct PopularityBin {
    std::string label;
    std::int64_t lo = 0;                 // inclusive swarm-size bound
    std::optional<std::int64_t> hi;      // inclusive; absent = unbounded or "all"
    std::int64_t total = 0;              // a bin with total 0 is reported absent
    std::int64_t alone = 0;              // contents with an alone verdict
    std::int64_t login_only = 0;         // login verdict without an alone one
    std::int64_t identified = 0;
};

/// Bins records by swarm_size_at_24h at the given inclusive upper edges
/// (defaults {10, 100, 1000} -> <=10, 11-100, 101-1000, >1000) and appends
/// an "all" bin. alone + login_only + unidentified partition each bin.
[[nodiscard]] std::vector<PopularityBin> identification_rate_by_popularity(
    const VerdictSet& verdicts, const std::vector<InjectionRecord>& records,
    const std::vector<std::int64_t>& edges = {10, 100, 1000});

// ---- provider profiles + contribution CDF (Table 2 / Fig. 3 shape) ----

struct ProviderProfile {
    IpAddr ip;
    std::int64_t content_count = 0;
    std::int64_t total_volume = 0;  // bytes over attributed contents
    std::string country = "??";     // resolver miss -> marked unknown
    std::string as_name = "unknown";
    std::set<std::string> logins;
};

using Resolver = std::function<std::optional<store::AsInfo>(IpAddr)>;

struct ProfileResult {
    std::vector<ProviderProfile> profiles;  // content_count desc, then ip asc
    std::vector<double> cdf;  // profiles[0..i] contents / total_contents
    std::int64_t attributed = 0;
    std::int64_t total_contents = 0;
};

[[nodiscard]] ProfileResult provider_profile(const VerdictSet& verdicts,
                                             const std::vector<CatalogEntry>& catalog,
                                             const Resolver& resolver);

} // namespace swarmwatch::providers
