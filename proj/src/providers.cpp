#include "swarmwatch/providers.hpp"

#include <algorithm>

namespace swarmwatch::providers {

std::optional<IpAddr> alone_exploit(const InjectionRecord& rec,
                                    const std::optional<Endpoint>& self) {
    std::optional<IpAddr> found;
    for (const auto ep : rec.first_join_peers) {
        if (self && ep == *self) continue;
        if (found) return std::nullopt;  // more than one peer
        found = ep.ip;
    }
    return found;
}

void ObservationIndex::add(const PeerObservation& o) {
    auto& per_ip = by_content_[o.content];
    const auto [it, fresh] = per_ip.try_emplace(o.ep.ip, o.observed_at);
    if (!fresh && o.observed_at < it->second) it->second = o.observed_at;
}

const std::unordered_map<IpAddr, std::int64_t>* ObservationIndex::find(const ContentId& id) const {
    const auto it = by_content_.find(id);
    return it == by_content_.end() ? nullptr : &it->second;
}

std::map<std::string, LoginVerdict> login_exploit(const std::vector<InjectionRecord>& records,
                                                  const ObservationIndex& index, int min_contents,
                                                  std::int64_t window) {
    struct Tally {
        std::int64_t contents = 0;
        // candidate IP -> (swarms it appeared in, earliest sighting)
        std::unordered_map<IpAddr, std::pair<std::int64_t, std::int64_t>> ips;
    };
    std::map<std::string, Tally> tallies;
    for (const auto& rec : records) {
        if (rec.login.empty()) continue;
        auto& tally = tallies[rec.login];
        ++tally.contents;
        const auto* seen = index.find(rec.content);
        if (!seen) continue;
        const auto deadline = rec.listed_at + window;
        for (const auto& [ip, first_ts] : *seen) {
            if (first_ts >= deadline) continue;
            const auto [it, fresh] = tally.ips.try_emplace(ip, 1, first_ts);
            if (fresh) continue;
            it->second.first += 1;
            it->second.second = std::min(it->second.second, first_ts);
        }
    }

    std::map<std::string, LoginVerdict> out;
    for (const auto& [login, tally] : tallies) {
        if (tally.contents < min_contents || tally.ips.empty()) continue;
        LoginVerdict best{};
        bool have = false;
        for (const auto& [ip, cf] : tally.ips) {
            const LoginVerdict cand{ip, cf.first, tally.contents, cf.second};
            const auto better = [&] {
                if (cand.contents_with_ip != best.contents_with_ip) {
                    return cand.contents_with_ip > best.contents_with_ip;
                }
                if (cand.first_seen != best.first_seen) return cand.first_seen < best.first_seen;
                return cand.ip < best.ip;
            };
            if (!have || better()) {
                best = cand;
                have = true;
            }
        }
        out.emplace(login, best);
    }
    return out;
}

std::string_view method_name(Method m) {
    switch (m) {
        case Method::alone: return "alone";
        case Method::login: return "login";
        case Method::both: return "both";
    }
    return "alone";
}

VerdictSet merge_verdicts(const std::vector<InjectionRecord>& records,
                          const std::map<std::string, LoginVerdict>& logins,
                          const std::optional<Endpoint>& self) {
    VerdictSet out;
    out.total_contents = std::int64_t(records.size());
    for (const auto& rec : records) {
        const auto alone = alone_exploit(rec, self);
        std::optional<IpAddr> login;
        if (!rec.login.empty()) {
            const auto it = logins.find(rec.login);
            if (it != logins.end()) login = it->second.ip;
        }
        if (!alone && !login) continue;
        ProviderVerdict v;
        v.content = rec.content;
        if (!rec.login.empty()) v.login = rec.login;
        if (alone && login) {
            if (*alone == *login) {
                v.method = Method::both;
                v.provider_ip = alone;
            } else {
                // Direct observation wins; flag the content for review.
                v.method = Method::alone;
                v.provider_ip = alone;
                out.disagreements.push_back(rec.content);
            }
        } else if (alone) {
            v.method = Method::alone;
            v.provider_ip = alone;
        } else {
            v.method = Method::login;
            v.provider_ip = login;
        }
        out.verdicts.push_back(std::move(v));
    }
    return out;
}

std::unordered_map<ContentId, IpAddr> alone_results(const std::vector<InjectionRecord>& records,
                                                    const std::optional<Endpoint>& self) {
    std::unordered_map<ContentId, IpAddr> out;
    for (const auto& rec : records) {
        if (const auto ip = alone_exploit(rec, self)) out.emplace(rec.content, *ip);
    }
    return out;
}

std::unordered_map<ContentId, IpAddr> login_results(
    const std::vector<InjectionRecord>& records,
    const std::map<std::string, LoginVerdict>& logins) {
    std::unordered_map<ContentId, IpAddr> out;
    for (const auto& rec : records) {
        if (rec.login.empty()) continue;
        const auto it = logins.find(rec.login);
        if (it != logins.end()) out.emplace(rec.content, it->second.ip);
    }
    return out;
}

CrossValidation cross_validate(const std::unordered_map<ContentId, IpAddr>& alone,
                               const std::unordered_map<ContentId, IpAddr>& login) {
    CrossValidation out;
    out.alone_count = std::int64_t(alone.size());
    out.login_count = std::int64_t(login.size());
    for (const auto& [content, ip] : alone) {
        const auto it = login.find(content);
        if (it == login.end()) continue;
        ++out.overlap;
        if (it->second == ip) ++out.agreement_count;
    }
    if (out.overlap > 0) {
        out.agreement_fraction = double(out.agreement_count) / double(out.overlap);
    }
    return out;
}

MultiLoginStats multi_login_check(const std::map<std::string, LoginVerdict>& logins) {
    std::map<IpAddr, int> per_ip;
    for (const auto& [login, verdict] : logins) ++per_ip[verdict.ip];
    MultiLoginStats out;
    for (const auto& [ip, n] : per_ip) {
        ++out.ips_by_login_count[n];
        if (n > 1) out.suspects_gt1.push_back(ip);
        if (n > 3) out.suspects_gt3.push_back(ip);
    }
    return out;  // per_ip is ordered, so the suspect lists are already sorted
}

std::vector<PopularityBin> identification_rate_by_popularity(
    const VerdictSet& verdicts, const std::vector<InjectionRecord>& records,
    const std::vector<std::int64_t>& edges) {
    std::vector<PopularityBin> bins;
    std::int64_t lo = 0;
    for (const auto edge : edges) {
        PopularityBin bin;
        bin.lo = lo;
        bin.hi = edge;
        bin.label = lo == 0 ? "<=" + std::to_string(edge)
                            : std::to_string(lo) + "-" + std::to_string(edge);
        bins.push_back(std::move(bin));
        lo = edge + 1;
    }
    PopularityBin open;
    open.lo = lo;
    open.label = ">" + std::to_string(lo - 1);
    bins.push_back(std::move(open));
    PopularityBin all;
    all.label = "all";
    bins.push_back(std::move(all));

    std::unordered_map<ContentId, Method> methods;
    for (const auto& v : verdicts.verdicts) methods.emplace(v.content, v.method);

    const auto locate = [&](std::int64_t size) -> PopularityBin& {
        for (std::size_t i = 0; i + 1 < bins.size(); ++i) {
            if (!bins[i].hi || size <= *bins[i].hi) return bins[i];
        }
        return bins[bins.size() - 2];
    };
    const auto count = [&](PopularityBin& bin, const InjectionRecord& rec) {
        ++bin.total;
        const auto it = methods.find(rec.content);
        if (it == methods.end()) return;
        ++bin.identified;
        if (it->second == Method::login) {
            ++bin.login_only;
        } else {
            ++bin.alone;
        }
    };
    for (const auto& rec : records) {
        count(locate(rec.swarm_size_at_24h), rec);
        count(bins.back(), rec);
    }
    return bins;
}

ProfileResult provider_profile(const VerdictSet& verdicts,
                               const std::vector<CatalogEntry>& catalog,
                               const Resolver& resolver) {
    std::unordered_map<ContentId, std::int64_t> sizes;
    for (const auto& e : catalog) sizes.emplace(e.content, e.total_size);

    std::map<IpAddr, ProviderProfile> by_ip;
    ProfileResult out;
    out.total_contents = verdicts.total_contents;
    for (const auto& v : verdicts.verdicts) {
        if (!v.provider_ip) continue;
        auto& profile = by_ip[*v.provider_ip];
        profile.ip = *v.provider_ip;
        ++profile.content_count;
        const auto size = sizes.find(v.content);
        if (size != sizes.end()) profile.total_volume += size->second;
        if (v.login) profile.logins.insert(*v.login);
        ++out.attributed;
    }

    out.profiles.reserve(by_ip.size());
    for (auto& [ip, profile] : by_ip) {
        if (const auto info = resolver ? resolver(ip) : std::nullopt) {
            profile.country = info->country;
            profile.as_name = info->as_name;
        }
        out.profiles.push_back(std::move(profile));
    }
    std::stable_sort(out.profiles.begin(), out.profiles.end(),
                     [](const ProviderProfile& a, const ProviderProfile& b) {
                         if (a.content_count != b.content_count) {
                             return a.content_count > b.content_count;
                         }
                         return a.ip < b.ip;
                     });

    out.cdf.reserve(out.profiles.size());
    std::int64_t running = 0;
    for (const auto& profile : out.profiles) {
        running += profile.content_count;
        out.cdf.push_back(out.total_contents > 0 ? double(running) / double(out.total_contents)
                                                 : 0.0);
    }
    return out;
}

} // namespace swarmwatch::providers
