#include "swarmwatch/reports.hpp"

#include <cstdio>
#include <fstream>

#include "swarmwatch/store.hpp"

namespace swarmwatch::reports {
namespace {

std::string fixed6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

class Csv {
public:
    Csv(const fs::path& file, const std::string& header) : out_(file) {
        if (!out_) throw store::Error("cannot write " + file.string());
        out_ << header << '\n';
    }
    void row(const std::string& line) { out_ << line << '\n'; }

private:
    std::ofstream out_;
};

std::string join_logins(const std::set<std::string>& logins) {
    std::string out;
    for (const auto& login : logins) {
        if (!out.empty()) out += ';';
        out += login;
    }
    return out;
}

fs::path pick_out_dir(const fs::path& campaign, const fs::path& out_dir) {
    const auto dir = out_dir.empty() ? store::analysis_dir(campaign) : out_dir;
    fs::create_directories(dir);
    return dir;
}

void write_fig1(const std::vector<providers::PopularityBin>& bins, const fs::path& file) {
    Csv csv(file,
            "label,lo,hi,total,alone,login_only,identified,alone_fraction,login_fraction,"
            "others_fraction");
    for (const auto& bin : bins) {
        if (bin.total == 0) continue;  // empty bins are absent, not zero
        const auto denom = double(bin.total);
        csv.row(bin.label + ',' + std::to_string(bin.lo) + ',' +
                (bin.hi ? std::to_string(*bin.hi) : "") + ',' + std::to_string(bin.total) + ',' +
                std::to_string(bin.alone) + ',' + std::to_string(bin.login_only) + ',' +
                std::to_string(bin.identified) + ',' + fixed6(double(bin.alone) / denom) + ',' +
                fixed6(double(bin.login_only) / denom) + ',' +
                fixed6(double(bin.total - bin.identified) / denom));
    }
}

void write_fig3(const providers::ProfileResult& profile, const fs::path& file) {
    Csv csv(file, "rank,ip,contents,cdf");
    for (std::size_t i = 0; i < profile.profiles.size(); ++i) {
        csv.row(std::to_string(i + 1) + ',' + format_ip(profile.profiles[i].ip) + ',' +
                std::to_string(profile.profiles[i].content_count) + ',' +
                fixed6(profile.cdf[i]));
    }
}

void write_fig4(const DownloaderBundle& bundle, const fs::path& file) {
    Csv csv(file, "ports,contents,is_baseline");
    for (const auto& agg : bundle.aggregates) {
        const bool baseline =
            !bundle.baseline.slope ||
            std::abs(downloaders::deviation_score(agg, bundle.baseline)) <=
                bundle.options.baseline_band;
        csv.row(std::to_string(agg.ports.size()) + ',' + std::to_string(agg.contents.size()) +
                ',' + (baseline ? "1" : "0"));
    }
}

void write_fig5(const DownloaderBundle& bundle, const fs::path& file) {
    Csv csv(file, "ip,ports,contents,category,deviation");
    for (std::size_t i = 0; i < bundle.topk.size(); ++i) {
        const auto& agg = bundle.topk[i];
        const auto cat = bundle.classes.categories[i].second;
        csv.row(format_ip(agg.ip) + ',' + std::to_string(agg.ports.size()) + ',' +
                std::to_string(agg.contents.size()) + ',' +
                std::string(downloaders::category_name(cat)) + ',' +
                (bundle.baseline.slope
                     ? fixed6(downloaders::deviation_score(agg, bundle.baseline))
                     : std::string()));
    }
}

void write_fig6(const std::vector<downloaders::ActivitySeries>& series, const fs::path& file) {
    Csv csv(file, "snapshot,category,instantaneous,cumulative");
    for (const auto& s : series) {
        for (const auto& p : s.points) {
            csv.row(std::to_string(p.snapshot) + ',' +
                    std::string(downloaders::category_name(s.category)) + ',' +
                    fixed6(p.instantaneous) + ',' + fixed6(p.cumulative));
        }
    }
}

} // namespace

ProviderBundle run_provider_analysis(const fs::path& campaign, const fs::path& lists_dir) {
    ProviderBundle bundle;
    if (const auto file = store::injections_file(campaign); fs::exists(file)) {
        bundle.records = store::read_injections(file);
    }

    providers::ObservationIndex index;
    const auto feed_index = [&](const PeerObservation& o) { index.add(o); };
    for (const auto& file : store::snapshot_files(campaign)) {
        store::for_each_observation(file, feed_index);
    }
    if (const auto file = store::monitoring_file(campaign); fs::exists(file)) {
        store::for_each_observation(file, feed_index);
    }

    bundle.logins = providers::login_exploit(bundle.records, index);
    bundle.verdicts = providers::merge_verdicts(bundle.records, bundle.logins);
    bundle.cross = providers::cross_validate(providers::alone_results(bundle.records),
                                             providers::login_results(bundle.records, bundle.logins));
    bundle.multi_login = providers::multi_login_check(bundle.logins);
    bundle.bins = providers::identification_rate_by_popularity(bundle.verdicts, bundle.records);

    std::vector<CatalogEntry> catalog;
    if (const auto file = store::catalog_file(campaign); fs::exists(file)) {
        catalog = store::read_catalog(file);
    }
    std::unordered_map<IpAddr, store::AsInfo> asmap;
    if (!lists_dir.empty()) {
        if (const auto file = lists_dir / "asmap.tsv"; fs::exists(file)) {
            asmap = store::read_asmap(file);
        }
    }
    const auto resolver = [&](IpAddr ip) -> std::optional<store::AsInfo> {
        const auto it = asmap.find(ip);
        if (it == asmap.end()) return std::nullopt;
        return it->second;
    };
    bundle.profile = providers::provider_profile(bundle.verdicts, catalog, resolver);
    return bundle;
}

void write_provider_reports(const ProviderBundle& bundle, const fs::path& out_dir) {
    {
        Csv csv(out_dir / "verdicts.csv", "content,provider_ip,method,login");
        for (const auto& v : bundle.verdicts.verdicts) {
            csv.row(v.content.hex() + ',' + (v.provider_ip ? format_ip(*v.provider_ip) : "") +
                    ',' + std::string(providers::method_name(v.method)) + ',' +
                    (v.login ? *v.login : ""));
        }
    }
    {
        Csv csv(out_dir / "profiles.csv", "rank,ip,contents,volume_bytes,country,as_name,logins");
        for (std::size_t i = 0; i < bundle.profile.profiles.size(); ++i) {
            const auto& p = bundle.profile.profiles[i];
            csv.row(std::to_string(i + 1) + ',' + format_ip(p.ip) + ',' +
                    std::to_string(p.content_count) + ',' + std::to_string(p.total_volume) + ',' +
                    p.country + ',' + p.as_name + ',' + join_logins(p.logins));
        }
    }
    write_fig1(bundle.bins, out_dir / "fig1.csv");
    write_fig3(bundle.profile, out_dir / "fig3.csv");

    nlohmann::json bins = nlohmann::json::array();
    for (const auto& bin : bundle.bins) {
        if (bin.total == 0) continue;
        bins.push_back(nlohmann::json{{"label", bin.label},
                                      {"total", bin.total},
                                      {"alone", bin.alone},
                                      {"login_only", bin.login_only},
                                      {"identified", bin.identified}});
    }
    nlohmann::json by_count = nlohmann::json::object();
    for (const auto& [n, ips] : bundle.multi_login.ips_by_login_count) {
        by_count[std::to_string(n)] = ips;
    }
    nlohmann::json cross{{"alone_count", bundle.cross.alone_count},
                         {"login_count", bundle.cross.login_count},
                         {"overlap", bundle.cross.overlap},
                         {"agreement_count", bundle.cross.agreement_count}};
    if (bundle.cross.agreement_fraction) {
        cross["agreement_fraction"] = *bundle.cross.agreement_fraction;
    } else {
        cross["agreement_fraction"] = nullptr;
    }
    store::write_json(
        out_dir / "table1.json",
        nlohmann::json{
            {"cross_validation", cross},
            {"multi_login",
             {{"ips_gt1", bundle.multi_login.suspects_gt1.size()},
              {"ips_gt3", bundle.multi_login.suspects_gt3.size()},
              {"ips_by_login_count", by_count}}},
            {"disagreements", bundle.verdicts.disagreements.size()},
            {"identified_contents", bundle.verdicts.verdicts.size()},
            {"total_contents", bundle.verdicts.total_contents},
            {"distinct_provider_ips", bundle.profile.profiles.size()},
            {"bins", bins}});
}

void analyze_providers(const fs::path& campaign, const fs::path& lists_dir,
                       const fs::path& out_dir) {
    write_provider_reports(run_provider_analysis(campaign, lists_dir),
                           pick_out_dir(campaign, out_dir));
}

DownloaderBundle run_downloader_analysis(const fs::path& campaign,
                                         const DownloaderOptions& options) {
    DownloaderBundle bundle;
    bundle.options = options;
    bundle.aggregates = options.low_memory ? downloaders::aggregate_lowmem(campaign)
                                           : downloaders::aggregate(campaign);
    bundle.baseline = downloaders::middlebox_baseline(bundle.aggregates, options.baseline_interval);
    bundle.topk = downloaders::top_k(bundle.aggregates, options.k);

    std::vector<ProbeRecord> probes;
    if (const auto file = store::probes_file(campaign); fs::exists(file)) {
        probes = store::read_probes(file);
    }
    const auto evidence = downloaders::EvidenceStore::load(options.lists_dir, probes);
    bundle.classes = downloaders::classify_players(bundle.topk, evidence, options.classify);
    bundle.series = downloaders::activity_timeseries(bundle.topk, bundle.classes, campaign,
                                                     options.k);
    return bundle;
}

void write_downloader_reports(const DownloaderBundle& bundle, const fs::path& out_dir) {
    {
        Csv csv(out_dir / "rankings.csv",
                "rank,ip,contents,ports,snapshots,first_seen,last_seen,deviation");
        for (std::size_t i = 0; i < bundle.topk.size(); ++i) {
            const auto& agg = bundle.topk[i];
            csv.row(std::to_string(i + 1) + ',' + format_ip(agg.ip) + ',' +
                    std::to_string(agg.contents.size()) + ',' + std::to_string(agg.ports.size()) +
                    ',' + std::to_string(agg.snapshots_present.size()) + ',' +
                    std::to_string(agg.first_seen) + ',' + std::to_string(agg.last_seen) + ',' +
                    (bundle.baseline.slope
                         ? fixed6(downloaders::deviation_score(agg, bundle.baseline))
                         : std::string()));
        }
    }
    write_fig4(bundle, out_dir / "fig4.csv");
    write_fig5(bundle, out_dir / "fig5.csv");
    write_fig6(bundle.series, out_dir / "fig6.csv");

    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [cat, n] : bundle.classes.counts) {
        counts[std::string(downloaders::category_name(cat))] = n;
    }
    nlohmann::json missing = nlohmann::json::array();
    for (const auto ip : bundle.classes.missing_evidence) missing.push_back(format_ip(ip));
    nlohmann::json buckets = nlohmann::json::array();
    for (const auto& b : bundle.baseline.buckets) {
        buckets.push_back(nlohmann::json{{"lo", b.lo},
                                         {"hi", b.hi},
                                         {"ips", b.ips},
                                         {"mean_contents", b.mean_contents}});
    }
    nlohmann::json baseline{{"interval", bundle.baseline.interval}, {"buckets", buckets}};
    baseline["slope"] =
        bundle.baseline.slope ? nlohmann::json(*bundle.baseline.slope) : nlohmann::json();
    baseline["intercept"] =
        bundle.baseline.intercept ? nlohmann::json(*bundle.baseline.intercept) : nlohmann::json();
    store::write_json(out_dir / "classification.json",
                      nlohmann::json{{"k", bundle.options.k},
                                     {"population", bundle.aggregates.size()},
                                     {"counts", counts},
                                     {"missing_evidence", missing},
                                     {"baseline", baseline},
                                     {"params",
                                      {{"max_bd_ports", bundle.options.classify.max_bd_ports},
                                       {"as_cluster_min", bundle.options.classify.as_cluster_min},
                                       {"baseline_band", bundle.options.baseline_band}}}});
}

void analyze_downloaders(const fs::path& campaign, const DownloaderOptions& options,
                         const fs::path& out_dir) {
    write_downloader_reports(run_downloader_analysis(campaign, options),
                             pick_out_dir(campaign, out_dir));
}

fs::path write_figure(const fs::path& campaign, int figure, const DownloaderOptions& options,
                      const fs::path& out_dir) {
    const auto dir = pick_out_dir(campaign, out_dir);
    const auto file = dir / ("fig" + std::to_string(figure) + ".csv");
    switch (figure) {
        case 1: {
            const auto bundle = run_provider_analysis(campaign, options.lists_dir);
            write_fig1(bundle.bins, file);
            break;
        }
        case 3: {
            const auto bundle = run_provider_analysis(campaign, options.lists_dir);
            write_fig3(bundle.profile, file);
            break;
        }
        case 4: {
            const auto bundle = run_downloader_analysis(campaign, options);
            write_fig4(bundle, file);
            break;
        }
        case 5: {
            const auto bundle = run_downloader_analysis(campaign, options);
            write_fig5(bundle, file);
            break;
        }
        case 6: {
            const auto bundle = run_downloader_analysis(campaign, options);
            write_fig6(bundle.series, file);
            break;
        }
        default:
            throw std::invalid_argument("report: no figure " + std::to_string(figure) +
                                        " (figures 1, 3, 4, 5, 6)");
    }
    return file;
}

} // namespace swarmwatch::reports
