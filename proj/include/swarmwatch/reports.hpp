#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "swarmwatch/downloaders.hpp"
#include "swarmwatch/providers.hpp"

namespace swarmwatch::reports {

namespace fs = std::filesystem;

// ---- provider analysis (verdicts.csv, profiles.csv, fig1/fig3.csv, table1.json) ----

struct ProviderBundle {
    std::vector<InjectionRecord> records;
    std::map<std::string, providers::LoginVerdict> logins;
    providers::VerdictSet verdicts;
    providers::CrossValidation cross;
    providers::MultiLoginStats multi_login;
    std::vector<providers::PopularityBin> bins;
    providers::ProfileResult profile;
};

/// Loads a campaign directory and runs both exploits plus the derived
/// statistics. `lists_dir` supplies asmap.tsv for profile enrichment and
/// may be empty.
[[nodiscard]] ProviderBundle run_provider_analysis(const fs::path& campaign,
                                                   const fs::path& lists_dir);

void write_provider_reports(const ProviderBundle& bundle, const fs::path& out_dir);

/// run + write, defaulting out_dir to <campaign>/analysis.
void analyze_providers(const fs::path& campaign, const fs::path& lists_dir,
                       const fs::path& out_dir = {});

// ---- downloader analysis (rankings.csv, fig4/5/6.csv, classification.json) ----

struct DownloaderOptions {
    std::size_t k = 10000;
    fs::path lists_dir;
    downloaders::ClassifyConfig classify;
    std::int64_t baseline_interval = 2000;
    /// |deviation| at or below this marks a Fig. 4 point as baseline.
    double baseline_band = 1.0;
    bool low_memory = false;
};

struct DownloaderBundle {
    DownloaderOptions options;
    std::vector<downloaders::IpAggregate> aggregates;
    downloaders::Baseline baseline;
    std::vector<downloaders::IpAggregate> topk;
    downloaders::ClassificationResult classes;
    std::vector<downloaders::ActivitySeries> series;
};

[[nodiscard]] DownloaderBundle run_downloader_analysis(const fs::path& campaign,
                                                       const DownloaderOptions& options);

void write_downloader_reports(const DownloaderBundle& bundle, const fs::path& out_dir);

void analyze_downloaders(const fs::path& campaign, const DownloaderOptions& options,
                         const fs::path& out_dir = {});

// ---- single-figure emission (report subcommand) ----

/// Writes fig<N>.csv for N in {1,3,4,5,6} into out_dir (default
/// <campaign>/analysis) and returns its path.
fs::path write_figure(const fs::path& campaign, int figure, const DownloaderOptions& options,
                      const fs::path& out_dir = {});

} // namespace swarmwatch::reports
