#include "swarmwatch/cli.hpp"

#include <ctime>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "swarmwatch/crawler.hpp"
#include "swarmwatch/peer_probe.hpp"
#include "swarmwatch/reports.hpp"
#include "swarmwatch/simnet/peers_sim.hpp"
#include "swarmwatch/simnet/tracker_sim.hpp"
#include "swarmwatch/simnet/world.hpp"
#include "swarmwatch/store.hpp"

namespace swarmwatch::cli {
namespace {

namespace fs = std::filesystem;

/// Campaign-side address of the simulated crawler host.
const IpAddr kSimCrawlerIp = IpAddr::from_octets(10, 0, 0, 1);

struct SimArgs {
    std::string out;
    std::string world_file;
    std::optional<std::uint64_t> seed;
    std::optional<int> days;
    std::optional<std::int64_t> snapshot_period;
    double coverage_target = 0.9;
    std::uint32_t numwant = 200;
    int max_inflight = 64;
    std::size_t top_k = 10000;
    int probe_ports = 3;  // distinct ports probed per top-K IP
};

int run_sim(const SimArgs& args) {
    simnet::WorldConfig wcfg;
    if (!args.world_file.empty()) {
        wcfg = simnet::WorldConfig::from_json(store::read_json(args.world_file));
    }
    if (args.seed) wcfg.seed = *args.seed;
    if (args.days) wcfg.duration_days = *args.days;
    if (args.snapshot_period) wcfg.snapshot_period = *args.snapshot_period;

    const fs::path out(args.out);
    fs::create_directories(out);
    const auto world = simnet::generate_world(wcfg);
    simnet::export_ground_truth(world, out / "ground_truth.json");
    simnet::export_lists(world, out / "lists");

    crawler::CampaignConfig ccfg;
    ccfg.tracker_urls = {simnet::kSimAnnounceUrl};
    ccfg.start_time = wcfg.start_time;
    ccfg.duration_days = wcfg.duration_days;
    ccfg.snapshot_period = wcfg.snapshot_period;
    ccfg.coverage_target = args.coverage_target;
    ccfg.numwant = args.numwant;
    ccfg.max_inflight = args.max_inflight;
    ccfg.seed = wcfg.seed;

    simnet::SimTracker tracker(world);
    SimClock clock(ccfg.start_time);
    simnet::SimTransport transport(tracker, clock, kSimCrawlerIp);
    const auto feed = simnet::make_sim_feed(world);
    const auto result = crawler::run_campaign(ccfg, clock, transport, *feed, out);

    // Evidence pass: probe a few ports of every top-K IP.
    const auto aggregates = downloaders::aggregate(out);
    const auto top = downloaders::top_k(aggregates, args.top_k);
    simnet::SimConnector connector(world);
    std::vector<ProbeRecord> probes;
    probes.reserve(top.size() * std::size_t(args.probe_ports));
    for (const auto& agg : top) {
        const auto content = *agg.contents.begin();
        int probed = 0;
        for (const auto port : agg.ports) {
            if (probed++ >= args.probe_ports) break;
            const Endpoint ep{agg.ip, port};
            const auto outcome = probe::probe_download(connector, ep, content);
            probes.push_back(ProbeRecord{ep, content, outcome.result, outcome.elapsed_ms});
        }
    }
    store::write_probes(store::probes_file(out), probes);

    std::cout << "world: " << world.contents.size() << " contents, " << world.sessions.size()
              << " sessions, seed " << wcfg.seed << "\n"
              << "campaign: " << result.snapshots.size() << " snapshots, " << result.injections
              << " injections, " << result.observations << " observations, "
              << tracker.blacklist_events().size() << " blacklist events\n"
              << "evidence: " << probes.size() << " probes over top-" << top.size() << " IPs\n"
              << "output: " << out.string() << "\n";
    return 0;
}

struct CrawlArgs {
    std::string out;
    std::vector<std::string> trackers;
    std::string feed_file;
    std::string allowlist;
    bool acknowledged = false;
    std::optional<std::int64_t> start_time;
    int days = 1;
    double coverage_target = 0.9;
    std::uint32_t numwant = 200;
    int max_inflight = 64;
    std::int64_t snapshot_period = 7200;
    std::int64_t inter_round_delay = 1;
    std::uint64_t seed = 1;
    std::uint16_t listen_port = 6881;
};

int run_crawl(const CrawlArgs& args) {
    if (!args.acknowledged) {
        std::cerr << "crawl: refusing to run.\n"
                     "Live measurement observes real peers. Re-run with\n"
                     "--i-understand-live-measurement and --allowlist <file> naming every\n"
                     "tracker host you are authorized to measure.\n";
        return 1;
    }
    std::unordered_set<std::string> allowed;
    {
        std::ifstream in(args.allowlist);
        if (!in) {
            std::cerr << "crawl: cannot read allowlist " << args.allowlist << "\n";
            return 1;
        }
        std::string line;
        while (std::getline(in, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
            if (!line.empty() && line[0] != '#') allowed.insert(line);
        }
    }
    if (allowed.empty()) {
        std::cerr << "crawl: allowlist " << args.allowlist << " names no hosts\n";
        return 1;
    }
    for (const auto& url : args.trackers) {
        const auto parts = parse_http_url(url);
        if (!parts || !allowed.contains(parts->host)) {
            std::cerr << "crawl: tracker " << url << " is not on the allowlist\n";
            return 1;
        }
    }

    crawler::CampaignConfig cfg;
    cfg.tracker_urls = args.trackers;
    cfg.start_time = args.start_time ? *args.start_time : std::int64_t(std::time(nullptr));
    cfg.duration_days = args.days;
    cfg.snapshot_period = args.snapshot_period;
    cfg.coverage_target = args.coverage_target;
    cfg.numwant = args.numwant;
    cfg.max_inflight = args.max_inflight;
    cfg.inter_round_delay = args.inter_round_delay;
    cfg.seed = args.seed;
    cfg.listen_port = args.listen_port;

    const fs::path out(args.out);
    fs::create_directories(out);
    RealClock clock;
    const auto transport = make_http_transport();
    const auto feed = make_file_feed(args.feed_file);
    const auto result = crawler::run_campaign(cfg, clock, *transport, *feed, out);
    std::cout << "campaign: " << result.snapshots.size() << " snapshots, " << result.injections
              << " injections, " << result.observations << " observations\n"
              << "output: " << out.string() << "\n";
    return 0;
}

fs::path default_lists_dir(const fs::path& campaign, const std::string& lists_dir) {
    if (!lists_dir.empty()) return lists_dir;
    const auto beside = campaign / "lists";
    return fs::exists(beside) ? beside : fs::path{};
}

} // namespace

int run(int argc, char** argv) {
    CLI::App app{"swarmwatch: BitTorrent swarm measurement toolkit"};
    app.require_subcommand(1);

    SimArgs sim;
    auto* sim_cmd = app.add_subcommand("sim", "Generate a simulated swarm world and crawl it");
    sim_cmd->add_option("--out", sim.out, "Campaign output directory")->required();
    sim_cmd->add_option("--world", sim.world_file, "World config JSON")
        ->check(CLI::ExistingFile);
    sim_cmd->add_option("--seed", sim.seed, "World seed (overrides config)");
    sim_cmd->add_option("--days", sim.days, "Campaign length in days (overrides config)");
    sim_cmd->add_option("--snapshot-period", sim.snapshot_period, "Snapshot period, seconds");
    sim_cmd->add_option("--coverage-target", sim.coverage_target, "Swarm coverage target");
    sim_cmd->add_option("--numwant", sim.numwant, "Peers requested per announce");
    sim_cmd->add_option("--max-inflight", sim.max_inflight, "Concurrent request budget");
    sim_cmd->add_option("--top-k", sim.top_k, "IPs ranked for evidence probing");

    CrawlArgs crawl;
    auto* crawl_cmd = app.add_subcommand("crawl", "Run a live measurement campaign");
    crawl_cmd->add_option("--out", crawl.out, "Campaign output directory")->required();
    crawl_cmd->add_option("--tracker", crawl.trackers, "Tracker announce URL (repeatable)")
        ->required();
    crawl_cmd->add_option("--feed", crawl.feed_file, "Injection feed file")
        ->required()
        ->check(CLI::ExistingFile);
    crawl_cmd->add_option("--allowlist", crawl.allowlist,
                          "File of tracker hosts approved for measurement");
    crawl_cmd->add_flag("--i-understand-live-measurement", crawl.acknowledged,
                        "Acknowledge that this observes real peers");
    crawl_cmd->add_option("--start-time", crawl.start_time, "Campaign start, unix seconds");
    crawl_cmd->add_option("--days", crawl.days, "Campaign length in days");
    crawl_cmd->add_option("--snapshot-period", crawl.snapshot_period, "Snapshot period, seconds");
    crawl_cmd->add_option("--coverage-target", crawl.coverage_target, "Swarm coverage target");
    crawl_cmd->add_option("--numwant", crawl.numwant, "Peers requested per announce");
    crawl_cmd->add_option("--max-inflight", crawl.max_inflight, "Concurrent request budget");
    crawl_cmd->add_option("--inter-round-delay", crawl.inter_round_delay,
                          "Seconds between coverage rounds");
    crawl_cmd->add_option("--seed", crawl.seed, "Peer-id seed");
    crawl_cmd->add_option("--listen-port", crawl.listen_port, "Port advertised to the tracker");

    auto* analyze = app.add_subcommand("analyze", "Derive providers/downloaders analyses");
    analyze->require_subcommand(1);
    std::string prov_campaign, prov_lists, prov_out;
    auto* prov_cmd = analyze->add_subcommand("providers", "Provider identification reports");
    prov_cmd->add_option("--campaign", prov_campaign, "Campaign directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    prov_cmd->add_option("--lists-dir", prov_lists, "Evidence fixtures directory");
    prov_cmd->add_option("--out", prov_out, "Report directory (default <campaign>/analysis)");

    std::string down_campaign, down_lists, down_out;
    reports::DownloaderOptions down_opts;
    auto* down_cmd = analyze->add_subcommand("downloaders", "Big-player ranking and classification");
    down_cmd->add_option("--campaign", down_campaign, "Campaign directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    down_cmd->add_option("--lists-dir", down_lists, "Evidence fixtures directory");
    down_cmd->add_option("--out", down_out, "Report directory (default <campaign>/analysis)");
    down_cmd->add_option("--top-k", down_opts.k, "IPs classified");
    down_cmd->add_flag("--low-memory", down_opts.low_memory, "Sort-merge aggregation");

    std::string rep_campaign, rep_lists, rep_out;
    int rep_figure = 0;
    reports::DownloaderOptions rep_opts;
    auto* rep_cmd = app.add_subcommand("report", "Emit one figure's data as CSV");
    rep_cmd->add_option("--campaign", rep_campaign, "Campaign directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    rep_cmd->add_option("--figure", rep_figure, "Figure number (1, 3, 4, 5, 6)")->required();
    rep_cmd->add_option("--lists-dir", rep_lists, "Evidence fixtures directory");
    rep_cmd->add_option("--out", rep_out, "Report directory (default <campaign>/analysis)");
    rep_cmd->add_option("--top-k", rep_opts.k, "IPs classified");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (sim_cmd->parsed()) return run_sim(sim);
        if (crawl_cmd->parsed()) return run_crawl(crawl);
        if (prov_cmd->parsed()) {
            reports::analyze_providers(prov_campaign, default_lists_dir(prov_campaign, prov_lists),
                                       prov_out);
            std::cout << "wrote provider reports to "
                      << (prov_out.empty() ? store::analysis_dir(prov_campaign) : fs::path(prov_out))
                             .string()
                      << "\n";
            return 0;
        }
        if (down_cmd->parsed()) {
            down_opts.lists_dir = default_lists_dir(down_campaign, down_lists);
            reports::analyze_downloaders(down_campaign, down_opts, down_out);
            std::cout << "wrote downloader reports to "
                      << (down_out.empty() ? store::analysis_dir(down_campaign) : fs::path(down_out))
                             .string()
                      << "\n";
            return 0;
        }
        if (rep_cmd->parsed()) {
            rep_opts.lists_dir = default_lists_dir(rep_campaign, rep_lists);
            const auto file = reports::write_figure(rep_campaign, rep_figure, rep_opts, rep_out);
            std::cout << file.string() << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

} // namespace swarmwatch::cli
