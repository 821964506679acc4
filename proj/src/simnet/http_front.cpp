#include "swarmwatch/simnet/http_front.hpp"

#include <mutex>
#include <stdexcept>
#include <thread>

#include "swarmwatch/content_id.hpp"
#include "swarmwatch/tracker_wire.hpp"
#include "../httplib_zlib.hpp"

namespace swarmwatch::simnet {

struct HttpFront::Impl {
    SimTracker* tracker;
    const Clock* clock;
    IpAddr caller;
    httplib::Server server;
    std::thread thread;
    std::mutex mu;

    static std::string raw_query(const httplib::Request& req) {
        const auto q = req.target.find('?');
        return q == std::string::npos ? std::string() : req.target.substr(q + 1);
    }

    void install_routes() {
        server.Get("/announce", [this](const httplib::Request& req, httplib::Response& res) {
            std::scoped_lock lock(mu);
            res.set_content(tracker->announce(caller, raw_query(req), clock->now()), "text/plain");
        });
        server.Get("/scrape", [this](const httplib::Request& req, httplib::Response& res) {
            std::scoped_lock lock(mu);
            std::vector<ContentId> hashes;
            const auto query = raw_query(req);
            std::size_t pos = 0;
            while (pos <= query.size()) {
                const auto amp = query.find('&', pos);
                const auto part =
                    query.substr(pos, amp == std::string::npos ? amp : amp - pos);
                pos = amp == std::string::npos ? query.size() + 1 : amp + 1;
                if (part.rfind("info_hash=", 0) != 0) continue;
                const auto raw = tracker::percent_decode(std::string_view(part).substr(10));
                if (raw && raw->size() == 20) {
                    hashes.push_back(ContentId::from_bytes(ByteSpan(raw->data(), raw->size())));
                }
            }
            const auto now = clock->now();
            res.set_content(hashes.empty() ? tracker->scrape_all(now) : tracker->scrape(hashes, now),
                            "text/plain");
        });
    }
};

HttpFront::HttpFront(SimTracker& tracker, const Clock& clock, IpAddr caller)
    : impl_(std::make_unique<Impl>()) {
    impl_->tracker = &tracker;
    impl_->clock = &clock;
    impl_->caller = caller;
    impl_->install_routes();
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("http front: could not bind a loopback port");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

HttpFront::~HttpFront() {
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

} // namespace swarmwatch::simnet
