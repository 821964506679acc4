#include "swarmwatch/transport.hpp"

#include <charconv>

#include "httplib_zlib.hpp"

namespace swarmwatch {

std::optional<UrlParts> parse_http_url(std::string_view url) {
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme) return std::nullopt;
    std::string_view rest = url.substr(scheme.size());

    std::size_t slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    std::string_view path = slash == std::string_view::npos ? std::string_view("/") : rest.substr(slash);
    if (authority.empty()) return std::nullopt;

    UrlParts parts;
    parts.path = std::string(path);
    std::size_t colon = authority.find(':');
    if (colon == std::string_view::npos) {
        parts.host = std::string(authority);
    } else {
        parts.host = std::string(authority.substr(0, colon));
        std::string_view port_sv = authority.substr(colon + 1);
        unsigned port = 0;
        auto [ptr, ec] = std::from_chars(port_sv.data(), port_sv.data() + port_sv.size(), port);
        if (ec != std::errc{} || ptr != port_sv.data() + port_sv.size() || port == 0 || port > 65535)
            return std::nullopt;
        parts.port = static_cast<std::uint16_t>(port);
    }
    if (parts.host.empty()) return std::nullopt;
    return parts;
}

std::optional<std::string> scrape_url_from_announce(std::string_view announce_url) {
    constexpr std::string_view segment = "announce";
    std::size_t query = announce_url.find('?');
    std::string_view base = announce_url.substr(0, query);
    if (base.size() < segment.size() || base.substr(base.size() - segment.size()) != segment)
        return std::nullopt;
    std::size_t start = base.size() - segment.size();
    if (start == 0 || base[start - 1] != '/') return std::nullopt;
    std::string out(base.substr(0, start));
    out += "scrape";
    if (query != std::string_view::npos) out += announce_url.substr(query);
    return out;
}

namespace {

class HttpTransport final : public TrackerTransport {
public:
    explicit HttpTransport(int timeout_ms) : timeout_ms_(timeout_ms) {}

    TransportResult get(const std::string& url) override {
        TransportResult result;
        auto parts = parse_http_url(url);
        if (!parts) {
            result.error = "unsupported url: " + url;
            return result;
        }
        httplib::Client client(parts->host, parts->port);
        client.set_connection_timeout(0, timeout_ms_ * 1000);
        client.set_read_timeout(0, timeout_ms_ * 1000);
        client.set_decompress(true);

        auto res = client.Get(parts->path, {{"Accept-Encoding", "gzip, identity"}});
        if (!res) {
            result.error = "request failed: " + httplib::to_string(res.error());
            return result;
        }
        result.status = res->status;
        result.body = to_bytes(res->body);
        return result;
    }

private:
    int timeout_ms_;
};

} // namespace

std::unique_ptr<TrackerTransport> make_http_transport(int timeout_ms) {
    return std::make_unique<HttpTransport>(timeout_ms);
}

} // namespace swarmwatch
