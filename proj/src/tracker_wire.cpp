#include "swarmwatch/tracker_wire.hpp"

#include <cstdio>

#include "swarmwatch/bencode.hpp"

namespace swarmwatch::tracker {

namespace {

bool unreserved(std::uint8_t c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '-' || c == '.' || c == '_' || c == '~';
}

void append_decimal(std::string& out, std::int64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%lld", static_cast<long long>(v));
    out += buf;
}

Endpoint peer_from_dict(const bencode::Value& v) {
    const auto* ip = v.find("ip");
    const auto* port = v.find("port");
    if (ip == nullptr || port == nullptr || !ip->is_string() || !port->is_integer())
        throw Error(Error::Kind::malformed, "announce: peer dict missing ip/port");
    auto parsed = parse_ip(ip->string());
    if (!parsed)
        throw Error(Error::Kind::malformed, "announce: unparseable peer ip");
    std::int64_t p = port->integer();
    if (p < 1 || p > 65535)
        throw Error(Error::Kind::malformed, "announce: peer port out of range");
    return Endpoint{*parsed, static_cast<std::uint16_t>(p)};
}

std::int64_t stat_or_zero(const bencode::Value& dict, std::string_view key) {
    const auto* v = dict.find(key);
    return (v != nullptr && v->is_integer()) ? v->integer() : 0;
}

} // namespace

std::string percent_encode(ByteSpan raw) {
    static constexpr char hex[] = "0123456789ABCDEF";
    std::string out;
    out.reserve(raw.size() * 3);
    for (std::uint8_t c : raw) {
        if (unreserved(c)) {
            out += static_cast<char>(c);
        } else {
            out += '%';
            out += hex[c >> 4];
            out += hex[c & 0xf];
        }
    }
    return out;
}

std::optional<Bytes> percent_decode(std::string_view s) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    Bytes out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '%') {
            out.push_back(static_cast<std::uint8_t>(s[i]));
            continue;
        }
        if (i + 2 >= s.size()) return std::nullopt;
        const int hi = nibble(s[i + 1]);
        const int lo = nibble(s[i + 2]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<std::uint8_t>(hi << 4 | lo));
        i += 2;
    }
    return out;
}

std::string build_announce_query(const AnnounceRequest& req) {
    if (req.listen_port == 0)
        throw std::invalid_argument("announce: listen port must be 1-65535");
    if (req.numwant > 1000)
        throw std::invalid_argument("announce: numwant must be at most 1000");

    std::string q = "info_hash=";
    q += percent_encode(ByteSpan(req.content.digest.data(), req.content.digest.size()));
    q += "&peer_id=";
    q += percent_encode(ByteSpan(req.peer_id.data(), req.peer_id.size()));
    q += "&port=";
    append_decimal(q, req.listen_port);
    q += "&uploaded=";
    append_decimal(q, req.uploaded);
    q += "&downloaded=";
    append_decimal(q, req.downloaded);
    q += "&left=";
    append_decimal(q, req.left);
    if (req.event == AnnounceEvent::started)
        q += "&event=started";
    else if (req.event == AnnounceEvent::stopped)
        q += "&event=stopped";
    q += "&numwant=";
    append_decimal(q, req.numwant);
    q += "&compact=1";
    return q;
}

AnnounceResponse parse_announce_response(ByteSpan body) {
    bencode::Decoded doc;
    try {
        doc = bencode::decode(body);
    } catch (const bencode::Error& e) {
        throw Error(Error::Kind::malformed, std::string("announce: ") + e.what());
    }
    if (!doc.value.is_dict())
        throw Error(Error::Kind::malformed, "announce: body is not a dictionary");

    if (const auto* failure = doc.value.find("failure reason")) {
        std::string reason = failure->is_string() ? failure->string() : std::string("(non-string reason)");
        throw Error(Error::Kind::failure, "tracker failure: " + reason);
    }

    AnnounceResponse out;
    out.interval = stat_or_zero(doc.value, "interval");
    out.seeds = stat_or_zero(doc.value, "complete");
    out.leechers = stat_or_zero(doc.value, "incomplete");

    const auto* peers = doc.value.find("peers");
    if (peers == nullptr)
        throw Error(Error::Kind::malformed, "announce: missing peers");
    if (peers->is_string()) {
        const std::string& blob = peers->string();
        out.peers = decode_compact_peers(ByteSpan(reinterpret_cast<const std::uint8_t*>(blob.data()), blob.size()));
    } else if (peers->is_list()) {
        out.peers.reserve(peers->list().size());
        for (const auto& entry : peers->list()) out.peers.push_back(peer_from_dict(entry));
    } else {
        throw Error(Error::Kind::malformed, "announce: peers is neither string nor list");
    }
    return out;
}

ScrapeAllResponse parse_scrape_all(ByteSpan body) {
    using bencode::Reader;
    ScrapeAllResponse out;
    try {
        Reader r(body);
        if (r.peek() != Reader::Type::dict)
            throw Error(Error::Kind::malformed, "scrape: body is not a dictionary");
        r.begin_dict();
        bool saw_files = false;
        while (r.peek() != Reader::Type::close) {
            ByteSpan key = r.read_string();
            std::string_view name(reinterpret_cast<const char*>(key.data()), key.size());
            if (name == "failure reason" && r.peek() == Reader::Type::string) {
                ByteSpan reason = r.read_string();
                throw Error(Error::Kind::failure,
                            "tracker failure: " + std::string(reinterpret_cast<const char*>(reason.data()), reason.size()));
            }
            if (name != "files") {
                r.skip_value();
                continue;
            }
            saw_files = true;
            if (r.peek() != Reader::Type::dict)
                throw Error(Error::Kind::malformed, "scrape: files is not a dictionary");
            r.begin_dict();
            // ~40 bytes of wire per entry; reserve once so 10^6-scale scrapes
            // do not rehash repeatedly.
            out.entries.reserve((body.size() - r.offset()) / 40 + 1);
            while (r.peek() != Reader::Type::close) {
                ByteSpan hash = r.read_string();
                if (hash.size() != 20)
                    throw Error(Error::Kind::bad_key_length, "scrape: files key is not 20 bytes");
                if (r.peek() != Reader::Type::dict)
                    throw Error(Error::Kind::malformed, "scrape: stats entry is not a dictionary");
                r.begin_dict();
                SwarmStats stats;
                while (r.peek() != Reader::Type::close) {
                    ByteSpan skey = r.read_string();
                    std::string_view sname(reinterpret_cast<const char*>(skey.data()), skey.size());
                    if (r.peek() == Reader::Type::integer) {
                        std::int64_t v = r.read_integer();
                        if (sname == "complete") stats.seeds = v;
                        else if (sname == "incomplete") stats.leechers = v;
                        else if (sname == "downloaded") stats.downloaded = v;
                    } else {
                        r.skip_value();
                    }
                }
                r.close();
                out.entries.emplace(ContentId::from_bytes(hash), stats);
            }
            r.close();
        }
        r.close();
        if (!r.exhausted())
            throw Error(Error::Kind::malformed, "scrape: trailing bytes after dictionary");
        if (!saw_files)
            throw Error(Error::Kind::missing_files, "scrape: missing files dictionary");
    } catch (const bencode::Error& e) {
        throw Error(Error::Kind::malformed, std::string("scrape: ") + e.what());
    }
    return out;
}

Bytes encode_compact_peers(std::span<const Endpoint> peers) {
    Bytes out;
    out.reserve(peers.size() * 6);
    for (const auto& ep : peers) {
        out.push_back(static_cast<std::uint8_t>(ep.ip.value >> 24));
        out.push_back(static_cast<std::uint8_t>(ep.ip.value >> 16));
        out.push_back(static_cast<std::uint8_t>(ep.ip.value >> 8));
        out.push_back(static_cast<std::uint8_t>(ep.ip.value));
        out.push_back(static_cast<std::uint8_t>(ep.port >> 8));
        out.push_back(static_cast<std::uint8_t>(ep.port));
    }
    return out;
}

std::vector<Endpoint> decode_compact_peers(ByteSpan blob) {
    if (blob.size() % 6 != 0)
        throw Error(Error::Kind::bad_peers_length, "announce: compact peers length not a multiple of 6");
    std::vector<Endpoint> out;
    out.reserve(blob.size() / 6);
    for (std::size_t i = 0; i < blob.size(); i += 6) {
        Endpoint ep;
        ep.ip = IpAddr::from_octets(blob[i], blob[i + 1], blob[i + 2], blob[i + 3]);
        ep.port = static_cast<std::uint16_t>((blob[i + 4] << 8) | blob[i + 5]);
        if (ep.port == 0)
            throw Error(Error::Kind::malformed, "announce: compact peer with port 0");
        out.push_back(ep);
    }
    return out;
}

} // namespace swarmwatch::tracker
