#include <chrono>
#include <cstdio>
#include <thread>

#include "swarmwatch/bytes.hpp"
#include "swarmwatch/clock.hpp"
#include "swarmwatch/content_id.hpp"
#include "swarmwatch/net.hpp"

namespace swarmwatch {

static constexpr char kHexDigits[] = "0123456789abcdef";

std::string to_hex(ByteSpan b) {
    std::string out;
    out.reserve(b.size() * 2);
    for (auto byte : b) {
        out.push_back(kHexDigits[byte >> 4]);
        out.push_back(kHexDigits[byte & 0xf]);
    }
    return out;
}

static int hex_nibble(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

std::optional<Bytes> from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) return std::nullopt;
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        const int hi = hex_nibble(hex[i]);
        const int lo = hex_nibble(hex[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(std::uint8_t((hi << 4) | lo));
    }
    return out;
}

std::string format_ip(IpAddr ip) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%u.%u.%u.%u", (ip.value >> 24) & 0xff, (ip.value >> 16) & 0xff,
                  (ip.value >> 8) & 0xff, ip.value & 0xff);
    return buf;
}

std::optional<IpAddr> parse_ip(std::string_view dotted) {
    std::uint32_t parts[4];
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        if (pos >= dotted.size()) return std::nullopt;
        std::uint32_t v = 0;
        std::size_t digits = 0;
        while (pos < dotted.size() && dotted[pos] >= '0' && dotted[pos] <= '9') {
            v = v * 10 + std::uint32_t(dotted[pos] - '0');
            if (v > 255) return std::nullopt;
            ++pos;
            ++digits;
        }
        if (digits == 0 || digits > 3) return std::nullopt;
        parts[i] = v;
        if (i < 3) {
            if (pos >= dotted.size() || dotted[pos] != '.') return std::nullopt;
            ++pos;
        }
    }
    if (pos != dotted.size()) return std::nullopt;
    return IpAddr{(parts[0] << 24) | (parts[1] << 16) | (parts[2] << 8) | parts[3]};
}

std::string format_endpoint(Endpoint ep) {
    return format_ip(ep.ip) + ":" + std::to_string(ep.port);
}

std::optional<ContentId> ContentId::from_hex(std::string_view hex) {
    const auto raw = swarmwatch::from_hex(hex);
    if (!raw || raw->size() != 20) return std::nullopt;
    return from_bytes(*raw);
}

ContentId ContentId::from_bytes(ByteSpan b) {
    ContentId id;
    std::memcpy(id.digest.data(), b.data(), 20);
    return id;
}

std::string ContentId::hex() const {
    return to_hex(bytes());
}

std::int64_t RealClock::now() const {
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

void RealClock::sleep_until(std::int64_t t) {
    const auto current = now();
    if (t > current) std::this_thread::sleep_for(std::chrono::seconds(t - current));
}

} // namespace swarmwatch
