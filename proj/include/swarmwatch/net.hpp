#pragma once

#include <compare>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

namespace swarmwatch {

/// IPv4 address held in host byte order.
struct IpAddr {
    std::uint32_t value = 0;

    static constexpr IpAddr from_octets(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
        return IpAddr{(std::uint32_t(a) << 24) | (std::uint32_t(b) << 16) | (std::uint32_t(c) << 8) | d};
    }

    auto operator<=>(const IpAddr&) const = default;
};

[[nodiscard]] std::string format_ip(IpAddr ip);
[[nodiscard]] std::optional<IpAddr> parse_ip(std::string_view dotted);

struct Endpoint {
    IpAddr ip;
    std::uint16_t port = 0;

    auto operator<=>(const Endpoint&) const = default;
};

[[nodiscard]] std::string format_endpoint(Endpoint ep);

} // namespace swarmwatch

template <>
struct std::hash<swarmwatch::IpAddr> {
    std::size_t operator()(swarmwatch::IpAddr ip) const noexcept {
        return std::hash<std::uint32_t>{}(ip.value);
    }
};

template <>
struct std::hash<swarmwatch::Endpoint> {
    std::size_t operator()(swarmwatch::Endpoint ep) const noexcept {
        return std::hash<std::uint64_t>{}((std::uint64_t(ep.ip.value) << 16) | ep.port);
    }
};
