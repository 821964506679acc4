#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <string>
#include <string_view>

#include "swarmwatch/bytes.hpp"

namespace swarmwatch {

/// 20-octet identifier of a content, the join key across all subsystems.
struct ContentId {
    std::array<std::uint8_t, 20> digest{};

    static std::optional<ContentId> from_hex(std::string_view hex);
    static ContentId from_bytes(ByteSpan b);  // requires b.size() == 20

    [[nodiscard]] std::string hex() const;
    [[nodiscard]] ByteSpan bytes() const { return ByteSpan(digest.data(), digest.size()); }

    auto operator<=>(const ContentId&) const = default;
};

} // namespace swarmwatch

template <>
struct std::hash<swarmwatch::ContentId> {
    std::size_t operator()(const swarmwatch::ContentId& id) const noexcept {
        std::uint64_t v;
        std::memcpy(&v, id.digest.data(), sizeof v);
        return std::size_t(v);
    }
};
