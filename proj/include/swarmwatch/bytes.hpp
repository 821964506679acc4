#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace swarmwatch {

using Bytes = std::vector<std::uint8_t>;
using ByteSpan = std::span<const std::uint8_t>;

[[nodiscard]] inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

[[nodiscard]] inline std::string to_string(ByteSpan b) {
    return std::string(b.begin(), b.end());
}

[[nodiscard]] std::string to_hex(ByteSpan b);
[[nodiscard]] std::optional<Bytes> from_hex(std::string_view hex);

} // namespace swarmwatch
