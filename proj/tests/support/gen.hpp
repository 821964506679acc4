#pragma once

#include <bit>
#include <string>

#include "swarmwatch/bencode.hpp"
#include "swarmwatch/rng.hpp"

namespace testutil {

using swarmwatch::Rng;
using swarmwatch::bencode::Value;

inline std::string gen_raw_string(Rng& rng, std::size_t max_len = 24) {
    std::size_t len = rng.below(max_len + 1);
    std::string s;
    s.reserve(len);
    for (std::size_t i = 0; i < len; ++i) s += static_cast<char>(rng.below(256));
    return s;
}

/// Arbitrary bencode value; dictionary keys are unique by construction and
/// the Value dict sorts them, so every generated value is canonical.
inline Value gen_value(Rng& rng, int depth = 3) {
    switch (depth > 0 ? rng.below(4) : rng.below(2)) {
        case 0:
            return Value(std::bit_cast<std::int64_t>(rng.next()));
        case 1:
            return Value(gen_raw_string(rng));
        case 2: {
            Value::List l;
            std::size_t n = rng.below(5);
            l.reserve(n);
            for (std::size_t i = 0; i < n; ++i) l.push_back(gen_value(rng, depth - 1));
            return Value(std::move(l));
        }
        default: {
            Value::Dict d;
            std::size_t n = rng.below(5);
            for (std::size_t i = 0; i < n; ++i) d.emplace(gen_raw_string(rng, 12), gen_value(rng, depth - 1));
            return Value(std::move(d));
        }
    }
}

} // namespace testutil
