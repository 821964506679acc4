#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "swarmwatch/bytes.hpp"
#include "swarmwatch/content_id.hpp"

namespace swarmwatch::meta {

class Error : public std::runtime_error {
public:
    enum class Kind { malformed, missing_field, inconsistent };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

struct Metainfo {
    std::string announce_url;
    std::string content_name;
    std::int64_t total_size = 0;    // bytes, padding files excluded
    std::int64_t piece_length = 0;  // bytes
    std::int64_t piece_count = 0;
    /// Exact bytes of the info dictionary as they appeared in the file.
    Bytes info_dict_raw;
};

/// Parses a .torrent file. The info span is carved out byte-identical to
/// the input, so the derived content id survives non-canonical files.
[[nodiscard]] Metainfo parse_torrent(ByteSpan in);

/// SHA-1 over the raw info dictionary bytes.
[[nodiscard]] ContentId content_id(const Metainfo& m);
[[nodiscard]] ContentId info_hash(ByteSpan info_dict_raw);

/// First k content-name tokens that survive the stopword/tag filter,
/// lowercased, in order of appearance.
[[nodiscard]] std::vector<std::string> extract_keywords(std::string_view name, std::size_t k);

/// The shipped release-tag/stopword list (sorted), for inspection.
[[nodiscard]] const std::vector<std::string_view>& keyword_stopwords();

} // namespace swarmwatch::meta
