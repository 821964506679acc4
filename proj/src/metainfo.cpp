#include "swarmwatch/metainfo.hpp"

#include <algorithm>
#include <cctype>

#include <openssl/evp.h>

#include "swarmwatch/bencode.hpp"

namespace swarmwatch::meta {

namespace {

[[noreturn]] void missing(const std::string& field) {
    throw Error(Error::Kind::missing_field, "missing field: " + field);
}

[[noreturn]] void inconsistent(const std::string& why) {
    throw Error(Error::Kind::inconsistent, "inconsistent metainfo: " + why);
}

const bencode::Value& require(const bencode::Value& dict, std::string_view key) {
    const auto* v = dict.find(key);
    if (!v) missing(std::string(key));
    return *v;
}

/// Locates the raw byte span of the "info" value in a bencoded dict.
Bytes carve_info_span(ByteSpan in) {
    bencode::Reader r(in);
    r.begin_dict();
    while (r.peek() != bencode::Reader::Type::close) {
        const auto key = r.read_string();
        if (to_string(key) == "info") {
            const auto start = r.offset();
            r.skip_value();
            return Bytes(in.begin() + std::ptrdiff_t(start), in.begin() + std::ptrdiff_t(r.offset()));
        }
        r.skip_value();
    }
    missing("info");
}

bool is_padding_file(const bencode::Value& file) {
    const auto* attr = file.find("attr");
    return attr && attr->is_string() && attr->string().find('p') != std::string::npos;
}

} // namespace

Metainfo parse_torrent(ByteSpan in) {
    bencode::Decoded decoded;
    try {
        decoded = bencode::decode(in);
    } catch (const bencode::Error& e) {
        throw Error(Error::Kind::malformed, e.what());
    }
    const auto& root = decoded.value;
    if (!root.is_dict()) throw Error(Error::Kind::malformed, "torrent root is not a dictionary");

    Metainfo m;
    m.announce_url = require(root, "announce").string();
    const auto& info = require(root, "info");
    if (!info.is_dict()) throw Error(Error::Kind::malformed, "info is not a dictionary");
    m.content_name = require(info, "name").string();

    if (const auto* length = info.find("length")) {
        m.total_size = length->integer();
    } else if (const auto* files = info.find("files")) {
        for (const auto& file : files->list()) {
            if (is_padding_file(file)) continue;
            m.total_size += require(file, "length").integer();
        }
    } else {
        missing("length");
    }
    if (m.total_size <= 0) inconsistent("total size must be positive");

    m.piece_length = require(info, "piece length").integer();
    if (m.piece_length <= 0) inconsistent("piece length must be positive");

    const auto& pieces = require(info, "pieces").string();
    if (pieces.size() % 20 != 0) inconsistent("piece data length not a multiple of 20");
    m.piece_count = std::int64_t(pieces.size() / 20);
    const auto expected = (m.total_size + m.piece_length - 1) / m.piece_length;
    if (m.piece_count != expected) inconsistent("piece count does not cover content size");

    m.info_dict_raw = carve_info_span(in);
    return m;
}

ContentId info_hash(ByteSpan info_dict_raw) {
    ContentId id;
    unsigned int len = 0;
    EVP_Digest(info_dict_raw.data(), info_dict_raw.size(), id.digest.data(), &len, EVP_sha1(), nullptr);
    return id;
}

ContentId content_id(const Metainfo& m) {
    return info_hash(m.info_dict_raw);
}

namespace {

// Release-group noise filtered out of content names. Language markers
// (fr, spanish, ...) are deliberately not listed; profiling keys on them.
const std::vector<std::string_view> kStopwords = {
    "1080p", "2160p", "480p", "4k",     "720p",    "a",        "aac",      "ac3",    "an",
    "and",   "audio", "avc",  "avi",    "bdrip",   "blu",      "bluray",   "brrip",  "by",
    "cam",   "camrip", "com", "complete", "divx",  "dl",       "dts",      "dual",   "dubbed",
    "dvd",   "dvdrip", "dvdscr", "episode", "extended", "flac", "for",     "from",   "h264",
    "h265",  "hd",    "hdrip", "hdtv",  "hevc",    "in",       "internal", "limited", "mkv",
    "mp3",   "mp4",   "net",  "nfo",    "of",      "on",       "org",      "pdtv",   "proper",
    "r5",    "rar",   "readnfo", "real", "repack", "retail",   "rip",      "sample", "scr",
    "screener", "sd", "season", "sub",  "subbed",  "subs",     "tc",       "the",    "to",
    "torrent", "ts",  "uncut", "unrated", "vhs",   "vostfr",   "web",      "webdl",  "webrip",
    "with",  "wmv",   "www",  "x264",   "x265",    "xvid",     "zip",
};

bool all_digits(std::string_view t) {
    return std::all_of(t.begin(), t.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// s01, e04, s01e02, ep3, 4x08, cd2, disk1 style tags.
bool is_episode_tag(std::string_view t) {
    static const std::vector<std::string_view> prefixes = {"s", "e", "ep", "cd", "disc", "disk", "part"};
    for (auto p : prefixes) {
        if (t.size() > p.size() && t.substr(0, p.size()) == p) {
            auto rest = t.substr(p.size());
            if (all_digits(rest)) return true;
            if (p == "s" && rest.size() > 1 && rest[0] >= '0' && rest[0] <= '9') {
                const auto e = rest.find('e');
                if (e != std::string_view::npos && all_digits(rest.substr(0, e)) &&
                    all_digits(rest.substr(e + 1)) && e + 1 < rest.size()) {
                    return true;
                }
            }
        }
    }
    const auto x = t.find('x');
    return x != std::string_view::npos && x > 0 && x + 1 < t.size() && all_digits(t.substr(0, x)) &&
           all_digits(t.substr(x + 1));
}

} // namespace

const std::vector<std::string_view>& keyword_stopwords() {
    return kStopwords;
}

std::vector<std::string> extract_keywords(std::string_view name, std::size_t k) {
    std::vector<std::string> out;
    std::string token;
    auto flush = [&] {
        if (token.empty() || out.size() >= k) {
            token.clear();
            return;
        }
        if (!all_digits(token) && !is_episode_tag(token) &&
            !std::binary_search(kStopwords.begin(), kStopwords.end(), std::string_view(token))) {
            out.push_back(token);
        }
        token.clear();
    };
    for (char c : name) {
        if (std::isalnum(static_cast<unsigned char>(c))) {
            token.push_back(char(std::tolower(static_cast<unsigned char>(c))));
        } else {
            flush();
        }
    }
    flush();
    return out;
}

} // namespace swarmwatch::meta
