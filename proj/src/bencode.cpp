#include "swarmwatch/bencode.hpp"

#include <charconv>

namespace swarmwatch::bencode {

namespace {

[[noreturn]] void fail(const std::string& why) {
    throw Error(Error::Kind::malformed, "malformed bencode: " + why);
}

} // namespace

std::uint8_t Reader::byte_at(std::size_t i) const {
    if (i >= in_.size()) fail("unterminated value");
    return in_[i];
}

Reader::Type Reader::peek() const {
    switch (byte_at(pos_)) {
        case 'i': return Type::integer;
        case 'l': return Type::list;
        case 'd': return Type::dict;
        case 'e': return Type::close;
        default: break;
    }
    const auto c = byte_at(pos_);
    if (c >= '0' && c <= '9') return Type::string;
    fail("bad value prefix 0x" + to_hex(ByteSpan(&in_[pos_], 1)));
}

void Reader::expect(char c) {
    if (byte_at(pos_) != std::uint8_t(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
}

std::int64_t Reader::read_integer() {
    expect('i');
    const std::size_t start = pos_;
    if (byte_at(pos_) == '-') ++pos_;
    const std::size_t digits = pos_;
    while (byte_at(pos_) != 'e') {
        const auto c = in_[pos_];
        if (c < '0' || c > '9') fail("non-digit in integer");
        ++pos_;
    }
    if (pos_ == digits) fail("empty integer");
    // Canonical form only: no leading zeros, no "-0".
    if (in_[digits] == '0' && pos_ - digits > 1) fail("leading zero in integer");
    if (in_[start] == '-' && in_[digits] == '0') fail("negative zero");
    const char* first = reinterpret_cast<const char*>(in_.data() + start);
    const char* last = reinterpret_cast<const char*>(in_.data() + pos_);
    std::int64_t out = 0;
    const auto [ptr, ec] = std::from_chars(first, last, out);
    if (ec != std::errc() || ptr != last) fail("integer out of 64-bit range");
    ++pos_;  // 'e'
    return out;
}

std::size_t Reader::read_length() {
    const std::size_t digits = pos_;
    while (byte_at(pos_) != ':') {
        const auto c = in_[pos_];
        if (c < '0' || c > '9') fail("non-digit in string length");
        ++pos_;
    }
    if (pos_ == digits) fail("empty string length");
    if (in_[digits] == '0' && pos_ - digits > 1) fail("leading zero in string length");
    std::uint64_t len = 0;
    const char* first = reinterpret_cast<const char*>(in_.data() + digits);
    const char* last = reinterpret_cast<const char*>(in_.data() + pos_);
    const auto [ptr, ec] = std::from_chars(first, last, len);
    if (ec != std::errc() || ptr != last) fail("string length out of range");
    ++pos_;  // ':'
    if (len > in_.size() - pos_) fail("string runs past end of input");
    return std::size_t(len);
}

ByteSpan Reader::read_string() {
    const auto len = read_length();
    ByteSpan out(in_.data() + pos_, len);
    pos_ += len;
    return out;
}

void Reader::begin_list() { expect('l'); }
void Reader::begin_dict() { expect('d'); }
void Reader::close() { expect('e'); }

void Reader::skip_value() {
    std::size_t depth = 0;
    do {
        switch (peek()) {
            case Type::integer: (void)read_integer(); break;
            case Type::string: (void)read_string(); break;
            case Type::list:
            case Type::dict:
                ++pos_;
                if (++depth > kMaxDepth) fail("nesting deeper than 64");
                break;
            case Type::close:
                if (depth == 0) fail("unexpected 'e'");
                ++pos_;
                --depth;
                break;
        }
    } while (depth > 0);
}

namespace {

// depth = nesting level of the value being parsed (outermost = 1).
Value parse_value(Reader& r, std::size_t depth, bool& non_canonical) {
    if (depth > kMaxDepth) fail("nesting deeper than 64");
    switch (r.peek()) {
        case Reader::Type::integer:
            return Value(r.read_integer());
        case Reader::Type::string:
            return Value(to_string(r.read_string()));
        case Reader::Type::list: {
            r.begin_list();
            Value::List items;
            while (r.peek() != Reader::Type::close) {
                items.push_back(parse_value(r, depth + 1, non_canonical));
            }
            r.close();
            return Value(std::move(items));
        }
        case Reader::Type::dict: {
            r.begin_dict();
            Value::Dict items;
            std::string prev_key;
            bool first = true;
            while (r.peek() != Reader::Type::close) {
                auto key = to_string(r.read_string());
                if (!first && key <= prev_key) {
                    if (key == prev_key) fail("duplicate dictionary key");
                    non_canonical = true;
                }
                auto value = parse_value(r, depth + 1, non_canonical);
                items.emplace(key, std::move(value));
                prev_key = std::move(key);
                first = false;
            }
            r.close();
            return Value(std::move(items));
        }
        case Reader::Type::close:
            fail("unexpected 'e'");
    }
    fail("unreachable");
}

} // namespace

Decoded decode(ByteSpan in) {
    if (in.empty()) fail("empty input");
    Reader r(in);
    Decoded out;
    out.value = parse_value(r, 1, out.non_canonical);
    if (!r.exhausted()) {
        throw Error(Error::Kind::trailing_bytes,
                    "trailing bytes after bencode value at offset " + std::to_string(r.offset()));
    }
    return out;
}

void encode_to(const Value& v, Bytes& out) {
    if (v.is_integer()) {
        out.push_back('i');
        const auto s = std::to_string(v.integer());
        out.insert(out.end(), s.begin(), s.end());
        out.push_back('e');
    } else if (v.is_string()) {
        const auto& s = v.string();
        const auto len = std::to_string(s.size());
        out.insert(out.end(), len.begin(), len.end());
        out.push_back(':');
        out.insert(out.end(), s.begin(), s.end());
    } else if (v.is_list()) {
        out.push_back('l');
        for (const auto& item : v.list()) encode_to(item, out);
        out.push_back('e');
    } else {
        out.push_back('d');
        for (const auto& [key, value] : v.dict()) {
            const auto len = std::to_string(key.size());
            out.insert(out.end(), len.begin(), len.end());
            out.push_back(':');
            out.insert(out.end(), key.begin(), key.end());
            encode_to(value, out);
        }
        out.push_back('e');
    }
}

Bytes encode(const Value& v) {
    Bytes out;
    encode_to(v, out);
    return out;
}

} // namespace swarmwatch::bencode
