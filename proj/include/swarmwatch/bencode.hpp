#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "swarmwatch/bytes.hpp"

namespace swarmwatch::bencode {

class Error : public std::runtime_error {
public:
    enum class Kind { malformed, trailing_bytes };

    Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    [[nodiscard]] Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// One bencoded value. Byte strings are held as std::string carrying raw
/// octets; dictionary keys compare bytewise, which keeps std::map iteration
/// in canonical wire order.
class Value {
public:
    using List = std::vector<Value>;
    using Dict = std::map<std::string, Value>;

    Value() : v_(std::int64_t{0}) {}
    Value(std::int64_t i) : v_(i) {}
    Value(std::string bytes) : v_(std::move(bytes)) {}
    Value(const char* s) : v_(std::string(s)) {}
    Value(List l) : v_(std::move(l)) {}
    Value(Dict d) : v_(std::move(d)) {}

    [[nodiscard]] bool is_integer() const { return std::holds_alternative<std::int64_t>(v_); }
    [[nodiscard]] bool is_string() const { return std::holds_alternative<std::string>(v_); }
    [[nodiscard]] bool is_list() const { return std::holds_alternative<List>(v_); }
    [[nodiscard]] bool is_dict() const { return std::holds_alternative<Dict>(v_); }

    [[nodiscard]] std::int64_t integer() const { return get<std::int64_t>("integer"); }
    [[nodiscard]] const std::string& string() const { return get<std::string>("string"); }
    [[nodiscard]] const List& list() const { return get<List>("list"); }
    [[nodiscard]] const Dict& dict() const { return get<Dict>("dict"); }
    [[nodiscard]] List& list() { return std::get<List>(v_); }
    [[nodiscard]] Dict& dict() { return std::get<Dict>(v_); }

    /// Dictionary lookup; nullptr when absent or when this is not a dict.
    [[nodiscard]] const Value* find(std::string_view key) const {
        if (!is_dict()) return nullptr;
        auto it = dict().find(std::string(key));
        return it == dict().end() ? nullptr : &it->second;
    }

    bool operator==(const Value&) const = default;

private:
    template <typename T>
    const T& get(const char* name) const {
        if (auto* p = std::get_if<T>(&v_)) return *p;
        throw Error(Error::Kind::malformed, std::string("bencode value is not a ") + name);
    }

    std::variant<std::int64_t, std::string, List, Dict> v_;
};

struct Decoded {
    Value value;
    /// Set when a dictionary arrived with unsorted keys. Tolerated on input,
    /// but re-encoding will not reproduce the original bytes.
    bool non_canonical = false;
};

inline constexpr std::size_t kMaxDepth = 64;

/// Decodes exactly one value spanning the whole input.
[[nodiscard]] Decoded decode(ByteSpan in);

/// Canonical encoding: sorted dictionary keys, minimal integers.
[[nodiscard]] Bytes encode(const Value& v);
void encode_to(const Value& v, Bytes& out);

/// Pull parser over a bencoded buffer. No tree allocation; used by the
/// high-volume response parsers and for carving out raw sub-spans.
class Reader {
public:
    enum class Type { integer, string, list, dict, close };

    explicit Reader(ByteSpan in) : in_(in) {}

    [[nodiscard]] Type peek() const;
    [[nodiscard]] std::int64_t read_integer();
    [[nodiscard]] ByteSpan read_string();  // view into the input buffer
    void begin_list();
    void begin_dict();
    void close();  // consume the 'e' ending the innermost list/dict
    void skip_value();

    [[nodiscard]] std::size_t offset() const { return pos_; }
    [[nodiscard]] bool exhausted() const { return pos_ == in_.size(); }

private:
    [[nodiscard]] std::uint8_t byte_at(std::size_t i) const;
    void expect(char c);
    [[nodiscard]] std::size_t read_length();

    ByteSpan in_;
    std::size_t pos_ = 0;
};

} // namespace swarmwatch::bencode
