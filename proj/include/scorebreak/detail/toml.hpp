#pragma once

#include <cctype>
#include <cerrno>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "scorebreak/errors.hpp"

// Minimal TOML reader covering what the bundled generator specs use: bare and
// quoted dotted keys, [table] and [[array-of-tables]] headers, strings,
// integers, floats, booleans, and single-line arrays. No dates, multi-line
// strings, or inline tables; integers keep full 64-bit precision (seeds).

namespace scorebreak::toml {

struct Value {
    enum class Kind { Table, Array, String, Integer, Float, Boolean };
    Kind kind = Kind::Table;

    std::map<std::string, Value> table;
    std::vector<Value> array;
    std::string str;
    std::int64_t integer = 0;
    double number = 0.0;
    bool boolean = false;

    bool has(const std::string& key) const { return kind == Kind::Table && table.count(key); }

    const Value& at(const std::string& key) const {
        if (kind != Kind::Table)
            throw Error(ErrorKind::InvalidSpec, "'" + key + "' looked up in a non-table value");
        auto it = table.find(key);
        if (it == table.end())
            throw Error(ErrorKind::InvalidSpec, "missing key '" + key + "'");
        return it->second;
    }

    std::string as_string(const std::string& what) const {
        if (kind != Kind::String)
            throw Error(ErrorKind::InvalidSpec, what + " must be a string");
        return str;
    }
    std::int64_t as_integer(const std::string& what) const {
        if (kind != Kind::Integer)
            throw Error(ErrorKind::InvalidSpec, what + " must be an integer");
        return integer;
    }
    double as_number(const std::string& what) const {
        if (kind == Kind::Integer) return static_cast<double>(integer);
        if (kind != Kind::Float)
            throw Error(ErrorKind::InvalidSpec, what + " must be a number");
        return number;
    }
    bool as_bool(const std::string& what) const {
        if (kind != Kind::Boolean)
            throw Error(ErrorKind::InvalidSpec, what + " must be true or false");
        return boolean;
    }
    const std::vector<Value>& as_array(const std::string& what) const {
        if (kind != Kind::Array)
            throw Error(ErrorKind::InvalidSpec, what + " must be an array");
        return array;
    }
};

namespace detail {

[[noreturn]] inline void fail(std::size_t line, const std::string& why) {
    throw Error(ErrorKind::InvalidSpec, "line " + std::to_string(line) + ": " + why);
}

inline void skip_ws(const std::string& s, std::size_t& i) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
}

inline std::string parse_basic_string(const std::string& s, std::size_t& i, std::size_t line) {
    // s[i] == '"'
    ++i;
    std::string out;
    while (i < s.size() && s[i] != '"') {
        if (s[i] == '\\') {
            ++i;
            if (i >= s.size()) fail(line, "dangling escape in string");
            switch (s[i]) {
                case '"': out += '"'; break;
                case '\\': out += '\\'; break;
                case 'n': out += '\n'; break;
                case 't': out += '\t'; break;
                default: fail(line, std::string("unsupported escape \\") + s[i]);
            }
        } else {
            out += s[i];
        }
        ++i;
    }
    if (i >= s.size()) fail(line, "unterminated string");
    ++i;  // closing quote
    return out;
}

inline std::string parse_key_segment(const std::string& s, std::size_t& i, std::size_t line) {
    skip_ws(s, i);
    if (i < s.size() && s[i] == '"') return parse_basic_string(s, i, line);
    std::size_t start = i;
    while (i < s.size() &&
           (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_' || s[i] == '-'))
        ++i;
    if (i == start) fail(line, "expected a key");
    return s.substr(start, i - start);
}

inline std::vector<std::string> parse_key_path(const std::string& s, std::size_t& i,
                                               std::size_t line) {
    std::vector<std::string> path;
    for (;;) {
        path.push_back(parse_key_segment(s, i, line));
        skip_ws(s, i);
        if (i < s.size() && s[i] == '.') {
            ++i;
            continue;
        }
        return path;
    }
}

inline Value parse_value(const std::string& s, std::size_t& i, std::size_t line);

inline Value parse_scalar(const std::string& s, std::size_t& i, std::size_t line) {
    Value v;
    if (s.compare(i, 4, "true") == 0) {
        v.kind = Value::Kind::Boolean;
        v.boolean = true;
        i += 4;
        return v;
    }
    if (s.compare(i, 5, "false") == 0) {
        v.kind = Value::Kind::Boolean;
        v.boolean = false;
        i += 5;
        return v;
    }
    std::size_t end = i;
    while (end < s.size() && s[end] != ',' && s[end] != ']' && s[end] != '#') ++end;
    std::string tok = s.substr(i, end - i);
    while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t')) tok.pop_back();
    if (tok.empty()) fail(line, "expected a value");

    char* stop = nullptr;
    // Integer first: a token like "42" must keep 64-bit precision.
    errno = 0;
    long long as_int = std::strtoll(tok.c_str(), &stop, 10);
    if (errno == 0 && stop == tok.c_str() + tok.size()) {
        v.kind = Value::Kind::Integer;
        v.integer = as_int;
        i += tok.size();
        return v;
    }
    double as_float = std::strtod(tok.c_str(), &stop);
    if (stop == tok.c_str() + tok.size()) {
        v.kind = Value::Kind::Float;
        v.number = as_float;
        i += tok.size();
        return v;
    }
    fail(line, "cannot parse value '" + tok + "'");
}

inline Value parse_value(const std::string& s, std::size_t& i, std::size_t line) {
    skip_ws(s, i);
    if (i >= s.size()) fail(line, "missing value");
    if (s[i] == '"') {
        Value v;
        v.kind = Value::Kind::String;
        v.str = parse_basic_string(s, i, line);
        return v;
    }
    if (s[i] == '[') {
        Value v;
        v.kind = Value::Kind::Array;
        ++i;
        skip_ws(s, i);
        if (i < s.size() && s[i] == ']') {
            ++i;
            return v;
        }
        for (;;) {
            v.array.push_back(parse_value(s, i, line));
            skip_ws(s, i);
            if (i < s.size() && s[i] == ',') {
                ++i;
                skip_ws(s, i);
                if (i < s.size() && s[i] == ']') { ++i; return v; }  // trailing comma
                continue;
            }
            if (i < s.size() && s[i] == ']') {
                ++i;
                return v;
            }
            fail(line, "arrays must close on the same line");
        }
    }
    return parse_scalar(s, i, line);
}

inline std::string strip_comment(const std::string& line) {
    bool in_string = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (c == '"' && (i == 0 || line[i - 1] != '\\')) in_string = !in_string;
        if (c == '#' && !in_string) return line.substr(0, i);
    }
    return line;
}

inline Value* navigate(Value& root, const std::vector<std::string>& path, std::size_t upto,
                       std::size_t line) {
    Value* cur = &root;
    for (std::size_t d = 0; d < upto; ++d) {
        if (cur->kind == Value::Kind::Array) {
            if (cur->array.empty()) fail(line, "empty table array");
            cur = &cur->array.back();
        }
        if (cur->kind != Value::Kind::Table) fail(line, "key path crosses a non-table");
        cur = &cur->table[path[d]];  // default-constructed Value is an empty table
        // a fresh entry is already Kind::Table
    }
    if (cur->kind == Value::Kind::Array) {
        if (cur->array.empty()) fail(line, "empty table array");
        cur = &cur->array.back();
    }
    return cur;
}

}  // namespace detail

inline Value parse(std::istream& in) {
    Value root;
    Value* current = &root;
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = detail::strip_comment(raw);
        std::size_t i = 0;
        detail::skip_ws(line, i);
        while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
            line.pop_back();
        if (i >= line.size()) continue;

        if (line[i] == '[') {
            bool array_table = i + 1 < line.size() && line[i + 1] == '[';
            i += array_table ? 2 : 1;
            auto path = detail::parse_key_path(line, i, lineno);
            detail::skip_ws(line, i);
            const char* closer = array_table ? "]]" : "]";
            if (line.compare(i, std::strlen(closer), closer) != 0)
                detail::fail(lineno, "unterminated table header");
            i += std::strlen(closer);
            detail::skip_ws(line, i);
            if (i != line.size()) detail::fail(lineno, "trailing text after table header");

            Value* parent = detail::navigate(root, path, path.size() - 1, lineno);
            Value& slot = parent->table[path.back()];
            if (array_table) {
                if (slot.kind == Value::Kind::Table && slot.table.empty() && slot.array.empty())
                    slot.kind = Value::Kind::Array;
                if (slot.kind != Value::Kind::Array)
                    detail::fail(lineno, "'" + path.back() + "' is not a table array");
                slot.array.emplace_back();
                current = &slot.array.back();
            } else {
                if (slot.kind != Value::Kind::Table)
                    detail::fail(lineno, "'" + path.back() + "' redefined as a table");
                current = &slot;
            }
            continue;
        }

        auto path = detail::parse_key_path(line, i, lineno);
        detail::skip_ws(line, i);
        if (i >= line.size() || line[i] != '=') detail::fail(lineno, "expected '='");
        ++i;
        Value v = detail::parse_value(line, i, lineno);
        detail::skip_ws(line, i);
        if (i != line.size()) detail::fail(lineno, "trailing text after value");

        Value* parent = detail::navigate(*current, path, path.size() - 1, lineno);
        if (parent->table.count(path.back())) {
            const Value& existing = parent->table[path.back()];
            if (!(existing.kind == Value::Kind::Table && existing.table.empty()))
                detail::fail(lineno, "duplicate key '" + path.back() + "'");
        }
        parent->table[path.back()] = std::move(v);
    }
    return root;
}

inline Value parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::IoError, "cannot open " + path);
    try {
        return parse(in);
    } catch (const Error& e) {
        throw Error::wrap(e, path);
    }
}

}  // namespace scorebreak::toml
