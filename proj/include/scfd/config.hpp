#ifndef SCFD_CONFIG_HPP
#define SCFD_CONFIG_HPP

#include <cctype>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "ifs.hpp"

namespace scfd {

class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// One value in the run-configuration language:
//   key = number | "string" | true/false | [v, v, ...] | {key = v, ...}
struct ConfigValue {
    enum class Kind { Number, String, Boolean, List, Table };
    Kind kind = Kind::Number;
    double number = 0.0;
    std::string text;
    bool boolean = false;
    std::vector<ConfigValue> list;
    std::map<std::string, ConfigValue> table;
};

// Parsed configuration. Repeated keys are kept in order (the `map` entries
// of an IFS definition rely on this).
class Config {
public:
    void add(std::string key, ConfigValue v) {
        entries_.emplace_back(std::move(key), std::move(v));
    }

    bool has(const std::string& key) const { return find(key) != nullptr; }

    const ConfigValue* find(const std::string& key) const {
        const ConfigValue* out = nullptr;
        for (const auto& [k, v] : entries_)
            if (k == key) out = &v; // last one wins
        return out;
    }

    std::vector<const ConfigValue*> find_all(const std::string& key) const {
        std::vector<const ConfigValue*> out;
        for (const auto& [k, v] : entries_)
            if (k == key) out.push_back(&v);
        return out;
    }

    double number(const std::string& key) const {
        const auto* v = find(key);
        if (!v || v->kind != ConfigValue::Kind::Number)
            throw ConfigError("config: missing numeric field '" + key + "'");
        return v->number;
    }

    double number_or(const std::string& key, double fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (v->kind != ConfigValue::Kind::Number)
            throw ConfigError("config: field '" + key + "' must be a number");
        return v->number;
    }

    std::int64_t integer(const std::string& key) const {
        return static_cast<std::int64_t>(std::llround(number(key)));
    }

    std::int64_t integer_or(const std::string& key, std::int64_t fallback) const {
        return static_cast<std::int64_t>(
            std::llround(number_or(key, static_cast<double>(fallback))));
    }

    std::string text_or(const std::string& key, std::string fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (v->kind != ConfigValue::Kind::String)
            throw ConfigError("config: field '" + key + "' must be a string");
        return v->text;
    }

    bool flag_or(const std::string& key, bool fallback) const {
        const auto* v = find(key);
        if (!v) return fallback;
        if (v->kind != ConfigValue::Kind::Boolean)
            throw ConfigError("config: field '" + key + "' must be a boolean");
        return v->boolean;
    }

    std::vector<double> numbers(const std::string& key) const {
        const auto* v = find(key);
        if (!v || v->kind != ConfigValue::Kind::List)
            throw ConfigError("config: missing list field '" + key + "'");
        std::vector<double> out;
        for (const auto& item : v->list) {
            if (item.kind != ConfigValue::Kind::Number)
                throw ConfigError("config: list '" + key + "' must hold numbers");
            out.push_back(item.number);
        }
        return out;
    }

    const std::string& source() const { return source_; }
    void set_source(std::string s) { source_ = std::move(s); }

private:
    std::vector<std::pair<std::string, ConfigValue>> entries_;
    std::string source_;
};

namespace detail {

struct ConfigLexer {
    const std::string& s;
    std::size_t pos = 0;
    int line = 1;

    void skip_space(bool stop_at_newline) {
        while (pos < s.size()) {
            const char c = s[pos];
            if (c == '#') {
                while (pos < s.size() && s[pos] != '\n') ++pos;
            } else if (c == '\n') {
                if (stop_at_newline) return;
                ++line;
                ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else {
                return;
            }
        }
    }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError("config line " + std::to_string(line) + ": " + msg);
    }

    char peek() const { return pos < s.size() ? s[pos] : '\0'; }

    std::string identifier() {
        std::size_t start = pos;
        while (pos < s.size() &&
               (std::isalnum(static_cast<unsigned char>(s[pos])) ||
                s[pos] == '_' || s[pos] == '-'))
            ++pos;
        if (start == pos) fail("expected a key");
        return s.substr(start, pos - start);
    }

    ConfigValue value() {
        skip_space(false);
        const char c = peek();
        if (c == '[') return list();
        if (c == '{') return table();
        if (c == '"') return string_value();
        if (std::isalpha(static_cast<unsigned char>(c))) {
            const std::string word = identifier();
            ConfigValue v;
            if (word == "true" || word == "false") {
                v.kind = ConfigValue::Kind::Boolean;
                v.boolean = word == "true";
                return v;
            }
            // bare words read as strings (map kinds etc.)
            v.kind = ConfigValue::Kind::String;
            v.text = word;
            return v;
        }
        return number_value();
    }

    ConfigValue number_value() {
        const std::size_t start = pos;
        while (pos < s.size() &&
               (std::isdigit(static_cast<unsigned char>(s[pos])) ||
                s[pos] == '+' || s[pos] == '-' || s[pos] == '.' ||
                s[pos] == 'e' || s[pos] == 'E'))
            ++pos;
        if (start == pos) fail("expected a value");
        try {
            ConfigValue v;
            v.kind = ConfigValue::Kind::Number;
            v.number = std::stod(s.substr(start, pos - start));
            return v;
        } catch (...) {
            fail("malformed number '" + s.substr(start, pos - start) + "'");
        }
    }

    ConfigValue string_value() {
        ++pos; // opening quote
        std::string out;
        while (pos < s.size() && s[pos] != '"') {
            if (s[pos] == '\n') fail("unterminated string");
            out += s[pos++];
        }
        if (pos >= s.size()) fail("unterminated string");
        ++pos;
        ConfigValue v;
        v.kind = ConfigValue::Kind::String;
        v.text = std::move(out);
        return v;
    }

    ConfigValue list() {
        ++pos; // [
        ConfigValue v;
        v.kind = ConfigValue::Kind::List;
        skip_space(false);
        if (peek() == ']') {
            ++pos;
            return v;
        }
        for (;;) {
            v.list.push_back(value());
            skip_space(false);
            if (peek() == ',') {
                ++pos;
                skip_space(false);
                continue;
            }
            if (peek() == ']') {
                ++pos;
                return v;
            }
            fail("expected ',' or ']' in list");
        }
    }

    ConfigValue table() {
        ++pos; // {
        ConfigValue v;
        v.kind = ConfigValue::Kind::Table;
        for (;;) {
            skip_space(false);
            if (peek() == '}') {
                ++pos;
                return v;
            }
            const std::string key = identifier();
            skip_space(false);
            if (peek() != '=') fail("expected '=' in table");
            ++pos;
            v.table[key] = value();
            skip_space(false);
            if (peek() == ',') {
                ++pos;
                continue;
            }
            if (peek() == '}') {
                ++pos;
                return v;
            }
            fail("expected ',' or '}' in table");
        }
    }
};

} // namespace detail

inline Config parse_config(const std::string& text) {
    Config cfg;
    cfg.set_source(text);
    detail::ConfigLexer lex{text};
    for (;;) {
        lex.skip_space(false);
        if (lex.pos >= text.size()) break;
        const std::string key = lex.identifier();
        lex.skip_space(true);
        if (lex.peek() != '=') lex.fail("expected '=' after key '" + key + "'");
        ++lex.pos;
        cfg.add(key, lex.value());
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// IFS definition:  interval = [lo, hi], probabilities = [...], and one
//   map = {kind = affine|polynomial|conjugated-affine, coefficients = [...]}
// entry per map (affine and conjugated-affine coefficients are [r, b]).
// ---------------------------------------------------------------------------
inline Ifs ifs_from_config(const Config& cfg) {
    const auto* iv = cfg.find("interval");
    if (!iv || iv->kind != ConfigValue::Kind::List || iv->list.size() != 2)
        throw ConfigError("config: interval = [lo, hi] required");
    Interval interval{iv->list[0].number, iv->list[1].number};

    const auto probs = cfg.numbers("probabilities");

    std::vector<IfsMap> maps;
    for (const auto* entry : cfg.find_all("map")) {
        if (entry->kind != ConfigValue::Kind::Table)
            throw ConfigError("config: map entries must be {kind = ..., coefficients = [...]}");
        const auto kind_it = entry->table.find("kind");
        const auto coef_it = entry->table.find("coefficients");
        if (kind_it == entry->table.end() || coef_it == entry->table.end())
            throw ConfigError("config: map needs 'kind' and 'coefficients'");
        std::vector<double> coef;
        for (const auto& c : coef_it->second.list) coef.push_back(c.number);
        const std::string& kind = kind_it->second.text;
        if (kind == "affine") {
            if (coef.size() != 2)
                throw ConfigError("config: affine map needs [r, b]");
            maps.push_back(IfsMap::affine(coef[0], coef[1]));
        } else if (kind == "polynomial") {
            maps.push_back(IfsMap::polynomial(coef));
        } else if (kind == "conjugated-affine") {
            if (coef.size() != 2)
                throw ConfigError("config: conjugated-affine map needs [r, b]");
            const auto tag_it = entry->table.find("conjugacy");
            if (tag_it != entry->table.end() && tag_it->second.text != "exp")
                throw ConfigError("config: unknown conjugacy tag '" +
                                  tag_it->second.text + "'");
            maps.push_back(IfsMap::conjugated_affine(coef[0], coef[1]));
        } else {
            throw ConfigError("config: unknown map kind '" + kind + "'");
        }
    }
    if (maps.empty()) throw ConfigError("config: at least one map required");

    try {
        return Ifs::create(std::move(maps), probs, interval);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

// Grid helper: either an explicit list `<name>_grid = [...]` or a geometric
// specification `<name>_min/_max/_count`.
inline std::vector<double> grid_from_config(const Config& cfg,
                                            const std::string& name) {
    if (cfg.has(name + "_grid")) return cfg.numbers(name + "_grid");
    if (cfg.has(name + "_min") && cfg.has(name + "_max") &&
        cfg.has(name + "_count")) {
        const double lo = cfg.number(name + "_min");
        const double hi = cfg.number(name + "_max");
        const int n = static_cast<int>(cfg.integer(name + "_count"));
        if (n < 1 || !(hi >= lo) || !(lo > 0.0))
            throw ConfigError("config: bad geometric grid for '" + name + "'");
        std::vector<double> out;
        for (int i = 0; i < n; ++i)
            out.push_back(n == 1 ? lo
                                 : lo * std::pow(hi / lo,
                                                 static_cast<double>(i) / (n - 1)));
        return out;
    }
    throw ConfigError("config: grid '" + name + "_grid' (or " + name +
                      "_min/_max/_count) required");
}

} // namespace scfd

#endif
