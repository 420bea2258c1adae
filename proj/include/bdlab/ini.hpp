#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "bdlab/errors.hpp"

namespace bdlab {

// Key-value configuration file with [sections], '#' or ';' comments, and
// key = value lines. Flag overrides are applied by the CLI afterwards.
using IniData = std::map<std::string, std::map<std::string, std::string>>;

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace detail

inline IniData parse_ini(std::istream& in, const std::string& origin) {
    IniData data;
    std::string section;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ConfigError(origin + ":" + std::to_string(line_no) + ": malformed section header");
            section = detail::trim(t.substr(1, t.size() - 2));
            data[section];
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty())
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        data[section][key] = value;
    }
    return data;
}

inline IniData parse_ini_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config file " + path);
    return parse_ini(in, path);
}

// Typed reader that records which keys were consumed so unknown keys can be
// reported by name.
class IniReader {
public:
    explicit IniReader(IniData data) : data_(std::move(data)) {}

    bool has(const std::string& section, const std::string& key) const {
        auto s = data_.find(section);
        return s != data_.end() && s->second.count(key) > 0;
    }

    std::string get_string(const std::string& section, const std::string& key,
                           const std::string& fallback) {
        auto s = data_.find(section);
        if (s == data_.end()) return fallback;
        auto k = s->second.find(key);
        if (k == s->second.end()) return fallback;
        consumed_[section].insert(key);
        return k->second;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) {
        const std::string raw = get_string(section, key, "");
        if (raw.empty() && !has(section, key)) return fallback;
        try {
            std::size_t pos = 0;
            const double v = std::stod(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(section + "." + key + ": expected a number, got '" + raw + "'");
        }
    }

    long get_long(const std::string& section, const std::string& key, long fallback) {
        const std::string raw = get_string(section, key, "");
        if (raw.empty() && !has(section, key)) return fallback;
        try {
            std::size_t pos = 0;
            const long v = std::stol(raw, &pos);
            if (pos != raw.size()) throw std::invalid_argument(raw);
            return v;
        } catch (const std::exception&) {
            throw ConfigError(section + "." + key + ": expected an integer, got '" + raw + "'");
        }
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) {
        const std::string raw = get_string(section, key, "");
        if (raw.empty() && !has(section, key)) return fallback;
        if (raw == "true" || raw == "1" || raw == "yes") return true;
        if (raw == "false" || raw == "0" || raw == "no") return false;
        throw ConfigError(section + "." + key + ": expected a boolean, got '" + raw + "'");
    }

    template <typename T, typename Parse>
    std::vector<T> get_list(const std::string& section, const std::string& key,
                            std::vector<T> fallback, Parse parse) {
        const std::string raw = get_string(section, key, "");
        if (raw.empty() && !has(section, key)) return fallback;
        std::vector<T> out;
        std::stringstream ss(raw);
        std::string item;
        while (std::getline(ss, item, ',')) {
            const std::string t = detail::trim(item);
            if (t.empty()) continue;
            try {
                out.push_back(parse(t));
            } catch (const std::exception&) {
                throw ConfigError(section + "." + key + ": malformed list element '" + t + "'");
            }
        }
        if (out.empty()) throw ConfigError(section + "." + key + ": empty list");
        return out;
    }

    // Throws naming the first key that no consumer asked for.
    void reject_unknown_keys() const {
        for (const auto& [section, keys] : data_) {
            auto c = consumed_.find(section);
            for (const auto& [key, value] : keys) {
                if (c == consumed_.end() || c->second.count(key) == 0)
                    throw ConfigError("unknown config key " + section + "." + key);
            }
        }
    }

private:
    IniData data_;
    std::map<std::string, std::set<std::string>> consumed_;
};

}  // namespace bdlab
