#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>

#include "photosplat/common.hpp"

namespace psplat {

// key = value text config, one entry per line, '#' comments, whitespace
// trimmed. Typed getters throw ValidationError on unparsable values.
class Config {
public:
    static Config load(const std::string& path);
    static Config from_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) != 0; }
    void set(const std::string& key, const std::string& value) { values_[key] = value; }

    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key, double fallback) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    // Rejects keys outside the known set (typo guard for CLI configs).
    void check_known(const std::set<std::string>& known) const;

    const std::map<std::string, std::string>& entries() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

}  // namespace psplat
