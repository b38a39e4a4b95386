#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace t2dm {

// Flat `key = value` text config (# comments, blank lines ignored). Used for
// the feature map / valid-range file; richer structures live in JSON.
class KvConfig {
public:
    KvConfig() = default;
    static KvConfig parse_file(const std::filesystem::path& file);
    static KvConfig parse_string(const std::string& text);

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    int get_int(const std::string& key) const;
    // Pipe-separated list ("a|b|c").
    std::vector<std::string> get_list(const std::string& key) const;

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    const std::map<std::string, std::string>& all() const { return values_; }

private:
    std::map<std::string, std::string> values_;
};

std::string to_lower(std::string s);
std::string trim(const std::string& s);

}  // namespace t2dm
