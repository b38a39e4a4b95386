#include "t2dm/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "t2dm/errors.hpp"

namespace t2dm {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::string to_lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

KvConfig KvConfig::parse_file(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file: " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

KvConfig KvConfig::parse_string(const std::string& text) {
    KvConfig cfg;
    std::istringstream in(text);
    std::string line;
    long n = 0;
    while (std::getline(in, line)) {
        ++n;
        std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(n) + ": expected key = value");
        cfg.values_[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
    }
    return cfg;
}

std::string KvConfig::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
}

std::string KvConfig::get_or(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KvConfig::get_double(const std::string& key) const {
    try {
        return std::stod(get(key));
    } catch (const std::invalid_argument&) {
        throw ConfigError("config key " + key + " is not numeric");
    }
}

int KvConfig::get_int(const std::string& key) const {
    try {
        return std::stoi(get(key));
    } catch (const std::invalid_argument&) {
        throw ConfigError("config key " + key + " is not an integer");
    }
}

std::vector<std::string> KvConfig::get_list(const std::string& key) const {
    std::vector<std::string> out;
    std::string v = get(key);
    size_t start = 0;
    while (true) {
        size_t bar = v.find('|', start);
        out.push_back(trim(v.substr(start, bar - start)));
        if (bar == std::string::npos) break;
        start = bar + 1;
    }
    return out;
}

}  // namespace t2dm
