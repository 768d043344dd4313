// Run configuration (key = value text files with CLI overrides) and the
// per-run manifest that records config, seed and output checksums.
#pragma once

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uasim/common.hpp"

namespace uasim {

inline constexpr const char* kVersion = "0.1.0";

class KeyValueConfig {
public:
    static KeyValueConfig parse(std::istream& is) {
        KeyValueConfig cfg;
        std::string line;
        size_t lineno = 0;
        while (std::getline(is, line)) {
            ++lineno;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            const std::string trimmed = trim(line);
            if (trimmed.empty()) continue;
            const auto eq = trimmed.find('=');
            if (eq == std::string::npos)
                throw InvalidInput("config: expected key = value at line " +
                                   std::to_string(lineno));
            cfg.values_[trim(trimmed.substr(0, eq))] = trim(trimmed.substr(eq + 1));
        }
        return cfg;
    }

    static KeyValueConfig load(const std::string& path) {
        std::ifstream is(path);
        if (!is) throw IoError("config: cannot open " + path);
        return parse(is);
    }

    void set(const std::string& key, const std::string& value) { values_[key] = value; }
    bool has(const std::string& key) const { return values_.count(key) > 0; }

    std::string get_string(const std::string& key, const std::string& fallback) const {
        const auto it = values_.find(key);
        return it == values_.end() ? fallback : it->second;
    }

    std::string require_string(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw InvalidInput("config: missing required key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key, double fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            size_t used = 0;
            const double v = std::stod(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception&) {
            throw InvalidInput("config: key '" + key + "' is not a number: " + it->second);
        }
    }

    uint64_t get_u64(const std::string& key, uint64_t fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        try {
            size_t used = 0;
            const uint64_t v = std::stoull(it->second, &used);
            if (used != it->second.size()) throw std::invalid_argument(key);
            return v;
        } catch (const std::exception&) {
            throw InvalidInput("config: key '" + key + "' is not an integer: " + it->second);
        }
    }

    bool get_bool(const std::string& key, bool fallback) const {
        const auto it = values_.find(key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw InvalidInput("config: key '" + key + "' is not a bool: " + it->second);
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

private:
    std::map<std::string, std::string> values_;

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    }
};

// FNV-1a 64, used for provenance checksums (not security).
inline uint64_t fnv1a(const void* data, size_t len, uint64_t state = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < len; ++i) {
        state ^= p[i];
        state *= 0x100000001b3ULL;
    }
    return state;
}

inline uint64_t fnv1a_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("checksum: cannot open " + path);
    uint64_t state = 0xcbf29ce484222325ULL;
    char buf[65536];
    while (is.read(buf, sizeof buf) || is.gcount() > 0)
        state = fnv1a(buf, static_cast<size_t>(is.gcount()), state);
    return state;
}

inline std::string hex64(uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Every CLI run writes one of these next to its primary output,
// sufficient to reconstruct the provenance of each artifact.
inline void write_manifest(const std::string& path, const std::string& command,
                           const KeyValueConfig& cfg, uint64_t seed,
                           const std::vector<std::string>& inputs,
                           const std::vector<std::string>& outputs) {
    nlohmann::json j;
    j["command"] = command;
    j["version"] = kVersion;
    j["seed"] = seed;
    j["config"] = cfg.to_json();
    j["config_hash"] = hex64(fnv1a(cfg.to_json().dump().data(), cfg.to_json().dump().size()));
    j["inputs"] = nlohmann::json::array();
    for (const std::string& p : inputs)
        j["inputs"].push_back({{"path", p}, {"checksum", hex64(fnv1a_file(p))}});
    j["outputs"] = nlohmann::json::array();
    for (const std::string& p : outputs)
        j["outputs"].push_back({{"path", p}, {"checksum", hex64(fnv1a_file(p))}});
    std::ofstream os(path);
    if (!os) throw IoError("manifest: cannot open " + path);
    os << j.dump(2) << "\n";
}

}  // namespace uasim
