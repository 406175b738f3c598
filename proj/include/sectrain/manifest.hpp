#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "sectrain/corpus.hpp"
#include "sectrain/util/hash.hpp"

namespace sectrain {

class ManifestError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Per-stage accounting. input_count == output_count + sum(drops).
struct RunManifest {
    std::string stage;
    std::uint64_t input_count = 0;
    std::uint64_t output_count = 0;
    std::map<std::string, std::uint64_t> drops;
    std::uint64_t seed = 0;
    std::string config_digest;
    /// Stage-specific counters (clusters found, windows built, ...).
    std::map<std::string, std::int64_t> stats;

    std::uint64_t dropped() const noexcept {
        std::uint64_t n = 0;
        for (const auto& [_, c] : drops) n += c;
        return n;
    }

    void add_drop(const std::string& reason, std::uint64_t n = 1) {
        if (n) drops[reason] += n;
    }

    void validate() const {
        if (input_count != output_count + dropped()) {
            throw ManifestError("count mismatch: input " + std::to_string(input_count) + " != output " +
                                std::to_string(output_count) + " + dropped " + std::to_string(dropped()));
        }
    }
};

inline json to_json(const RunManifest& m) {
    json j = json::object();
    j["stage"] = m.stage;
    j["input_count"] = m.input_count;
    j["output_count"] = m.output_count;
    json drops = json::object();
    for (const auto& [k, v] : m.drops) drops[k] = v;
    j["drops"] = std::move(drops);
    j["seed"] = m.seed;
    j["config_digest"] = m.config_digest;
    json stats = json::object();
    for (const auto& [k, v] : m.stats) stats[k] = v;
    j["stats"] = std::move(stats);
    return j;
}

inline RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    m.stage = j.at("stage").get<std::string>();
    m.input_count = j.at("input_count").get<std::uint64_t>();
    m.output_count = j.at("output_count").get<std::uint64_t>();
    for (const auto& [k, v] : j.at("drops").items()) m.drops[k] = v.get<std::uint64_t>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.config_digest = j.at("config_digest").get<std::string>();
    if (j.contains("stats")) {
        for (const auto& [k, v] : j.at("stats").items()) m.stats[k] = v.get<std::int64_t>();
    }
    return m;
}

/// Digest of a configuration object; key order does not matter.
inline std::string config_digest(const json& config) {
    const nlohmann::json canonical = nlohmann::json::parse(config.dump());  // std::map keys sort
    return to_hex(fnv1a64(canonical.dump()));
}

/// Validates and writes the manifest with a fixed key order.
inline void write_manifest(const RunManifest& m, const std::filesystem::path& path) {
    m.validate();
    write_file_atomic(path, to_json(m).dump(2) + "\n");
}

}  // namespace sectrain
