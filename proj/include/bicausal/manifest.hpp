#pragma once
// Provenance record written next to every output.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bicausal/io.hpp"

namespace bicausal {

inline constexpr std::string_view kToolVersion = "0.1.0";
inline constexpr std::string_view kManifestName = "manifest.json";

struct FileDigest {
    std::string path;
    std::string sha256;
};

struct RunManifest {
    std::string tool_version{kToolVersion};
    std::string subcommand;
    std::vector<std::string> arguments;
    std::uint64_t master_seed = 0;
    std::string config_hash;
    Json config = Json::object();
    std::map<std::string, FileDigest> inputs;   // role -> file
    std::map<std::string, FileDigest> outputs;  // file name -> digest
    std::string started_at;
    std::string finished_at;
    int exit_code = 0;
};

inline std::string utc_timestamp() {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline FileDigest digest_of(const std::filesystem::path& p) {
    return {std::filesystem::absolute(p).lexically_normal().string(), io::sha256_file(p)};
}

inline Json to_json(const RunManifest& m) {
    Json j;
    j["tool_version"] = m.tool_version;
    j["subcommand"] = m.subcommand;
    j["arguments"] = m.arguments;
    j["master_seed"] = m.master_seed;
    j["config_hash"] = m.config_hash;
    j["config"] = m.config;
    auto files = [](const std::map<std::string, FileDigest>& fs) {
        Json o = Json::object();
        for (const auto& [k, d] : fs) o[k] = {{"path", d.path}, {"sha256", d.sha256}};
        return o;
    };
    j["inputs"] = files(m.inputs);
    j["outputs"] = files(m.outputs);
    j["started_at"] = m.started_at;
    j["finished_at"] = m.finished_at;
    j["exit_code"] = m.exit_code;
    return j;
}

inline void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    io::write_file_atomic(dir / kManifestName, to_json(m).dump(2) + "\n");
}

inline std::optional<Json> read_manifest(const std::filesystem::path& dir) {
    const auto p = dir / kManifestName;
    if (!std::filesystem::exists(p)) return std::nullopt;
    return io::read_json_file(p);
}

}  // namespace bicausal
