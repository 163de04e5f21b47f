#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace weyllab::cli {

std::string sha256_hex(const std::string& bytes);

// SHA-256 of the compact dump; object keys are sorted, so the hash does not
// depend on the order of fields in the config file.
std::string config_hash(const nlohmann::json& config);

struct Artifact {
    std::string name; // file name inside the output directory
    std::string content;
};

struct RunRecord {
    std::string command;
    nlohmann::json config;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    double wall_seconds = 0;
    std::string started_utc;
};

nlohmann::json versions();
nlohmann::json make_manifest(const RunRecord& run, const std::vector<Artifact>& outputs);

// Writes every artifact followed by manifest.json.
void write_outputs(const std::filesystem::path& dir, const std::vector<Artifact>& outputs,
                   const nlohmann::json& manifest);

struct CheckResult {
    bool ok = true;
    std::vector<std::string> messages;
};

// Compares a fresh run against the manifest and files already in dir.
CheckResult check_outputs(const std::filesystem::path& dir, const std::string& hash,
                          const std::vector<Artifact>& outputs);

std::string utc_now();

} // namespace weyllab::cli
