#include "manifest.hpp"

#include "weyllab/errors.hpp"

#include <Eigen/Core>
#include <boost/version.hpp>
#include <openssl/evp.h>
#include <openssl/opensslv.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <sstream>

#ifndef WEYLLAB_VERSION
#define WEYLLAB_VERSION "0.0.0"
#endif

namespace weyllab::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256: digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 15];
    }
    return out;
}

std::string config_hash(const nlohmann::json& config) { return sha256_hex(config.dump()); }

nlohmann::json versions() {
    return {{"weyllab", WEYLLAB_VERSION},
            {"compiler", __VERSION__},
            {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                          std::to_string(EIGEN_MINOR_VERSION)},
            {"boost", BOOST_LIB_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
            {"openssl", OPENSSL_VERSION_TEXT}};
}

nlohmann::json make_manifest(const RunRecord& run, const std::vector<Artifact>& outputs) {
    nlohmann::json files = nlohmann::json::array();
    for (const auto& a : outputs)
        files.push_back({{"file", a.name}, {"sha256", sha256_hex(a.content)}, {"bytes", a.content.size()}});
    nlohmann::json m = {{"command", run.command},
                        {"config", run.config},
                        {"config_hash", config_hash(run.config)},
                        {"versions", versions()},
                        {"threads", run.threads},
                        {"started_utc", run.started_utc},
                        {"wall_clock_seconds", run.wall_seconds},
                        {"outputs", files}};
    m["seed"] = run.seed ? nlohmann::json(*run.seed) : nlohmann::json(nullptr);
    return m;
}

namespace {

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << content;
    if (!f.flush()) throw ConfigError("cannot write " + path.string());
}

std::optional<std::string> read_file(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) return std::nullopt;
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

} // namespace

void write_outputs(const fs::path& dir, const std::vector<Artifact>& outputs, const nlohmann::json& manifest) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) throw ConfigError("output directory '" + dir.string() + "' is not writable");
    for (const auto& a : outputs) write_file(dir / a.name, a.content);
    write_file(dir / "manifest.json", manifest.dump(2) + "\n");
}

CheckResult check_outputs(const fs::path& dir, const std::string& hash, const std::vector<Artifact>& outputs) {
    CheckResult res;
    const auto text = read_file(dir / "manifest.json");
    if (!text) throw ConfigError("--check: no manifest.json in '" + dir.string() + "'");
    nlohmann::json m;
    try {
        m = nlohmann::json::parse(*text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("--check: unreadable manifest: ") + e.what());
    }
    auto fail = [&](const std::string& msg) {
        res.ok = false;
        res.messages.push_back("MISMATCH " + msg);
    };
    if (m.value("config_hash", "") != hash) fail("config_hash");
    else res.messages.push_back("ok config_hash");
    const auto listed = m.value("outputs", nlohmann::json::array());
    for (const auto& a : outputs) {
        const auto digest = sha256_hex(a.content);
        const nlohmann::json* entry = nullptr;
        for (const auto& e : listed)
            if (e.value("file", "") == a.name) entry = &e;
        if (!entry) {
            fail(a.name + ": not listed in manifest");
            continue;
        }
        if (entry->value("sha256", "") != digest) {
            fail(a.name + ": recomputed output differs from manifest");
            continue;
        }
        const auto disk = read_file(dir / a.name);
        if (!disk) fail(a.name + ": missing on disk");
        else if (sha256_hex(*disk) != digest) fail(a.name + ": file on disk differs from manifest");
        else res.messages.push_back("ok " + a.name);
    }
    if (listed.size() != outputs.size()) fail("manifest lists " + std::to_string(listed.size()) + " files, run produced " +
                                              std::to_string(outputs.size()));
    return res;
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

} // namespace weyllab::cli
