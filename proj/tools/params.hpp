#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace weyllab::cli {

// Grid text: "a,b,c", a single number, "start:stop:geom:count" or
// "start:stop:lin:count". The result must be non-empty and strictly increasing.
std::vector<double> parse_grid(const nlohmann::json& value, const std::string& field);

// Read-only view of a command's configuration. Every accessor records the
// value it returned, so resolved() holds exactly what the run depended on.
class Params {
  public:
    explicit Params(nlohmann::json raw);

    bool has(const std::string& key) const;
    double number(const std::string& key, std::optional<double> fallback = std::nullopt);
    std::int64_t integer(const std::string& key, std::optional<std::int64_t> fallback = std::nullopt);
    std::uint64_t seed();
    std::string text(const std::string& key, std::optional<std::string> fallback = std::nullopt);
    bool flag(const std::string& key, bool fallback);
    std::vector<double> grid(const std::string& key, std::optional<std::vector<double>> fallback = std::nullopt);
    nlohmann::json object(const std::string& key);
    // Stores a derived value under key (for instance the canonical model descriptor).
    void record(const std::string& key, nlohmann::json value);

    const nlohmann::json& resolved() const { return resolved_; }
    std::vector<std::string> unused() const;

  private:
    const nlohmann::json& require(const std::string& key) const;

    nlohmann::json raw_;
    nlohmann::json resolved_ = nlohmann::json::object();
};

} // namespace weyllab::cli
