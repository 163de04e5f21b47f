#include "params.hpp"

#include "weyllab/csv.hpp"
#include "weyllab/errors.hpp"

#include <cmath>

namespace weyllab::cli {

namespace {

double field_number(const nlohmann::json& v, const std::string& field) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        try {
            return csv::to_double(v.get<std::string>());
        } catch (const ConfigError&) {
        }
    }
    throw ConfigError("field '" + field + "': expected a number, got " + v.dump());
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) return out;
        start = pos + 1;
    }
}

std::vector<double> parse_range(const std::string& text, const std::string& field) {
    const auto parts = split_on(text, ':');
    if (parts.size() != 4 || (parts[2] != "geom" && parts[2] != "lin"))
        throw ConfigError("field '" + field + "': expected start:stop:geom:count or start:stop:lin:count, got '" +
                          text + "'");
    const double a = field_number(parts[0], field), b = field_number(parts[1], field);
    std::int64_t n = 0;
    try {
        n = csv::to_int(parts[3]);
    } catch (const ConfigError&) {
        throw ConfigError("field '" + field + "': grid count must be an integer");
    }
    if (n < 1) throw ConfigError("field '" + field + "': grid count must be >= 1");
    const bool geom = parts[2] == "geom";
    if (geom && !(a > 0 && b > 0)) throw ConfigError("field '" + field + "': geometric grid needs positive end points");
    if (n == 1) {
        if (a != b) throw ConfigError("field '" + field + "': a one-point grid needs start == stop");
        return {a};
    }
    // Geometric steps go through log2 or log10 of the ratio so that grids
    // such as 2^-8..2^-4 or 1e-4..1e-2 hit their round values exactly.
    const double l2 = geom ? std::log2(b / a) : 0.0;
    const bool binary = geom && l2 == std::round(l2);
    const double span = !geom ? b - a : binary ? l2 : std::log10(b / a);
    const auto m = static_cast<double>(n - 1);
    std::vector<double> out;
    for (std::int64_t i = 0; i < n; ++i) {
        const double x = span * static_cast<double>(i) / m;
        out.push_back(i == n - 1 ? b : !geom ? a + x : a * (binary ? std::exp2(x) : std::pow(10.0, x)));
    }
    return out;
}

} // namespace

std::vector<double> parse_grid(const nlohmann::json& value, const std::string& field) {
    std::vector<double> out;
    if (value.is_array()) {
        for (const auto& v : value) out.push_back(field_number(v, field));
    } else if (value.is_number()) {
        out.push_back(value.get<double>());
    } else if (value.is_string()) {
        const auto text = value.get<std::string>();
        if (text.find(':') != std::string::npos) out = parse_range(text, field);
        else if (!text.empty())
            for (const auto& part : split_on(text, ',')) out.push_back(field_number(part, field));
    } else {
        throw ConfigError("field '" + field + "': expected a grid, got " + value.dump());
    }
    if (out.empty()) throw ConfigError("field '" + field + "': grid is empty");
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (!std::isfinite(out[i])) throw ConfigError("field '" + field + "': grid values must be finite");
        if (i > 0 && !(out[i] > out[i - 1])) throw ConfigError("field '" + field + "': grid must be strictly increasing");
    }
    return out;
}

Params::Params(nlohmann::json raw) : raw_(std::move(raw)) {
    if (raw_.is_null()) raw_ = nlohmann::json::object();
    if (!raw_.is_object()) throw ConfigError("config must be a JSON object");
}

bool Params::has(const std::string& key) const { return raw_.contains(key) && !raw_[key].is_null(); }

const nlohmann::json& Params::require(const std::string& key) const {
    if (!has(key)) throw ConfigError("missing field '" + key + "'");
    return raw_[key];
}

double Params::number(const std::string& key, std::optional<double> fallback) {
    const double v = has(key) || !fallback ? field_number(require(key), key) : *fallback;
    if (!std::isfinite(v)) throw ConfigError("field '" + key + "' must be finite");
    resolved_[key] = v;
    return v;
}

std::int64_t Params::integer(const std::string& key, std::optional<std::int64_t> fallback) {
    std::int64_t v = 0;
    if (!has(key) && fallback) {
        v = *fallback;
    } else {
        const auto& j = require(key);
        if (j.is_number_integer()) v = j.get<std::int64_t>();
        else if (j.is_string()) v = csv::to_int(j.get<std::string>());
        else throw ConfigError("field '" + key + "': expected an integer, got " + j.dump());
    }
    resolved_[key] = v;
    return v;
}

std::uint64_t Params::seed() {
    if (!has("seed")) throw ConfigError("missing field 'seed' (required by stochastic commands)");
    const auto& j = raw_["seed"];
    std::uint64_t v = 0;
    if (j.is_number_unsigned()) v = j.get<std::uint64_t>();
    else if (j.is_number_integer() && j.get<std::int64_t>() >= 0) v = static_cast<std::uint64_t>(j.get<std::int64_t>());
    else if (j.is_string()) v = csv::to_uint64(j.get<std::string>());
    else throw ConfigError("field 'seed': expected an unsigned integer, got " + j.dump());
    resolved_["seed"] = v;
    return v;
}

std::string Params::text(const std::string& key, std::optional<std::string> fallback) {
    std::string v;
    if (!has(key) && fallback) {
        v = *fallback;
    } else {
        const auto& j = require(key);
        if (!j.is_string()) throw ConfigError("field '" + key + "': expected a string");
        v = j.get<std::string>();
    }
    resolved_[key] = v;
    return v;
}

bool Params::flag(const std::string& key, bool fallback) {
    bool v = fallback;
    if (has(key)) {
        const auto& j = raw_[key];
        if (j.is_boolean()) v = j.get<bool>();
        else if (j == "true") v = true;
        else if (j == "false") v = false;
        else throw ConfigError("field '" + key + "': expected true or false");
    }
    resolved_[key] = v;
    return v;
}

std::vector<double> Params::grid(const std::string& key, std::optional<std::vector<double>> fallback) {
    const auto v = !has(key) && fallback ? *fallback : parse_grid(require(key), key);
    resolved_[key] = v;
    return v;
}

nlohmann::json Params::object(const std::string& key) {
    const auto& j = require(key);
    if (!j.is_object()) throw ConfigError("field '" + key + "': expected a JSON object");
    resolved_[key] = j;
    return j;
}

void Params::record(const std::string& key, nlohmann::json value) { resolved_[key] = std::move(value); }

std::vector<std::string> Params::unused() const {
    std::vector<std::string> out;
    for (const auto& [k, v] : raw_.items())
        if (!resolved_.contains(k)) out.push_back(k);
    return out;
}

} // namespace weyllab::cli
