#include "weyllab/profile.hpp"

#include "weyllab/errors.hpp"
#include "weyllab/types.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <nlohmann/json.hpp>

#include <cmath>

namespace weyllab {

Polynomial::Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    while (c_.size() > 1 && c_.back() == 0.0) c_.pop_back();
}

double Polynomial::operator()(double z) const {
    double acc = 0.0;
    for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + *it;
    return acc;
}

Polynomial Polynomial::derivative() const {
    if (c_.size() <= 1) return Polynomial({0.0});
    std::vector<double> d(c_.size() - 1);
    for (std::size_t k = 1; k < c_.size(); ++k) d[k - 1] = static_cast<double>(k) * c_[k];
    return Polynomial(std::move(d));
}

ProfileCandidate ProfileCandidate::sphere() {
    return {"sphere", Polynomial({1.0, 0.0, -1.0}), -1.0, 1.0};
}

ProfileCandidate ProfileCandidate::spheroid(double a, double c) {
    if (!(a > 0) || !(c > 0)) throw DomainError("spheroid: semi-axes must be positive");
    return {"spheroid(" + std::to_string(a) + "," + std::to_string(c) + ")",
            Polynomial({a * a, 0.0, -a * a / (c * c)}), -c, c};
}

ProfileCandidate ProfileCandidate::poly_even(const std::vector<double>& even_coeffs, double lower, double upper) {
    if (even_coeffs.empty()) throw ConfigError("poly_even: empty coefficient list");
    std::vector<double> full(2 * even_coeffs.size() - 1, 0.0);
    for (std::size_t k = 0; k < even_coeffs.size(); ++k) full[2 * k] = even_coeffs[k];
    return {"poly_even", Polynomial(std::move(full)), lower, upper};
}

ProfileCandidate ProfileCandidate::from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("profile: expected an object");
    if (j.contains("preset")) {
        const auto preset = j.at("preset").get<std::string>();
        if (preset == "sphere") return sphere();
        if (preset == "spheroid") return spheroid(j.value("a", 1.0), j.value("c", 1.0));
        throw ConfigError("profile: unknown preset '" + preset + "'");
    }
    if (j.contains("poly_even")) {
        if (!j.contains("domain") || !j.at("domain").is_array() || j.at("domain").size() != 2)
            throw ConfigError("profile: poly_even requires a two-element 'domain'");
        return poly_even(j.at("poly_even").get<std::vector<double>>(), j.at("domain")[0].get<double>(),
                         j.at("domain")[1].get<double>());
    }
    throw ConfigError("profile: expected 'preset' or 'poly_even'");
}

double RevolutionProfile::rho(double z) const { return std::sqrt(std::max(q_(z), 0.0)); }

double RevolutionProfile::drho(double z) const { return dq_(z) / (2.0 * rho(z)); }

double RevolutionProfile::d2rho(double z) const {
    const double q = q_(z);
    const double dq = dq_(z);
    return (2.0 * q * d2q_(z) - dq * dq) / (4.0 * q * std::sqrt(q));
}

double RevolutionProfile::area_density(double z) const {
    const double dq = dq_(z);
    return std::sqrt(std::max(q_(z), 0.0) + 0.25 * dq * dq);
}

double RevolutionProfile::meridian_factor(double z) const {
    const double dr = drho(z);
    return 1.0 + dr * dr;
}

nlohmann::json RevolutionProfile::to_json() const {
    return {{"name", name_},
            {"rho_squared", q_.coefficients()},
            {"domain", {lower_, upper_}},
            {"z0", z0_},
            {"rho_max", rho_max_},
            {"equator_length", equator_length_},
            {"area", area_}};
}

namespace {

constexpr double kPoleOffset = 1e-6;
constexpr int kConvexityGrid = 10000;

} // namespace

RevolutionProfile validate_profile(const ProfileCandidate& cand) {
    RevolutionProfile p;
    p.name_ = cand.name;
    p.lower_ = cand.lower;
    p.upper_ = cand.upper;
    p.q_ = cand.rho_squared;
    p.dq_ = p.q_.derivative();
    p.d2q_ = p.dq_.derivative();
    p.d3q_ = p.d2q_.derivative();

    const double lo = cand.lower, hi = cand.upper;
    if (!(lo < hi) || !std::isfinite(lo) || !std::isfinite(hi))
        throw ValidationError("domain", lo, "endpoints must satisfy lower < upper");

    auto grid = [&](int i) { return lo + (hi - lo) * (i + 1) / (kConvexityGrid + 1); };

    for (int i = 0; i < kConvexityGrid; ++i) {
        const double z = grid(i);
        if (!(p.q_(z) > 0.0)) throw ValidationError("positivity", z, "rho must be positive on the open interval");
    }

    // rho' has the sign of q'; locate its zero by bisection.
    double a = lo + kPoleOffset, b = hi - kPoleOffset;
    if (p.dq_(a) <= 0.0 || p.dq_(b) >= 0.0)
        throw ValidationError("convexity", p.dq_(a) <= 0.0 ? a : b, "rho must increase then decrease");
    while (b - a > 1e-12) {
        const double m = 0.5 * (a + b);
        (p.dq_(m) > 0.0 ? a : b) = m;
    }
    p.z0_ = 0.5 * (a + b);
    if (std::abs(p.z0_) < 1e-12) p.z0_ = 0.0;

    auto check_convex = [&](double z) {
        if (!(p.d2rho(z) < 0.0))
            throw ValidationError("convexity", z, "rho'' = " + std::to_string(p.d2rho(z)) + " is not negative");
    };
    check_convex(p.z0_);
    for (int i = 0; i < kConvexityGrid; ++i) check_convex(grid(i));

    const double zl = lo + kPoleOffset, zr = hi - kPoleOffset;
    if (!(p.rho(zl) < 1e-2) || !(p.drho(zl) > 1e2))
        throw ValidationError("pole-limit", zl, "expected rho -> 0 and rho' -> +inf at the lower pole");
    if (!(p.rho(zr) < 1e-2) || !(p.drho(zr) < -1e2))
        throw ValidationError("pole-limit", zr, "expected rho -> 0 and rho' -> -inf at the upper pole");

    p.rho_max_ = p.rho(p.z0_);
    p.equator_length_ = kTwoPi * p.rho_max_;
    const double integral = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        [&](double z) { return p.area_density(z); }, lo, hi, 15, 1e-13);
    p.area_ = kTwoPi * integral;
    return p;
}

} // namespace weyllab
