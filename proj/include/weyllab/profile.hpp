#pragma once

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace weyllab {

// Polynomial with real coefficients, c[k] multiplying z^k.
class Polynomial {
  public:
    Polynomial() = default;
    explicit Polynomial(std::vector<double> coeffs);

    double operator()(double z) const;
    Polynomial derivative() const;
    const std::vector<double>& coefficients() const { return c_; }

  private:
    std::vector<double> c_;
};

// Unvalidated description of a profile curve rho(z) on (lower, upper).
// The curve is given through its square, rho(z)^2 = q(z), which keeps the
// surface smooth across the poles whenever q has simple zeros there.
struct ProfileCandidate {
    std::string name;
    Polynomial rho_squared;
    double lower = -1.0;
    double upper = 1.0;

    static ProfileCandidate sphere();
    static ProfileCandidate spheroid(double a, double c);
    // coeffs are the coefficients of z^0, z^2, z^4, ... of rho(z)^2.
    static ProfileCandidate poly_even(const std::vector<double>& even_coeffs, double lower, double upper);
    static ProfileCandidate from_json(const nlohmann::json& j);
};

// A validated strictly convex profile. Construct through validate_profile().
class RevolutionProfile {
  public:
    const std::string& name() const { return name_; }
    double lower() const { return lower_; }
    double upper() const { return upper_; }
    double z0() const { return z0_; }
    double rho_max() const { return rho_max_; }
    double equator_length() const { return equator_length_; }
    // Surface area, 2 pi int rho sqrt(1 + rho'^2) dz.
    double area() const { return area_; }

    double rho(double z) const;
    double drho(double z) const;
    double d2rho(double z) const;

    double q(double z) const { return q_(z); }
    double dq(double z) const { return dq_(z); }
    double d2q(double z) const { return d2q_(z); }
    double d3q(double z) const { return d3q_(z); }

    // rho * sqrt(1 + rho'^2) = sqrt(q + q'^2 / 4); finite and positive up to the poles.
    double area_density(double z) const;
    // Hamiltonian metric factor 1 + rho'^2.
    double meridian_factor(double z) const;

    const Polynomial& rho_squared() const { return q_; }
    nlohmann::json to_json() const;

  private:
    friend RevolutionProfile validate_profile(const ProfileCandidate&);

    std::string name_;
    Polynomial q_, dq_, d2q_, d3q_;
    double lower_ = 0, upper_ = 0, z0_ = 0, rho_max_ = 0, equator_length_ = 0, area_ = 0;
};

// Checks positivity, strict convexity of -rho and the pole limits, and fills
// the derived equator data. Throws ValidationError naming the first violated
// condition ("domain", "positivity", "convexity", "pole-limit") and a witness z.
RevolutionProfile validate_profile(const ProfileCandidate& candidate);

} // namespace weyllab
