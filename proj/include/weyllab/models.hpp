#pragma once

#include "weyllab/profile.hpp"
#include "weyllab/types.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>

namespace weyllab {

enum class ModelKind { FlatTorus, CatMapSuspension, Sphere3, SurfaceOfRevolution };

// Tolerances for models whose flow is integrated numerically.
struct IntegratorOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    std::size_t max_steps = 2'000'000;
};

// A Hamiltonian (or suspension) flow restricted to its unit energy level,
// together with the data every experiment needs: a phase distance, the
// Liouville measure and the shortest closed-orbit period.
//
// Models are immutable once built; every member function is safe to call
// concurrently.
class FlowModel {
  public:
    virtual ~FlowModel() = default;

    virtual ModelKind kind() const = 0;
    virtual std::string name() const = 0;
    // Dimension m of the energy level (size of tangent_flow matrices).
    virtual int level_dimension() const = 0;
    // Liouville volume nu(Sigma_1) of the unit energy level.
    virtual double level_volume() const = 0;

    double shortest_period() const { return t0_override_ ? *t0_override_ : natural_period(); }
    void set_shortest_period(double t0);

    virtual double hamiltonian(const PhaseState& s) const = 0;
    // Reduces the position to the fundamental domain and refreshes the energy.
    virtual PhaseState normalize(const PhaseState& s) const = 0;

    virtual PhaseState flow(const PhaseState& s, double t) const = 0;
    // Jacobian of the time-t map in the model's Liouville-normalised level chart.
    virtual Matrix tangent_flow(const PhaseState& s, double t) const = 0;
    virtual double distance(const PhaseState& a, const PhaseState& b) const = 0;
    virtual PhaseState liouville_sample(std::mt19937_64& rng) const = 0;

    // Bound on |d/dt flow(s,t)| measured in the phase distance.
    virtual double speed_bound() const = 0;
    // Upper bound on the diameter of the level in the phase distance.
    virtual double diameter() const = 0;

    // Factor applied to the recurrence scan step (configurable, default 1).
    double lipschitz_bound() const { return lipschitz_; }
    void set_lipschitz_bound(double L);

    // True when the Jacobian norm is known to grow at most polynomially.
    virtual bool polynomial_growth() const = 0;

    // min over t in [t_min, T] of distance(flow(s,t), s) when a model can
    // compute it exactly; std::nullopt otherwise.
    virtual std::optional<double> exact_min_return(const PhaseState& s, double t_min, double T) const;

    virtual nlohmann::json descriptor() const = 0;

  protected:
    virtual double natural_period() const = 0;

  private:
    std::optional<double> t0_override_;
    double lipschitz_ = 1.0;
};

using ModelPtr = std::shared_ptr<const FlowModel>;

// Geodesic flow of R^n / L, L spanned by the rows of `basis` (n = 2 or 3).
// Level chart: (x, direction angles); the flow is x -> x + t xi.
class FlatTorus final : public FlowModel {
  public:
    explicit FlatTorus(const Matrix& basis);

    ModelKind kind() const override { return ModelKind::FlatTorus; }
    std::string name() const override { return "torus"; }
    int level_dimension() const override { return 2 * n_ - 1; }
    double level_volume() const override;
    double hamiltonian(const PhaseState& s) const override;
    PhaseState normalize(const PhaseState& s) const override;
    PhaseState flow(const PhaseState& s, double t) const override;
    Matrix tangent_flow(const PhaseState& s, double t) const override;
    double distance(const PhaseState& a, const PhaseState& b) const override;
    PhaseState liouville_sample(std::mt19937_64& rng) const override;
    double speed_bound() const override { return 1.0; }
    double diameter() const override;
    bool polynomial_growth() const override { return true; }
    std::optional<double> exact_min_return(const PhaseState& s, double t_min, double T) const override;
    nlohmann::json descriptor() const override;

    int dimension() const { return n_; }
    const Matrix& basis() const { return basis_; }
    // Quotient distance between two positions.
    double position_distance(const SmallVec& a, const SmallVec& b) const;
    double shortest_lattice_vector() const { return shortest_; }

  protected:
    double natural_period() const override { return shortest_; }

  private:
    SmallVec reduce(const SmallVec& x) const;

    int n_;
    Matrix basis_;     // rows are lattice vectors
    Matrix coords_;    // maps x to lattice coordinates: c = coords_ * x
    double covolume_;
    double shortest_;
};

// Suspension of a hyperbolic toral automorphism A under a constant roof:
// (x, s) flows to (x, s + t) with (x, roof) identified with (A x mod 1, 0).
// Level chart: (u, v, s).
class CatMapSuspension final : public FlowModel {
  public:
    using IntMatrix = std::array<std::int64_t, 4>; // row-major 2x2

    CatMapSuspension(const IntMatrix& matrix, double roof);

    ModelKind kind() const override { return ModelKind::CatMapSuspension; }
    std::string name() const override { return "catmap"; }
    int level_dimension() const override { return 3; }
    double level_volume() const override { return roof_; }
    double hamiltonian(const PhaseState&) const override { return 1.0; }
    PhaseState normalize(const PhaseState& s) const override;
    PhaseState flow(const PhaseState& s, double t) const override;
    Matrix tangent_flow(const PhaseState& s, double t) const override;
    double distance(const PhaseState& a, const PhaseState& b) const override;
    PhaseState liouville_sample(std::mt19937_64& rng) const override;
    double speed_bound() const override;
    double diameter() const override;
    bool polynomial_growth() const override { return false; }
    nlohmann::json descriptor() const override;

    const IntMatrix& matrix() const { return a_; }
    double roof() const { return roof_; }
    // Exact integer power A^k (k may be negative). Throws OverflowError when
    // an entry leaves the 64-bit range.
    IntMatrix power(std::int64_t k) const;
    // Leading eigenvalue of A.
    double expansion_eigenvalue() const;
    // Smooth periodised embedding whose Euclidean distance is the phase distance.
    std::array<double, 10> embed(const PhaseState& s) const;

  protected:
    double natural_period() const override { return roof_; }

  private:
    IntMatrix a_;
    double roof_;
};

// Unit cosphere bundle of the round S^3 in R^4 x R^4. Geodesics are great
// circles of period 2 pi. Level chart: an orthonormal frame of the tangent
// space of {|x| = |v| = 1, x.v = 0}.
class Sphere3 final : public FlowModel {
  public:
    ModelKind kind() const override { return ModelKind::Sphere3; }
    std::string name() const override { return "sphere3"; }
    int level_dimension() const override { return 5; }
    double level_volume() const override;
    double hamiltonian(const PhaseState& s) const override;
    PhaseState normalize(const PhaseState& s) const override;
    PhaseState flow(const PhaseState& s, double t) const override;
    Matrix tangent_flow(const PhaseState& s, double t) const override;
    double distance(const PhaseState& a, const PhaseState& b) const override;
    PhaseState liouville_sample(std::mt19937_64& rng) const override;
    double speed_bound() const override;
    double diameter() const override;
    bool polynomial_growth() const override { return true; }
    nlohmann::json descriptor() const override;

    // 8x5 orthonormal basis of the level's tangent space at s.
    static Matrix tangent_frame(const PhaseState& s);

  protected:
    double natural_period() const override { return kTwoPi; }
};

// Geodesic flow of a strictly convex surface of revolution. States use the
// cylindrical chart (z, phi; xi_z, xi_phi); the flow itself is integrated in
// the ambient R^3 on the implicit surface x^2 + y^2 = rho(z)^2, which stays
// regular through the poles. Level chart for tangent_flow: (w, phi, alpha)
// with w the area coordinate (dw = rho sqrt(1 + rho'^2) dz) and alpha the
// angle to the parallel.
class SurfaceOfRevolution final : public FlowModel {
  public:
    using Ambient = std::array<double, 6>; // position X, velocity V

    explicit SurfaceOfRevolution(RevolutionProfile profile, IntegratorOptions opts = {});

    ModelKind kind() const override { return ModelKind::SurfaceOfRevolution; }
    std::string name() const override { return "surfrev"; }
    int level_dimension() const override { return 3; }
    double level_volume() const override { return kTwoPi * profile_.area(); }
    double hamiltonian(const PhaseState& s) const override;
    PhaseState normalize(const PhaseState& s) const override;
    PhaseState flow(const PhaseState& s, double t) const override;
    Matrix tangent_flow(const PhaseState& s, double t) const override;
    double distance(const PhaseState& a, const PhaseState& b) const override;
    PhaseState liouville_sample(std::mt19937_64& rng) const override;
    double speed_bound() const override { return speed_bound_; }
    double diameter() const override;
    bool polynomial_growth() const override { return true; }
    nlohmann::json descriptor() const override;

    const RevolutionProfile& profile() const { return profile_; }
    const IntegratorOptions& options() const { return opts_; }

    // State at height z, longitude phi, unit direction at angle alpha to the parallel.
    PhaseState state_at(double z, double phi, double alpha) const;
    Ambient to_ambient(const PhaseState& s) const;
    PhaseState from_ambient(const Ambient& y) const;

    // Integrates the ambient geodesic equation for time t (either sign).
    Ambient integrate(const Ambient& y, double t) const;
    // Geodesic acceleration on the implicit surface.
    void rhs(const Ambient& y, Ambient& dydt) const;

  protected:
    double natural_period() const override { return profile_.equator_length(); }

  private:
    RevolutionProfile profile_;
    IntegratorOptions opts_;
    double speed_bound_;
    double density_max_;
};

// Builds a model from its JSON descriptor:
//   {"kind":"torus","n":2,"basis":[[..],[..]]}
//   {"kind":"catmap","matrix":[[2,1],[1,1]],"roof":1.0}
//   {"kind":"sphere3"}
//   {"kind":"surfrev","profile":{...}}
// Optional keys for every kind: "t0" (shortest-period override), "lipschitz".
ModelPtr make_model(const nlohmann::json& descriptor);

} // namespace weyllab
