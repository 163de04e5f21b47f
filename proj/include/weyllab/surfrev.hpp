#pragma once

#include "weyllab/models.hpp"

#include <vector>

namespace weyllab {

// One sample of the equatorial return map for the direction at angle alpha
// to the equator.
struct ReturnMapSample {
    double alpha = 0;
    double tau = 0;      // time of first return to the equator
    double theta = 0;    // rotation angle in [0, 2 pi)
    double clairaut = 0; // rho_max cos(alpha)
};

// rho(z) cos(alpha) for a state on the surface, i.e. xi_phi / |xi|.
double clairaut_constant(const SurfaceOfRevolution& surface, const PhaseState& state);

// Directions closer than this to the equator itself are rejected.
inline constexpr double kMinEquatorAngle = 1e-4;

// Follows the geodesic leaving the equator at longitude base_phi and angle
// alpha until it next crosses the equator. The crossing time is bisected to
// 1e-10. Throws NoReturnError if nothing is found within time 1e3.
ReturnMapSample first_return(const SurfaceOfRevolution& surface, double alpha, double base_phi = 0.0);

std::vector<ReturnMapSample> return_map(const SurfaceOfRevolution& surface, const std::vector<double>& alphas,
                                        unsigned threads = 0);

// The return map sampled on a uniform grid of the Clairaut constant
// c in (-c_max, c_max), c_max = rho_max cos(kMinEquatorAngle). The Clairaut
// constant is the momentum conjugate to the longitude, so dc is the invariant
// measure of the equatorial section; theta is unwrapped along the grid.
class ReturnMapTable {
  public:
    ReturnMapTable(const SurfaceOfRevolution& surface, int grid_size, unsigned threads = 0);

    const std::vector<ReturnMapSample>& samples() const { return samples_; }
    const std::vector<double>& clairaut() const { return c_; }
    const std::vector<double>& theta() const { return theta_; } // unwrapped
    double step() const { return c_[1] - c_[0]; }
    double rho_max() const { return rho_max_; }
    double tau_min() const { return tau_min_; }
    double tau_max() const { return tau_max_; }
    // Largest number of equator crossings per unit time, 1 / tau_min.
    double return_rate() const { return 1.0 / tau_min_; }

    // Fraction of the section (measured in c) whose normalised rotation
    // theta / 2 pi lies within eps / p of some q / p with 1 <= p <= C T.
    // C <= 0 selects return_rate().
    double rational_measure(double T, double eps, double C = 0.0) const;

  private:
    std::vector<ReturnMapSample> samples_;
    std::vector<double> c_;
    std::vector<double> theta_;
    double rho_max_ = 0, tau_min_ = 0, tau_max_ = 0;
};

struct VanishingOrder {
    int r = 1;
    double worst_alpha = 0; // direction where the highest order is attained
    bool degenerate = false;
    double noise_floor = 0;
    std::vector<double> critical_alphas; // zeros of theta' that were examined
};

// Highest order of vanishing of theta - theta(alpha*) over the critical
// points alpha* of the return map; 1 when theta' never vanishes. Throws
// ResolutionError when two critical points are closer than four grid steps.
VanishingOrder vanishing_order(const ReturnMapTable& table);
VanishingOrder vanishing_order(const SurfaceOfRevolution& surface, int grid_size, unsigned threads = 0);

double rational_recurrence_measure(const SurfaceOfRevolution& surface, double T, double eps, int grid_size = 4001,
                                   double C = 0.0, unsigned threads = 0);

} // namespace weyllab
