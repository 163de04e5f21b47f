#pragma once

#include "weyllab/models.hpp"
#include "weyllab/profile.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace weyllab {

// Laplace eigenvalue threshold Lambda and semiclassical h: Lambda = 1 / h^2.
double lambda_from_h(double h);
double h_from_lambda(double lambda);

// Number of Laplace eigenvalues <= R^2 on R^n / L (rows of `basis` span L),
// i.e. points k of the dual lattice 2 pi L* with |k| <= R. Scaled identity
// bases are counted in integer arithmetic.
std::int64_t torus_count(const Matrix& basis, double R);

// Eigenvalue count of the round S^3: sum of (k+1)^2 over k(k+2) <= Lambda.
std::int64_t sphere3_count(double lambda);

struct RadialOptions {
    double pole_offset = 1e-6; // shooting starts this far (in z) from each pole
    double tolerance = 1e-10;  // Prufer phase integration tolerance
    double eigen_rtol = 1e-8;  // relative localisation of each eigenvalue
};

// Sector m of the Laplacian on a surface of revolution:
// -(p f')' / w + (m^2 / rho^2) f = Lambda f on (lower, upper), with
// p = rho / sqrt(1 + rho'^2), w = rho sqrt(1 + rho'^2), f bounded at the poles.
struct RadialProblem {
    RevolutionProfile profile;
    int m = 0;

    double p(double z) const;
    double w(double z) const;
    double potential(double z) const; // m^2 / rho^2
};

// Prufer phase mismatch D(Lambda), increasing in Lambda; the k-th eigenvalue
// (k = 0, 1, ...) is where D = k pi.
double prufer_mismatch(const RadialProblem& problem, double lambda, const RadialOptions& opts = {});

// Number of sector eigenvalues <= lambda from the phase winding.
std::int64_t radial_count(const RadialProblem& problem, double lambda, const RadialOptions& opts = {});

// Sorted eigenvalues <= lambda_max, each bisected to relative eigen_rtol.
// Throws BracketError when bisection and the phase count disagree.
std::vector<double> radial_eigenvalues(const RadialProblem& problem, double lambda_max, const RadialOptions& opts = {});

// Laplace eigenvalue count of the surface: sum over |m| <= M of the sector
// counts (twice for m != 0), M = ceil(rho_max sqrt(Lambda)) + 2.
std::int64_t surfrev_count(const RevolutionProfile& profile, double lambda, const RadialOptions& opts = {},
                           unsigned threads = 0);

// Dimension of the configuration manifold (torus n, sphere3 3, surfaces 2).
// Throws DomainError for models without a Laplace spectrum.
int configuration_dimension(const FlowModel& model);

// Leading Weyl term (2 pi h)^{-n} omega_n vol(X) = (2 pi h)^{-n} nu(S*X) / n.
double weyl_leading(const FlowModel& model, double h);

// Exact or tolerance-bounded eigenvalue count of the model's Laplacian.
std::int64_t eigenvalue_count(const FlowModel& model, double lambda, unsigned threads = 0);

struct SpectrumRow {
    double h, lambda;
    std::int64_t count;
    double leading;
};

std::vector<SpectrumRow> spectrum_series(const FlowModel& model, const std::vector<double>& lambdas,
                                         unsigned threads = 0);

// model,h,lambda,count,leading
void write_spectrum_csv(std::ostream& out, const std::string& model, const std::vector<SpectrumRow>& rows);

} // namespace weyllab
