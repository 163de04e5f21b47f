#pragma once

#include "weyllab/models.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace weyllab {

struct ExpansionEstimate {
    double rate = 0;          // max over samples of ln |D flow(s, t_max)| / t_max
    double rate_doubled = 0;  // same samples at 2 t_max
    bool polynomial = false;  // growth rate decays like ln(t)/t
};

// Maximal expansion rate from the operator norm of the Jacobian. The
// polynomial flag is raised when the rate at 2 t_max falls below 3/4 of the
// rate at t_max (ln(t)/t drops to ~0.58 of itself, exponential growth keeps ~1).
ExpansionEstimate max_expansion_rate(const FlowModel& model, double t_max, std::size_t orbit_samples,
                                     std::uint64_t seed, unsigned threads = 0);

// Lyapunov exponents along the orbit of s by QR reorthogonalisation of the
// step Jacobians, sorted descending. Throws DegenerateFrameError when the
// evolved frame loses rank.
std::vector<double> lyapunov_spectrum(const FlowModel& model, const PhaseState& s, double t_max, double renorm_step);

// Sum of the exponents above 1e-6 weighted by multiplicity (0 when none).
double positive_sum_chi(const std::vector<double>& spectrum, const std::vector<int>& multiplicities);

struct EntropyCell {
    double T, eps;
    std::size_t N;
};

struct EntropyEstimate {
    double h_top = 0;      // slope of ln N against T at the smallest eps
    double h_next = 0;     // same slope at the second smallest eps
    bool unstable = false; // the two slopes differ by more than 20%
    std::vector<EntropyCell> table;
};

// Greedy (T, eps)-separated subsets of a Liouville sample pool under the
// Bowen distance sampled on a time grid of step min(eps) / (2 v). N is a lower
// bound on the maximal separated cardinality. Throws SampleStarvationError
// when a greedy set takes the whole pool.
EntropyEstimate bowen_entropy(const FlowModel& model, const std::vector<double>& T_list,
                              const std::vector<double>& eps_list, std::size_t samples, std::uint64_t seed,
                              unsigned threads = 0);

// |ln h| / (lambda_max + ell), +infinity for polynomial growth.
double ehrenfest_time(double lambda_max, double ell, double h, bool polynomial);

struct InvariantReport {
    std::string model;
    double lambda_max = 0;
    bool polynomial = false;
    std::vector<double> lyapunov;
    double chi = 0;
    double h_top = 0;
    bool entropy_unstable = false;
    int m = 0;
    double t_horizon = 0;
    std::vector<double> epsilon_list, T_list;
    std::vector<EntropyCell> entropy_table;
};

struct InvariantOptions {
    double t_max = 30;
    std::size_t orbit_samples = 100;
    double lyapunov_t_max = 200;
    double renorm_step = 1;
    std::vector<double> T_list = {2.0, 3.0, 4.0};
    std::vector<double> eps_list = {0.3, 0.25};
    std::size_t entropy_samples = 20000;
    std::uint64_t seed = 1;
    unsigned threads = 0;
};

InvariantReport compute_invariants(const FlowModel& model, const InvariantOptions& opts);

struct InequalityCheck {
    std::string name;
    double lhs, rhs;
    bool pass;
};

// h_top <= m Lambda_max, h_top <= chi (Liouville form of Margulis-Ruelle) and,
// for Anosov flows, (m/4) Lambda_max <= h_top; each with additive slack 0.1.
std::vector<InequalityCheck> inequality_report(const InvariantReport& report, bool anosov);

// model,lambda_max,lyap1,lyap2,lyap3,chi,h_top,flags
void write_invariants_csv(std::ostream& out, const InvariantReport& report);
// T,eps,N
void write_entropy_csv(std::ostream& out, const std::vector<EntropyCell>& table);

} // namespace weyllab
