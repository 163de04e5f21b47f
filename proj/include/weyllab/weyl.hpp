#pragma once

#include "weyllab/models.hpp"
#include "weyllab/spectra.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace weyllab {

// N_h = leading (1 + h R_h).
struct WeylSeriesRow {
    double h;
    std::int64_t N;
    double leading;
    double R_h;
};

WeylSeriesRow weyl_row(double h, std::int64_t N, double leading);

// Rows for (h, N) pairs with leading terms from the model. h values must be
// distinct and lie in (0, 1).
std::vector<WeylSeriesRow> remainder_series(const std::vector<std::pair<double, std::int64_t>>& counts,
                                            const FlowModel& model);

// Counts the model's spectrum at Lambda = 1 / h^2 for each h and extracts R_h.
std::vector<WeylSeriesRow> weyl_series(const FlowModel& model, const std::vector<double>& hs, unsigned threads = 0);

struct ExponentFit {
    double exponent = 0; // |R_h| ~ C h^exponent, or C |ln h|^-exponent in log mode
    double constant = 0;
    double residual = 0; // largest absolute residual of ln |R_h|
    std::size_t rows = 0;
};

// Least squares of ln |R_h| against ln h (or against -ln |ln h| in log mode).
// Rows with R_h = 0 are skipped; needs >= 8 rows spanning >= 2 decades of h.
ExponentFit remainder_exponent_fit(const std::vector<WeylSeriesRow>& series, bool log_mode = false);

enum class PlanClass { Anosov, LieGroup, Surfrev };

std::string to_string(PlanClass c);
PlanClass plan_class_from_string(const std::string& s);

struct PlanRequest {
    PlanClass cls = PlanClass::Anosov;
    int order = 1;                    // p for Lie groups, r for surfaces
    double h = 1e-3;
    double ell = 0.01;
    std::optional<double> lambda_max; // required for Anosov; caps T elsewhere when given
    double c = 1.0;                   // eps = c h^delta
};

struct PlanResult {
    PlanClass cls;
    int order;
    double h;
    double delta;
    double eps;
    double T;
    double exponent;        // power of h in the predicted remainder bound (0 for Anosov)
    double predicted_bound; // bound on |R_h| at this h with unit constant
    double ell;
    double ehrenfest;       // +infinity when the flow grows polynomially
};

// Parameter choices per model class:
//   Anosov      delta = 1/4, T = T_E / 4, bound 4 (lambda + ell) / |ln h|
//   Lie group   delta = 0 (p = 1) or (p+1)/(3p+1), T = h^{-(p-1)/(3p+1)}, bound h^{(p-1)/(3p+1)}
//   surface     delta = (2r-1)/(4r-1), T = h^{-1/(4r-1)}, bound h^{1/(4r-1)}
// Throws PlanInfeasibleError when T > (1/2 - delta) T_E for finite T_E.
PlanResult plan_parameters(const PlanRequest& req);

nlohmann::json plan_to_json(const PlanResult& plan);

struct BoundShape {
    enum class Kind { Power, InverseLog } kind = Kind::Power;
    double exponent = 0;

    double operator()(double h) const;
    std::string describe() const;
    static BoundShape from_plan(const PlanResult& plan);
};

struct WeylBoundReport {
    bool pass = true;
    double constant = 0;    // calibrated at the largest h
    double worst_ratio = 0; // max |R_h| / (C shape(h) slack)
    std::size_t worst_index = 0;
    std::size_t anchor_index = 0;
    std::vector<std::size_t> violations;
};

// PASS when |R_h| <= C shape(h) slack on every row, C = |R_h| / shape(h) at the largest h.
WeylBoundReport verify_bound(const std::vector<WeylSeriesRow>& series, const BoundShape& shape, double slack = 1.5);

// model,h,N,leading,R_h
void write_weyl_csv(std::ostream& out, const std::string& model, const std::vector<WeylSeriesRow>& rows);
std::vector<WeylSeriesRow> read_weyl_csv(std::istream& in);

} // namespace weyllab
