#include "weyllab/weyl.hpp"

#include "weyllab/csv.hpp"
#include "weyllab/errors.hpp"
#include "weyllab/format.hpp"
#include "weyllab/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace weyllab {

namespace {

void check_h(double h) {
    if (!(h > 0 && h < 1)) throw DomainError("h must lie in (0, 1), got " + format_double(h));
}

} // namespace

WeylSeriesRow weyl_row(double h, std::int64_t N, double leading) {
    check_h(h);
    if (!(leading > 0)) throw DomainError("leading term must be positive");
    return {h, N, leading, (static_cast<double>(N) / leading - 1.0) / h};
}

std::vector<WeylSeriesRow> remainder_series(const std::vector<std::pair<double, std::int64_t>>& counts,
                                            const FlowModel& model) {
    std::vector<double> hs;
    std::vector<WeylSeriesRow> rows;
    for (const auto& [h, N] : counts) {
        check_h(h);
        if (std::find(hs.begin(), hs.end(), h) != hs.end()) throw DomainError("remainder_series: repeated h");
        hs.push_back(h);
        rows.push_back(weyl_row(h, N, weyl_leading(model, h)));
    }
    return rows;
}

std::vector<WeylSeriesRow> weyl_series(const FlowModel& model, const std::vector<double>& hs, unsigned threads) {
    std::vector<std::pair<double, std::int64_t>> counts;
    for (double h : hs) counts.emplace_back(h, eigenvalue_count(model, lambda_from_h(h), threads));
    return remainder_series(counts, model);
}

ExponentFit remainder_exponent_fit(const std::vector<WeylSeriesRow>& series, bool log_mode) {
    std::vector<double> x, y;
    double hmin = std::numeric_limits<double>::infinity(), hmax = 0;
    for (const auto& r : series) {
        check_h(r.h);
        if (r.R_h == 0.0) continue;
        x.push_back(log_mode ? -std::log(std::abs(std::log(r.h))) : std::log(r.h));
        y.push_back(std::log(std::abs(r.R_h)));
        hmin = std::min(hmin, r.h);
        hmax = std::max(hmax, r.h);
    }
    if (x.size() < 8) throw DomainError("remainder_exponent_fit: need at least 8 rows with R_h != 0");
    if (hmax / hmin < 100 * (1 - 1e-12)) throw DomainError("remainder_exponent_fit: h must span at least 2 decades");
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    ExponentFit fit;
    fit.exponent = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double logc = (sy - fit.exponent * sx) / n;
    fit.constant = std::exp(logc);
    fit.rows = x.size();
    for (std::size_t i = 0; i < x.size(); ++i)
        fit.residual = std::max(fit.residual, std::abs(logc + fit.exponent * x[i] - y[i]));
    return fit;
}

std::string to_string(PlanClass c) {
    switch (c) {
    case PlanClass::Anosov: return "anosov";
    case PlanClass::LieGroup: return "lie_group";
    case PlanClass::Surfrev: return "surfrev";
    }
    return "?";
}

PlanClass plan_class_from_string(const std::string& s) {
    if (s == "anosov") return PlanClass::Anosov;
    if (s == "lie_group" || s == "lie") return PlanClass::LieGroup;
    if (s == "surfrev") return PlanClass::Surfrev;
    throw ConfigError("unknown plan class '" + s + "' (expected anosov, lie_group or surfrev)");
}

PlanResult plan_parameters(const PlanRequest& req) {
    check_h(req.h);
    if (!(req.ell > 0)) throw DomainError("plan: ell must be positive");
    if (!(req.c > 0)) throw DomainError("plan: c must be positive");
    const double lnh = std::abs(std::log(req.h));
    PlanResult out{};
    out.cls = req.cls;
    out.order = req.order;
    out.h = req.h;
    out.ell = req.ell;
    out.ehrenfest = std::numeric_limits<double>::infinity();
    if (req.lambda_max) {
        if (!(*req.lambda_max >= 0)) throw DomainError("plan: lambda_max must be >= 0");
        out.ehrenfest = lnh / (*req.lambda_max + req.ell);
    }
    switch (req.cls) {
    case PlanClass::Anosov:
        if (!req.lambda_max) throw DomainError("plan: the anosov class needs lambda_max");
        out.order = 0;
        out.delta = 0.25;
        out.T = 0.25 * out.ehrenfest;
        out.exponent = 0;
        out.predicted_bound = 4 * (*req.lambda_max + req.ell) / lnh;
        break;
    case PlanClass::LieGroup: {
        if (req.order < 1) throw DomainError("plan: rank p must be >= 1");
        const double p = req.order;
        out.exponent = (p - 1) / (3 * p + 1);
        out.delta = req.order == 1 ? 0.0 : (p + 1) / (3 * p + 1);
        out.T = std::pow(req.h, -out.exponent);
        out.predicted_bound = std::pow(req.h, out.exponent);
        break;
    }
    case PlanClass::Surfrev: {
        if (req.order < 1) throw DomainError("plan: vanishing order r must be >= 1");
        const double r = req.order;
        out.exponent = 1 / (4 * r - 1);
        out.delta = (2 * r - 1) / (4 * r - 1);
        out.T = std::pow(req.h, -out.exponent);
        out.predicted_bound = std::pow(req.h, out.exponent);
        break;
    }
    }
    out.eps = req.c * std::pow(req.h, out.delta);
    if (std::isfinite(out.ehrenfest)) {
        const double cap = (0.5 - out.delta) * out.ehrenfest;
        if (out.T > cap * (1 + 1e-12))
            throw PlanInfeasibleError("plan: T = " + format_double(out.T) + " exceeds (1/2 - delta) T_E = " +
                                      format_double(cap));
    }
    return out;
}

nlohmann::json plan_to_json(const PlanResult& p) {
    nlohmann::json j = {{"class", to_string(p.cls)}, {"delta", p.delta}, {"eps", p.eps},
                        {"T", p.T},                 {"predicted_bound", p.predicted_bound}};
    if (p.cls != PlanClass::Anosov) j[p.cls == PlanClass::LieGroup ? "p" : "r"] = p.order;
    j["h"] = p.h;
    j["exponent"] = p.exponent;
    if (std::isfinite(p.ehrenfest)) j["ehrenfest_time"] = p.ehrenfest;
    else j["ehrenfest_time"] = nullptr;
    if (p.cls == PlanClass::Anosov) j["ell"] = p.ell;
    return j;
}

double BoundShape::operator()(double h) const {
    return kind == Kind::Power ? std::pow(h, exponent) : 1.0 / std::abs(std::log(h));
}

std::string BoundShape::describe() const {
    return kind == Kind::Power ? "h^" + format_double(exponent) : "1/|ln h|";
}

BoundShape BoundShape::from_plan(const PlanResult& plan) {
    if (plan.cls == PlanClass::Anosov) return {Kind::InverseLog, 1.0};
    return {Kind::Power, plan.exponent};
}

WeylBoundReport verify_bound(const std::vector<WeylSeriesRow>& series, const BoundShape& shape, double slack) {
    if (series.empty()) throw DomainError("verify_bound: empty series");
    WeylBoundReport rep;
    for (std::size_t i = 1; i < series.size(); ++i)
        if (series[i].h > series[rep.anchor_index].h) rep.anchor_index = i;
    const auto& a = series[rep.anchor_index];
    rep.constant = std::abs(a.R_h) / shape(a.h);
    for (std::size_t i = 0; i < series.size(); ++i) {
        const double allowed = rep.constant * shape(series[i].h) * slack;
        const double v = std::abs(series[i].R_h);
        const double ratio = v == 0.0 ? 0.0 : (allowed > 0 ? v / allowed : std::numeric_limits<double>::infinity());
        if (ratio > rep.worst_ratio) {
            rep.worst_ratio = ratio;
            rep.worst_index = i;
        }
        if (v > allowed) {
            rep.pass = false;
            rep.violations.push_back(i);
        }
    }
    return rep;
}

void write_weyl_csv(std::ostream& out, const std::string& model, const std::vector<WeylSeriesRow>& rows) {
    out << "model,h,N,leading,R_h\n";
    for (const auto& r : rows)
        out << model << ',' << format_double(r.h) << ',' << r.N << ',' << format_double(r.leading) << ','
            << format_double(r.R_h) << '\n';
}

std::vector<WeylSeriesRow> read_weyl_csv(std::istream& in) {
    std::string line;
    if (!csv::next_line(in, line)) throw ConfigError("weyl csv: empty input");
    if (line != "model,h,N,leading,R_h") throw ConfigError("weyl csv: unexpected header '" + line + "'");
    std::vector<WeylSeriesRow> rows;
    std::size_t lineno = 1;
    while (csv::next_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto cells = csv::split(line);
        if (cells.size() != 5) throw ConfigError("weyl csv: line " + std::to_string(lineno) + " needs 5 fields");
        rows.push_back({csv::to_double(cells[1]), csv::to_int(cells[2]), csv::to_double(cells[3]),
                        csv::to_double(cells[4])});
    }
    if (rows.empty()) throw ConfigError("weyl csv: no data rows");
    return rows;
}

} // namespace weyllab
