#include "cli.hpp"

#include "weyllab/errors.hpp"
#include "weyllab/format.hpp"
#include "weyllab/invariants.hpp"
#include "weyllab/models.hpp"
#include "weyllab/recurrence.hpp"
#include "weyllab/spectra.hpp"
#include "weyllab/surfrev.hpp"
#include "weyllab/weyl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>

namespace weyllab::cli {

namespace {

using json = nlohmann::json;

ModelPtr model_from(Params& p) {
    const auto raw = p.object("model");
    auto model = make_model(raw);
    auto canonical = model->descriptor();
    for (const char* key : {"t0", "lipschitz"})
        if (raw.contains(key)) canonical[key] = raw[key];
    p.record("model", canonical);
    return model;
}

std::size_t count_field(Params& p, const std::string& key, std::int64_t fallback, std::int64_t min = 1) {
    const auto v = p.integer(key, fallback);
    if (v < min) throw ConfigError("field '" + key + "' must be >= " + std::to_string(min));
    return static_cast<std::size_t>(v);
}

std::string read_input(Params& p, const std::string& key) {
    const auto path = p.text(key);
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("field '" + key + "': cannot read '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    p.record(key + "_sha256", sha256_hex(ss.str()));
    return ss.str();
}

std::string json_text(const json& j) { return j.dump(2) + "\n"; }

PlanRequest plan_request(Params& p) {
    PlanRequest r;
    r.cls = plan_class_from_string(p.text("class"));
    if (r.cls != PlanClass::Anosov) {
        const auto order = p.integer(r.cls == PlanClass::LieGroup ? "p" : "r");
        if (order < 1 || order > std::numeric_limits<int>::max())
            throw ConfigError(std::string("field '") + (r.cls == PlanClass::LieGroup ? "p" : "r") + "' must be >= 1");
        r.order = static_cast<int>(order);
    }
    r.h = p.number("h");
    r.ell = p.number("ell", r.ell);
    if (p.has("lambda_max")) r.lambda_max = p.number("lambda_max");
    r.c = p.number("c", r.c);
    return r;
}

CommandOutput cmd_recurrence(Params& p, unsigned threads, std::ostream& log) {
    const auto model = model_from(p);
    const auto eps = p.grid("eps");
    const auto T = p.grid("T");
    const auto samples = count_field(p, "samples", 10000);
    const auto seed = p.seed();
    const double K = p.number("K", 1.0);
    if (!(K >= 1)) throw ConfigError("field 'K' must be >= 1");
    std::optional<double> t_min;
    if (p.has("t_min")) t_min = p.number("t_min");

    log << "recurrence: " << model->name() << ", " << eps.size() << " eps x " << T.size() << " T, " << samples
        << " samples, seed " << seed << '\n';
    std::vector<double> wide;
    for (double e : eps) wide.push_back(K * e);
    auto rows = recurrence_grid(*model, wide, T, samples, seed, threads, t_min);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].spec.eps = eps[i / T.size()];
        rows[i].spec.surrogate_factor = K;
    }
    std::size_t failed = 0;
    for (const auto& r : rows) failed = std::max(failed, r.failed);
    if (failed) log << "recurrence: " << failed << " samples could not be integrated and were excluded\n";

    std::ostringstream csv;
    write_recurrence_csv(csv, model->name(), rows);
    return {{{"recurrence.csv", csv.str()}}, {std::to_string(rows.size()) + " cells"}, true};
}

CommandOutput cmd_invariants(Params& p, unsigned threads, std::ostream& log) {
    const auto model = model_from(p);
    InvariantOptions o;
    o.t_max = p.number("t_max", o.t_max);
    o.orbit_samples = count_field(p, "orbit_samples", static_cast<std::int64_t>(o.orbit_samples));
    o.lyapunov_t_max = p.number("lyapunov_t_max", o.lyapunov_t_max);
    o.renorm_step = p.number("renorm_step", o.renorm_step);
    o.T_list = p.grid("T_list", o.T_list);
    auto eps = o.eps_list;
    std::sort(eps.begin(), eps.end());
    eps = p.grid("eps_list", eps);
    o.eps_list.assign(eps.rbegin(), eps.rend());
    o.entropy_samples = count_field(p, "entropy_samples", static_cast<std::int64_t>(o.entropy_samples));
    o.seed = p.seed();
    o.threads = threads;
    const bool anosov = p.flag("anosov", model->kind() == ModelKind::CatMapSuspension);

    log << "invariants: " << model->name() << ", " << o.entropy_samples << " entropy samples, seed " << o.seed << '\n';
    const auto report = compute_invariants(*model, o);
    const auto checks = inequality_report(report, anosov);

    std::ostringstream inv, ent, ineq;
    write_invariants_csv(inv, report);
    write_entropy_csv(ent, report.entropy_table);
    ineq << "check,lhs,rhs,pass\n";
    std::vector<std::string> summary = {"lambda_max " + format_double(report.lambda_max) + ", h_top " +
                                        format_double(report.h_top) + ", chi " + format_double(report.chi)};
    for (const auto& c : checks) {
        ineq << c.name << ',' << format_double(c.lhs) << ',' << format_double(c.rhs) << ','
             << (c.pass ? "true" : "false") << '\n';
        summary.push_back(std::string(c.pass ? "PASS " : "FAIL ") + c.name);
    }
    return {{{"invariants.csv", inv.str()}, {"entropy.csv", ent.str()}, {"inequalities.csv", ineq.str()}},
            summary,
            true};
}

// Exactly one of lambda, h or R (frequency radius, lambda = R^2).
std::vector<double> lambda_grid(Params& p, bool allow_radius) {
    const int given = p.has("lambda") + p.has("h") + (allow_radius && p.has("R"));
    if (given != 1)
        throw ConfigError(allow_radius ? "give exactly one of 'lambda', 'h' or 'R'" : "give exactly one of 'lambda' or 'h'");
    std::vector<double> out;
    if (p.has("lambda")) return p.grid("lambda");
    if (p.has("h")) {
        for (double h : p.grid("h")) out.push_back(lambda_from_h(h));
        return out;
    }
    for (double R : p.grid("R")) out.push_back(R * R);
    return out;
}

CommandOutput cmd_spectrum(Params& p, unsigned threads, std::ostream& log) {
    const auto model = model_from(p);
    const auto lambdas = lambda_grid(p, true);
    log << "spectrum: " << model->name() << ", " << lambdas.size() << " levels\n";
    const auto rows = spectrum_series(*model, lambdas, threads);
    std::ostringstream csv;
    write_spectrum_csv(csv, model->name(), rows);
    std::vector<std::string> summary;
    for (const auto& r : rows) summary.push_back("lambda " + format_double(r.lambda) + ": N = " + std::to_string(r.count));
    return {{{"spectrum.csv", csv.str()}}, summary, false};
}

CommandOutput cmd_weyl(Params& p, unsigned threads, std::ostream& log) {
    const auto model = model_from(p);
    std::vector<double> hs;
    for (double L : lambda_grid(p, false)) hs.push_back(h_from_lambda(L));
    log << "weyl: " << model->name() << ", " << hs.size() << " values of h\n";
    const auto rows = weyl_series(*model, hs, threads);
    std::ostringstream csv;
    write_weyl_csv(csv, model->name(), rows);
    double worst = 0;
    for (const auto& r : rows) worst = std::max(worst, std::abs(r.R_h));
    return {{{"weyl.csv", csv.str()}}, {std::to_string(rows.size()) + " rows, max |R_h| " + format_double(worst)}, false};
}

CommandOutput cmd_plan(Params& p, unsigned, std::ostream& log) {
    const auto req = plan_request(p);
    log << "plan: " << to_string(req.cls) << ", h " << format_double(req.h) << '\n';
    const auto j = plan_to_json(plan_parameters(req));
    return {{{"plan.json", json_text(j)}}, {j.dump()}, false};
}

CommandOutput cmd_returnmap(Params& p, unsigned threads, std::ostream& log) {
    const auto model = model_from(p);
    const auto* surface = dynamic_cast<const SurfaceOfRevolution*>(model.get());
    if (!surface) throw ConfigError("returnmap needs a surfrev model");
    std::vector<double> alphas;
    if (p.has("alpha")) {
        alphas = p.grid("alpha");
    } else {
        const auto n = count_field(p, "count", 64);
        for (std::size_t i = 1; i <= n; ++i)
            alphas.push_back(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n + 1));
    }
    const auto order_grid = count_field(p, "order_grid", 0, 0);
    log << "returnmap: " << alphas.size() << " directions\n";

    const auto samples = return_map(*surface, alphas, threads);
    std::ostringstream csv;
    csv << "alpha,tau,theta,clairaut\n";
    for (const auto& s : samples)
        csv << format_double(s.alpha) << ',' << format_double(s.tau) << ',' << format_double(s.theta) << ','
            << format_double(s.clairaut) << '\n';
    CommandOutput out{{{"returnmap.csv", csv.str()}}, {std::to_string(samples.size()) + " directions"}, false};
    if (order_grid > 0) {
        log << "returnmap: vanishing order on " << order_grid << " grid points\n";
        const auto v = vanishing_order(*surface, static_cast<int>(order_grid), threads);
        const json j = {{"r", v.r},
                        {"degenerate", v.degenerate},
                        {"worst_alpha", v.worst_alpha},
                        {"noise_floor", v.noise_floor},
                        {"critical_alphas", v.critical_alphas}};
        out.files.push_back({"returnmap_order.json", json_text(j)});
        out.summary.push_back("vanishing order r = " + std::to_string(v.r) + (v.degenerate ? " (degenerate)" : ""));
    }
    return out;
}

TimeLaw time_law(const std::string& mode, const std::string& field) {
    if (mode == "power") return TimeLaw::Power;
    if (mode == "exponential") return TimeLaw::Exponential;
    throw ConfigError("field '" + field + "': expected power or exponential, got '" + mode + "'");
}

CommandOutput cmd_scaling_fit(Params& p, unsigned, std::ostream& log) {
    std::istringstream in(read_input(p, "in"));
    const auto rows = read_recurrence_csv(in);
    const auto mode_name = p.text("mode", "power");
    const auto mode = time_law(mode_name, "mode");
    std::vector<ScalingRow> fit_rows;
    for (const auto& r : rows)
        if (r.volume > 0) fit_rows.push_back({r.spec.eps, r.spec.T, r.volume});
    log << "scaling-fit: " << fit_rows.size() << " of " << rows.size() << " rows with positive volume\n";
    const auto fit = scaling_fit(fit_rows, mode);
    json j = {{"mode", mode_name},       {"a_eps", fit.a_eps},
              {"b_T", fit.b_T},          {"log_c", fit.log_c},
              {"residual", fit.residual}, {"rows_used", fit_rows.size()},
              {"rows_skipped", rows.size() - fit_rows.size()}};
    std::vector<std::string> summary = {"a_eps " + format_double(fit.a_eps) + ", b_T " + format_double(fit.b_T) +
                                        ", residual " + format_double(fit.residual)};
    if (p.has("law")) {
        const auto spec = p.object("law");
        Params lp(spec);
        BoundLaw law;
        law.eps_exponent = lp.number("eps_exponent");
        law.t_exponent = lp.number("t_exponent");
        law.mode = time_law(lp.text("mode", "power"), "law.mode");
        const double slack = lp.number("slack", 1.5);
        p.record("law", lp.resolved());
        const auto anchor = min_law_anchor(rows, law);
        const auto rep = bound_check(rows, law, anchor, slack);
        j["bound"] = {{"law", law.describe()},
                      {"slack", slack},
                      {"pass", rep.pass},
                      {"constant", rep.constant},
                      {"anchor", {{"eps", rows[anchor].spec.eps}, {"T", rows[anchor].spec.T}}},
                      {"worst_ratio", rep.worst_ratio},
                      {"worst", {{"eps", rows[rep.worst_index].spec.eps}, {"T", rows[rep.worst_index].spec.T}}},
                      {"violations", rep.violations.size()}};
        summary.push_back(std::string(rep.pass ? "PASS " : "FAIL ") + law.describe() + ", worst ratio " +
                          format_double(rep.worst_ratio));
    }
    return {{{"scaling_fit.json", json_text(j)}}, summary, false};
}

CommandOutput cmd_verify_bound(Params& p, unsigned, std::ostream& log) {
    std::istringstream in(read_input(p, "in"));
    const auto rows = read_weyl_csv(in);
    BoundShape shape;
    if (p.has("plan")) {
        Params pp(p.object("plan"));
        shape = BoundShape::from_plan(plan_parameters(plan_request(pp)));
        p.record("plan", pp.resolved());
    } else {
        const auto kind = p.text("shape", "power");
        if (kind == "inverse_log") shape.kind = BoundShape::Kind::InverseLog;
        else if (kind == "power") shape.exponent = p.number("exponent");
        else throw ConfigError("field 'shape': expected power or inverse_log, got '" + kind + "'");
    }
    const double slack = p.number("slack", 1.5);
    log << "verify-bound: " << rows.size() << " rows against " << shape.describe() << '\n';
    const auto rep = verify_bound(rows, shape, slack);
    json violations = json::array();
    for (auto i : rep.violations) violations.push_back(rows[i].h);
    const json j = {{"shape", shape.describe()},
                    {"slack", slack},
                    {"pass", rep.pass},
                    {"constant", rep.constant},
                    {"anchor_h", rows[rep.anchor_index].h},
                    {"worst_ratio", rep.worst_ratio},
                    {"worst_h", rows[rep.worst_index].h},
                    {"violations", violations}};
    return {{{"verify_bound.json", json_text(j)}},
            {std::string(rep.pass ? "PASS " : "FAIL ") + shape.describe() + ", worst ratio " +
             format_double(rep.worst_ratio)},
            false};
}

using Command = std::function<CommandOutput(Params&, unsigned, std::ostream&)>;

const std::map<std::string, Command>& registry() {
    static const std::map<std::string, Command> commands = {
        {"recurrence", cmd_recurrence}, {"invariants", cmd_invariants},     {"spectrum", cmd_spectrum},
        {"weyl", cmd_weyl},             {"plan", cmd_plan},                 {"returnmap", cmd_returnmap},
        {"scaling-fit", cmd_scaling_fit}, {"verify-bound", cmd_verify_bound}};
    return commands;
}

} // namespace

std::vector<std::string> command_names() {
    return {"recurrence", "invariants", "spectrum", "weyl", "plan", "returnmap", "scaling-fit", "verify-bound"};
}

CommandOutput run_command(const std::string& name, Params& params, unsigned threads, std::ostream& log) {
    const auto it = registry().find(name);
    if (it == registry().end()) throw ConfigError("unknown command '" + name + "'");
    return it->second(params, threads, log);
}

} // namespace weyllab::cli
