#include "weyllab/recurrence.hpp"

#include "weyllab/csv.hpp"
#include "weyllab/errors.hpp"
#include "weyllab/format.hpp"
#include "weyllab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace weyllab {

void RecurrenceSpec::validate(const FlowModel& model) const {
    if (!(eps > 0) || !std::isfinite(eps)) throw DomainError("recurrence: eps must be positive");
    if (!(surrogate_factor >= 1)) throw DomainError("recurrence: surrogate factor must be >= 1");
    if (!(T > window_start(model))) throw DomainError("recurrence: empty scan window, T must exceed t_min");
}

namespace {

constexpr double kGoldenTolerance = 1e-9;
// A sampled minimum can sit at most v dt / 2 = eps / 4 above the true one.
constexpr double kRefineFactor = 1.5;

double scan_step(const FlowModel& model, double eps) {
    return eps / (2.0 * model.speed_bound() * model.lipschitz_bound());
}

struct Sample {
    double t;
    double d;
    PhaseState state;
};

// Golden-section search for min of d(flow(left, tau - left.t), s) over [left.t, b].
std::pair<double, double> golden_minimum(const FlowModel& model, const PhaseState& s, const Sample& left, double b) {
    constexpr double inv_phi = 0.6180339887498949;
    auto f = [&](double t) { return model.distance(model.flow(left.state, t - left.t), s); };
    double a = left.t;
    double x1 = b - inv_phi * (b - a), x2 = a + inv_phi * (b - a);
    double f1 = f(x1), f2 = f(x2);
    while (b - a > kGoldenTolerance) {
        if (f1 <= f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    const double t = f1 <= f2 ? x1 : x2;
    return {t, std::min(f1, f2)};
}

// Walks t from t0 to stops.back() in steps of at most dt, landing exactly on
// every stop. visit(t, d) sees every sampled point and every refined local
// minimum (those sampled below refine_below); returning true stops the scan.
template <class Visit>
void scan_returns(const FlowModel& model, const PhaseState& s, double t0, const std::vector<double>& stops, double dt,
                  double refine_below, Visit&& visit) {
    const double t_end = stops.back();
    Sample prev2, prev1{t0, 0.0, model.flow(s, t0)};
    prev1.d = model.distance(prev1.state, s);
    if (visit(prev1.t, prev1.d)) return;
    bool have_prev2 = false;
    std::size_t stop = 0;

    auto refine = [&](const Sample& left, double right) {
        const auto [t, d] = golden_minimum(model, s, left, right);
        return visit(t, d);
    };

    while (prev1.t < t_end) {
        while (stop < stops.size() && stops[stop] <= prev1.t) ++stop;
        double tn = std::min(prev1.t + dt, t_end);
        if (stop < stops.size() && tn > stops[stop]) tn = stops[stop];
        Sample cur{tn, 0.0, model.flow(prev1.state, tn - prev1.t)};
        cur.d = model.distance(cur.state, s);

        const bool local_min = (!have_prev2 || prev1.d <= prev2.d) && prev1.d <= cur.d;
        if (local_min && prev1.d < refine_below && prev1.d > 0.0) {
            if (refine(have_prev2 ? prev2 : prev1, cur.t)) return;
        }
        if (visit(cur.t, cur.d)) return;
        prev2 = std::move(prev1);
        prev1 = std::move(cur);
        have_prev2 = true;
    }
    if (have_prev2 && prev1.d <= prev2.d && prev1.d < refine_below && prev1.d > 0.0) refine(prev2, prev1.t);
}

} // namespace

RecurrenceResult is_recurrent(const FlowModel& model, const PhaseState& s, const RecurrenceSpec& spec) {
    spec.validate(model);
    const double t0 = spec.window_start(model);
    RecurrenceResult out;
    out.min_distance = std::numeric_limits<double>::infinity();
    scan_returns(model, s, t0, {spec.T}, scan_step(model, spec.eps), kRefineFactor * spec.eps, [&](double t, double d) {
        out.min_distance = std::min(out.min_distance, d);
        if (d <= spec.eps && t >= t0 && t <= spec.T) {
            out.recurrent = true;
            out.witness = t;
            return true;
        }
        return false;
    });
    return out;
}

std::pair<double, double> wilson_interval(std::size_t k, std::size_t n) {
    if (n == 0) return {0.0, 1.0};
    const double z = 1.959963984540054;
    const double nn = static_cast<double>(n);
    const double p = static_cast<double>(k) / nn;
    const double denom = 1.0 + z * z / nn;
    const double centre = (p + z * z / (2.0 * nn)) / denom;
    const double half = z * std::sqrt(p * (1.0 - p) / nn + z * z / (4.0 * nn * nn)) / denom;
    return {std::max(0.0, std::min(p, centre - half)), std::min(1.0, std::max(p, centre + half))};
}

std::vector<RecurrenceEstimate> recurrence_grid(const FlowModel& model, const std::vector<double>& eps,
                                                const std::vector<double>& T, std::size_t samples, std::uint64_t seed,
                                                unsigned threads, std::optional<double> t_min) {
    if (eps.empty() || T.empty()) throw DomainError("recurrence grid needs at least one eps and one T");
    if (samples == 0) throw DomainError("recurrence grid needs samples > 0");
    RecurrenceSpec probe;
    probe.t_min = t_min;
    const double t0 = probe.window_start(model);
    for (double e : eps)
        if (!(e > 0) || !std::isfinite(e)) throw DomainError("recurrence: eps must be positive");
    for (double t : T)
        if (!(t > t0)) throw DomainError("recurrence: empty scan window, T must exceed t_min");

    std::vector<double> stops(T);
    std::sort(stops.begin(), stops.end());
    stops.erase(std::unique(stops.begin(), stops.end()), stops.end());
    const double eps_min = *std::min_element(eps.begin(), eps.end());
    const double eps_max = *std::max_element(eps.begin(), eps.end());
    const double dt = scan_step(model, eps_min);
    const std::size_t nt = stops.size();

    // best[i * nt + j]: smallest return distance of sample i within [t0, stops[j]]
    std::vector<double> best(samples * nt, std::numeric_limits<double>::infinity());
    std::vector<char> failed(samples, 0);
    parallel_for(samples, threads, [&](std::size_t i) {
        auto rng = substream(seed, i);
        double* row = best.data() + i * nt;
        try {
            const PhaseState s = model.liouville_sample(rng);
            if (model.exact_min_return(s, t0, t0)) {
                for (std::size_t j = 0; j < nt; ++j) row[j] = *model.exact_min_return(s, t0, stops[j]);
                return;
            }
            std::size_t j = 0;
            double running = std::numeric_limits<double>::infinity();
            std::vector<std::pair<double, double>> events;
            scan_returns(model, s, t0, stops, dt, kRefineFactor * eps_max, [&](double t, double d) {
                events.emplace_back(t, d);
                return false;
            });
            std::sort(events.begin(), events.end());
            for (const auto& [t, d] : events) {
                while (j < nt && stops[j] < t) row[j++] = running;
                running = std::min(running, d);
            }
            while (j < nt) row[j++] = running;
        } catch (const Error&) {
            failed[i] = 1;
        }
    });

    std::size_t n_failed = 0;
    for (char f : failed) n_failed += f;
    const std::size_t n_ok = samples - n_failed;
    const double vol = model.level_volume();

    std::vector<RecurrenceEstimate> out;
    out.reserve(eps.size() * T.size());
    for (double e : eps) {
        for (double t : T) {
            const auto j = static_cast<std::size_t>(std::lower_bound(stops.begin(), stops.end(), t) - stops.begin());
            std::size_t hits = 0;
            for (std::size_t i = 0; i < samples; ++i)
                if (!failed[i] && best[i * nt + j] <= e) ++hits;
            RecurrenceEstimate est;
            est.spec.T = t;
            est.spec.eps = e;
            est.spec.t_min = t0;
            est.spec.surrogate_factor = 1.0;
            est.samples = samples;
            est.hits = hits;
            est.failed = n_failed;
            est.seed = seed;
            const double p = n_ok ? static_cast<double>(hits) / static_cast<double>(n_ok) : 0.0;
            const auto [lo, hi] = wilson_interval(hits, n_ok);
            est.volume = vol * p;
            est.ci_low = vol * lo;
            est.ci_high = vol * hi;
            out.push_back(est);
        }
    }
    return out;
}

RecurrenceEstimate recurrence_volume(const FlowModel& model, const RecurrenceSpec& spec, std::size_t samples,
                                     std::uint64_t seed, unsigned threads) {
    spec.validate(model);
    auto est = recurrence_grid(model, {spec.eps}, {spec.T}, samples, seed, threads, spec.window_start(model)).front();
    est.spec = spec;
    return est;
}

RecurrenceEstimate extended_volume(const FlowModel& model, const RecurrenceSpec& spec, std::size_t samples,
                                   std::uint64_t seed, unsigned threads) {
    spec.validate(model);
    RecurrenceSpec wide = spec;
    wide.eps = spec.eps * spec.surrogate_factor;
    auto est = recurrence_volume(model, wide, samples, seed, threads);
    est.spec = spec;
    return est;
}

ScalingFit scaling_fit(const std::vector<ScalingRow>& rows, TimeLaw mode) {
    if (rows.size() < 6) throw DomainError("scaling_fit needs at least 6 rows");
    std::vector<double> es, ts;
    for (const auto& r : rows) {
        if (!(r.volume > 0) || !(r.eps > 0) || !(r.T > 0)) throw DomainError("scaling_fit needs positive eps, T, volume");
        es.push_back(r.eps);
        ts.push_back(r.T);
    }
    auto distinct = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return std::unique(v.begin(), v.end()) - v.begin();
    };
    if (distinct(es) < 3 || distinct(ts) < 3)
        throw RankDeficiencyError("scaling_fit needs at least 3 distinct eps and 3 distinct T");

    const auto n = static_cast<Eigen::Index>(rows.size());
    Matrix A(n, 3);
    Vector y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = rows[static_cast<std::size_t>(i)];
        A(i, 0) = 1.0;
        A(i, 1) = std::log(r.eps);
        A(i, 2) = mode == TimeLaw::Power ? std::log(r.T) : r.T;
        y[i] = std::log(r.volume);
    }
    const auto qr = A.colPivHouseholderQr();
    if (qr.rank() < 3) throw RankDeficiencyError("scaling_fit design matrix is rank deficient");
    const Vector x = qr.solve(y);
    ScalingFit fit;
    fit.log_c = x[0];
    fit.a_eps = x[1];
    fit.b_T = x[2];
    fit.residual = (A * x - y).cwiseAbs().maxCoeff();
    return fit;
}

double BoundLaw::operator()(double eps, double T) const {
    const double time = mode == TimeLaw::Power ? std::pow(T, t_exponent) : std::exp(t_exponent * T);
    return std::pow(eps, eps_exponent) * time;
}

std::string BoundLaw::describe() const {
    std::ostringstream os;
    os << "eps^" << eps_exponent << (mode == TimeLaw::Power ? " T^" : " exp(") << t_exponent
       << (mode == TimeLaw::Power ? "" : " T)");
    return os.str();
}

BoundReport bound_check(const std::vector<RecurrenceEstimate>& estimates, const BoundLaw& law, std::size_t anchor,
                        double slack) {
    if (estimates.empty()) return {};
    if (anchor >= estimates.size()) throw DomainError("bound_check: anchor index out of range");
    BoundReport rep;
    const auto& a = estimates[anchor];
    rep.constant = a.volume / law(a.spec.eps, a.spec.T);
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        const auto& e = estimates[i];
        const double allowed = rep.constant * law(e.spec.eps, e.spec.T) * slack;
        const double ratio = e.ci_low == 0.0 ? 0.0 : (allowed > 0 ? e.ci_low / allowed : std::numeric_limits<double>::infinity());
        if (ratio > rep.worst_ratio) {
            rep.worst_ratio = ratio;
            rep.worst_index = i;
        }
        if (e.ci_low > allowed) {
            rep.pass = false;
            rep.violations.push_back(i);
        }
    }
    return rep;
}

std::size_t min_law_anchor(const std::vector<RecurrenceEstimate>& estimates, const BoundLaw& law) {
    std::size_t best = 0;
    double best_law = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < estimates.size(); ++i) {
        if (!(estimates[i].volume > 0)) continue;
        const double v = law(estimates[i].spec.eps, estimates[i].spec.T);
        if (v < best_law) {
            best_law = v;
            best = i;
        }
    }
    return best;
}

void write_recurrence_csv(std::ostream& out, const std::string& model, const std::vector<RecurrenceEstimate>& rows) {
    out << "model,T,eps,K,samples,seed,volume,ci_low,ci_high,failed_samples\n";
    for (const auto& r : rows) {
        out << model << ',' << format_double(r.spec.T) << ',' << format_double(r.spec.eps) << ','
            << format_double(r.spec.surrogate_factor) << ',' << r.samples << ',' << r.seed << ','
            << format_double(r.volume) << ',' << format_double(r.ci_low) << ',' << format_double(r.ci_high) << ','
            << r.failed << '\n';
    }
}

std::vector<RecurrenceEstimate> read_recurrence_csv(std::istream& in) {
    static const std::string header = "model,T,eps,K,samples,seed,volume,ci_low,ci_high,failed_samples";
    std::string line;
    if (!csv::next_line(in, line)) throw ConfigError("recurrence csv: empty input");
    if (line != header) throw ConfigError("recurrence csv: unexpected header '" + line + "'");
    std::vector<RecurrenceEstimate> rows;
    std::size_t lineno = 1;
    while (csv::next_line(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto c = csv::split(line);
        if (c.size() != 10) throw ConfigError("recurrence csv: line " + std::to_string(lineno) + " needs 10 fields");
        RecurrenceEstimate r;
        r.spec.T = csv::to_double(c[1]);
        r.spec.eps = csv::to_double(c[2]);
        r.spec.surrogate_factor = csv::to_double(c[3]);
        const auto samples = csv::to_int(c[4]), failed = csv::to_int(c[9]);
        if (samples < 0 || failed < 0 || failed > samples)
            throw ConfigError("recurrence csv: line " + std::to_string(lineno) + ": bad sample counts");
        r.samples = static_cast<std::size_t>(samples);
        r.failed = static_cast<std::size_t>(failed);
        r.seed = csv::to_uint64(c[5]);
        r.volume = csv::to_double(c[6]);
        r.ci_low = csv::to_double(c[7]);
        r.ci_high = csv::to_double(c[8]);
        rows.push_back(r);
    }
    if (rows.empty()) throw ConfigError("recurrence csv: no data rows");
    return rows;
}

} // namespace weyllab
