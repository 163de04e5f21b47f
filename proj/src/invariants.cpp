#include "weyllab/invariants.hpp"

#include "weyllab/errors.hpp"
#include "weyllab/format.hpp"
#include "weyllab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace weyllab {

namespace {

double operator_norm(const Matrix& J) {
    Eigen::JacobiSVD<Matrix> svd(J);
    return svd.singularValues()[0];
}

// Least-squares slope of y against x.
double slope(const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<double>(x.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace

ExpansionEstimate max_expansion_rate(const FlowModel& model, double t_max, std::size_t orbit_samples,
                                     std::uint64_t seed, unsigned threads) {
    if (!(t_max >= 10)) throw DomainError("max_expansion_rate: t_max must be >= 10");
    if (orbit_samples < 100) throw DomainError("max_expansion_rate: need at least 100 orbit samples");
    std::vector<double> r1(orbit_samples), r2(orbit_samples);
    parallel_for(orbit_samples, threads, [&](std::size_t i) {
        auto rng = substream(seed, i);
        const auto s = model.liouville_sample(rng);
        const Matrix J1 = model.tangent_flow(s, t_max);
        const Matrix J2 = model.tangent_flow(model.flow(s, t_max), t_max) * J1;
        r1[i] = std::log(operator_norm(J1)) / t_max;
        r2[i] = std::log(operator_norm(J2)) / (2 * t_max);
    });
    ExpansionEstimate e;
    e.rate = std::max(0.0, *std::max_element(r1.begin(), r1.end()));
    e.rate_doubled = std::max(0.0, *std::max_element(r2.begin(), r2.end()));
    e.polynomial = e.rate < 1e-9 || e.rate_doubled < 0.75 * e.rate;
    return e;
}

std::vector<double> lyapunov_spectrum(const FlowModel& model, const PhaseState& s, double t_max, double renorm_step) {
    if (!(renorm_step >= 0.1 && renorm_step <= 1)) throw DomainError("lyapunov_spectrum: renorm_step must be in [0.1, 1]");
    if (!(t_max >= 50 * renorm_step)) throw DomainError("lyapunov_spectrum: t_max must be >= 50 renorm_step");
    const int m = model.level_dimension();
    Matrix Q = Matrix::Identity(m, m);
    Vector sums = Vector::Zero(m);
    PhaseState cur = s;
    const auto steps = static_cast<std::size_t>(std::ceil(t_max / renorm_step - 1e-9));
    const double dt = t_max / static_cast<double>(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const Matrix M = model.tangent_flow(cur, dt) * Q;
        Eigen::HouseholderQR<Matrix> qr(M);
        const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
        Q = qr.householderQ() * Matrix::Identity(m, m);
        for (int j = 0; j < m; ++j) {
            const double rjj = std::abs(R(j, j));
            if (!(rjj > 1e-300) || !std::isfinite(rjj)) throw DegenerateFrameError("lyapunov_spectrum: frame lost rank");
            sums[j] += std::log(rjj);
        }
        cur = model.flow(cur, dt);
    }
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) out[static_cast<std::size_t>(j)] = sums[j] / t_max;
    std::sort(out.begin(), out.end(), std::greater<>());
    return out;
}

double positive_sum_chi(const std::vector<double>& spectrum, const std::vector<int>& multiplicities) {
    if (spectrum.size() != multiplicities.size())
        throw DomainError("positive_sum_chi: spectrum and multiplicities differ in length");
    double chi = 0;
    for (std::size_t i = 0; i < spectrum.size(); ++i)
        if (spectrum[i] > 1e-6) chi += spectrum[i] * multiplicities[i];
    return chi;
}

EntropyEstimate bowen_entropy(const FlowModel& model, const std::vector<double>& T_list,
                              const std::vector<double>& eps_list, std::size_t samples, std::uint64_t seed,
                              unsigned threads) {
    if (T_list.size() < 3 || !std::is_sorted(T_list.begin(), T_list.end()) ||
        std::adjacent_find(T_list.begin(), T_list.end()) != T_list.end() || !(T_list.front() > 0))
        throw DomainError("bowen_entropy: T_list must be increasing, positive, with >= 3 entries");
    if (eps_list.size() < 2 || !std::is_sorted(eps_list.rbegin(), eps_list.rend()) ||
        std::adjacent_find(eps_list.begin(), eps_list.end()) != eps_list.end() || !(eps_list.back() > 0))
        throw DomainError("bowen_entropy: eps_list must be decreasing, positive, with >= 2 entries");
    if (samples == 0) throw DomainError("bowen_entropy: need samples > 0");

    // orbit samples on a common time grid that contains every T
    const double dt_max = eps_list.back() / (2.0 * model.speed_bound() * model.lipschitz_bound());
    std::vector<double> times = {0.0};
    for (double T : T_list) {
        const double t0 = times.back();
        const auto k = static_cast<std::size_t>(std::ceil((T - t0) / dt_max));
        for (std::size_t j = 1; j <= k; ++j) times.push_back(j == k ? T : t0 + (T - t0) * j / k);
    }
    std::vector<std::size_t> upto; // number of grid times within [0, T_i]
    for (double T : T_list)
        upto.push_back(static_cast<std::size_t>(std::find(times.begin(), times.end(), T) - times.begin()) + 1);

    const std::size_t nt = times.size();
    std::vector<PhaseState> orbit(samples * nt);
    parallel_for(samples, threads, [&](std::size_t i) {
        auto rng = substream(seed, i);
        PhaseState cur = model.liouville_sample(rng);
        orbit[i * nt] = cur;
        for (std::size_t j = 1; j < nt; ++j) {
            cur = model.flow(cur, times[j] - times[j - 1]);
            orbit[i * nt + j] = cur;
        }
    });

    const std::size_t n_cells = T_list.size() * eps_list.size();
    std::vector<std::size_t> counts(n_cells);
    std::vector<char> starved(n_cells, 0);
    parallel_for(n_cells, threads, [&](std::size_t c) {
        const std::size_t ie = c / T_list.size(), it = c % T_list.size();
        const double eps = eps_list[ie];
        const std::size_t len = upto[it];
        std::vector<std::size_t> chosen;
        for (std::size_t p = 0; p < samples; ++p) {
            bool separated = true;
            for (std::size_t q : chosen) {
                bool far = false;
                for (std::size_t j = 0; j < len && !far; ++j)
                    far = model.distance(orbit[p * nt + j], orbit[q * nt + j]) > eps;
                if (!far) {
                    separated = false;
                    break;
                }
            }
            if (separated) chosen.push_back(p);
        }
        counts[c] = chosen.size();
        starved[c] = chosen.size() == samples;
    });
    for (std::size_t c = 0; c < n_cells; ++c)
        if (starved[c])
            throw SampleStarvationError("bowen_entropy: separated set took the whole pool of " +
                                        std::to_string(samples) + " samples");

    EntropyEstimate est;
    for (std::size_t ie = 0; ie < eps_list.size(); ++ie)
        for (std::size_t it = 0; it < T_list.size(); ++it)
            est.table.push_back({T_list[it], eps_list[ie], counts[ie * T_list.size() + it]});
    auto slope_at = [&](std::size_t ie) {
        std::vector<double> lnN;
        for (std::size_t it = 0; it < T_list.size(); ++it)
            lnN.push_back(std::log(static_cast<double>(counts[ie * T_list.size() + it])));
        return std::max(0.0, slope(T_list, lnN));
    };
    const std::size_t last = eps_list.size() - 1;
    est.h_top = slope_at(last);
    est.h_next = slope_at(last - 1);
    const double scale = std::max(est.h_top, est.h_next);
    est.unstable = scale > 0.05 && std::abs(est.h_top - est.h_next) > 0.2 * scale;
    return est;
}

double ehrenfest_time(double lambda_max, double ell, double h, bool polynomial) {
    if (!(h > 0 && h < 1)) throw DomainError("ehrenfest_time: h must lie in (0, 1)");
    if (!(ell > 0)) throw DomainError("ehrenfest_time: ell must be positive");
    if (polynomial) return std::numeric_limits<double>::infinity();
    if (!(lambda_max >= 0)) throw DomainError("ehrenfest_time: lambda_max must be >= 0");
    return std::abs(std::log(h)) / (lambda_max + ell);
}

InvariantReport compute_invariants(const FlowModel& model, const InvariantOptions& opts) {
    InvariantReport rep;
    rep.model = model.name();
    rep.m = model.level_dimension();
    rep.t_horizon = opts.t_max;
    const auto exp = max_expansion_rate(model, opts.t_max, opts.orbit_samples, opts.seed, opts.threads);
    rep.lambda_max = exp.rate;
    rep.polynomial = exp.polynomial;
    auto rng = substream(opts.seed, std::numeric_limits<std::uint64_t>::max());
    rep.lyapunov = lyapunov_spectrum(model, model.liouville_sample(rng), opts.lyapunov_t_max, opts.renorm_step);
    rep.chi = positive_sum_chi(rep.lyapunov, std::vector<int>(rep.lyapunov.size(), 1));
    const auto ent = bowen_entropy(model, opts.T_list, opts.eps_list, opts.entropy_samples, opts.seed, opts.threads);
    rep.h_top = ent.h_top;
    rep.entropy_unstable = ent.unstable;
    rep.epsilon_list = opts.eps_list;
    rep.T_list = opts.T_list;
    rep.entropy_table = ent.table;
    return rep;
}

std::vector<InequalityCheck> inequality_report(const InvariantReport& r, bool anosov) {
    constexpr double slack = 0.1;
    std::vector<InequalityCheck> out;
    auto add = [&](std::string name, double lhs, double rhs) {
        out.push_back({std::move(name), lhs, rhs, lhs <= rhs + slack});
    };
    add("h_top <= m lambda_max", r.h_top, r.m * r.lambda_max);
    add("h_top <= chi", r.h_top, r.chi);
    if (anosov) add("(m/4) lambda_max <= h_top", 0.25 * r.m * r.lambda_max, r.h_top);
    return out;
}

void write_invariants_csv(std::ostream& out, const InvariantReport& r) {
    out << "model,lambda_max,lyap1,lyap2,lyap3,chi,h_top,flags\n";
    out << r.model << ',' << format_double(r.lambda_max);
    for (std::size_t i = 0; i < 3; ++i) {
        out << ',';
        if (i < r.lyapunov.size()) out << format_double(r.lyapunov[i]);
    }
    std::string flags;
    if (r.polynomial) flags = "polynomial";
    if (r.entropy_unstable) flags += flags.empty() ? "entropy_unstable" : ";entropy_unstable";
    out << ',' << format_double(r.chi) << ',' << format_double(r.h_top) << ',' << flags << '\n';
}

void write_entropy_csv(std::ostream& out, const std::vector<EntropyCell>& table) {
    out << "T,eps,N\n";
    for (const auto& c : table) out << format_double(c.T) << ',' << format_double(c.eps) << ',' << c.N << '\n';
}

} // namespace weyllab
