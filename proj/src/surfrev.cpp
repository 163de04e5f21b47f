#include "weyllab/surfrev.hpp"

#include "weyllab/detail/ode.hpp"
#include "weyllab/errors.hpp"
#include "weyllab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace weyllab {

namespace {

constexpr double kReturnBudget = 1e3;
constexpr double kTimeTolerance = 1e-10;
// Accuracy of a single theta sample: the crossing time is bisected to 1e-10
// and the integrator runs at 1e-12, so 1e-9 is a safe upper bound.
constexpr double kThetaNoise = 1e-9;

double wrap(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    return a >= kTwoPi ? 0.0 : a;
}

} // namespace

double clairaut_constant(const SurfaceOfRevolution& surface, const PhaseState& state) {
    return state.momentum[1] / std::sqrt(surface.hamiltonian(state));
}

ReturnMapSample first_return(const SurfaceOfRevolution& surface, double alpha, double base_phi) {
    const double margin = kMinEquatorAngle * (1.0 - 1e-6); // room for rounding in acos(cos(.))
    if (!(alpha >= margin && alpha <= kPi - margin))
        throw DomainError("first_return: alpha must lie in [1e-4, pi - 1e-4]");
    using Ambient = SurfaceOfRevolution::Ambient;
    const double z0 = surface.profile().z0();
    const Ambient start = surface.to_ambient(surface.state_at(z0, base_phi, alpha));
    auto sys = [&surface](const Ambient& y, Ambient& d, double) { surface.rhs(y, d); };

    // The orbit leaves the equator upwards (sin alpha > 0); the first return
    // is the next time z comes back down to z0.
    detail::AdaptiveStepper<Ambient> stepper(surface.options());
    Ambient y = start, prev = start;
    double t = 0.0, t_prev = 0.0;
    bool bracketed = false;
    while (t < kReturnBudget) {
        prev = y;
        t_prev = t;
        stepper.step(sys, y, t, kReturnBudget);
        if (y[2] - z0 <= 0.0) {
            bracketed = true;
            break;
        }
    }
    if (!bracketed) throw NoReturnError("no return to the equator within time 1e3");

    double lo = 0.0, hi = t - t_prev;
    while (hi - lo > kTimeTolerance) {
        const double mid = 0.5 * (lo + hi);
        const Ambient ym = detail::integrate_for(sys, prev, mid, surface.options());
        (ym[2] - z0 > 0.0 ? lo : hi) = mid;
    }
    const double dt = 0.5 * (lo + hi);
    const Ambient end = detail::integrate_for(sys, prev, dt, surface.options());

    ReturnMapSample out;
    out.alpha = alpha;
    out.tau = t_prev + dt;
    out.theta = wrap(std::atan2(end[1], end[0]) - base_phi);
    out.clairaut = surface.profile().rho_max() * std::cos(alpha);
    return out;
}

std::vector<ReturnMapSample> return_map(const SurfaceOfRevolution& surface, const std::vector<double>& alphas,
                                        unsigned threads) {
    std::vector<ReturnMapSample> out(alphas.size());
    parallel_for(alphas.size(), threads, [&](std::size_t i) { out[i] = first_return(surface, alphas[i]); });
    return out;
}

ReturnMapTable::ReturnMapTable(const SurfaceOfRevolution& surface, int grid_size, unsigned threads)
    : rho_max_(surface.profile().rho_max()) {
    if (grid_size < 16) throw DomainError("return map table needs at least 16 grid points");
    const double c_max = rho_max_ * std::cos(kMinEquatorAngle);
    std::vector<double> alphas(grid_size);
    c_.resize(grid_size);
    for (int i = 0; i < grid_size; ++i) {
        c_[i] = c_max * (-1.0 + 2.0 * i / (grid_size - 1));
        alphas[i] = std::acos(std::clamp(c_[i] / rho_max_, -1.0, 1.0));
    }
    samples_ = return_map(surface, alphas, threads);

    theta_.resize(grid_size);
    theta_[0] = samples_[0].theta;
    for (int i = 1; i < grid_size; ++i) {
        theta_[i] = theta_[i - 1] + std::remainder(samples_[i].theta - samples_[i - 1].theta, kTwoPi);
    }
    tau_min_ = tau_max_ = samples_[0].tau;
    for (const auto& s : samples_) {
        tau_min_ = std::min(tau_min_, s.tau);
        tau_max_ = std::max(tau_max_, s.tau);
    }
}

double ReturnMapTable::rational_measure(double T, double eps, double C) const {
    if (!(T > 0) || !(eps > 0)) throw DomainError("rational_measure: T and eps must be positive");
    if (C <= 0) C = return_rate();
    const auto P = static_cast<long long>(std::floor(C * T * (1 + 1e-12)));
    if (P < 1) return 0.0;

    double total = 0.0;
    std::vector<std::pair<double, double>> pieces;
    for (std::size_t i = 0; i + 1 < c_.size(); ++i) {
        const double x0 = theta_[i] / kTwoPi, x1 = theta_[i + 1] / kTwoPi;
        const double c0 = c_[i], c1 = c_[i + 1];
        const double xlo = std::min(x0, x1), xhi = std::max(x0, x1);
        pieces.clear();
        for (long long p = 1; p <= P; ++p) {
            const double pd = static_cast<double>(p);
            const auto q_lo = static_cast<long long>(std::ceil(pd * xlo - eps));
            const auto q_hi = static_cast<long long>(std::floor(pd * xhi + eps));
            for (long long q = q_lo; q <= q_hi; ++q) {
                const double a = std::max(xlo, (q - eps) / pd), b = std::min(xhi, (q + eps) / pd);
                if (a > b) continue;
                if (x1 == x0) {
                    pieces.emplace_back(c0, c1);
                    continue;
                }
                // theta is linear on the segment, so invert directly
                double ca = c0 + (a - x0) / (x1 - x0) * (c1 - c0);
                double cb = c0 + (b - x0) / (x1 - x0) * (c1 - c0);
                if (ca > cb) std::swap(ca, cb);
                pieces.emplace_back(std::max(c0, ca), std::min(c1, cb));
            }
        }
        if (pieces.empty()) continue;
        std::sort(pieces.begin(), pieces.end());
        double cur_a = pieces[0].first, cur_b = pieces[0].second;
        for (std::size_t k = 1; k < pieces.size(); ++k) {
            if (pieces[k].first > cur_b) {
                total += cur_b - cur_a;
                cur_a = pieces[k].first;
                cur_b = pieces[k].second;
            } else {
                cur_b = std::max(cur_b, pieces[k].second);
            }
        }
        total += cur_b - cur_a;
    }
    return total / (2.0 * rho_max_);
}

namespace {

struct LocalFit {
    double u_star;               // critical point in window units
    std::vector<double> taylor;  // coefficients of (u - u_star)^j
    double residual;
};

double poly_eval(const Vector& a, double u, int deriv) {
    double acc = 0.0;
    for (int j = static_cast<int>(a.size()) - 1; j >= deriv; --j) {
        double coef = a[j];
        for (int k = 0; k < deriv; ++k) coef *= (j - k);
        acc = acc * u + coef;
    }
    return acc;
}

LocalFit fit_critical_point(const std::vector<double>& c, const std::vector<double>& theta, std::size_t centre,
                            std::size_t half_width) {
    const int degree = 6;
    const std::size_t lo = centre > half_width ? centre - half_width : 0;
    const std::size_t hi = std::min(c.size() - 1, centre + half_width);
    const double scale = static_cast<double>(half_width) * (c[1] - c[0]);
    const auto rows = static_cast<Eigen::Index>(hi - lo + 1);
    Matrix V(rows, degree + 1);
    Vector rhs(rows);
    for (Eigen::Index k = 0; k < rows; ++k) {
        const double u = (c[lo + k] - c[centre]) / scale;
        double pw = 1.0;
        for (int j = 0; j <= degree; ++j, pw *= u) V(k, j) = pw;
        rhs[k] = theta[lo + k] - theta[centre];
    }
    const Vector a = V.colPivHouseholderQr().solve(rhs);
    const double residual = std::sqrt((V * a - rhs).squaredNorm() / static_cast<double>(rows));

    // locate the critical point of the fit, then refine with Newton
    double u_star = 0.0, best = std::abs(poly_eval(a, 0.0, 1));
    for (int k = -1000; k <= 1000; ++k) {
        const double u = k / 1000.0;
        const double d = std::abs(poly_eval(a, u, 1));
        if (d < best) {
            best = d;
            u_star = u;
        }
    }
    for (int it = 0; it < 20; ++it) {
        const double d2 = poly_eval(a, u_star, 2);
        if (d2 == 0.0) break;
        const double next = u_star - poly_eval(a, u_star, 1) / d2;
        if (std::abs(next) > 1.0) break;
        u_star = next;
    }

    LocalFit fit{u_star, std::vector<double>(degree + 1), residual};
    double factorial = 1.0;
    for (int j = 0; j <= degree; ++j) {
        if (j > 0) factorial *= j;
        fit.taylor[j] = poly_eval(a, u_star, j) / factorial;
    }
    return fit;
}

} // namespace

VanishingOrder vanishing_order(const ReturnMapTable& table) {
    const auto& c = table.clairaut();
    const auto& th = table.theta();
    const std::size_t n = c.size();
    const double h = table.step();
    VanishingOrder out;

    const auto [mn, mx] = std::minmax_element(th.begin(), th.end());
    if (*mx - *mn < 1e-7) {
        out.degenerate = true;
        out.r = 0;
        out.worst_alpha = kPi / 2;
        return out;
    }

    std::vector<double> d(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (th[i + 1] - th[i - 1]) / (2 * h);
    double third = 0.0;
    for (std::size_t i = 1; i + 2 < n; ++i)
        third = std::max(third, std::abs(th[i + 2] - 3 * th[i + 1] + 3 * th[i] - th[i - 1]) / (h * h * h));
    out.noise_floor = 10.0 * (kThetaNoise / h + h * h * third / 6.0);

    // flag interior points where theta' is below the floor or changes sign
    std::vector<std::size_t> flagged;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const bool small = std::abs(d[i]) < out.noise_floor;
        const bool sign_change = i + 2 < n && d[i] * d[i + 1] < 0.0 && std::abs(d[i]) <= std::abs(d[i + 1]);
        const bool sign_change_prev = i >= 2 && d[i] * d[i - 1] < 0.0 && std::abs(d[i]) < std::abs(d[i - 1]);
        if (small || sign_change || sign_change_prev) flagged.push_back(i);
    }

    auto alpha_of = [&](double cc) { return std::acos(std::clamp(cc / table.rho_max(), -1.0, 1.0)); };

    if (flagged.empty()) {
        std::size_t arg = 1;
        for (std::size_t i = 1; i + 1 < n; ++i)
            if (std::abs(d[i]) < std::abs(d[arg])) arg = i;
        out.r = 1;
        out.worst_alpha = alpha_of(c[arg]);
        return out;
    }

    // group neighbouring flags into one critical point each
    std::vector<std::size_t> centres;
    std::size_t begin = 0;
    for (std::size_t k = 1; k <= flagged.size(); ++k) {
        if (k == flagged.size() || flagged[k] > flagged[k - 1] + 1) {
            std::size_t arg = flagged[begin];
            for (std::size_t m = begin; m < k; ++m)
                if (std::abs(d[flagged[m]]) < std::abs(d[arg])) arg = flagged[m];
            if (!centres.empty() && arg - centres.back() < 4)
                throw ResolutionError("critical points of the return map closer than four grid steps; refine the grid");
            centres.push_back(arg);
            begin = k;
        }
    }

    const std::size_t half_width = std::max<std::size_t>(8, n / 50);
    out.r = 1;
    for (std::size_t centre : centres) {
        const LocalFit fit = fit_critical_point(c, th, centre, half_width);
        const double threshold = 10.0 * std::max(fit.residual, kThetaNoise);
        // a fit whose slope does not vanish inside the window is no critical point
        int order = std::abs(fit.taylor[1]) > threshold ? 1 : static_cast<int>(fit.taylor.size());
        for (std::size_t j = 2; order != 1 && j < fit.taylor.size(); ++j) {
            if (std::abs(fit.taylor[j]) > threshold) {
                order = static_cast<int>(j);
                break;
            }
        }
        const double c_star = c[centre] + fit.u_star * static_cast<double>(half_width) * h;
        out.critical_alphas.push_back(alpha_of(c_star));
        if (order > out.r) {
            out.r = order;
            out.worst_alpha = alpha_of(c_star);
        }
    }
    if (out.r == 1) out.worst_alpha = out.critical_alphas.front();
    return out;
}

VanishingOrder vanishing_order(const SurfaceOfRevolution& surface, int grid_size, unsigned threads) {
    if (grid_size < 1000) throw DomainError("vanishing_order needs a grid of at least 1000 points");
    return vanishing_order(ReturnMapTable(surface, grid_size, threads));
}

double rational_recurrence_measure(const SurfaceOfRevolution& surface, double T, double eps, int grid_size, double C,
                                   unsigned threads) {
    return ReturnMapTable(surface, grid_size, threads).rational_measure(T, eps, C);
}

} // namespace weyllab
