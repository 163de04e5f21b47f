#include "weyllab/spectra.hpp"

#include "weyllab/detail/ode.hpp"
#include "weyllab/errors.hpp"
#include "weyllab/format.hpp"
#include "weyllab/parallel.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <ostream>

namespace weyllab {

namespace {

std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw OverflowError("eigenvalue count exceeds the 64-bit range");
    return r;
}

// Largest r >= 0 with r^2 <= v.
std::int64_t isqrt(std::int64_t v) {
    if (v < 0) return -1;
    auto r = static_cast<std::int64_t>(std::sqrt(static_cast<double>(v)));
    while (r * r > v) --r;
    while ((r + 1) * (r + 1) <= v) ++r;
    return r;
}

// Points of Z^n (n = 2, 3) with |m|^2 <= Q.
std::int64_t integer_ball_count(int n, std::int64_t Q) {
    if (Q < 0) return 0;
    const std::int64_t r = isqrt(Q);
    std::int64_t total = 0;
    if (n == 2) {
        for (std::int64_t x = -r; x <= r; ++x) total = checked_add(total, 2 * isqrt(Q - x * x) + 1);
    } else {
        for (std::int64_t x = -r; x <= r; ++x) {
            const std::int64_t qx = Q - x * x;
            const std::int64_t ry = isqrt(qx);
            for (std::int64_t y = -ry; y <= ry; ++y) total = checked_add(total, 2 * isqrt(qx - y * y) + 1);
        }
    }
    return total;
}

bool scaled_identity(const Matrix& B) {
    for (Eigen::Index i = 0; i < B.rows(); ++i)
        for (Eigen::Index j = 0; j < B.cols(); ++j)
            if ((i == j && B(i, j) != B(0, 0)) || (i != j && B(i, j) != 0.0)) return false;
    return B(0, 0) > 0;
}

// Integer vectors m with m^T G m <= R2: box over the outer coordinates, the
// first coordinate solved as a quadratic and its end points checked exactly.
std::int64_t quadratic_form_count(const Matrix& G, double R2) {
    const auto n = G.rows();
    const Matrix Ginv = G.inverse();
    std::array<std::int64_t, 3> bound{};
    for (Eigen::Index k = 0; k < n; ++k)
        bound[static_cast<std::size_t>(k)] = static_cast<std::int64_t>(std::floor(std::sqrt(R2 * Ginv(k, k)))) + 1;

    auto form = [&](const std::array<std::int64_t, 3>& m) {
        double s = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j)
                s += G(i, j) * static_cast<double>(m[static_cast<std::size_t>(i)]) *
                     static_cast<double>(m[static_cast<std::size_t>(j)]);
        return s;
    };

    std::int64_t total = 0;
    std::array<std::int64_t, 3> m{};
    auto inner = [&]() {
        // a x^2 + 2 b x + c <= R2 in x = m[0]
        const double a = G(0, 0);
        double b = 0, c = 0;
        for (Eigen::Index j = 1; j < n; ++j) b += G(0, j) * static_cast<double>(m[static_cast<std::size_t>(j)]);
        for (Eigen::Index i = 1; i < n; ++i)
            for (Eigen::Index j = 1; j < n; ++j)
                c += G(i, j) * static_cast<double>(m[static_cast<std::size_t>(i)]) *
                     static_cast<double>(m[static_cast<std::size_t>(j)]);
        const double disc = b * b - a * (c - R2);
        const double centre = -b / a;
        const double half = disc > 0 ? std::sqrt(disc) / a : 0.0;
        auto inside = [&](std::int64_t x) {
            m[0] = x;
            return form(m) <= R2;
        };
        std::int64_t lo = static_cast<std::int64_t>(std::ceil(centre - half));
        std::int64_t hi = static_cast<std::int64_t>(std::floor(centre + half));
        if (disc < 0) {
            lo = static_cast<std::int64_t>(std::round(centre));
            hi = lo - 1;
            if (inside(lo)) hi = lo;
            else return;
        }
        while (inside(lo - 1)) --lo;
        while (lo <= hi && !inside(lo)) ++lo;
        while (inside(hi + 1)) ++hi;
        while (hi >= lo && !inside(hi)) --hi;
        if (hi >= lo) total = checked_add(total, hi - lo + 1);
    };
    if (n == 2) {
        for (m[1] = -bound[1]; m[1] <= bound[1]; ++m[1]) inner();
    } else {
        for (m[2] = -bound[2]; m[2] <= bound[2]; ++m[2])
            for (m[1] = -bound[1]; m[1] <= bound[1]; ++m[1]) inner();
    }
    return total;
}

double integrate_phase(const RadialProblem& P, double lambda, double theta, double from, double to,
                       const RadialOptions& opts) {
    using State = std::array<double, 1>;
    const double m2 = static_cast<double>(P.m) * P.m;
    auto sys = [&](const State& y, State& dy, double z) {
        const double q = P.profile.q(z);
        const double w = P.profile.area_density(z);
        const double s = std::sin(y[0]), c = std::cos(y[0]);
        dy[0] = c * c * w / q + (lambda - m2 / q) * w * s * s;
    };
    IntegratorOptions io;
    io.abs_tol = opts.tolerance;
    io.rel_tol = opts.tolerance;
    io.max_steps = 5'000'000;
    detail::AdaptiveStepper<State> stepper(io, to - from);
    State y{theta};
    double z = from;
    while (z != to) stepper.step(sys, y, z, to);
    return y[0];
}

// The phase count treats eigenvalues within this many radians of the
// threshold as included, which absorbs the shooting error at exact hits.
constexpr double kPhaseSlack = 1e-6;

} // namespace

double lambda_from_h(double h) {
    if (!(h > 0 && h < 1)) throw DomainError("h must lie in (0, 1)");
    return 1.0 / (h * h);
}

double h_from_lambda(double lambda) {
    if (!(lambda > 1)) throw DomainError("lambda must exceed 1 to define h in (0, 1)");
    return 1.0 / std::sqrt(lambda);
}

std::int64_t torus_count(const Matrix& basis, double R) {
    const auto n = basis.rows();
    if ((n != 2 && n != 3) || basis.cols() != n) throw DomainError("torus_count: basis must be 2x2 or 3x3");
    if (!(R >= 0) || !std::isfinite(R)) throw DomainError("torus_count: R must be >= 0");
    if (scaled_identity(basis)) {
        // dual lattice (2 pi / c) Z^n
        const double s = R * (basis(0, 0) / (2.0 * std::numbers::pi));
        const double s2 = s * s;
        if (s2 > 4e15) throw OverflowError("torus_count: radius too large for exact counting");
        return integer_ball_count(static_cast<int>(n), static_cast<std::int64_t>(std::floor(s2)));
    }
    if (std::abs(basis.determinant()) < 1e-12) throw DomainError("torus_count: singular basis");
    const Matrix D = 2.0 * std::numbers::pi * basis.inverse().transpose(); // rows are dual vectors
    return quadratic_form_count(D * D.transpose(), R * R);
}

std::int64_t sphere3_count(double lambda) {
    if (!(lambda >= 0)) throw DomainError("sphere3_count: lambda must be >= 0");
    std::int64_t total = 0;
    for (std::int64_t k = 0; static_cast<double>(k * (k + 2)) <= lambda; ++k) total = checked_add(total, (k + 1) * (k + 1));
    return total;
}

double RadialProblem::p(double z) const { return profile.q(z) / profile.area_density(z); }
double RadialProblem::w(double z) const { return profile.area_density(z); }
double RadialProblem::potential(double z) const { return static_cast<double>(m) * m / profile.q(z); }

double prufer_mismatch(const RadialProblem& P, double lambda, const RadialOptions& opts) {
    const double d = opts.pole_offset;
    const double a = P.profile.lower() + d, b = P.profile.upper() - d, mid = P.profile.z0();
    const double am = std::abs(P.m);
    // f ~ d^{|m|/2} (geodesic distance^{|m|}); for m = 0, p f' ~ -lambda w d
    const double left_ratio = P.m == 0 ? -lambda * P.w(a) * d : P.p(a) * am / (2 * d);
    const double right_ratio = P.m == 0 ? lambda * P.w(b) * d : -P.p(b) * am / (2 * d);
    const double tl = integrate_phase(P, lambda, std::atan2(1.0, left_ratio), a, mid, opts);
    const double tr = integrate_phase(P, lambda, std::atan2(1.0, right_ratio), b, mid, opts);
    return tl - tr;
}

std::int64_t radial_count(const RadialProblem& P, double lambda, const RadialOptions& opts) {
    const double D = prufer_mismatch(P, lambda, opts);
    if (D < -kPhaseSlack) return 0;
    return static_cast<std::int64_t>(std::floor(D / std::numbers::pi + kPhaseSlack)) + 1;
}

std::vector<double> radial_eigenvalues(const RadialProblem& P, double lambda_max, const RadialOptions& opts) {
    if (!(lambda_max >= 0)) throw DomainError("radial_eigenvalues: lambda_max must be >= 0");
    const std::int64_t n = radial_count(P, lambda_max, opts);
    std::vector<double> out;
    double lo = -1.0;
    for (std::int64_t k = 0; k < n; ++k) {
        const double target = static_cast<double>(k) * std::numbers::pi;
        auto g = [&](double x) { return prufer_mismatch(P, x, opts) - target; };
        double hi = lambda_max;
        double ghi = g(hi);
        // an eigenvalue counted through the phase slack sits just above lambda_max
        for (int grow = 0; ghi < 0 && grow < 20; ++grow) {
            hi += 1e-6 * std::max(1.0, hi);
            ghi = g(hi);
        }
        double glo = g(lo);
        if (!(glo < 0 && ghi >= 0))
            throw BracketError("radial_eigenvalues: no phase crossing for index " + std::to_string(k) + " (m=" +
                               std::to_string(P.m) + ")");
        while (hi - lo > opts.eigen_rtol * std::max(1.0, std::abs(hi))) {
            const double x = 0.5 * (lo + hi);
            if (g(x) < 0) lo = x;
            else hi = x;
        }
        out.push_back(0.5 * (lo + hi));
        lo = hi;
    }
    return out;
}

std::int64_t surfrev_count(const RevolutionProfile& profile, double lambda, const RadialOptions& opts,
                           unsigned threads) {
    if (!(lambda >= 0)) throw DomainError("surfrev_count: lambda must be >= 0");
    const auto M = static_cast<std::size_t>(std::ceil(profile.rho_max() * std::sqrt(lambda))) + 2;
    std::vector<std::int64_t> counts(M + 1);
    parallel_for(M + 1, threads, [&](std::size_t m) {
        counts[m] = radial_count(RadialProblem{profile, static_cast<int>(m)}, lambda, opts);
    });
    std::int64_t total = counts[0];
    for (std::size_t m = 1; m <= M; ++m) total = checked_add(total, 2 * counts[m]);
    return total;
}

int configuration_dimension(const FlowModel& model) {
    switch (model.kind()) {
    case ModelKind::FlatTorus: return dynamic_cast<const FlatTorus&>(model).dimension();
    case ModelKind::Sphere3: return 3;
    case ModelKind::SurfaceOfRevolution: return 2;
    case ModelKind::CatMapSuspension: break;
    }
    throw DomainError(model.name() + " has no Laplace spectrum");
}

double weyl_leading(const FlowModel& model, double h) {
    if (!(h > 0 && h < 1)) throw DomainError("weyl_leading: h must lie in (0, 1)");
    const int n = configuration_dimension(model);
    return std::pow(2 * std::numbers::pi * h, -n) * model.level_volume() / n;
}

std::int64_t eigenvalue_count(const FlowModel& model, double lambda, unsigned threads) {
    if (!(lambda >= 0)) throw DomainError("eigenvalue_count: lambda must be >= 0");
    switch (model.kind()) {
    case ModelKind::FlatTorus: return torus_count(dynamic_cast<const FlatTorus&>(model).basis(), std::sqrt(lambda));
    case ModelKind::Sphere3: return sphere3_count(lambda);
    case ModelKind::SurfaceOfRevolution:
        return surfrev_count(dynamic_cast<const SurfaceOfRevolution&>(model).profile(), lambda, {}, threads);
    case ModelKind::CatMapSuspension: break;
    }
    throw DomainError(model.name() + " has no Laplace spectrum");
}

std::vector<SpectrumRow> spectrum_series(const FlowModel& model, const std::vector<double>& lambdas,
                                         unsigned threads) {
    std::vector<SpectrumRow> rows;
    for (double L : lambdas) {
        const double h = h_from_lambda(L);
        rows.push_back({h, L, eigenvalue_count(model, L, threads), weyl_leading(model, h)});
    }
    return rows;
}

void write_spectrum_csv(std::ostream& out, const std::string& model, const std::vector<SpectrumRow>& rows) {
    out << "model,h,lambda,count,leading\n";
    for (const auto& r : rows)
        out << model << ',' << format_double(r.h) << ',' << format_double(r.lambda) << ',' << r.count << ','
            << format_double(r.leading) << '\n';
}

} // namespace weyllab
