#include <doctest.h>

#include "weyllab/errors.hpp"
#include "weyllab/models.hpp"
#include "weyllab/parallel.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <numbers>

using namespace weyllab;

namespace {

constexpr double pi = std::numbers::pi;

PhaseState torus_state(double x, double y, double dx, double dy) {
    PhaseState s;
    s.position = SmallVec(2);
    s.position << x, y;
    s.momentum = SmallVec(2);
    s.momentum << dx, dy;
    return s;
}

PhaseState cat_state(double u, double v, double sig) {
    PhaseState s;
    s.position = SmallVec(3);
    s.position << u, v, sig;
    s.momentum = SmallVec(0);
    return s;
}

FlatTorus square_torus() { return FlatTorus(2.0 * pi * Matrix::Identity(2, 2)); }

SurfaceOfRevolution spheroid(double a, double c) {
    return SurfaceOfRevolution(validate_profile(ProfileCandidate::spheroid(a, c)));
}

// Naive repeated multiplication, the oracle for the fast power.
CatMapSuspension::IntMatrix naive_power(const CatMapSuspension::IntMatrix& a, int k) {
    CatMapSuspension::IntMatrix r = {1, 0, 0, 1};
    for (int i = 0; i < k; ++i)
        r = {r[0] * a[0] + r[1] * a[2], r[0] * a[1] + r[1] * a[3], r[2] * a[0] + r[3] * a[2],
             r[2] * a[1] + r[3] * a[3]};
    return r;
}

} // namespace

TEST_CASE("torus flow closes after one lattice period") {
    const auto T = square_torus();
    const auto s = T.normalize(torus_state(0, 0, 1, 0));
    const auto e = T.flow(s, 2 * pi);
    CHECK(T.position_distance(e.position, s.position) < 1e-12);
    CHECK(e.momentum[0] == 1.0);
    CHECK(e.momentum[1] == 0.0);
}

TEST_CASE("torus tangent flow is block triangular with linear growth") {
    const auto T = square_torus();
    const auto s = torus_state(1, 2, std::cos(0.3), std::sin(0.3));
    CHECK(T.tangent_flow(s, 0).isIdentity());
    const Matrix J = T.tangent_flow(s, 10);
    CHECK(J(0, 2) == doctest::Approx(-10 * std::sin(0.3)));
    CHECK(J(1, 2) == doctest::Approx(10 * std::cos(0.3)));
    CHECK(J.determinant() == doctest::Approx(1.0));
    CHECK(J.norm() > T.tangent_flow(s, 5).norm());
}

TEST_CASE("torus quotient distance wraps around") {
    const auto T = square_torus();
    const auto a = torus_state(0, 0, 1, 0);
    const auto b = torus_state(2 * pi - 0.1, 0, 1, 0);
    CHECK(T.distance(a, b) == doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("torus liouville sample is uniform in position") {
    const auto T = square_torus();
    const int n = 200000;
    double mx = 0, my = 0;
    auto rng = substream(7, 0);
    for (int i = 0; i < n; ++i) {
        const auto s = T.liouville_sample(rng);
        mx += s.position[0];
        my += s.position[1];
        CHECK_UNARY(std::abs(s.momentum.norm() - 1.0) < 1e-12);
    }
    mx /= n;
    my /= n;
    const double sigma = 2 * pi / std::sqrt(12.0 * n);
    CHECK(std::abs(mx - pi) < 3 * sigma);
    CHECK(std::abs(my - pi) < 3 * sigma);
}

TEST_CASE("torus exact return minimum matches a fine scan") {
    // oblique lattice, generic directions
    Matrix B(2, 2);
    B << 1.0, 0.2, 0.3, 1.4;
    const FlatTorus T(B);
    auto rng = substream(11, 3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = T.liouville_sample(rng);
        const double t_min = 0.5, t_max = 6.0;
        double scan = 1e9;
        for (int i = 0; i <= 600000; ++i) {
            const double t = t_min + (t_max - t_min) * i / 600000.0;
            scan = std::min(scan, T.distance(T.flow(s, t), s));
        }
        const double exact = *T.exact_min_return(s, t_min, t_max);
        CHECK(exact <= scan + 1e-12);
        CHECK(exact == doctest::Approx(scan).epsilon(1e-4));
    }
}

TEST_CASE("torus golden direction stays away from the lattice") {
    // best rational approximations of the golden slope with denominators
    // up to the window limit; brute force over the lattice points in reach
    const double g = (1 + std::sqrt(5.0)) / 2;
    const double norm = std::hypot(1.0, g);
    const auto T = square_torus();
    const auto s = torus_state(0, 0, 1 / norm, g / norm);
    double oracle = 1e9;
    for (int p = -2; p <= 3; ++p)
        for (int q = -2; q <= 4; ++q) {
            const double kx = 2 * pi * p, ky = 2 * pi * q;
            const double t = std::clamp((kx + ky * g) / norm, pi, 10.0);
            oracle = std::min(oracle, std::hypot(t / norm - kx, t * g / norm - ky));
        }
    const double exact = *T.exact_min_return(s, pi, 10.0);
    CHECK(exact == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(exact > 1e-4);
}

TEST_CASE("torus rejects a singular basis") {
    Matrix B(2, 2);
    B << 1, 2, 2, 4;
    CHECK_THROWS_AS(FlatTorus{B}, DomainError);
}

TEST_CASE("three-dimensional torus") {
    const FlatTorus T(2 * pi * Matrix::Identity(3, 3));
    CHECK(T.level_dimension() == 5);
    CHECK(T.level_volume() == doctest::Approx(std::pow(2 * pi, 3) * 4 * pi));
    auto rng = substream(3, 1);
    const auto s = T.liouville_sample(rng);
    const Matrix J = T.tangent_flow(s, 7.0);
    CHECK(J.determinant() == doctest::Approx(1.0));
    CHECK(T.distance(T.flow(s, 2.5), T.flow(T.flow(s, 1.0), 1.5)) < 1e-12);
}

TEST_CASE("cat map suspension: origin is fixed") {
    const CatMapSuspension C({2, 1, 1, 1}, 1.0);
    const auto e = C.flow(cat_state(0, 0, 0), 5.0);
    CHECK(e.position[0] == 0.0);
    CHECK(e.position[1] == 0.0);
    CHECK(e.position[2] == 0.0);
}

TEST_CASE("cat map powers agree with repeated multiplication") {
    const CatMapSuspension C({2, 1, 1, 1}, 1.0);
    for (int k = 0; k <= 20; ++k) CHECK(C.power(k) == naive_power(C.matrix(), k));
    const auto inv = C.power(-3);
    const auto id = naive_power(C.matrix(), 3);
    CHECK(inv[0] * id[0] + inv[1] * id[2] == 1);
    CHECK(inv[0] * id[1] + inv[1] * id[3] == 0);
    CHECK_THROWS_AS(C.power(200), OverflowError);
}

TEST_CASE("cat map tangent flow at integer times is the matrix power") {
    const CatMapSuspension C({2, 1, 1, 1}, 1.0);
    const auto s = cat_state(0.3, 0.7, 0.25);
    for (int n = 0; n <= 6; ++n) {
        const Matrix J = C.tangent_flow(s, n);
        const auto P = naive_power(C.matrix(), n);
        CHECK(J(0, 0) == static_cast<double>(P[0]));
        CHECK(J(0, 1) == static_cast<double>(P[1]));
        CHECK(J(1, 0) == static_cast<double>(P[2]));
        CHECK(J(1, 1) == static_cast<double>(P[3]));
        CHECK(J(2, 2) == 1.0);
        CHECK(J.determinant() == doctest::Approx(1.0));
    }
}

TEST_CASE("cat map flow at integer times maps through the power") {
    const CatMapSuspension C({2, 1, 1, 1}, 1.0);
    const auto s = cat_state(0.125, 0.375, 0.0);
    const auto e = C.flow(s, 3.0);
    const auto P = naive_power(C.matrix(), 3);
    const double u = std::fmod(P[0] * 0.125 + P[1] * 0.375, 1.0);
    const double v = std::fmod(P[2] * 0.125 + P[3] * 0.375, 1.0);
    CHECK(e.position[0] == u);
    CHECK(e.position[1] == v);
    CHECK(e.position[2] == 0.0);
}

TEST_CASE("cat map rejects non-hyperbolic matrices") {
    CHECK_THROWS_AS(CatMapSuspension({1, 1, 0, 1}, 1.0), DomainError);
    CHECK_THROWS_AS(CatMapSuspension({2, 1, 1, 2}, 1.0), DomainError);
    CHECK_THROWS_AS(CatMapSuspension({2, 1, 1, 1}, 0.0), DomainError);
}

TEST_CASE("cat map distance is continuous across the roof") {
    const CatMapSuspension C({2, 1, 1, 1}, 1.0);
    const auto below = cat_state(0.2, 0.1, 1.0 - 1e-9);
    const auto above = C.normalize(cat_state(0.2, 0.1, 1.0 + 1e-9));
    CHECK(C.distance(below, above) < 1e-8);
    CHECK(C.distance(below, C.flow(below, 2e-9)) < 1e-8);
}

TEST_CASE("cat map flow speed respects the bound") {
    const CatMapSuspension C({2, 1, 1, 1}, 1.0);
    auto rng = substream(5, 5);
    for (int i = 0; i < 200; ++i) {
        const auto s = C.liouville_sample(rng);
        const double h = 1e-6;
        CHECK(C.distance(s, C.flow(s, h)) <= C.speed_bound() * h * (1 + 1e-6));
    }
}

TEST_CASE("phase distances satisfy the metric axioms on sampled triples") {
    const nlohmann::json descs[] = {
        {{"kind", "torus"}, {"n", 2}},
        {{"kind", "catmap"}, {"matrix", {{2, 1}, {1, 1}}}, {"roof", 1.0}},
        {{"kind", "sphere3"}},
        {{"kind", "surfrev"}, {"profile", {{"preset", "spheroid"}, {"a", 1.0}, {"c", 2.0}}}},
    };
    for (const auto& d : descs) {
        const auto M = make_model(d);
        auto rng = substream(17, 0);
        for (int i = 0; i < 300; ++i) {
            const auto a = M->liouville_sample(rng);
            const auto b = M->liouville_sample(rng);
            const auto c = M->liouville_sample(rng);
            CHECK(M->distance(a, a) == 0.0);
            CHECK(M->distance(a, b) == M->distance(b, a));
            CHECK(M->distance(a, c) <= M->distance(a, b) + M->distance(b, c) + 1e-12);
            CHECK(M->distance(a, b) <= M->diameter());
        }
    }
}

TEST_CASE("group property and volume preservation for every model") {
    const nlohmann::json descs[] = {
        {{"kind", "torus"}, {"n", 2}},
        {{"kind", "catmap"}, {"matrix", {{2, 1}, {1, 1}}}, {"roof", 1.0}},
        {{"kind", "sphere3"}},
        {{"kind", "surfrev"}, {"profile", {{"preset", "spheroid"}, {"a", 1.0}, {"c", 2.0}}}},
    };
    for (const auto& d : descs) {
        const auto M = make_model(d);
        auto rng = substream(23, 1);
        for (int i = 0; i < 5; ++i) {
            const auto s = M->liouville_sample(rng);
            const double t = 10.0 * std::uniform_real_distribution<double>()(rng);
            const double u = 10.0 * std::uniform_real_distribution<double>()(rng);
            CHECK(M->distance(M->flow(s, t + u), M->flow(M->flow(s, t), u)) <= 1e-7);
            CHECK(M->tangent_flow(s, 0).isIdentity(1e-9));
            CHECK(std::abs(M->tangent_flow(s, t).determinant() - 1.0) <= 1e-6);
        }
    }
}

TEST_CASE("sphere3 geodesics are 2 pi periodic") {
    const Sphere3 S;
    auto rng = substream(1, 2);
    for (int i = 0; i < 10; ++i) {
        const auto s = S.liouville_sample(rng);
        const auto e = S.flow(s, 2 * pi);
        CHECK(S.distance(s, e) < 1e-14);
        CHECK(std::abs(s.position.dot(s.momentum)) < 1e-12);
    }
}

TEST_CASE("sphere3 antipodal distance is pi") {
    const Sphere3 S;
    PhaseState a, b;
    a.position = SmallVec(4);
    a.position << 1, 0, 0, 0;
    a.momentum = SmallVec(4);
    a.momentum << 0, 0, 1, 0;
    b.position = -a.position;
    b.momentum = a.momentum;
    CHECK(S.distance(a, b) == doctest::Approx(pi));
}

TEST_CASE("sphere3 tangent flow matches finite differences in the frame") {
    const Sphere3 S;
    auto rng = substream(9, 4);
    const auto s = S.liouville_sample(rng);
    const double t = 1.3, h = 1e-6;
    const Matrix F0 = Sphere3::tangent_frame(s);
    const auto e = S.flow(s, t);
    const Matrix F1 = Sphere3::tangent_frame(e);
    const Matrix J = S.tangent_flow(s, t);
    for (int k = 0; k < 5; ++k) {
        PhaseState p = s;
        p.position += h * F0.col(k).head(4);
        p.momentum += h * F0.col(k).tail(4);
        const auto pe = S.flow(p, t);
        Vector d(8);
        d << (pe.position - e.position) / h, (pe.momentum - e.momentum) / h;
        const Vector col = F1.transpose() * d;
        CHECK((col - J.col(k)).norm() < 1e-6);
    }
    CHECK((J.transpose() * J - Matrix::Identity(5, 5)).norm() < 1e-12);
}

TEST_CASE("sphere3 sampled directions are centred") {
    const Sphere3 S;
    const int n = 100000;
    Vector mean = Vector::Zero(4);
    auto rng = substream(2, 2);
    for (int i = 0; i < n; ++i) mean += S.liouville_sample(rng).momentum;
    mean /= n;
    const double sigma = 0.5 / std::sqrt(static_cast<double>(n)); // each component has variance 1/4
    for (int i = 0; i < 4; ++i) CHECK(std::abs(mean[i]) < 3 * sigma);
}

namespace {

// Independent reference: classical RK4 with a fixed step on Hamilton's
// equations in the (z, phi, xi_z, xi_phi) chart of the spheroid
// rho^2 = 1 - z^2 / 4, for orbits that stay clear of the poles.
std::array<double, 4> spheroid_reference(std::array<double, 4> y, double t, int steps) {
    auto f = [](const std::array<double, 4>& s) {
        const double z = s[0], xz = s[2], xp = s[3];
        const double Q = 1 - z * z / 4, dQ = -z / 2, d2Q = -0.5;
        const double W2 = Q + dQ * dQ / 4, dW2 = dQ + dQ * d2Q / 2;
        const double ratio = Q / W2, dratio = (dQ * W2 - Q * dW2) / (W2 * W2);
        const double dH = -xp * xp * dQ / (Q * Q) + xz * xz * dratio;
        return std::array<double, 4>{xz * ratio, xp / Q, -0.5 * dH, 0.0};
    };
    const double h = t / steps;
    for (int i = 0; i < steps; ++i) {
        auto add = [](std::array<double, 4> a, const std::array<double, 4>& b, double c) {
            for (int k = 0; k < 4; ++k) a[k] += c * b[k];
            return a;
        };
        const auto k1 = f(y);
        const auto k2 = f(add(y, k1, h / 2));
        const auto k3 = f(add(y, k2, h / 2));
        const auto k4 = f(add(y, k3, h));
        for (int k = 0; k < 4; ++k) y[k] += h / 6 * (k1[k] + 2 * k2[k] + 2 * k3[k] + k4[k]);
    }
    return y;
}

double clairaut(const SurfaceOfRevolution& S, const PhaseState& s) {
    return s.momentum[1] / std::sqrt(S.hamiltonian(s));
}

} // namespace

TEST_CASE("spheroid geodesic conserves the Clairaut constant") {
    const auto S = spheroid(1, 2);
    const auto s = S.state_at(0.0, 0.0, pi / 3);
    CHECK(clairaut(S, s) == doctest::Approx(0.5).epsilon(1e-14));
    const auto e = S.flow(s, 50.0);
    CHECK(std::abs(clairaut(S, e) - 0.5) < 1e-8);

    const auto ref = spheroid_reference({0.0, 0.0, s.momentum[0], s.momentum[1]}, 50.0, 200000);
    CHECK(e.position[0] == doctest::Approx(ref[0]).epsilon(1e-7));
    CHECK(std::abs(std::remainder(e.position[1] - ref[1], 2 * pi)) < 1e-7);

    const auto far = S.flow(s, 100.0);
    CHECK(std::abs(clairaut(S, far) - 0.5) < 1e-8);
    CHECK(std::abs(S.hamiltonian(far) - 1.0) < 1e-8 * 100);
}

TEST_CASE("unit sphere geodesics close after 2 pi, through the poles too") {
    const SurfaceOfRevolution S(validate_profile(ProfileCandidate::sphere()));
    for (double alpha : {0.2, 1.0, pi / 2 - 1e-3, pi / 2}) {
        const auto s = S.state_at(0.1, 0.4, alpha);
        const auto y0 = S.to_ambient(s);
        const auto y1 = S.integrate(y0, 2 * pi);
        double err = 0;
        for (int i = 0; i < 6; ++i) err = std::max(err, std::abs(y1[i] - y0[i]));
        CHECK(err < 1e-9);
    }
}

TEST_CASE("surface tangent flow matches finite differences in the area chart") {
    const auto S = spheroid(1, 2);
    const double z = 0.3, phi = 0.2, alpha = 0.9, t = 3.0, h = 1e-6;
    const auto s = S.state_at(z, phi, alpha);
    const Matrix J = S.tangent_flow(s, t);
    const auto& p = S.profile();

    auto chart = [&](const PhaseState& x) {
        // (w-offset measured at z, phi, alpha)
        const auto y = S.to_ambient(x);
        const double zz = y[2];
        const double rho = p.rho(zz), r1 = p.drho(zz);
        const double ph = std::atan2(y[1], y[0]);
        const double a = -std::sin(ph) * y[3] + std::cos(ph) * y[4];
        const double b = (r1 * std::cos(ph) * y[3] + r1 * std::sin(ph) * y[4] + y[5]) / std::sqrt(1 + r1 * r1);
        (void)rho;
        return std::array<double, 3>{zz, ph, std::atan2(b, a)};
    };
    const auto e = S.flow(s, t);
    const auto c1 = chart(e);
    const double w0 = p.area_density(z), w1 = p.area_density(c1[0]);
    for (int k = 0; k < 3; ++k) {
        double dz = 0, dphi = 0, dalpha = 0;
        (k == 0 ? dz : k == 1 ? dphi : dalpha) = h;
        dz /= w0; // unit step in the area coordinate
        const auto sp = S.state_at(z + dz, phi + dphi, alpha + dalpha);
        const auto sm = S.state_at(z - dz, phi - dphi, alpha - dalpha);
        const auto cp = chart(S.flow(sp, t)), cm = chart(S.flow(sm, t));
        const double col0 = w1 * (cp[0] - cm[0]) / (2 * h);
        const double col1 = std::remainder(cp[1] - cm[1], 2 * pi) / (2 * h);
        const double col2 = std::remainder(cp[2] - cm[2], 2 * pi) / (2 * h);
        CHECK(J(0, k) == doctest::Approx(col0).epsilon(1e-5));
        CHECK(J(1, k) == doctest::Approx(col1).epsilon(1e-5));
        CHECK(J(2, k) == doctest::Approx(col2).epsilon(1e-5));
    }
}

TEST_CASE("spheroid sampling reproduces the band area fraction") {
    const auto S = spheroid(1, 2);
    const auto& p = S.profile();
    using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
    const auto density = [&](double z) { return p.area_density(z); };
    const double fraction = GK::integrate(density, -0.5, 0.5, 15, 1e-13) / GK::integrate(density, -2, 2, 15, 1e-13);
    const int n = 200000;
    int hits = 0;
    auto rng = substream(4, 4);
    for (int i = 0; i < n; ++i) hits += std::abs(S.liouville_sample(rng).position[0]) < 0.5;
    const double sigma = std::sqrt(fraction * (1 - fraction) / n);
    CHECK(std::abs(static_cast<double>(hits) / n - fraction) < 3 * sigma);
}

TEST_CASE("surface speed bound dominates the phase-distance speed") {
    const auto S = spheroid(1, 2);
    auto rng = substream(6, 6);
    for (int i = 0; i < 50; ++i) {
        const auto s = S.liouville_sample(rng);
        const double h = 1e-5;
        CHECK(S.distance(s, S.flow(s, h)) <= S.speed_bound() * h * (1 + 1e-6));
    }
}

TEST_CASE("model factory reads descriptors and overrides") {
    const auto T = make_model({{"kind", "torus"}, {"n", 2}, {"basis", {{6.2831853, 0}, {0, 6.2831853}}}});
    CHECK(T->shortest_period() == doctest::Approx(6.2831853));
    CHECK(T->level_volume() == doctest::Approx(6.2831853 * 6.2831853 * 2 * pi));
    const auto C = make_model({{"kind", "catmap"}, {"roof", 2.0}, {"t0", 0.5}, {"lipschitz", 3.0}});
    CHECK(C->shortest_period() == 0.5);
    CHECK(C->lipschitz_bound() == 3.0);
    CHECK(make_model({{"kind", "sphere3"}})->level_volume() == doctest::Approx(8 * pi * pi * pi));
    const auto R = make_model({{"kind", "surfrev"}, {"profile", {{"preset", "sphere"}}}});
    CHECK(R->shortest_period() == doctest::Approx(2 * pi));
    CHECK(R->level_volume() == doctest::Approx(8 * pi * pi));
    CHECK_THROWS_AS(make_model({{"kind", "klein"}}), ConfigError);
    CHECK_THROWS_AS(make_model({{"kind", "torus"}, {"n", 4}}), ConfigError);
    CHECK_THROWS_AS(make_model({{"kind", "torus"}, {"basis", "x"}}), ConfigError);
}
