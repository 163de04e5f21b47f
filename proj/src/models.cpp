#include "weyllab/models.hpp"

#include "weyllab/detail/ode.hpp"
#include "weyllab/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace weyllab {

namespace {

double wrap_angle(double a) {
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    if (a >= kTwoPi) a = 0.0;
    return a;
}

double frac(long double x) {
    long double f = x - std::floor(x);
    if (f >= 1.0L) f = 0.0L;
    return static_cast<double>(f);
}

SmallVec gaussian_unit(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> g;
    SmallVec v(n);
    double norm = 0.0;
    do {
        for (int i = 0; i < n; ++i) v[i] = g(rng);
        norm = v.norm();
    } while (norm < 1e-12);
    return v / norm;
}

double uniform01(std::mt19937_64& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

} // namespace

void FlowModel::set_shortest_period(double t0) {
    if (!(t0 > 0) || !std::isfinite(t0)) throw DomainError("shortest period must be positive");
    t0_override_ = t0;
}

void FlowModel::set_lipschitz_bound(double L) {
    if (!(L > 0) || !std::isfinite(L)) throw DomainError("Lipschitz bound must be positive");
    lipschitz_ = L;
}

std::optional<double> FlowModel::exact_min_return(const PhaseState&, double, double) const { return std::nullopt; }

// ---------------------------------------------------------------- FlatTorus

FlatTorus::FlatTorus(const Matrix& basis) : n_(static_cast<int>(basis.rows())), basis_(basis) {
    if (basis.rows() != basis.cols() || (n_ != 2 && n_ != 3))
        throw DomainError("torus basis must be a 2x2 or 3x3 matrix");
    if (!basis.allFinite()) throw DomainError("torus basis has non-finite entries");
    covolume_ = std::abs(basis.determinant());
    if (!(covolume_ > 1e-12 * std::pow(basis.norm(), n_))) throw DomainError("torus basis is singular");
    coords_ = basis_.transpose().inverse();

    shortest_ = std::numeric_limits<double>::infinity();
    const int r = 3;
    Eigen::Vector3i j = Eigen::Vector3i::Zero();
    for (j[0] = -r; j[0] <= r; ++j[0])
        for (j[1] = -r; j[1] <= r; ++j[1])
            for (j[2] = (n_ == 3 ? -r : 0); j[2] <= (n_ == 3 ? r : 0); ++j[2]) {
                if (j.isZero()) continue;
                const Vector k = basis_.transpose() * j.head(n_).cast<double>();
                shortest_ = std::min(shortest_, k.norm());
            }
}

double FlatTorus::level_volume() const {
    // |S^{n-1}|: 2 pi for n = 2, 4 pi for n = 3
    return covolume_ * (n_ == 2 ? kTwoPi : 2.0 * kTwoPi);
}

double FlatTorus::hamiltonian(const PhaseState& s) const { return s.momentum.squaredNorm(); }

SmallVec FlatTorus::reduce(const SmallVec& x) const {
    Vector c = coords_ * x;
    for (int i = 0; i < n_; ++i) {
        c[i] -= std::floor(c[i]);
        if (c[i] >= 1.0) c[i] = 0.0;
    }
    return basis_.transpose() * c;
}

PhaseState FlatTorus::normalize(const PhaseState& s) const {
    if (s.position.size() != n_ || s.momentum.size() != n_) throw DomainError("torus state has wrong dimension");
    PhaseState out{reduce(s.position), s.momentum, 0.0};
    out.energy = hamiltonian(out);
    return out;
}

PhaseState FlatTorus::flow(const PhaseState& s, double t) const {
    PhaseState out{reduce(s.position + t * s.momentum), s.momentum, s.energy};
    return out;
}

Matrix FlatTorus::tangent_flow(const PhaseState& s, double t) const {
    const int m = level_dimension();
    Matrix J = Matrix::Identity(m, m);
    const double speed = s.momentum.norm();
    if (n_ == 2) {
        const double psi = std::atan2(s.momentum[1], s.momentum[0]);
        J(0, 2) = -t * speed * std::sin(psi);
        J(1, 2) = t * speed * std::cos(psi);
    } else {
        const double th = std::acos(std::clamp(s.momentum[2] / speed, -1.0, 1.0));
        const double ph = std::atan2(s.momentum[1], s.momentum[0]);
        J(0, 3) = t * speed * std::cos(th) * std::cos(ph);
        J(1, 3) = t * speed * std::cos(th) * std::sin(ph);
        J(2, 3) = -t * speed * std::sin(th);
        J(0, 4) = -t * speed * std::sin(th) * std::sin(ph);
        J(1, 4) = t * speed * std::sin(th) * std::cos(ph);
    }
    return J;
}

double FlatTorus::position_distance(const SmallVec& a, const SmallVec& b) const {
    Vector c = coords_ * (a - b);
    for (int i = 0; i < n_; ++i) c[i] -= std::round(c[i]);
    const Vector base = basis_.transpose() * c;
    double best = base.norm();
    Eigen::Vector3i j = Eigen::Vector3i::Zero();
    for (j[0] = -1; j[0] <= 1; ++j[0])
        for (j[1] = -1; j[1] <= 1; ++j[1])
            for (j[2] = (n_ == 3 ? -1 : 0); j[2] <= (n_ == 3 ? 1 : 0); ++j[2]) {
                if (j.isZero()) continue;
                best = std::min(best, (base + basis_.transpose() * j.head(n_).cast<double>()).norm());
            }
    return best;
}

double FlatTorus::distance(const PhaseState& a, const PhaseState& b) const {
    const double dq = position_distance(a.position, b.position);
    const double dp = (a.momentum - b.momentum).norm();
    return std::sqrt(dq * dq + dp * dp);
}

PhaseState FlatTorus::liouville_sample(std::mt19937_64& rng) const {
    Vector c(n_);
    for (int i = 0; i < n_; ++i) c[i] = uniform01(rng);
    PhaseState s{basis_.transpose() * c, gaussian_unit(rng, n_), 1.0};
    return s;
}

double FlatTorus::diameter() const {
    // covering radius <= half the length of the parallelepiped diagonal bound
    const double cover = 0.5 * std::sqrt(basis_.rowwise().squaredNorm().sum());
    return std::sqrt(cover * cover + 4.0);
}

std::optional<double> FlatTorus::exact_min_return(const PhaseState& s, double t_min, double T) const {
    // The orbit returns exactly when t xi is close to a lattice vector k; for
    // each k the closest time is the projection k.xi / |xi|^2 clamped to the window.
    if (T < t_min) return std::numeric_limits<double>::infinity();
    const Vector xi = s.momentum;
    const double sp2 = xi.squaredNorm();
    if (sp2 == 0.0) return 0.0;
    const Vector eta = coords_ * xi; // lattice coordinates move along t * eta
    Vector width(n_);
    for (int i = 0; i < n_; ++i) width[i] = coords_.row(i).norm();

    double r = 0.5 * std::sqrt(basis_.rowwise().squaredNorm().sum()); // covering radius bound
    double best = std::numeric_limits<double>::infinity();
    auto consider = [&](const Vector& jd) {
        const Vector k = basis_.transpose() * jd;
        const double t = std::clamp(k.dot(xi) / sp2, t_min, T);
        const double d = (t * xi - k).norm();
        if (d < best) {
            best = d;
            r = std::min(r, d);
        }
    };

    int a = 0;
    eta.cwiseAbs().maxCoeff(&a);
    const double lo_a = std::min(t_min * eta[a], T * eta[a]);
    const double hi_a = std::max(t_min * eta[a], T * eta[a]);
    const auto ja_lo = static_cast<long long>(std::floor(lo_a - width[a] * r));
    const auto ja_hi = static_cast<long long>(std::ceil(hi_a + width[a] * r));
    Vector jd(n_);
    for (long long ja = ja_lo; ja <= ja_hi; ++ja) {
        // times at which coordinate a stays within the current tube
        const double wa = width[a] * r;
        double t1 = t_min, t2 = T;
        if (eta[a] != 0.0) {
            const double ta = (ja - wa) / eta[a], tb = (ja + wa) / eta[a];
            t1 = std::max(t_min, std::min(ta, tb));
            t2 = std::min(T, std::max(ta, tb));
        } else if (std::abs(static_cast<double>(ja)) > wa) {
            continue;
        }
        if (t1 > t2) continue;
        long long lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
        for (int i = 0; i < n_; ++i) {
            if (i == a) {
                lo[i] = hi[i] = ja;
                continue;
            }
            const double wi = width[i] * r;
            lo[i] = static_cast<long long>(std::floor(std::min(t1 * eta[i], t2 * eta[i]) - wi));
            hi[i] = static_cast<long long>(std::ceil(std::max(t1 * eta[i], t2 * eta[i]) + wi));
        }
        for (long long j0 = lo[0]; j0 <= hi[0]; ++j0)
            for (long long j1 = lo[1]; j1 <= hi[1]; ++j1)
                for (long long j2 = lo[2]; j2 <= hi[2]; ++j2) {
                    jd[0] = static_cast<double>(j0);
                    jd[1] = static_cast<double>(j1);
                    if (n_ == 3) jd[2] = static_cast<double>(j2);
                    consider(jd);
                }
    }
    return best;
}

nlohmann::json FlatTorus::descriptor() const {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < n_; ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < n_; ++j) row.push_back(basis_(i, j));
        rows.push_back(row);
    }
    return {{"kind", "torus"}, {"n", n_}, {"basis", rows}};
}

// --------------------------------------------------------- CatMapSuspension

namespace {

using IntMatrix = CatMapSuspension::IntMatrix;

// a * b + c * d, throwing when any partial result leaves the 64-bit range
std::int64_t checked_dot(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    std::int64_t ab, cd, sum;
    if (__builtin_mul_overflow(a, b, &ab) || __builtin_mul_overflow(c, d, &cd) || __builtin_add_overflow(ab, cd, &sum))
        throw OverflowError("integer matrix power leaves the 64-bit range");
    return sum;
}

IntMatrix multiply(const IntMatrix& x, const IntMatrix& y) {
    const auto dot = checked_dot;
    return {dot(x[0], y[0], x[1], y[2]), dot(x[0], y[1], x[1], y[3]), dot(x[2], y[0], x[3], y[2]),
            dot(x[2], y[1], x[3], y[3])};
}

// (u, v) -> P (u, v) mod 1, accumulated in extended precision
std::array<double, 2> apply_mod1(const IntMatrix& p, double u, double v) {
    const long double lu = u, lv = v;
    return {frac(static_cast<long double>(p[0]) * lu + static_cast<long double>(p[1]) * lv),
            frac(static_cast<long double>(p[2]) * lu + static_cast<long double>(p[3]) * lv)};
}

} // namespace

CatMapSuspension::CatMapSuspension(const IntMatrix& matrix, double roof) : a_(matrix), roof_(roof) {
    std::int64_t det = 0;
    try {
        det = checked_dot(a_[0], a_[3], -a_[1], a_[2]);
    } catch (const OverflowError&) {
        throw DomainError("cat map matrix entries are too large");
    }
    if (det != 1) throw DomainError("cat map matrix must have determinant 1");
    if (!(a_[0] + a_[3] > 2)) throw DomainError("cat map matrix must have trace > 2");
    if (!(roof > 0) || !std::isfinite(roof)) throw DomainError("suspension roof must be positive");
}

CatMapSuspension::IntMatrix CatMapSuspension::power(std::int64_t k) const {
    IntMatrix base = a_;
    if (k < 0) {
        base = {a_[3], -a_[1], -a_[2], a_[0]};
        k = -k;
    }
    IntMatrix result = {1, 0, 0, 1};
    while (k > 0) {
        if (k & 1) result = multiply(result, base);
        k >>= 1;
        if (k > 0) base = multiply(base, base);
    }
    return result;
}

double CatMapSuspension::expansion_eigenvalue() const {
    const double tr = static_cast<double>(a_[0] + a_[3]);
    return 0.5 * (tr + std::sqrt(tr * tr - 4.0));
}

PhaseState CatMapSuspension::normalize(const PhaseState& s) const {
    if (s.position.size() != 3) throw DomainError("suspension state needs (u, v, s)");
    const double k = std::floor(s.position[2] / roof_);
    double sigma = s.position[2] - k * roof_;
    std::int64_t shifts = static_cast<std::int64_t>(k);
    if (sigma >= roof_) {
        sigma -= roof_;
        ++shifts;
    }
    if (sigma < 0) sigma = 0.0;
    const auto uv = apply_mod1(power(shifts), s.position[0], s.position[1]);
    PhaseState out;
    out.position = SmallVec(3);
    out.position << uv[0], uv[1], sigma;
    out.momentum = SmallVec(0);
    out.energy = 1.0;
    return out;
}

PhaseState CatMapSuspension::flow(const PhaseState& s, double t) const {
    PhaseState moved = s;
    moved.position[2] = s.position[2] + t;
    return normalize(moved);
}

Matrix CatMapSuspension::tangent_flow(const PhaseState& s, double t) const {
    const double total = s.position[2] + t;
    std::int64_t k = static_cast<std::int64_t>(std::floor(total / roof_));
    if (total - static_cast<double>(k) * roof_ >= roof_) ++k;
    const IntMatrix p = power(k);
    Matrix J = Matrix::Identity(3, 3);
    J(0, 0) = static_cast<double>(p[0]);
    J(0, 1) = static_cast<double>(p[1]);
    J(1, 0) = static_cast<double>(p[2]);
    J(1, 1) = static_cast<double>(p[3]);
    return J;
}

std::array<double, 10> CatMapSuspension::embed(const PhaseState& s) const {
    const double sig = s.position[2] / roof_;
    const double R = roof_ / kTwoPi;
    auto E = [](double u, double v) {
        return std::array<double, 4>{std::cos(kTwoPi * u) / kTwoPi, std::sin(kTwoPi * u) / kTwoPi,
                                     std::cos(kTwoPi * v) / kTwoPi, std::sin(kTwoPi * v) / kTwoPi};
    };
    const auto ex = E(s.position[0], s.position[1]);
    std::array<double, 4> fa;
    double ca;
    if (sig < 0.5) {
        fa = ex;
        ca = std::cos(kPi * sig);
    } else {
        const auto ax = apply_mod1(a_, s.position[0], s.position[1]);
        fa = E(ax[0], ax[1]);
        ca = std::cos(kPi * (sig - 1.0));
    }
    const double cb = std::sin(kPi * sig);
    std::array<double, 10> out{};
    out[0] = R * std::cos(kTwoPi * sig);
    out[1] = R * std::sin(kTwoPi * sig);
    for (int i = 0; i < 4; ++i) {
        out[2 + i] = ca * fa[i];
        out[6 + i] = cb * ex[i];
    }
    return out;
}

double CatMapSuspension::distance(const PhaseState& a, const PhaseState& b) const {
    const auto ea = embed(a), eb = embed(b);
    double acc = 0.0;
    for (int i = 0; i < 10; ++i) acc += (ea[i] - eb[i]) * (ea[i] - eb[i]);
    return std::sqrt(acc);
}

PhaseState CatMapSuspension::liouville_sample(std::mt19937_64& rng) const {
    PhaseState s;
    s.position = SmallVec(3);
    s.position[0] = uniform01(rng);
    s.position[1] = uniform01(rng);
    s.position[2] = roof_ * uniform01(rng);
    s.momentum = SmallVec(0);
    return s;
}

double CatMapSuspension::speed_bound() const { return std::sqrt(1.0 + 0.5 / (roof_ * roof_)); }

double CatMapSuspension::diameter() const {
    const double R = roof_ / kTwoPi;
    const double e2 = 2.0 / (4.0 * kPi * kPi); // |E|^2; both families together lie on a sphere of this radius
    return std::sqrt(4.0 * R * R + 4.0 * e2);
}

nlohmann::json CatMapSuspension::descriptor() const {
    return {{"kind", "catmap"}, {"matrix", {{a_[0], a_[1]}, {a_[2], a_[3]}}}, {"roof", roof_}};
}

// ------------------------------------------------------------------ Sphere3

double Sphere3::level_volume() const {
    // |S^3| * |S^2| = 2 pi^2 * 4 pi
    return 8.0 * kPi * kPi * kPi;
}

double Sphere3::hamiltonian(const PhaseState& s) const { return s.momentum.squaredNorm(); }

PhaseState Sphere3::normalize(const PhaseState& s) const {
    if (s.position.size() != 4 || s.momentum.size() != 4) throw DomainError("sphere3 state needs x, v in R^4");
    const double nx = s.position.norm();
    if (!(nx > 0)) throw DomainError("sphere3 position must be nonzero");
    PhaseState out;
    out.position = s.position / nx;
    out.momentum = s.momentum - s.momentum.dot(out.position) * out.position;
    out.energy = hamiltonian(out);
    return out;
}

PhaseState Sphere3::flow(const PhaseState& s, double t) const {
    if (std::fmod(t, kTwoPi) == 0.0) return s;
    const double c = std::cos(t), sn = std::sin(t);
    PhaseState out;
    out.position = c * s.position + sn * s.momentum;
    out.momentum = -sn * s.position + c * s.momentum;
    out.energy = s.energy;
    return out;
}

Matrix Sphere3::tangent_frame(const PhaseState& s) {
    const Eigen::Vector4d x = s.position, v = s.momentum;
    std::array<Eigen::Vector4d, 2> w;
    int found = 0;
    for (int i = 0; i < 4 && found < 2; ++i) {
        Eigen::Vector4d e = Eigen::Vector4d::Unit(i);
        e -= e.dot(x) * x;
        e -= e.dot(v) * v;
        for (int j = 0; j < found; ++j) e -= e.dot(w[j]) * w[j];
        if (e.norm() > 0.3) w[found++] = e.normalized();
    }
    if (found < 2) throw DegenerateFrameError("could not complete an orthonormal frame on S^3");
    Matrix F = Matrix::Zero(8, 5);
    F.block<4, 1>(0, 0) = w[0];
    F.block<4, 1>(0, 1) = w[1];
    F.block<4, 1>(4, 2) = w[0];
    F.block<4, 1>(4, 3) = w[1];
    F.block<4, 1>(0, 4) = v / std::sqrt(2.0);
    F.block<4, 1>(4, 4) = -x / std::sqrt(2.0);
    return F;
}

Matrix Sphere3::tangent_flow(const PhaseState& s, double t) const {
    const double c = std::cos(t), sn = std::sin(t);
    Matrix R = Matrix::Zero(8, 8);
    R.block(0, 0, 4, 4).diagonal().setConstant(c);
    R.block(0, 4, 4, 4).diagonal().setConstant(sn);
    R.block(4, 0, 4, 4).diagonal().setConstant(-sn);
    R.block(4, 4, 4, 4).diagonal().setConstant(c);
    return tangent_frame(flow(s, t)).transpose() * R * tangent_frame(s);
}

double Sphere3::distance(const PhaseState& a, const PhaseState& b) const {
    const double chord = (a.position - b.position).norm();
    const double arc = 2.0 * std::asin(std::min(1.0, 0.5 * chord));
    const double dp = (a.momentum - b.momentum).norm();
    return std::sqrt(arc * arc + dp * dp);
}

PhaseState Sphere3::liouville_sample(std::mt19937_64& rng) const {
    PhaseState s;
    s.position = gaussian_unit(rng, 4);
    std::normal_distribution<double> g;
    Eigen::Vector4d v;
    double norm = 0.0;
    do {
        for (int i = 0; i < 4; ++i) v[i] = g(rng);
        v -= v.dot(s.position) * Eigen::Vector4d(s.position);
        norm = v.norm();
    } while (norm < 1e-12);
    s.momentum = v / norm;
    return s;
}

double Sphere3::speed_bound() const { return std::sqrt(2.0); }

double Sphere3::diameter() const { return std::sqrt(kPi * kPi + 4.0); }

nlohmann::json Sphere3::descriptor() const { return {{"kind", "sphere3"}}; }

// ------------------------------------------------------ SurfaceOfRevolution

namespace {

using Variational = std::array<double, 42>;

// Principal curvatures of the surface at height z, written through q = rho^2
// so that both stay finite at the poles.
double max_curvature(const RevolutionProfile& p, double z) {
    const double q = std::max(p.q(z), 0.0), dq = p.dq(z), d2q = p.d2q(z);
    const double w = p.area_density(z);
    const double k_meridian = (dq * dq - 2.0 * q * d2q) / (4.0 * w * w * w);
    const double k_parallel = 1.0 / w;
    return std::max(std::abs(k_meridian), std::abs(k_parallel));
}

} // namespace

SurfaceOfRevolution::SurfaceOfRevolution(RevolutionProfile profile, IntegratorOptions opts)
    : profile_(std::move(profile)), opts_(opts) {
    const int grid = 4000;
    double kmax = 0.0, dmax = 0.0;
    for (int i = 0; i <= grid; ++i) {
        const double z = profile_.lower() + (profile_.upper() - profile_.lower()) * i / grid;
        kmax = std::max(kmax, max_curvature(profile_, z));
        dmax = std::max(dmax, profile_.area_density(z));
    }
    // small margin for what the grid may miss between nodes
    speed_bound_ = std::sqrt(1.0 + 1.0201 * kmax * kmax);
    density_max_ = 1.01 * dmax;
}

double SurfaceOfRevolution::hamiltonian(const PhaseState& s) const {
    const double z = s.position[0];
    const double q = profile_.q(z);
    const double w = profile_.area_density(z);
    const double xz = s.momentum[0], xp = s.momentum[1];
    return xp * xp / q + xz * xz * q / (w * w);
}

PhaseState SurfaceOfRevolution::normalize(const PhaseState& s) const {
    if (s.position.size() != 2 || s.momentum.size() != 2) throw DomainError("surface state needs (z, phi; xi_z, xi_phi)");
    const double z = s.position[0];
    if (!(z > profile_.lower() && z < profile_.upper()))
        throw DomainError("surface state height lies outside the open profile interval");
    PhaseState out = s;
    out.position[1] = wrap_angle(s.position[1]);
    out.energy = hamiltonian(out);
    return out;
}

PhaseState SurfaceOfRevolution::state_at(double z, double phi, double alpha) const {
    const double rho = profile_.rho(z);
    const double w = profile_.area_density(z);
    PhaseState s;
    s.position = SmallVec(2);
    s.position << z, wrap_angle(phi);
    s.momentum = SmallVec(2);
    s.momentum << (w / rho) * std::sin(alpha), rho * std::cos(alpha);
    s.energy = hamiltonian(s);
    return s;
}

SurfaceOfRevolution::Ambient SurfaceOfRevolution::to_ambient(const PhaseState& s) const {
    const double z = s.position[0], phi = s.position[1];
    const double q = profile_.q(z);
    const double rho = std::sqrt(q);
    const double w = profile_.area_density(z);
    const double zdot = s.momentum[0] * q / (w * w);
    const double phidot = s.momentum[1] / q;
    const double rdot = 0.5 * profile_.dq(z) / rho * zdot;
    const double c = std::cos(phi), sn = std::sin(phi);
    return {rho * c, rho * sn, z, rdot * c - rho * phidot * sn, rdot * sn + rho * phidot * c, zdot};
}

PhaseState SurfaceOfRevolution::from_ambient(const Ambient& y) const {
    const double z = y[2];
    const double q = profile_.q(z);
    if (!(q > 1e-24) || !(z > profile_.lower() && z < profile_.upper()))
        throw DomainError("state sits on a pole, where the (z, phi) chart is singular");
    const double w = profile_.area_density(z);
    PhaseState s;
    s.position = SmallVec(2);
    s.position << z, wrap_angle(std::atan2(y[1], y[0]));
    s.momentum = SmallVec(2);
    s.momentum << y[5] * w * w / q, y[0] * y[4] - y[1] * y[3];
    s.energy = hamiltonian(s);
    return s;
}

void SurfaceOfRevolution::rhs(const Ambient& y, Ambient& d) const {
    const double z = y[2], vx = y[3], vy = y[4], vz = y[5];
    const double q1 = profile_.dq(z), q2 = profile_.d2q(z);
    const double gx = 2.0 * y[0], gy = 2.0 * y[1], gz = -q1;
    const double lam = (2.0 * vx * vx + 2.0 * vy * vy - q2 * vz * vz) / (gx * gx + gy * gy + gz * gz);
    d = {vx, vy, vz, -lam * gx, -lam * gy, -lam * gz};
}

SurfaceOfRevolution::Ambient SurfaceOfRevolution::integrate(const Ambient& y, double t) const {
    return detail::integrate_for([this](const Ambient& s, Ambient& d, double) { rhs(s, d); }, y, t, opts_);
}

PhaseState SurfaceOfRevolution::flow(const PhaseState& s, double t) const {
    return from_ambient(integrate(to_ambient(s), t));
}

Matrix SurfaceOfRevolution::tangent_flow(const PhaseState& s, double t) const {
    const RevolutionProfile& p = profile_;
    auto sys = [&p](const Variational& y, Variational& d, double) {
        const double X = y[0], Y = y[1], z = y[2], vx = y[3], vy = y[4], vz = y[5];
        const double q1 = p.dq(z), q2 = p.d2q(z), q3 = p.d3q(z);
        const Eigen::Vector3d g(2.0 * X, 2.0 * Y, -q1);
        const double D = g.squaredNorm();
        const double N = 2.0 * vx * vx + 2.0 * vy * vy - q2 * vz * vz;
        const double lam = N / D;
        const Eigen::Vector3d dN_dX(0.0, 0.0, -q3 * vz * vz);
        const Eigen::Vector3d dD_dX(8.0 * X, 8.0 * Y, 2.0 * q1 * q2);
        const Eigen::Vector3d dlam_dX = (dN_dX - lam * dD_dX) / D;
        const Eigen::Vector3d dlam_dV = Eigen::Vector3d(4.0 * vx, 4.0 * vy, -2.0 * q2 * vz) / D;
        Eigen::Matrix3d H = Eigen::Matrix3d::Zero();
        H(0, 0) = 2.0;
        H(1, 1) = 2.0;
        H(2, 2) = -q2;
        Eigen::Matrix<double, 6, 6> A = Eigen::Matrix<double, 6, 6>::Zero();
        A.block<3, 3>(0, 3).setIdentity();
        A.block<3, 3>(3, 0) = -lam * H - g * dlam_dX.transpose();
        A.block<3, 3>(3, 3) = -g * dlam_dV.transpose();
        for (int i = 0; i < 3; ++i) {
            d[i] = y[3 + i];
            d[3 + i] = -lam * g[i];
        }
        Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>> Phi(y.data() + 6);
        Eigen::Map<Eigen::Matrix<double, 6, 6, Eigen::RowMajor>> dPhi(d.data() + 6);
        dPhi = A * Phi;
    };

    const Ambient a0 = to_ambient(s);
    Variational y0{};
    std::copy(a0.begin(), a0.end(), y0.begin());
    for (int i = 0; i < 6; ++i) y0[6 + 7 * i] = 1.0;
    const Variational y1 = detail::integrate_for(sys, y0, t, opts_);
    Eigen::Map<const Eigen::Matrix<double, 6, 6, Eigen::RowMajor>> Phi(y1.data() + 6);
    Ambient a1;
    std::copy(y1.begin(), y1.begin() + 6, a1.begin());

    const double speed = std::sqrt(std::max(s.energy, 0.0));

    // d(X, V) / d(z, phi, alpha) at the start
    auto chart_to_ambient = [&](const Ambient& a) {
        const double z = a[2];
        const double phi = std::atan2(a[1], a[0]);
        const double rho = profile_.rho(z), r1 = profile_.drho(z), r2 = profile_.d2rho(z);
        const double m = std::sqrt(1.0 + r1 * r1);
        const double c = std::cos(phi), sn = std::sin(phi);
        const Eigen::Vector3d e_phi(-sn, c, 0.0);
        const Eigen::Vector3d e_m = Eigen::Vector3d(r1 * c, r1 * sn, 1.0) / m;
        const Eigen::Vector3d V(a[3], a[4], a[5]);
        const double ca = V.dot(e_phi) / speed, sa = V.dot(e_m) / speed;
        const Eigen::Vector3d de_m_dz =
            Eigen::Vector3d(r2 * c, r2 * sn, 0.0) / m - Eigen::Vector3d(r1 * c, r1 * sn, 1.0) * (r1 * r2 / (m * m * m));
        const Eigen::Vector3d de_m_dphi = Eigen::Vector3d(-r1 * sn, r1 * c, 0.0) / m;
        const Eigen::Vector3d de_phi_dphi(-c, -sn, 0.0);
        Eigen::Matrix<double, 6, 3> E;
        E.block<3, 1>(0, 0) = Eigen::Vector3d(r1 * c, r1 * sn, 1.0);
        E.block<3, 1>(3, 0) = speed * sa * de_m_dz;
        E.block<3, 1>(0, 1) = Eigen::Vector3d(-rho * sn, rho * c, 0.0);
        E.block<3, 1>(3, 1) = speed * (ca * de_phi_dphi + sa * de_m_dphi);
        E.block<3, 1>(0, 2).setZero();
        E.block<3, 1>(3, 2) = speed * (-sa * e_phi + ca * e_m);
        return E;
    };

    // d(z, phi, alpha) / d(X, V) at the end
    auto ambient_to_chart = [&](const Ambient& a) {
        const double X = a[0], Y = a[1], z = a[2];
        const double phi = std::atan2(Y, X);
        const double r1 = profile_.drho(z), r2 = profile_.d2rho(z);
        const double m = std::sqrt(1.0 + r1 * r1);
        const double c = std::cos(phi), sn = std::sin(phi);
        const Eigen::Vector3d e_phi(-sn, c, 0.0);
        const Eigen::Vector3d e_m = Eigen::Vector3d(r1 * c, r1 * sn, 1.0) / m;
        const Eigen::Vector3d V(a[3], a[4], a[5]);
        const double ca = V.dot(e_phi), sa = V.dot(e_m);
        const double rr = X * X + Y * Y;

        Eigen::Matrix<double, 1, 6> dz = Eigen::Matrix<double, 1, 6>::Zero();
        dz(2) = 1.0;
        Eigen::Matrix<double, 1, 6> dphi = Eigen::Matrix<double, 1, 6>::Zero();
        dphi(0) = -Y / rr;
        dphi(1) = X / rr;

        const Eigen::Vector3d de_m_dz =
            Eigen::Vector3d(r2 * c, r2 * sn, 0.0) / m - Eigen::Vector3d(r1 * c, r1 * sn, 1.0) * (r1 * r2 / (m * m * m));
        const double da_dphi = V.dot(Eigen::Vector3d(-c, -sn, 0.0));
        const double db_dphi = V.dot(Eigen::Vector3d(-r1 * sn, r1 * c, 0.0)) / m;
        const double db_dz = V.dot(de_m_dz);
        Eigen::Matrix<double, 1, 6> da = da_dphi * dphi;
        da.segment<3>(3) += e_phi.transpose();
        Eigen::Matrix<double, 1, 6> db = db_dphi * dphi + db_dz * dz;
        db.segment<3>(3) += e_m.transpose();
        const Eigen::Matrix<double, 1, 6> dalpha = (ca * db - sa * da) / (ca * ca + sa * sa);

        Eigen::Matrix<double, 3, 6> C;
        C.row(0) = dz;
        C.row(1) = dphi;
        C.row(2) = dalpha;
        return C;
    };

    const Eigen::Matrix3d Jz = ambient_to_chart(a1) * Phi * chart_to_ambient(a0);
    // switch height z to the area coordinate so that the chart is Liouville-normalised
    const double w0 = profile_.area_density(a0[2]), w1 = profile_.area_density(a1[2]);
    Eigen::Matrix3d J = Jz;
    J.row(0) *= w1;
    J.col(0) /= w0;
    return J;
}

double SurfaceOfRevolution::distance(const PhaseState& a, const PhaseState& b) const {
    const Ambient ya = to_ambient(a), yb = to_ambient(b);
    double acc = 0.0;
    for (int i = 0; i < 6; ++i) acc += (ya[i] - yb[i]) * (ya[i] - yb[i]);
    return std::sqrt(acc);
}

PhaseState SurfaceOfRevolution::liouville_sample(std::mt19937_64& rng) const {
    const double lo = profile_.lower(), hi = profile_.upper();
    double z = 0.0;
    for (;;) {
        z = lo + (hi - lo) * uniform01(rng);
        if (z <= lo || z >= hi) continue;
        if (uniform01(rng) * density_max_ < profile_.area_density(z)) break;
    }
    const double phi = kTwoPi * uniform01(rng);
    const double alpha = kTwoPi * uniform01(rng);
    return state_at(z, phi, alpha);
}

double SurfaceOfRevolution::diameter() const {
    const double dz = profile_.upper() - profile_.lower();
    const double d = 2.0 * profile_.rho_max();
    return std::sqrt(d * d + dz * dz + 4.0 * speed_bound_ * speed_bound_);
}

nlohmann::json SurfaceOfRevolution::descriptor() const {
    return {{"kind", "surfrev"}, {"profile", profile_.to_json()}};
}

// ------------------------------------------------------------------ factory

namespace {

ModelPtr build(const nlohmann::json& j) {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "torus") {
        const int n = j.value("n", 2);
        if (n != 2 && n != 3) throw ConfigError("torus: n must be 2 or 3");
        Matrix B = kTwoPi * Matrix::Identity(n, n);
        if (j.contains("basis")) {
            const auto& rows = j.at("basis");
            if (!rows.is_array() || static_cast<int>(rows.size()) != n)
                throw ConfigError("torus: basis must have n rows");
            for (int i = 0; i < n; ++i) {
                if (!rows[i].is_array() || static_cast<int>(rows[i].size()) != n)
                    throw ConfigError("torus: basis rows must have n entries");
                for (int k = 0; k < n; ++k) B(i, k) = rows[i][k].get<double>();
            }
        }
        return std::make_shared<FlatTorus>(B);
    }
    if (kind == "catmap") {
        CatMapSuspension::IntMatrix m = {2, 1, 1, 1};
        if (j.contains("matrix")) {
            const auto& rows = j.at("matrix");
            if (!rows.is_array() || rows.size() != 2 || rows[0].size() != 2 || rows[1].size() != 2)
                throw ConfigError("catmap: matrix must be 2x2");
            m = {rows[0][0].get<std::int64_t>(), rows[0][1].get<std::int64_t>(), rows[1][0].get<std::int64_t>(),
                 rows[1][1].get<std::int64_t>()};
        }
        return std::make_shared<CatMapSuspension>(m, j.value("roof", 1.0));
    }
    if (kind == "sphere3") return std::make_shared<Sphere3>();
    if (kind == "surfrev") {
        if (!j.contains("profile")) throw ConfigError("surfrev: missing 'profile'");
        IntegratorOptions opts;
        if (j.contains("tolerance")) opts.abs_tol = opts.rel_tol = j.at("tolerance").get<double>();
        return std::make_shared<SurfaceOfRevolution>(validate_profile(ProfileCandidate::from_json(j.at("profile"))),
                                                     opts);
    }
    throw ConfigError("unknown model kind '" + kind + "'");
}

} // namespace

ModelPtr make_model(const nlohmann::json& descriptor) {
    if (!descriptor.is_object() || !descriptor.contains("kind")) throw ConfigError("model descriptor needs a 'kind'");
    std::shared_ptr<FlowModel> model;
    try {
        model = std::const_pointer_cast<FlowModel>(build(descriptor));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model descriptor: ") + e.what());
    }
    if (descriptor.contains("t0")) model->set_shortest_period(descriptor.at("t0").get<double>());
    if (descriptor.contains("lipschitz")) model->set_lipschitz_bound(descriptor.at("lipschitz").get<double>());
    return model;
}

} // namespace weyllab
