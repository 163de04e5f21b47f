#include <doctest.h>

#include "weyllab/errors.hpp"
#include "weyllab/models.hpp"
#include "weyllab/parallel.hpp"
#include "weyllab/spectra.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

using namespace weyllab;

namespace {

constexpr double pi = std::numbers::pi;

// Brute force over a box of dual-lattice coefficients.
std::int64_t brute_torus(const Matrix& basis, double R) {
    const Matrix D = 2 * pi * basis.inverse().transpose();
    const auto n = basis.rows();
    const Matrix Ginv = (D * D.transpose()).inverse();
    int box = 0;
    for (Eigen::Index k = 0; k < n; ++k) box = std::max(box, static_cast<int>(R * std::sqrt(Ginv(k, k))) + 2);
    std::int64_t count = 0;
    const int zmax = n == 3 ? box : 0;
    for (int i = -box; i <= box; ++i)
        for (int j = -box; j <= box; ++j)
            for (int l = -zmax; l <= zmax; ++l) {
                Vector m(n);
                if (n == 2) m << i, j;
                else m << i, j, l;
                const Vector k = D.transpose() * m;
                count += k.squaredNorm() <= R * R;
            }
    return count;
}

Matrix random_basis(std::mt19937_64& rng, int n) {
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    Matrix B = Matrix::Identity(n, n) * (2 * pi);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) B(i, j) += 2 * pi * u(rng);
    return B;
}

// Integer double loop for the square lattice 2 pi Z^2.
std::int64_t brute_square(int R) {
    std::int64_t count = 0;
    for (int i = -R; i <= R; ++i)
        for (int j = -R; j <= R; ++j) count += i * i + j * j <= R * R;
    return count;
}

std::int64_t sphere2_oracle(double lambda) {
    std::int64_t n = 0;
    for (int l = 0; l * (l + 1) <= lambda; ++l) n += 2 * l + 1;
    return n;
}

RevolutionProfile sphere() { return validate_profile(ProfileCandidate::sphere()); }

} // namespace

TEST_CASE("square torus counts") {
    const Matrix B = 2 * pi * Matrix::Identity(2, 2);
    CHECK(torus_count(B, 0) == 1);
    CHECK(torus_count(B, 1) == 5);
    CHECK(torus_count(B, 10) == brute_square(10));
    for (int R = 0; R <= 30; ++R) CHECK(torus_count(B, R) == brute_square(R));
    CHECK(torus_count(B, 1.5) == 9);
}

TEST_CASE("torus counts on random lattices match brute force") {
    std::mt19937_64 rng(12);
    for (int trial = 0; trial < 5; ++trial) {
        const Matrix B2 = random_basis(rng, 2);
        for (double R : {0.0, 0.7, 3.3, 10.0, 17.5, 30.0}) CHECK(torus_count(B2, R) == brute_torus(B2, R));
    }
    for (int trial = 0; trial < 3; ++trial) {
        const Matrix B3 = random_basis(rng, 3);
        for (double R : {0.0, 2.2, 6.0, 9.5}) CHECK(torus_count(B3, R) == brute_torus(B3, R));
    }
    const Matrix C = 2 * pi * Matrix::Identity(3, 3);
    for (double R : {0.0, 1.5, 5.3, 12.2}) CHECK(torus_count(C, R) == brute_torus(C, R));
}

TEST_CASE("torus count jumps by shell multiplicities") {
    const Matrix B = 2 * pi * Matrix::Identity(2, 2);
    std::map<int, int> shells; // |k|^2 -> number of lattice points
    for (int i = -8; i <= 8; ++i)
        for (int j = -8; j <= 8; ++j) ++shells[i * i + j * j];
    for (int s = 1; s <= 60; ++s) {
        const auto jump = torus_count(B, std::sqrt(s + 0.25)) - torus_count(B, std::sqrt(s - 0.25));
        CHECK(jump == (shells.count(s) ? shells[s] : 0));
    }
}

TEST_CASE("torus count rejects bad input") {
    CHECK_THROWS_AS(torus_count(Matrix::Identity(4, 4), 1), DomainError);
    CHECK_THROWS_AS(torus_count(Matrix::Identity(2, 2), -1), DomainError);
    Matrix S(2, 2);
    S << 1, 2, 2, 4;
    CHECK_THROWS_AS(torus_count(S, 1), DomainError);
}

TEST_CASE("sphere3 counts") {
    CHECK(sphere3_count(0) == 1);
    CHECK(sphere3_count(3) == 5);
    CHECK(sphere3_count(15) == 30);
    for (double L : {0.0, 7.9, 8.0, 99.0, 1e4}) {
        std::int64_t n = 0;
        for (int k = 0; k * (k + 2) <= L; ++k) n += static_cast<std::int64_t>(k + 1) * (k + 1);
        CHECK(sphere3_count(L) == n);
    }
}

TEST_CASE("radial eigenvalues of the sphere are Legendre eigenvalues") {
    const auto e0 = radial_eigenvalues({sphere(), 0}, 13);
    REQUIRE(e0.size() == 4);
    for (int l = 0; l < 4; ++l) CHECK(e0[l] == doctest::Approx(l * (l + 1)).epsilon(1e-6));
    CHECK(std::abs(e0[0]) < 1e-6);
    const auto e1 = radial_eigenvalues({sphere(), 1}, 13);
    REQUIRE(e1.size() == 3);
    for (int l = 1; l < 4; ++l) CHECK(e1[l - 1] == doctest::Approx(l * (l + 1)).epsilon(1e-6));
    CHECK(radial_eigenvalues({sphere(), 3}, 0).empty());
    CHECK(radial_eigenvalues({validate_profile(ProfileCandidate::spheroid(1, 2)), 1}, 0).empty());
}

TEST_CASE("radial eigenvalues increase with the angular momentum") {
    const auto prof = validate_profile(ProfileCandidate::spheroid(1, 2));
    std::vector<std::vector<double>> table;
    for (int m = 0; m <= 10; ++m) table.push_back(radial_eigenvalues({prof, m}, 400));
    for (int m = 1; m <= 10; ++m)
        for (std::size_t k = 0; k <= 10; ++k) {
            REQUIRE(k < table[m].size());
            CHECK(table[m][k] > table[m - 1][k]);
        }
}

TEST_CASE("sphere profile counts are exact") {
    const auto prof = sphere();
    for (int L = 0; L <= 200; ++L) CHECK(surfrev_count(prof, L) == sphere2_oracle(L));
    CHECK(surfrev_count(prof, 6.5) == 9);
    CHECK(surfrev_count(validate_profile(ProfileCandidate::spheroid(1, 2)), 0) == 1);
}

TEST_CASE("spheroid count is stable under tighter tolerances") {
    const auto prof = validate_profile(ProfileCandidate::spheroid(1, 2));
    RadialOptions tight;
    tight.tolerance = 1e-11;
    CHECK(surfrev_count(prof, 200) == surfrev_count(prof, 200, tight));
}

TEST_CASE("counting functions are monotone") {
    const auto prof = validate_profile(ProfileCandidate::spheroid(1, 2));
    std::int64_t last = 0;
    for (double L = 0; L <= 150; L += 2.5) {
        const auto c = surfrev_count(prof, L);
        CHECK(c >= last);
        last = c;
    }
}

TEST_CASE("weyl leading terms") {
    const auto T = make_model({{"kind", "torus"}});
    CHECK(weyl_leading(*T, 0.01) == doctest::Approx(pi * 1e4).epsilon(1e-12));
    const auto S = make_model({{"kind", "surfrev"}, {"profile", {{"preset", "sphere"}}}});
    CHECK(weyl_leading(*S, 0.1) == doctest::Approx(100).epsilon(1e-9));
    const auto S3 = make_model({{"kind", "sphere3"}});
    CHECK(weyl_leading(*S3, 0.01) == doctest::Approx(1e6 / 3).epsilon(1e-12));
    const auto T3 = make_model({{"kind", "torus"}, {"n", 3}});
    for (const auto* M : {T.get(), S.get(), S3.get(), T3.get()}) {
        const int n = configuration_dimension(*M);
        CHECK(weyl_leading(*M, 0.005) / weyl_leading(*M, 0.01) == doctest::Approx(std::pow(2.0, n)));
    }
    CHECK_THROWS_AS(weyl_leading(*T, 1.0), DomainError);
    CHECK_THROWS_AS(weyl_leading(*make_model({{"kind", "catmap"}}), 0.1), DomainError);
}

TEST_CASE("h and lambda conversions") {
    CHECK(lambda_from_h(0.01) == doctest::Approx(1e4));
    CHECK(h_from_lambda(lambda_from_h(0.125)) == 0.125);
    CHECK_THROWS_AS(lambda_from_h(0), DomainError);
    CHECK_THROWS_AS(h_from_lambda(1), DomainError);
}

TEST_CASE("spectrum series csv") {
    const auto T = make_model({{"kind", "torus"}});
    const auto rows = spectrum_series(*T, {100, 400});
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].count == torus_count(2 * pi * Matrix::Identity(2, 2), 10));
    CHECK(rows[1].h == 0.05);
    std::ostringstream os;
    write_spectrum_csv(os, "torus", {{0.5, 4, 13, 12.5}});
    CHECK(os.str() == "model,h,lambda,count,leading\ntorus,0.5,4,13,12.5\n");
}
