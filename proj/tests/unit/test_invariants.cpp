#include <doctest.h>

#include "weyllab/errors.hpp"
#include "weyllab/invariants.hpp"
#include "weyllab/models.hpp"
#include "weyllab/parallel.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

using namespace weyllab;

namespace {

// Entropy of the cat map from periodic-orbit growth: #Fix(A^n) = |tr A^n - 2|.
double cat_entropy_oracle() {
    const CatMapSuspension C({2, 1, 1, 1}, 1.0);
    const int n = 30;
    const auto An = C.power(n);
    const double fix = std::abs(static_cast<double>(An[0] + An[3]) - 2.0);
    return std::log(fix) / n;
}

// Largest root of x^2 - tr x + det for the default matrix, from the characteristic polynomial.
double cat_eigen_oracle() { return std::log((3.0 + std::sqrt(5.0)) / 2.0); }

ModelPtr catmap() { return make_model({{"kind", "catmap"}}); }

} // namespace

TEST_CASE("cat map constants agree between the two oracles") {
    CHECK(cat_entropy_oracle() == doctest::Approx(cat_eigen_oracle()).epsilon(1e-10));
    CHECK(cat_eigen_oracle() == doctest::Approx(0.9624236501));
}

TEST_CASE("expansion rate of the cat map suspension") {
    const auto e = max_expansion_rate(*catmap(), 30, 100, 3);
    CHECK(e.rate == doctest::Approx(cat_eigen_oracle()).epsilon(0.02));
    CHECK_FALSE(e.polynomial);
}

TEST_CASE("expansion rate of isometric and polynomial flows") {
    const auto T = make_model({{"kind", "torus"}});
    auto e = max_expansion_rate(*T, 100, 100, 3);
    CHECK(e.rate <= 0.05);
    CHECK(e.polynomial);
    // linear Jacobian growth: rate close to ln(1 + c t) / t for c of order 1
    CHECK(e.rate <= std::log(1 + 2 * 100.0) / 100);

    const auto S = make_model({{"kind", "sphere3"}});
    e = max_expansion_rate(*S, 20, 100, 3);
    CHECK(e.rate <= 0.05);
    CHECK(e.polynomial);
}

TEST_CASE("expansion rate preconditions") {
    const auto C = catmap();
    CHECK_THROWS_AS(max_expansion_rate(*C, 5, 100, 1), DomainError);
    CHECK_THROWS_AS(max_expansion_rate(*C, 30, 10, 1), DomainError);
}

TEST_CASE("lyapunov spectrum of the cat map suspension") {
    const auto C = catmap();
    auto rng = substream(4, 0);
    const auto l = lyapunov_spectrum(*C, C->liouville_sample(rng), 200, 1);
    REQUIRE(l.size() == 3);
    const double lam = cat_eigen_oracle();
    CHECK(std::abs(l[0] - lam) < 0.02);
    CHECK(std::abs(l[1]) < 0.02);
    CHECK(std::abs(l[2] + lam) < 0.02);
    CHECK(std::abs(l[0] + l[1] + l[2]) < 0.05);
}

TEST_CASE("lyapunov spectra vanish for isometric flows") {
    for (const auto& d : {nlohmann::json{{"kind", "torus"}}, nlohmann::json{{"kind", "sphere3"}},
                          nlohmann::json{{"kind", "torus"}, {"n", 3}}}) {
        const auto M = make_model(d);
        auto rng = substream(6, 1);
        const auto l = lyapunov_spectrum(*M, M->liouville_sample(rng), 100, 0.5);
        CHECK(l.size() == static_cast<std::size_t>(M->level_dimension()));
        CHECK(std::is_sorted(l.rbegin(), l.rend()));
        for (double v : l) CHECK(std::abs(v) < 0.05);
    }
}

TEST_CASE("lyapunov spectrum preconditions") {
    const auto C = catmap();
    auto rng = substream(4, 0);
    const auto s = C->liouville_sample(rng);
    CHECK_THROWS_AS(lyapunov_spectrum(*C, s, 100, 0.05), DomainError);
    CHECK_THROWS_AS(lyapunov_spectrum(*C, s, 10, 1), DomainError);
}

TEST_CASE("positive exponent sum") {
    CHECK(positive_sum_chi({0, 0, 0}, {1, 1, 1}) == 0.0);
    CHECK(positive_sum_chi({0.9624, 0, -0.9624}, {1, 1, 1}) == doctest::Approx(0.9624));
    CHECK(positive_sum_chi({2, 1, -3}, {2, 1, 1}) == doctest::Approx(5));
    CHECK(positive_sum_chi({5e-7, -1}, {1, 1}) == 0.0);
    CHECK_THROWS_AS(positive_sum_chi({1, 2}, {1}), DomainError);
}

TEST_CASE("separated sets are monotone and the pool can starve") {
    const auto C = catmap();
    const std::vector<double> Ts = {1, 2, 3};
    const std::vector<double> eps = {0.5, 0.4, 0.3};
    const auto e = bowen_entropy(*C, Ts, eps, 1500, 9, 2);
    REQUIRE(e.table.size() == 9);
    for (std::size_t ie = 0; ie < eps.size(); ++ie)
        for (std::size_t it = 0; it < Ts.size(); ++it) {
            const auto& c = e.table[ie * Ts.size() + it];
            CHECK(c.T == Ts[it]);
            CHECK(c.eps == eps[ie]);
            if (it > 0) CHECK(c.N >= e.table[ie * Ts.size() + it - 1].N);
            if (ie > 0) CHECK(c.N >= e.table[(ie - 1) * Ts.size() + it].N);
        }
    const auto again = bowen_entropy(*C, Ts, eps, 1500, 9, 1);
    for (std::size_t i = 0; i < e.table.size(); ++i) CHECK(again.table[i].N == e.table[i].N);
    CHECK(e.h_top > 0.3);

    CHECK_THROWS_AS(bowen_entropy(*C, Ts, {0.3, 0.2}, 10, 1), SampleStarvationError);
    CHECK_THROWS_AS(bowen_entropy(*C, {1, 2}, eps, 100, 1), DomainError);
    CHECK_THROWS_AS(bowen_entropy(*C, Ts, {0.3, 0.5}, 100, 1), DomainError);
}

TEST_CASE("separated sets of the flat torus grow subexponentially") {
    const auto T = make_model({{"kind", "torus"}});
    const auto e = bowen_entropy(*T, {10, 20, 30}, {0.6, 0.5}, 1000, 2);
    CHECK(e.h_top <= 0.05);
}

TEST_CASE("ehrenfest time") {
    CHECK(ehrenfest_time(0.9624, 0.01, 1e-3, false) == doctest::Approx(6.907755 / 0.9724).epsilon(1e-6));
    CHECK(ehrenfest_time(0.9624, 0.01, 1e-3, true) == std::numeric_limits<double>::infinity());
    CHECK(ehrenfest_time(0.9624, 0.01, 1 - 1e-12, false) < 1e-10);
    for (double lam : {0.0, 0.5, 2.0})
        for (double ell : {0.01, 0.3})
            for (double h : {0.5, 1e-2, 1e-6})
                CHECK(ehrenfest_time(lam, ell, h, false) == doctest::Approx(-std::log(h) / (lam + ell)).epsilon(1e-15));
    CHECK_THROWS_AS(ehrenfest_time(1, 0.01, 1.0, false), DomainError);
    CHECK_THROWS_AS(ehrenfest_time(1, 0.01, 0.0, false), DomainError);
    CHECK_THROWS_AS(ehrenfest_time(1, 0.0, 0.5, false), DomainError);
}

TEST_CASE("inequality report") {
    InvariantReport r;
    r.m = 3;
    auto checks = inequality_report(r, false);
    CHECK(checks.size() == 2);
    for (const auto& c : checks) CHECK(c.pass);

    const double lam = cat_eigen_oracle();
    r.lambda_max = lam;
    r.h_top = lam;
    r.chi = lam;
    checks = inequality_report(r, true);
    REQUIRE(checks.size() == 3);
    for (const auto& c : checks) CHECK(c.pass);
    CHECK(checks[2].lhs == doctest::Approx(0.7218).epsilon(1e-4));

    r.lambda_max = 1;
    r.h_top = 5;
    checks = inequality_report(r, false);
    CHECK_FALSE(checks[0].pass);
    CHECK(checks[0].name == "h_top <= m lambda_max");
}

TEST_CASE("invariants csv") {
    InvariantReport r;
    r.model = "catmap";
    r.lambda_max = 0.5;
    r.lyapunov = {0.5, 0, -0.5};
    r.chi = 0.5;
    r.h_top = 0.25;
    std::ostringstream os;
    write_invariants_csv(os, r);
    CHECK(os.str() == "model,lambda_max,lyap1,lyap2,lyap3,chi,h_top,flags\ncatmap,0.5,0.5,0,-0.5,0.5,0.25,\n");
    std::ostringstream es;
    write_entropy_csv(es, {{2, 0.25, 17}});
    CHECK(es.str() == "T,eps,N\n2,0.25,17\n");
}
