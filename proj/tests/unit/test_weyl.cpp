#include <doctest.h>

#include "weyllab/errors.hpp"
#include "weyllab/models.hpp"
#include "weyllab/spectra.hpp"
#include "weyllab/weyl.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

using namespace weyllab;

namespace {

constexpr double pi = std::numbers::pi;

std::vector<double> geometric(double a, double b, int n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(a * std::pow(b / a, static_cast<double>(i) / (n - 1)));
    return v;
}

std::vector<WeylSeriesRow> synthetic(const std::function<double(double)>& R) {
    std::vector<WeylSeriesRow> rows;
    for (double h : geometric(1e-1, 1e-5, 12)) rows.push_back({h, 0, 1.0, R(h)});
    return rows;
}

} // namespace

TEST_CASE("remainder extraction is an algebraic identity") {
    CHECK(weyl_row(0.01, 1000, 1000.0).R_h == 0.0);
    CHECK(weyl_row(0.1, 1050, 1000.0).R_h == doctest::Approx(0.5).epsilon(1e-12));
    // round trip from a known remainder
    for (double h : {0.3, 0.05, 1e-3}) {
        const double lead = 1e6, R = -0.37;
        const auto N = static_cast<std::int64_t>(std::llround(lead * (1 + h * R)));
        const auto row = weyl_row(h, N, lead);
        CHECK(row.R_h == doctest::Approx((static_cast<double>(N) / lead - 1) / h).epsilon(1e-15));
        CHECK(row.R_h == doctest::Approx(R).epsilon(1e-6 / h));
    }
    CHECK_THROWS_AS(weyl_row(1.0, 1, 1.0), DomainError);
}

TEST_CASE("torus row at R = 100 matches a hand recomputation") {
    const auto T = make_model({{"kind", "torus"}});
    const auto rows = remainder_series({{0.01, torus_count(2 * pi * Matrix::Identity(2, 2), 100)}}, *T);
    REQUIRE(rows.size() == 1);
    const double lead = pi * 100 * 100;
    CHECK(rows[0].leading == doctest::Approx(lead).epsilon(1e-14));
    CHECK(rows[0].R_h == doctest::Approx((static_cast<double>(rows[0].N) / lead - 1) / 0.01).epsilon(1e-12));
    CHECK_THROWS_AS(remainder_series({{0.01, 1}, {0.01, 2}}, *T), DomainError);
}

TEST_CASE("exponent fit recovers exact laws") {
    auto fit = remainder_exponent_fit(synthetic([](double h) { return std::pow(h, 1.0 / 3); }));
    CHECK(std::abs(fit.exponent - 1.0 / 3) < 1e-10);
    CHECK(fit.constant == doctest::Approx(1.0));
    fit = remainder_exponent_fit(synthetic([](double h) { return 4 * 0.96 / std::abs(std::log(h)); }), true);
    CHECK(std::abs(fit.constant - 3.84) < 1e-10);
    CHECK(fit.exponent == doctest::Approx(1.0));
}

TEST_CASE("exponent fit needs rows and span") {
    std::vector<WeylSeriesRow> rows;
    for (double h : geometric(1e-2, 1e-3, 12)) rows.push_back({h, 0, 1, h});
    CHECK_THROWS_AS(remainder_exponent_fit(rows), DomainError);
    rows = synthetic([](double h) { return h; });
    for (std::size_t i = 0; i < 6; ++i) rows[i].R_h = 0;
    CHECK_THROWS_AS(remainder_exponent_fit(rows), DomainError);
}

TEST_CASE("torus remainder decays faster than the rank-2 bound") {
    const auto T = make_model({{"kind", "torus"}});
    std::vector<double> hs;
    for (double R : geometric(100, 1e4, 20)) hs.push_back(1 / R);
    const auto fit = remainder_exponent_fit(weyl_series(*T, hs));
    CHECK(fit.exponent >= 1.0 / 7);
}

TEST_CASE("sphere3 remainder is bounded but does not decay") {
    const auto S = make_model({{"kind", "sphere3"}});
    std::vector<double> hs;
    for (double L : geometric(1e2, 1e6, 20)) hs.push_back(1 / std::sqrt(L));
    const auto series = weyl_series(*S, hs);
    CHECK(verify_bound(series, {BoundShape::Kind::Power, 0.0}).pass);
    CHECK_FALSE(verify_bound(series, {BoundShape::Kind::Power, 1.0 / 7}).pass);
    // jump at a cluster Lambda = k(k+2) is (k+1)^2, so R_h stays of order one
    const double k = 99;
    const auto below = sphere3_count(k * (k + 2) - 0.5), at = sphere3_count(k * (k + 2));
    CHECK(at - below == (k + 1) * (k + 1));
}

TEST_CASE("plan formulas") {
    PlanRequest a;
    a.cls = PlanClass::Anosov;
    a.h = 1e-3;
    a.ell = 0.01;
    a.lambda_max = 0.9624;
    const auto pa = plan_parameters(a);
    CHECK(pa.delta == 0.25);
    CHECK(pa.eps == doctest::Approx(std::pow(10.0, -0.75)).epsilon(1e-12));
    CHECK(pa.eps == doctest::Approx(0.17783).epsilon(1e-4));
    CHECK(pa.T == doctest::Approx(0.25 * 6.907755 / 0.9724).epsilon(1e-6));
    CHECK(pa.T == doctest::Approx(1.7758).epsilon(1e-4));
    CHECK(pa.predicted_bound == doctest::Approx(4 * 0.9724 / 6.907755).epsilon(1e-6));
    a.lambda_max.reset();
    CHECK_THROWS_AS(plan_parameters(a), DomainError);

    PlanRequest l;
    l.cls = PlanClass::LieGroup;
    l.order = 1;
    l.h = 0.37;
    const auto pl = plan_parameters(l);
    CHECK(pl.delta == 0.0);
    CHECK(pl.exponent == 0.0);
    CHECK(pl.T == 1.0);

    PlanRequest s;
    s.cls = PlanClass::Surfrev;
    s.order = 1;
    s.h = 1e-4;
    const auto ps = plan_parameters(s);
    CHECK(ps.delta == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(ps.T == doctest::Approx(21.544).epsilon(1e-4));
    CHECK(ps.exponent == doctest::Approx(1.0 / 3).epsilon(1e-15));
    CHECK(std::isinf(ps.ehrenfest));
}

TEST_CASE("plan exponents are independent of h and vanish in the limits") {
    for (int p = 1; p <= 10; ++p) {
        double last_delta = -1;
        for (double h : {1e-1, 1e-3, 1e-6}) {
            PlanRequest r;
            r.cls = PlanClass::LieGroup;
            r.order = p;
            r.h = h;
            const auto plan = plan_parameters(r);
            if (last_delta >= 0) CHECK(plan.delta == last_delta);
            last_delta = plan.delta;
            CHECK(plan.delta < 0.5);
            CHECK(std::abs(std::log(plan.T) / std::log(h) + plan.exponent) < 1e-12);
        }
    }
    PlanRequest r;
    r.cls = PlanClass::Surfrev;
    r.h = 0.01;
    double last = 1;
    for (int k = 1; k <= 10; ++k) {
        r.order = k;
        const auto plan = plan_parameters(r);
        CHECK(plan.exponent < last);
        last = plan.exponent;
    }
    r.order = 1000;
    CHECK(plan_parameters(r).exponent < 1e-3);
    r.order = 0;
    CHECK_THROWS_AS(plan_parameters(r), DomainError);
}

TEST_CASE("plan is infeasible past the Ehrenfest cap") {
    PlanRequest r;
    r.cls = PlanClass::LieGroup;
    r.order = 2;
    r.h = 1e-6;
    r.lambda_max = 1.0;
    CHECK_THROWS_AS(plan_parameters(r), PlanInfeasibleError);
    r.lambda_max = 0.0;
    r.ell = 1e-3;
    CHECK_NOTHROW(plan_parameters(r));
}

TEST_CASE("plan json") {
    PlanRequest r;
    r.cls = PlanClass::Surfrev;
    r.order = 2;
    r.h = 0.01;
    const auto j = plan_to_json(plan_parameters(r));
    CHECK(j["class"] == "surfrev");
    CHECK(j["delta"].get<double>() == doctest::Approx(3.0 / 7));
    CHECK(j.contains("eps"));
    CHECK(j.contains("T"));
    CHECK(j.contains("predicted_bound"));
    CHECK(plan_class_from_string("lie_group") == PlanClass::LieGroup);
    CHECK_THROWS_AS(plan_class_from_string("zoll"), ConfigError);
}

TEST_CASE("verify bound calibrates at the largest h") {
    auto rows = synthetic([](double h) { return 2 * std::pow(h, 0.5); });
    auto rep = verify_bound(rows, {BoundShape::Kind::Power, 0.5});
    CHECK(rep.pass);
    CHECK(rep.constant == doctest::Approx(2.0));
    CHECK(rows[rep.anchor_index].h == doctest::Approx(0.1));
    rep = verify_bound(rows, {BoundShape::Kind::Power, 1.0});
    CHECK_FALSE(rep.pass);
    CHECK_FALSE(rep.violations.empty());
    CHECK(rep.worst_ratio > 1);
    CHECK_THROWS_AS(verify_bound({}, {}), DomainError);
    CHECK(BoundShape{BoundShape::Kind::InverseLog, 1}(std::exp(-4.0)) == doctest::Approx(0.25));
}

TEST_CASE("weyl csv round trip") {
    const std::vector<WeylSeriesRow> rows = {{0.01, 31417, 31415.926535897932, 0.00341}, {0.5, 13, 12.5, 0.08}};
    std::ostringstream os;
    write_weyl_csv(os, "torus", rows);
    std::istringstream is(os.str());
    const auto back = read_weyl_csv(is);
    REQUIRE(back.size() == 2);
    CHECK(back[0].N == 31417);
    CHECK(back[0].leading == rows[0].leading);
    CHECK(back[1].R_h == rows[1].R_h);
    std::istringstream bad("model,h,N\n");
    CHECK_THROWS_AS(read_weyl_csv(bad), ConfigError);
    std::istringstream empty("");
    CHECK_THROWS_AS(read_weyl_csv(empty), ConfigError);
}
