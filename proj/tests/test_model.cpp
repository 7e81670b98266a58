#include <cmath>

#include "doctest.h"
#include "fixtures.h"
#include "hopfdde/errors.hpp"
#include "hopfdde/integrate.hpp"
#include "hopfdde/model.hpp"

using namespace hopfdde;

TEST_CASE("validate_params rejects nonpositive and nonfinite values") {
    CHECK_THROWS_AS(validate_params(0.0, 1, 1, 1, 1, 1), NonPositiveParameter);
    CHECK_THROWS_AS(validate_params(1, -2.0, 1, 1, 1, 1), NonPositiveParameter);
    CHECK_THROWS_AS(validate_params(1, 1, 0.0, 1, 1, 1), NonPositiveParameter);
    CHECK_THROWS_AS(validate_params(1, 1, 1, 0.0, 1, 1), NonPositiveParameter);
    CHECK_THROWS_AS(validate_params(1, 1, 1, 1, 0.0, 1), NonPositiveParameter);
    CHECK_THROWS_AS(validate_params(1, 1, 1, 1, 1, 0.0), NonPositiveParameter);
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(validate_params(inf, 1, 1, 1, 1, 1), NonPositiveParameter);

    CHECK(params_1a().c0_feasible);
    CHECK_FALSE(validate_params(1, 1, 1, 1, 0.05, 0.1).c0_feasible); // cm < d
}

TEST_CASE("beta decays from cm with rate d") {
    const ModelParams p = params_1a();
    CHECK(beta_of(p, 0.0) == doctest::Approx(4.0));
    CHECK(beta_of(p, 10.0) == doctest::Approx(4.0 * std::exp(-1.0)).epsilon(1e-14));
    CHECK(beta_of(p, 5.0) > beta_of(p, 6.0));
}

TEST_CASE("threshold formulas on the worked parameter sets") {
    const Thresholds ta = thresholds(params_1a(), 0.0);
    CHECK(ta.K_c == doctest::Approx(0.1 / 3.9).epsilon(1e-14));
    CHECK(ta.K_0 == doctest::Approx(41.0 / 39.0).epsilon(1e-14));
    CHECK(ta.K_2 == doctest::Approx(1.21 / 15.99).epsilon(1e-14));
    REQUIRE(ta.tau_max.has_value());
    CHECK(*ta.tau_max == doctest::Approx(10.0 * std::log(20.0)).epsilon(1e-14));
    REQUIRE(ta.tau_bar.has_value());
    CHECK(*ta.tau_bar == doctest::Approx(24.1868282098).epsilon(1e-8));
    CHECK(*ta.tau_bar < *ta.tau_max);
    // K = a kills the H(tau)=0 root: cm(K-a) = 0 < d(K+a)
    CHECK_FALSE(ta.tau_breve.has_value());
    // tau = 0 puts the transcritical threshold at the ODE one
    REQUIRE(ta.K_1.has_value());
    CHECK(*ta.K_1 == doctest::Approx(ta.K_c).epsilon(1e-14));

    const Thresholds tb = thresholds(params_1b(), 0.0);
    CHECK(tb.K_0 == doctest::Approx(205.0 / 39.0).epsilon(1e-14));
    REQUIRE(tb.tau_max.has_value());
    CHECK(*tb.tau_max == doctest::Approx(10.0 * std::log(32.0)).epsilon(1e-14));

    const Thresholds tc = thresholds(params_onebranch(), 0.0);
    CHECK(tc.K_c == doctest::Approx(5.0 / 9.0).epsilon(1e-14));
    CHECK(tc.K_0 == doctest::Approx(55.0 / 9.0).epsilon(1e-14));
}

TEST_CASE("K_1 grows with the delay and leaves the domain") {
    const ModelParams p = params_slice(2.0);
    const Thresholds t26 = thresholds(p, 26.0);
    REQUIRE(t26.K_1.has_value());
    CHECK(*t26.K_1 == doctest::Approx(0.507371311482).epsilon(1e-8));
    // beta <= d: no interior equilibrium at any K
    const double tau_dead = std::log(4.0 / 0.1) / 0.1 + 1.0;
    CHECK_FALSE(thresholds(p, tau_dead).K_1.has_value());
}

TEST_CASE("threshold ordering K_c < K_2 < K_0 whenever cm > d") {
    uint64_t s = 99;
    auto unif = [&s]() {
        s ^= s >> 12; s ^= s << 25; s ^= s >> 27;
        return double(s * 0x2545F4914F6CDD1Dull >> 11) / 9007199254740992.0;
    };
    for (int k = 0; k < 200; ++k) {
        const double m = 0.2 + 3.0 * unif(), c = 0.2 + 3.0 * unif();
        const double d = (0.05 + 0.9 * unif()) * c * m; // keep cm > d
        const ModelParams p =
            validate_params(0.5 + 10.0 * unif(), 0.5 + 10.0 * unif(), m,
                            0.2 + 5.0 * unif(), c, d);
        REQUIRE(p.c0_feasible);
        const Thresholds t = thresholds(p, 0.0);
        CHECK(t.K_c > 0.0);
        CHECK(t.K_c < t.K_2);
        CHECK(t.K_2 < t.K_0);
    }
}

TEST_CASE("equilibria stationarity and existence window") {
    const ModelParams p = params_1a();
    const Thresholds t = thresholds(p, 0.0);
    for (double tau : {0.0, 5.0, 12.0, 26.0, 29.0}) {
        const auto eqs = equilibria(p, tau);
        REQUIRE(eqs.size() == 3);
        CHECK(eqs[0].kind == EqKind::Origin);
        CHECK(eqs[1].kind == EqKind::PreyOnly);
        CHECK(eqs[1].x == doctest::Approx(p.K));
        CHECK(eqs[2].kind == EqKind::Interior);
        for (const auto& e : eqs) {
            if (e.kind == EqKind::Origin)
                continue; // rhs is identically zero there by factoring
            const Vec2 f = system_rhs(p, tau, {e.x, e.y}, {e.x, e.y});
            CHECK(std::abs(f.x) < 1e-10);
            CHECK(std::abs(f.y) < 1e-10);
        }
    }
    // past tau_max the interior equilibrium is gone
    CHECK(equilibria(p, *t.tau_max + 0.5).size() == 2);
    CHECK_FALSE(interior_equilibrium(p, *t.tau_max + 0.5).has_value());
    // at tau_max it collides with the prey-only state
    const auto near = interior_equilibrium(p, *t.tau_max * (1.0 - 1e-10));
    REQUIRE(near.has_value());
    CHECK(near->x == doctest::Approx(p.K).epsilon(1e-6));
}

TEST_CASE("interior equilibrium solves the Holling fixed point") {
    const ModelParams p = params_1b();
    const double tau = 8.0;
    const auto e = interior_equilibrium(p, tau);
    REQUIRE(e.has_value());
    const double beta = beta_of(p, tau);
    CHECK(e->x == doctest::Approx(p.a * p.d / (beta - p.d)).epsilon(1e-14));
    CHECK(beta * e->x / (p.a + e->x) == doctest::Approx(p.d).epsilon(1e-14));
}

TEST_CASE("ODE classification against the K thresholds") {
    CHECK(ode_classification(params_1a()) == OdeClass::InteriorGAS);
    CHECK(ode_classification(params_1b()) == OdeClass::UniqueLimitCycle);
    CHECK(ode_classification(params_onebranch()) == OdeClass::UniqueLimitCycle);
    CHECK(ode_classification(params_slice(0.02)) == OdeClass::PreyOnlyGAS);
    CHECK(ode_classification(params_slice(41.0 / 39.0)) == OdeClass::Degenerate);
    CHECK_THROWS_AS(ode_classification(validate_params(1, 1, 1, 1, 0.05, 0.1)),
                    ConditionC0Violated);
}

TEST_CASE("with_carrying_capacity changes only K") {
    const ModelParams p = params_1a();
    const ModelParams q = with_carrying_capacity(p, 7.5);
    CHECK(q.K == 7.5);
    CHECK(q.r == p.r);
    CHECK(q.m == p.m);
    CHECK(q.a == p.a);
    CHECK(q.c == p.c);
    CHECK(q.d == p.d);
    CHECK(q.c0_feasible == p.c0_feasible);
    CHECK_THROWS_AS(with_carrying_capacity(p, 0.0), NonPositiveParameter);
}
