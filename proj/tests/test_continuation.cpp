#include <cmath>

#include "doctest.h"
#include "fixtures.h"
#include "hopfdde/continuation.hpp"
#include "hopfdde/errors.hpp"

using namespace hopfdde;

namespace {

// periodic profile resampled from uniform-in-time orbit samples
PeriodicProfile profile_from_orbit(const Orbit& orb, int Nm, int deg) {
    PeriodicProfile prof;
    prof.Nm = Nm;
    prof.deg = deg;
    const std::size_t ns = orb.samples.size();
    prof.U.resize(static_cast<std::size_t>(Nm) * deg);
    for (int g = 0; g < Nm * deg; ++g) {
        const double s = static_cast<double>(g) / (Nm * deg) * static_cast<double>(ns);
        const std::size_t i = static_cast<std::size_t>(s) % ns;
        const double fr = s - std::floor(s);
        const Vec2 a = orb.samples[i];
        const Vec2 b = orb.samples[(i + 1) % ns];
        prof.U[g] = a + fr * (b - a);
    }
    return prof;
}

Orbit attractor_orbit(const ModelParams& p, double tau, double t_end) {
    const auto eq = interior_equilibrium(p, tau);
    REQUIRE(eq.has_value());
    const Trajectory tr =
        integrate(p, tau, History::constant({1.01 * eq->x, 1.01 * eq->y}), t_end);
    return extract_orbit(p, tau, tr, eq->x);
}

} // namespace

TEST_CASE("analytic collocation Jacobian agrees with finite differences") {
    const ModelParams p = params_1a();
    const double tau = 12.0;
    const Orbit orb = attractor_orbit(p, tau, 1200.0);
    const PeriodicProfile guess = profile_from_orbit(orb, 10, 4);
    CHECK(collocation_jacobian_fd_error(p, tau, guess, orb.period, false) < 1e-5);
    CHECK(collocation_jacobian_fd_error(p, tau, guess, orb.period, true) < 1e-5);
}

TEST_CASE("collocation, shooting, and simulation agree on a stable orbit") {
    const ModelParams p = params_1a();
    const double tau = 12.0;
    const Orbit orb = attractor_orbit(p, tau, 1200.0);
    const auto eq = interior_equilibrium(p, tau);

    const CollocSolution sol =
        solve_collocation(p, tau, profile_from_orbit(orb, 96, 4), orb.period);
    REQUIRE(sol.converged);
    CHECK(sol.residual < 3e-10);
    CHECK(sol.T == doctest::Approx(orb.period).epsilon(5e-3));

    const ShootResult sr = shooting_refine(p, tau, orb, eq->x);
    REQUIRE(sr.converged);
    CHECK(sr.residual < 1e-8);
    CHECK(sr.period == doctest::Approx(sol.T).epsilon(5e-3));
}

TEST_CASE("periodic profile containers interpolate their nodes") {
    PeriodicProfile prof;
    prof.Nm = 6;
    prof.deg = 4;
    prof.U.resize(24);
    for (int g = 0; g < 24; ++g) {
        const double s = g / 24.0;
        prof.U[g] = {std::sin(2.0 * M_PI * s), std::cos(2.0 * M_PI * s)};
    }
    // node evaluation is exact, mid-cell evaluation is quartic-accurate
    CHECK(prof.eval(prof.node_phase(5)).x == doctest::Approx(prof.U[5].x).epsilon(1e-12));
    const double mid = 0.5 / 24.0 + 5.0 / 24.0;
    CHECK(prof.eval(mid).x == doctest::Approx(std::sin(2.0 * M_PI * mid)).epsilon(1e-5));
    Vec2 v, dv;
    prof.eval_both(mid, v, dv);
    CHECK(dv.x == doctest::Approx(2.0 * M_PI * std::cos(2.0 * M_PI * mid)).epsilon(1e-3));
    // resampling keeps the shape
    const PeriodicProfile fine = prof.resampled(12);
    CHECK(fine.Nm == 12);
    CHECK(fine.eval(0.37).x == doctest::Approx(prof.eval(0.37).x).epsilon(1e-6));
}

TEST_CASE("delay branch connects its two anchor roots") {
    const ModelParams p = params_1a();
    const HopfCatalog cat = hopf_points(p);
    REQUIRE(cat.branches.size() > 3);
    const auto& row = cat.branches[3];
    REQUIRE(row.size() == 2);

    const Branch br = trace_branch(p, p.K, Anchor::at_hopf(row.front()));
    REQUIRE(br.end == BranchEnd::Hopf);
    CHECK(br.end_param == doctest::Approx(row.back().tau).epsilon(1e-6));
    REQUIRE(br.end_hopf.has_value());
    CHECK(br.end_hopf->n == 3);
    CHECK(br.end_hopf->i == 2);
    CHECK_FALSE(br.fold_back);
    CHECK(br.points.size() > 10);
    CHECK(br.end_period == doctest::Approx(2.0 * M_PI / row.back().w).epsilon(1e-3));

    const ScaledPeriodVerdict v = scaled_period_check(p, br, 3);
    CHECK(v.pass);
    CHECK(v.checked == br.points.size());
    CHECK(v.min_ratio > 0.25);
    CHECK(v.max_ratio < 1.0 / 3.0);
}

TEST_CASE("pair of half-branches is recognized as one component") {
    const ModelParams p = params_1a();
    const HopfCatalog cat = hopf_points(p);
    const auto& row = cat.branches[2];
    std::vector<Branch> both;
    both.push_back(trace_branch(p, p.K, Anchor::at_hopf(row.front())));
    both.push_back(trace_branch(p, p.K, Anchor::at_hopf(row.back())));

    const ComponentReport rep = assemble_components(p, both);
    bool saw = false;
    for (const auto& pv : rep.pairs)
        if (pv.n == 2) {
            saw = true;
            CHECK(pv.verdict == PairVerdict::Verdict::Coincident);
            CHECK(pv.endpoints_match);
            CHECK(pv.max_overlap_gap < 0.05);
        }
    CHECK(saw);
    CHECK(rep.nested); // catalog intervals nest regardless of which n was traced
}

TEST_CASE("branch from the undelayed limit cycle ends at the sole critical delay") {
    const ModelParams p = params_onebranch();
    const HopfCatalog cat = hopf_points(p);
    REQUIRE(cat.all().size() == 1);
    const HopfPoint root = cat.all()[0];

    const Branch br = trace_branch(p, p.K, Anchor::ode_cycle());
    CHECK(br.start.kind == AnchorKind::OdeLimitCycle);
    REQUIRE(br.end == BranchEnd::Hopf);
    CHECK(br.end_param == doctest::Approx(root.tau).epsilon(1e-6));
    CHECK(br.end_period == doctest::Approx(2.0 * M_PI / root.w).epsilon(1e-4));
    REQUIRE(!br.points.empty());
    CHECK(br.points.front().param < 1e-9); // starts at the ODE limit
}

TEST_CASE("simulation stepping walks the stable branch") {
    const ModelParams p = params_1a();
    const HopfCatalog cat = hopf_points(p);
    StepPolicy pol;
    pol.method = TraceMethod::SimulationContinuation;
    pol.dtau0 = 0.4;
    pol.max_points = 12;
    const Branch br = trace_branch(p, p.K, Anchor::at_hopf(cat.branches[0].front()), pol);
    CHECK(br.method == TraceMethod::SimulationContinuation);
    CHECK(br.points.size() == 12);
    for (std::size_t k = 1; k < br.points.size(); ++k) {
        CHECK(br.points[k].param > br.points[k - 1].param);
        CHECK(br.points[k].orbit.period > 0.0);
    }
    // budget exhaustion is reported, not silently dropped
    CHECK(br.end == BranchEnd::Lost);
    CHECK(br.note == "point budget exhausted");
}

TEST_CASE("trace preconditions are enforced") {
    const ModelParams p = params_1a();
    const HopfCatalog cat = hopf_points(p);
    StepPolicy pol;
    pol.degree = 3;
    CHECK_THROWS_AS(trace_branch(p, p.K, Anchor::at_hopf(cat.branches[0].front()), pol),
                    ConfigError);
    // no undelayed limit cycle below K_0
    CHECK_THROWS_AS(trace_branch(p, p.K, Anchor::ode_cycle()), LostAtStart);

    const Branch empty_br{};
    CHECK_THROWS_AS(scaled_period_check(p, empty_br, 0), HypothesisNotMet);
    CHECK_THROWS_AS(scaled_period_check(params_1b(), empty_br, 1), HypothesisNotMet);
}
