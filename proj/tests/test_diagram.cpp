#include <cmath>
#include <string>

#include "doctest.h"
#include "fixtures.h"
#include "hopfdde/diagram.hpp"
#include "hopfdde/errors.hpp"

using namespace hopfdde;

TEST_CASE("ell_0 vanishes at the plane origin of the Hopf structure") {
    const ModelParams p = params_slice(2.0);
    const double K0 = 41.0 / 39.0;
    CHECK(std::abs(ell_n(p, 0.0, K0, 0)) < 1e-9);
    // branch shift identity
    const double l0 = ell_n(p, 5.0, 1.0, 0);
    for (int n = 1; n <= 3; ++n)
        CHECK(ell_n(p, 5.0, 1.0, n) ==
              doctest::Approx(l0 - 2.0 * M_PI * n).epsilon(1e-12));
    // domain limits
    CHECK_THROWS_AS(ell_n(p, 1.0, 0.05, 0), OutOfDomain); // K below K_2
    CHECK_THROWS_AS(ell_n(p, 25.0, 1.0, 0), OutOfDomain); // tau past tau_bar(K)
    CHECK_THROWS_AS(ell_n(p, 1.0, -2.0, 0), OutOfDomain);
}

TEST_CASE("transcritical curve starts at K_c and climbs") {
    const ModelParams p = params_slice(2.0);
    std::vector<double> grid;
    for (int i = 0; i <= 26; ++i)
        grid.push_back(static_cast<double>(i));
    const DiagramCurve c = transcritical_curve(p, grid);
    CHECK(c.kind == CurveKind::Transcritical);
    CHECK(c.n == -1);
    REQUIRE(c.points.size() == grid.size());
    CHECK(c.points.front()[0] == 0.0);
    CHECK(c.points.front()[1] == doctest::Approx(0.1 / 3.9).epsilon(1e-12));
    for (std::size_t k = 1; k < c.points.size(); ++k)
        CHECK(c.points[k][1] > c.points[k - 1][1]);
    CHECK(c.points.back()[1] == doctest::Approx(0.507371311482).epsilon(1e-8));
    // grid points past the domain end drop out
    const double dead = std::log(40.0) / 0.1 + 5.0;
    const DiagramCurve c2 = transcritical_curve(p, {0.0, 1.0, dead});
    CHECK(c2.points.size() == 2);
}

TEST_CASE("first Hopf curve passes through (0, K_0) and stays on the zero set") {
    const ModelParams p = params_slice(2.0);
    const double K0 = 41.0 / 39.0;
    const DiagramCurve c = hopf_curve(p, 0, {0.0, K0});
    CHECK(c.kind == CurveKind::Hopf);
    CHECK(c.n == 0);
    REQUIRE(c.points.size() > 50);
    bool at_seed = false, rises = false;
    for (std::size_t k = 0; k < c.points.size(); k += 7) {
        const auto& pt = c.points[k];
        CHECK(std::abs(ell_n(p, pt[0], pt[1], 0)) < 1e-8);
        if (std::abs(pt[0]) < 1e-6 && std::abs(pt[1] - K0) < 1e-6)
            at_seed = true;
        if (pt[1] > 1.5 * K0)
            rises = true;
    }
    // the seed itself is always recorded
    for (const auto& pt : c.points)
        if (std::abs(pt[0]) < 1e-9 && std::abs(pt[1] - K0) < 1e-9)
            at_seed = true;
    CHECK(at_seed);
    CHECK(rises);

    CHECK_THROWS_AS(hopf_curve(p, 0, {3.0, 0.8}), SeedNotOnCurve);
}

TEST_CASE("higher Hopf curves are seeded from the catalog and can close up") {
    const ModelParams p = params_slice(2.0);
    const auto seed1 = hopf_curve_seed(p, 1);
    REQUIRE(seed1.has_value());
    CHECK(std::abs(ell_n(p, (*seed1)[0], (*seed1)[1], 1)) < 1e-6);

    const auto seed4 = hopf_curve_seed(p, 4);
    REQUIRE(seed4.has_value());
    const DiagramCurve c4 = hopf_curve(p, 4, *seed4);
    CHECK(c4.topology == CurveTopology::Loop);
    REQUIRE(c4.points.size() > 20);
    const auto& a = c4.points.front();
    const auto& b = c4.points.back();
    CHECK(std::hypot(a[0] - b[0], a[1] - b[1]) <
          1e-2 * std::max(1.0, std::abs(a[0])));

    // far beyond every curve there is no seed
    CHECK_FALSE(hopf_curve_seed(p, 40).has_value());
}

TEST_CASE("region classification matches the root count") {
    const ModelParams p = params_slice(2.0);
    CHECK(std::string(region_name(RegionLabel::Va)) == "V_a");
    CHECK(std::string(region_name(RegionLabel::Vb)) == "V_b");
    CHECK(std::string(region_name(RegionLabel::Vc)) == "V_c");

    CHECK(classify_region(p, 1.0, 0.02) == RegionLabel::Vc);  // K below K_c
    CHECK(classify_region(p, 31.0, 1.0) == RegionLabel::Vc);  // tau past tau_max
    CHECK(classify_region(p, 26.0, 1.0) == RegionLabel::Vb);  // restabilized
    CHECK(classify_region(p, 26.0, 2.0) == RegionLabel::Va);
    CHECK_THROWS_AS(classify_region(p, -1.0, 1.0), OutOfDomain);
    CHECK_THROWS_AS(classify_region(p, 1.0, 0.0), OutOfDomain);

    for (double tau : {5.0, 15.0, 25.0})
        for (double K : {0.5, 1.2, 2.5}) {
            const ModelParams q = with_carrying_capacity(p, K);
            const RegionLabel lab = classify_region(p, tau, K);
            if (lab == RegionLabel::Vc)
                continue;
            const int cnt = unstable_root_count(q, tau);
            CHECK_MESSAGE((lab == RegionLabel::Va) == (cnt > 0),
                          "tau=", tau, " K=", K, " count=", cnt);
        }
}

TEST_CASE("smallest positive root of the first branch on the K_0 line") {
    const ModelParams p = params_slice(2.0);
    const double ts = tau_star(p);
    CHECK(ts == doctest::Approx(24.1021036638).epsilon(1e-8));
    CHECK(std::abs(ell_n(p, ts, 41.0 / 39.0, 0)) < 1e-9);
    // requires cm well above d
    CHECK_THROWS_AS(tau_star(validate_params(1, 1, 1, 1, 0.3, 0.2)), ConditionNotMet);
}

TEST_CASE("Hopf thresholds in K at a fixed delay") {
    const ModelParams p = params_slice(2.0);
    const std::vector<double> ks = hopf_in_K(p, 26.0);
    REQUIRE(ks.size() == 10);
    const double paper[10] = {1.328,  1.54,  1.67,   1.76,   1.85,
                              1.994, 2.135, 2.3956, 2.7395, 3.996};
    const double tol[10] = {0.01, 0.01, 0.01, 0.01, 0.01,
                            0.01, 0.01, 0.001, 0.001, 0.05};
    for (int i = 0; i < 10; ++i) {
        CHECK(std::abs(ks[i] - paper[i]) <= tol[i]);
        if (i > 0)
            CHECK(ks[i] > ks[i - 1]);
    }
    CHECK(ks.front() > 41.0 / 39.0); // first threshold sits above K_0

    // short delays destabilize below K_0
    const std::vector<double> k1 = hopf_in_K(p, 1.0);
    REQUIRE(k1.size() >= 1);
    CHECK(k1.front() < 41.0 / 39.0);
    CHECK(k1.front() > 1.21 / 15.99); // above K_2

    CHECK_THROWS_AS(hopf_in_K(p, -1.0), OutOfDomain);
    CHECK_THROWS_AS(hopf_in_K(validate_params(1, 1, 1, 1, 0.05, 0.1), 1.0),
                    ConditionC0Violated);
}
