#include "hopfdde/diagram.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace hopfdde {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

/// Distance from point q to the segment [a, b].
double segment_distance(double qx, double qy, double ax, double ay, double bx,
                        double by) {
    const double ux = bx - ax, uy = by - ay;
    const double l2 = ux * ux + uy * uy;
    double t = l2 > 0.0 ? ((qx - ax) * ux + (qy - ay) * uy) / l2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double dx = qx - (ax + t * ux);
    const double dy = qy - (ay + t * uy);
    return std::hypot(dx, dy);
}

enum class TraceEnd { DomainExit, Budget, Loop };

/// Curve continuation of ell_n(tau, K) = 0 in coordinates normalized by
/// (tau_scale, K_scale) so a single arclength step suits both axes.
struct CurveTracer {
    const ModelParams& p;
    int n;
    double tau_scale;
    double K_scale;

    std::optional<double> eval(double u, double v) const {
        if (u < 0.0 || v <= 0.0)
            return std::nullopt;
        try {
            return ell_n(p, u * tau_scale, v * K_scale, n);
        } catch (const Error&) {
            return std::nullopt;
        }
    }

    bool grad(double u, double v, double f0, double& fu, double& fv) const {
        const double h = 1e-6;
        auto partial = [&](bool along_u) -> std::optional<double> {
            const auto fp = along_u ? eval(u + h, v) : eval(u, v + h);
            const auto fm = along_u ? eval(u - h, v) : eval(u, v - h);
            if (fp && fm)
                return (*fp - *fm) / (2.0 * h);
            if (fp)
                return (*fp - f0) / h;
            if (fm)
                return (f0 - *fm) / h;
            return std::nullopt;
        };
        const auto gu = partial(true);
        const auto gv = partial(false);
        if (!gu || !gv)
            return false;
        fu = *gu;
        fv = *gv;
        return true;
    }

    /// Newton along the gradient (orthogonal to the curve tangent).
    bool correct(double& u, double& v) const {
        for (int it = 0; it < 30; ++it) {
            const auto f0 = eval(u, v);
            if (!f0)
                return false;
            if (std::abs(*f0) < 1e-11)
                return true;
            double fu, fv;
            if (!grad(u, v, *f0, fu, fv))
                return false;
            const double g2 = fu * fu + fv * fv;
            if (g2 < 1e-300)
                return false;
            u -= fu * *f0 / g2;
            v -= fv * *f0 / g2;
            if (u < 0.0) {
                if (u < -1e-10)
                    return false;
                u = 0.0;
            }
            if (v <= 0.0)
                return false;
        }
        return false;
    }

    /// Unit tangent at (u, v): gradient rotated a quarter turn, oriented to
    /// keep a positive dot product with (ru, rv).
    bool tangent(double u, double v, double f0, double ru, double rv,
                 double& tu, double& tv) const {
        double fu, fv;
        if (!grad(u, v, f0, fu, fv))
            return false;
        const double g = std::hypot(fu, fv);
        if (g < 1e-300)
            return false;
        tu = -fv / g;
        tv = fu / g;
        if (tu * ru + tv * rv < 0.0) {
            tu = -tu;
            tv = -tv;
        }
        return true;
    }

    /// Trace from (u0, v0) along initial direction (tu, tv), appending
    /// normalized points to out. Loop closure is checked against the seed.
    TraceEnd trace(double u0, double v0, double tu, double tv, int budget,
                   bool check_loop, std::vector<std::array<double, 2>>& out) const {
        const double h0 = 1e-2;
        double h = h0;
        double u = u0, v = v0;
        int accepted = 0;
        while (accepted < budget) {
            double un = u + h * tu, vn = v + h * tv;
            bool ok = correct(un, vn);
            double du = 0.0, dv = 0.0, dist = 0.0;
            if (ok) {
                du = un - u;
                dv = vn - v;
                dist = std::hypot(du, dv);
                if (dist > 3.0 * h || dist < 1e-14 || du * tu + dv * tv <= 0.0)
                    ok = false;
            }
            if (!ok) {
                h *= 0.5;
                if (h < 1e-5)
                    return TraceEnd::DomainExit;
                continue;
            }
            if (check_loop && accepted >= 10 &&
                segment_distance(u0, v0, u, v, un, vn) < 1e-3) {
                out.push_back({u0, v0});
                return TraceEnd::Loop;
            }
            u = un;
            v = vn;
            out.push_back({u, v});
            ++accepted;
            if (u > 1e3 || v > 1e3)
                return TraceEnd::Budget; // range cap: curve continues beyond
            const auto f0 = eval(u, v);
            double ntu, ntv;
            if (f0 && tangent(u, v, *f0, du, dv, ntu, ntv)) {
                tu = ntu;
                tv = ntv;
            } else {
                tu = du / dist;
                tv = dv / dist;
            }
            h = std::min(h0, h * 2.0);
        }
        return TraceEnd::Budget;
    }
};

} // namespace

const char* region_name(RegionLabel l) {
    switch (l) {
    case RegionLabel::Va:
        return "V_a";
    case RegionLabel::Vb:
        return "V_b";
    case RegionLabel::Vc:
        return "V_c";
    }
    return "?";
}

double ell_n(const ModelParams& p, double tau, double K, int n) {
    if (!(K > 0.0))
        throw OutOfDomain("ell_n: carrying capacity must be positive");
    const ModelParams q = with_carrying_capacity(p, K);
    return tau * omega(q, tau) - theta_n(q, tau, n);
}

DiagramCurve transcritical_curve(const ModelParams& p,
                                 const std::vector<double>& tau_grid) {
    if (!p.c0_feasible)
        throw ConditionC0Violated("transcritical curve requires cm > d");
    DiagramCurve c;
    c.kind = CurveKind::Transcritical;
    c.n = -1;
    c.topology = CurveTopology::Line;
    c.points.reserve(tau_grid.size());
    for (double tau : tau_grid) {
        if (tau < 0.0)
            throw OutOfDomain("transcritical curve: negative delay in grid");
        const double beta = beta_of(p, tau);
        if (beta <= p.d)
            continue; // K_1 undefined past tau = ln(cm/d)/d
        c.points.push_back({tau, p.a * p.d / (beta - p.d)});
    }
    return c;
}

DiagramCurve hopf_curve(const ModelParams& p, int n, std::array<double, 2> seed,
                        int max_steps) {
    if (n < 0)
        throw OutOfDomain("hopf_curve: branch index must be >= 0");
    if (max_steps < 20)
        throw ConfigError("hopf_curve: max_steps too small");
    const Thresholds th = thresholds(p, 0.0);
    std::optional<double> tb;
    try {
        tb = thresholds(with_carrying_capacity(p, seed[1]), 0.0).tau_bar;
    } catch (const Error&) {
    }
    if (!tb)
        throw SeedNotOnCurve("hopf_curve: seed outside the crossing domain");
    CurveTracer tr{p, n, *tb, th.K_0};

    double u = seed[0] / tr.tau_scale;
    double v = seed[1] / tr.K_scale;
    {
        const auto f0 = tr.eval(u, v);
        if (!f0)
            throw SeedNotOnCurve("hopf_curve: ell_n undefined at the seed");
        if (std::abs(*f0) > 1e-6)
            throw SeedNotOnCurve("hopf_curve: |ell_n| > 1e-6 at the seed");
        if (!tr.correct(u, v))
            throw SeedNotOnCurve("hopf_curve: seed correction failed");
    }

    DiagramCurve c;
    c.kind = CurveKind::Hopf;
    c.n = n;

    double tu, tv;
    {
        const auto f0 = tr.eval(u, v);
        if (!f0 || !tr.tangent(u, v, *f0, 1.0, 0.0, tu, tv))
            throw SeedNotOnCurve("hopf_curve: no tangent at the seed");
        if (std::abs(tu) <= 1e-8 && tv < 0.0) {
            tu = -tu;
            tv = -tv;
        }
    }

    std::vector<std::array<double, 2>> fwd, bwd;
    const TraceEnd fe = tr.trace(u, v, tu, tv, max_steps, true, fwd);
    if (fe == TraceEnd::Loop) {
        c.topology = CurveTopology::Loop;
        c.points.push_back({u * tr.tau_scale, v * tr.K_scale});
        for (const auto& q : fwd)
            c.points.push_back({q[0] * tr.tau_scale, q[1] * tr.K_scale});
        return c;
    }
    const int remaining = max_steps - static_cast<int>(fwd.size());
    TraceEnd be = TraceEnd::DomainExit;
    if (remaining > 0)
        be = tr.trace(u, v, -tu, -tv, remaining, false, bwd);
    c.topology = (fe == TraceEnd::DomainExit && be == TraceEnd::DomainExit)
                     ? CurveTopology::Line
                     : CurveTopology::Unknown;
    c.points.reserve(fwd.size() + bwd.size() + 1);
    for (auto it = bwd.rbegin(); it != bwd.rend(); ++it)
        c.points.push_back({(*it)[0] * tr.tau_scale, (*it)[1] * tr.K_scale});
    c.points.push_back({u * tr.tau_scale, v * tr.K_scale});
    for (const auto& q : fwd)
        c.points.push_back({q[0] * tr.tau_scale, q[1] * tr.K_scale});
    return c;
}

std::optional<std::array<double, 2>> hopf_curve_seed(const ModelParams& p, int n,
                                                     double K_hi) {
    if (n < 0)
        throw OutOfDomain("hopf_curve_seed: branch index must be >= 0");
    if (!p.c0_feasible)
        throw ConditionC0Violated("hopf_curve_seed requires cm > d");
    const Thresholds th = thresholds(p, 0.0);
    if (K_hi <= 0.0)
        K_hi = 8.0 * th.K_0;
    const double K_lo = th.K_2 * 1.02;
    if (K_hi <= K_lo)
        return std::nullopt;
    const int m = 16;
    for (int j = 0; j < m; ++j) { // descending: larger K carries more branches
        const double t = static_cast<double>(j) / (m - 1);
        const double K = K_hi * std::pow(K_lo / K_hi, t);
        try {
            const HopfCatalog cat =
                hopf_points(with_carrying_capacity(p, K), 2048);
            if (static_cast<int>(cat.branches.size()) > n &&
                !cat.branches[n].empty())
                return std::array<double, 2>{cat.branches[n][0].tau, K};
        } catch (const Error&) {
            continue;
        }
    }
    return std::nullopt;
}

RegionLabel classify_region(const ModelParams& p, double tau, double K) {
    if (tau < 0.0)
        throw OutOfDomain("classify_region: negative delay");
    if (!(K > 0.0))
        throw OutOfDomain("classify_region: K must be positive");
    if (!p.c0_feasible)
        return RegionLabel::Vc; // predator cannot persist for any delay
    const Thresholds th = thresholds(with_carrying_capacity(p, K), tau);
    const double tau_mx = th.tau_max ? *th.tau_max : 0.0;
    if (tau >= tau_mx)
        return RegionLabel::Vc;
    try {
        return ell_n(p, tau, K, 0) > 0.0 ? RegionLabel::Va : RegionLabel::Vb;
    } catch (const Error&) {
        return RegionLabel::Vb; // no crossing frequency: no stability switch
    }
}

double tau_star(const ModelParams& p) {
    if (!p.c0_feasible || p.c * p.m <= (1.0 + std::sqrt(2.0)) * p.d)
        throw ConditionNotMet("tau_star requires cm > (1 + sqrt 2) d");
    const double K0 = thresholds(p, 0.0).K_0;
    const auto tb = thresholds(with_carrying_capacity(p, K0), 0.0).tau_bar;
    if (!tb)
        throw NoConvergence("tau_star: empty crossing domain at K_0");
    auto g = [&](double tau) { return ell_n(p, tau, K0, 0); };
    const int N = 4000;
    double prev_tau = 0.0;
    double prev_val = 0.0; // ell_0(0, K_0) = 0 by construction
    bool seen_positive = false;
    for (int j = 1; j <= N; ++j) {
        const double tau = *tb * (1.0 - 1e-12) * j / N;
        double val;
        try {
            val = g(tau);
        } catch (const Error&) {
            break;
        }
        if (seen_positive && prev_val > 0.0 && val <= 0.0) {
            double lo = prev_tau, hi = tau;
            for (int it = 0; it < 120; ++it) {
                const double mid = 0.5 * (lo + hi);
                (g(mid) > 0.0 ? lo : hi) = mid;
            }
            return 0.5 * (lo + hi);
        }
        if (val > 0.0)
            seen_positive = true;
        prev_tau = tau;
        prev_val = val;
    }
    throw NoConvergence("tau_star: no sign change of ell_0 on (0, tau_bar)");
}

std::vector<double> hopf_in_K(const ModelParams& p, double tau, double K_hi) {
    if (tau < 0.0)
        throw OutOfDomain("hopf_in_K: negative delay");
    if (!p.c0_feasible)
        throw ConditionC0Violated("hopf_in_K requires cm > d");
    const Thresholds th = thresholds(p, 0.0);
    if (K_hi <= 0.0)
        K_hi = 8.0 * th.K_0;
    const double K_lo = th.K_2 * (1.0 + 1e-9);
    if (K_hi <= K_lo)
        return {};

    const int N = 4096;
    std::vector<double> Ks(N), l0(N);
    double l_max = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < N; ++j) {
        Ks[j] = K_lo + (K_hi - K_lo) * j / (N - 1.0);
        try {
            l0[j] = ell_n(p, tau, Ks[j], 0);
            l_max = std::max(l_max, l0[j]);
        } catch (const Error&) {
            l0[j] = kNan;
        }
    }
    if (!(l_max > -std::numeric_limits<double>::infinity()))
        return {};

    auto verified = [&](double K) -> bool {
        try {
            const ModelParams q = with_carrying_capacity(p, K);
            const double w = omega(q, tau);
            const auto lam = char_root_refine(q, tau, {0.0, w});
            return std::abs(lam.real()) < 1e-8 &&
                   std::abs(lam.imag() - w) < 1e-3 * std::max(1.0, w);
        } catch (const Error&) {
            return false;
        }
    };

    std::vector<double> roots;
    const int n_hi = l_max > 0.0 ? static_cast<int>(std::floor(l_max / (2.0 * kPi))) : -1;
    for (int n = 0; n <= n_hi; ++n) {
        const double off = 2.0 * kPi * n;
        for (int j = 1; j < N; ++j) {
            const double va = l0[j - 1] - off, vb = l0[j] - off;
            if (std::isnan(va) || std::isnan(vb))
                continue;
            if (!(va <= 0.0 && vb > 0.0) && !(va > 0.0 && vb <= 0.0))
                continue;
            double lo = Ks[j - 1], hi = Ks[j];
            double flo = va;
            for (int it = 0; it < 120; ++it) {
                const double mid = 0.5 * (lo + hi);
                double fm;
                try {
                    fm = ell_n(p, tau, mid, n);
                } catch (const Error&) {
                    break;
                }
                if ((fm <= 0.0) == (flo <= 0.0)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            const double K_root = 0.5 * (lo + hi);
            if (verified(K_root))
                roots.push_back(K_root);
        }
    }
    std::sort(roots.begin(), roots.end());
    roots.erase(std::unique(roots.begin(), roots.end(),
                            [](double x, double y) {
                                return std::abs(x - y) <=
                                       1e-9 * std::max(1.0, std::abs(x));
                            }),
                roots.end());
    return roots;
}

} // namespace hopfdde
