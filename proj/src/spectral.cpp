#include "hopfdde/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hopfdde {

namespace {

constexpr double kPi = 3.14159265358979323846;

double tau_max_or_throw(const ModelParams& p) {
    const double arg = p.K * p.c * p.m / (p.a * p.d + p.d * p.K);
    if (arg <= 1.0)
        throw OutOfDomain("A(tau) is nonpositive for all tau (K <= K_c)");
    return std::log(arg) / p.d;
}

double tau_bar_or_throw(const ModelParams& p) {
    const Thresholds t = thresholds(p, 0.0);
    if (!(p.K > t.K_2) || !t.tau_bar)
        throw OutOfDomain("no purely imaginary root possible: K <= K_2");
    return *t.tau_bar;
}

} // namespace

void hla(const ModelParams& p, double tau, double& H, double& L, double& A) {
    if (!p.c0_feasible)
        throw ConditionC0Violated("hla requires c*m > d");
    if (tau < 0.0 || tau >= tau_max_or_throw(p))
        throw OutOfDomain("hla requires 0 <= tau < tau_max");
    const double beta = beta_of(p, tau);
    const double num = p.K * beta - p.K * p.d - p.d * p.a;
    H = p.r * p.d * (p.K * (beta - p.d) - p.a * (beta + p.d)) /
        (p.K * beta * (beta - p.d));
    A = p.r * p.d * num / (p.K * beta);
    L = p.d * H + A;
}

double omega(const ModelParams& p, double tau) {
    const double tau_bar = tau_bar_or_throw(p);
    if (tau < 0.0 || tau > tau_bar * (1.0 + 1e-14))
        throw OutOfDomain("omega requires 0 <= tau <= tau_bar");
    double H, L, A;
    hla(p, std::min(tau, tau_bar), H, L, A);
    const double disc = H * H * H * H - 4.0 * p.d * p.d * H * H + 4.0 * L * L;
    const double z = (std::sqrt(std::max(disc, 0.0)) - H * H) / 2.0;
    return std::sqrt(std::max(z, 0.0));
}

SpectralProfile spectral_profile(const ModelParams& p, double tau) {
    SpectralProfile sp;
    sp.tau = tau;
    hla(p, tau, sp.H, sp.L, sp.A);
    const Thresholds t = thresholds(p, 0.0);
    if (p.K > t.K_2 && t.tau_bar && tau <= *t.tau_bar * (1.0 + 1e-14)) {
        const double w = omega(p, tau);
        sp.w = w;
        const double den = sp.L * sp.L + p.d * p.d * w * w;
        sp.sin_tw = (p.d * w * sp.L - sp.H * w * sp.L - p.d * p.d * w * sp.H -
                     p.d * w * w * w) / den;
        sp.cos_tw = (sp.L * p.d * sp.H + sp.L * w * w + p.d * p.d * w * w -
                     p.d * sp.H * w * w) / den;
    }
    return sp;
}

double theta_n(const ModelParams& p, double tau, int n) {
    const SpectralProfile sp = spectral_profile(p, tau);
    if (!sp.w)
        throw OutOfDomain("theta_n requires the omega domain (K > K_2, tau <= tau_bar)");
    double c = *sp.cos_tw;
    if (c > 1.0 || c < -1.0) {
        if (c > 1.0 + 1e-12 || c < -1.0 - 1e-12)
            throw OutOfDomain("cos(tau w) expression outside [-1,1] beyond clamp tolerance");
        c = std::clamp(c, -1.0, 1.0);
    }
    const double phi = std::acos(c);
    const double sgn = (*sp.sin_tw < 0.0) ? -1.0 : 1.0;
    return sgn * phi + 2.0 * kPi * n;
}

double s_n(const ModelParams& p, double tau, int n) {
    const double w = omega(p, tau);
    if (w < 1e-13)
        return -std::numeric_limits<double>::infinity();
    return tau - theta_n(p, tau, n) / w;
}

std::vector<HopfPoint> HopfCatalog::all() const {
    std::vector<HopfPoint> out;
    for (const auto& b : branches)
        out.insert(out.end(), b.begin(), b.end());
    std::sort(out.begin(), out.end(), [](const HopfPoint& a, const HopfPoint& b) {
        return a.n != b.n ? a.n < b.n : a.tau < b.tau;
    });
    return out;
}

namespace {

/// Refine a bracketed root of S_n by bisection followed by secant polishing.
double refine_root(const ModelParams& p, int n, double lo, double hi) {
    double flo = s_n(p, lo, n);
    for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = s_n(p, mid, n);
        if (!std::isfinite(fm))
            { hi = mid; continue; }
        if ((fm > 0.0) == (flo > 0.0)) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    // Secant polish from the bisection estimate.
    double x0 = lo, x1 = 0.5 * (lo + hi);
    double f0 = s_n(p, x0, n), f1 = s_n(p, x1, n);
    for (int it = 0; it < 8; ++it) {
        if (!std::isfinite(f0) || !std::isfinite(f1) || f1 == f0)
            break;
        const double x2 = x1 - f1 * (x1 - x0) / (f1 - f0);
        if (!std::isfinite(x2) || x2 <= 0.0)
            break;
        x0 = x1; f0 = f1;
        x1 = x2; f1 = s_n(p, x1, n);
        if (std::abs(f1) < 1e-13)
            break;
    }
    return std::abs(f1) <= std::abs(f0) ? x1 : x0;
}

} // namespace

HopfCatalog hopf_points(const ModelParams& p, int grid) {
    const Thresholds t = thresholds(p, 0.0);
    if (!(p.K > t.K_2) || !t.tau_bar)
        throw NoHexicDomain("hopf_points requires K > K_2");
    if (grid < 16)
        throw ConfigError("hopf grid too small");
    const double tau_bar = *t.tau_bar;

    HopfCatalog cat;
    cat.tau_bar = tau_bar;

    // One pass over the grid caches w and theta_0; theta_n = theta_0 + 2 pi n.
    std::vector<double> taus(grid), ws(grid), th0(grid);
    for (int j = 0; j < grid; ++j) {
        const double tau = tau_bar * (j + 0.5) / (grid + 1);
        taus[j] = tau;
        ws[j] = omega(p, tau);
        th0[j] = theta_n(p, tau, 0);
    }

    // M = max tau*w with parabolic refinement; zeta = min theta_0 (K < K_0 only).
    int jM = 0;
    double M = -1.0;
    for (int j = 0; j < grid; ++j) {
        const double v = taus[j] * ws[j];
        if (v > M) { M = v; jM = j; }
    }
    if (jM > 0 && jM < grid - 1) {
        const double f0 = taus[jM - 1] * ws[jM - 1], f1 = M, f2 = taus[jM + 1] * ws[jM + 1];
        const double denom = f0 - 2.0 * f1 + f2;
        if (denom < 0.0) {
            const double dj = 0.5 * (f0 - f2) / denom;
            const double tau_pk = taus[jM] + dj * (taus[1] - taus[0]);
            if (tau_pk > 0.0 && tau_pk < tau_bar)
                M = std::max(M, tau_pk * omega(p, tau_pk));
        }
    }
    cat.M = M;
    cat.N_bound = M > kPi ? static_cast<int>(std::floor((M / kPi - 1.0) / 2.0)) : -1;

    if (p.K < t.K_0) {
        double zeta = std::numeric_limits<double>::infinity();
        for (int j = 0; j < grid; ++j)
            zeta = std::min(zeta, th0[j]);
        cat.zeta = zeta;
    }

    const double fd_h = 1e-6 * tau_bar;
    auto g = [&](double tau, int n) { return tau * omega(p, tau) - theta_n(p, tau, n); };

    const int n_cap = std::max(cat.N_bound + 2, 2) + 32;
    for (int n = 0;; ++n) {
        std::vector<HopfPoint> roots;
        double prev_s = std::numeric_limits<double>::quiet_NaN();
        double prev_tau = 0.0;
        for (int j = 0; j < grid; ++j) {
            const double th = th0[j] + 2.0 * kPi * n;
            const double s = ws[j] > 1e-13
                ? taus[j] - th / ws[j]
                : -std::numeric_limits<double>::infinity();
            if (std::isfinite(prev_s) && std::isfinite(s) && (prev_s > 0.0) != (s > 0.0)) {
                const double tau_r = refine_root(p, n, prev_tau, taus[j]);
                const double w = omega(p, tau_r);
                HopfPoint hp;
                hp.n = n;
                hp.tau = tau_r;
                hp.w = w;
                hp.period = 2.0 * kPi / w;
                hp.theta = tau_r * w;
                const double lo = std::max(tau_r - fd_h, 1e-12);
                const double hi = std::min(tau_r + fd_h, tau_bar * (1.0 - 1e-12));
                const double slope = (g(hi, n) - g(lo, n)) / (hi - lo);
                hp.delta = std::abs(slope) < 1e-7 ? 0 : (slope > 0.0 ? 1 : -1);
                hp.gamma1 = -hp.delta;
                roots.push_back(hp);
            }
            prev_s = s;
            prev_tau = taus[j];
        }
        for (size_t i = 0; i < roots.size(); ++i)
            roots[i].i = static_cast<int>(i) + 1;
        cat.branches.push_back(roots);
        cat.chi.push_back(static_cast<int>(roots.size()));

        const int done = static_cast<int>(cat.chi.size()) - 1; // == n
        const bool past_bound = done >= cat.N_bound + 2;
        const bool two_empty = done >= 1 && cat.chi[done] == 0 && cat.chi[done - 1] == 0;
        if ((past_bound && two_empty) || done >= n_cap)
            break;
    }
    return cat;
}

std::complex<double> char_poly(const ModelParams& p, double tau, std::complex<double> lambda) {
    double H, L, A;
    hla(p, tau, H, L, A);
    (void)A;
    return lambda * lambda + (p.d - H) * lambda +
           std::exp(-lambda * tau) * (-p.d * lambda + L) - p.d * H;
}

std::complex<double> char_root_refine(const ModelParams& p, double tau,
                                      std::complex<double> seed) {
    double H, L, A;
    hla(p, tau, H, L, A);
    (void)A;
    std::complex<double> lam = seed;
    for (int it = 0; it < 100; ++it) {
        const std::complex<double> e = std::exp(-lam * tau);
        const std::complex<double> P =
            lam * lam + (p.d - H) * lam + e * (-p.d * lam + L) - p.d * H;
        if (std::abs(P) < 1e-10)
            return lam;
        const std::complex<double> dP =
            2.0 * lam + (p.d - H) - e * (p.d + tau * (-p.d * lam + L));
        if (std::abs(dP) < 1e-300)
            break;
        std::complex<double> step = P / dP;
        // Keep steps sane for far-off seeds.
        const double cap = 10.0 * (1.0 + std::abs(lam));
        if (std::abs(step) > cap)
            step *= cap / std::abs(step);
        lam -= step;
        if (!std::isfinite(lam.real()) || !std::isfinite(lam.imag()))
            break;
    }
    if (std::abs(char_poly(p, tau, lam)) < 1e-10)
        return lam;
    throw NoConvergence("characteristic-root Newton did not converge");
}

namespace {

struct ContourWalker {
    const ModelParams& p;
    double tau;
    double total = 0.0; ///< accumulated argument change

    std::complex<double> eval(std::complex<double> z) const {
        return char_poly(p, tau, z);
    }

    void walk(std::complex<double> a, std::complex<double> b,
              std::complex<double> fa, std::complex<double> fb, int depth) {
        if (std::abs(fa) < 1e-280 || std::abs(fb) < 1e-280)
            throw ContourTooSmall("characteristic value vanishes on the contour");
        const double dphi = std::arg(fb / fa);
        if (std::abs(dphi) < kPi / 2.0 && depth > 0) {
            total += dphi;
            return;
        }
        if (depth > 52)
            throw ContourTooSmall("contour winding did not stabilize under subdivision");
        const std::complex<double> mid = 0.5 * (a + b);
        const std::complex<double> fm = eval(mid);
        walk(a, mid, fa, fm, depth + 1);
        walk(mid, b, fm, fb, depth + 1);
    }
};

int count_with_samples(const ModelParams& p, double tau, double lo_re, double hi_re,
                       double om, int samples_per_edge) {
    ContourWalker w{p, tau};
    const std::complex<double> corners[5] = {
        {lo_re, -om}, {hi_re, -om}, {hi_re, om}, {lo_re, om}, {lo_re, -om}};
    for (int e = 0; e < 4; ++e) {
        std::complex<double> prev = corners[e];
        std::complex<double> fprev = w.eval(prev);
        for (int s = 1; s <= samples_per_edge; ++s) {
            const double f = static_cast<double>(s) / samples_per_edge;
            const std::complex<double> cur = corners[e] + f * (corners[e + 1] - corners[e]);
            const std::complex<double> fcur = w.eval(cur);
            w.walk(prev, cur, fprev, fcur, 0);
            prev = cur;
            fprev = fcur;
        }
    }
    const double winding = w.total / (2.0 * kPi);
    const long rounded = std::lround(winding);
    if (std::abs(winding - static_cast<double>(rounded)) > 0.05)
        throw ContourTooSmall("non-integer winding number");
    return static_cast<int>(rounded);
}

} // namespace

int unstable_root_count(const ModelParams& p, double tau) {
    const double tmax = tau_max_or_throw(p);
    if (!(tau > 0.0) || !(tau < tmax))
        throw OutOfDomain("unstable_root_count requires tau in (0, tau_max)");
    double H, L, A;
    hla(p, tau, H, L, A);
    (void)A;
    // All roots with Re >= 0 satisfy |lambda| <= (d + |d-H|) + sqrt(|L| + d|H|).
    const double R = (p.d + std::abs(p.d - H)) + std::sqrt(std::abs(L) + p.d * std::abs(H)) + 1.0;
    double w_max = 0.0;
    const Thresholds t = thresholds(p, 0.0);
    if (p.K > t.K_2 && t.tau_bar) {
        for (int j = 1; j < 64; ++j)
            w_max = std::max(w_max, omega(p, *t.tau_bar * j / 64.0));
    }
    const double lam_cap = std::max(10.0 * std::max(p.d, p.r), R);
    const double om = std::max(4.0 * w_max, R);
    const int n1 = count_with_samples(p, tau, 1e-6, lam_cap, om, 96);
    const int n2 = count_with_samples(p, tau, 1e-6, lam_cap, om, 192);
    if (n1 != n2)
        throw ContourTooSmall("winding count changed under refinement");
    if (n1 < 0)
        throw ContourTooSmall("negative winding count");
    return n1;
}

} // namespace hopfdde
