#include "hopfdde/integrate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hopfdde {

Vec2 system_rhs(const ModelParams& p, double tau, Vec2 cur, Vec2 del) {
    const double beta = beta_of(p, tau);
    Vec2 f;
    f.x = p.r * cur.x * (1.0 - cur.x / p.K) - p.m * cur.x * cur.y / (p.a + cur.x);
    f.y = -p.d * cur.y + beta * del.x * del.y / (p.a + del.x);
    return f;
}

// ---------------------------------------------------------------------------
// History

History History::constant(Vec2 v) {
    History h;
    h.constant_ = true;
    h.cval_ = v;
    return h;
}

History History::cubic(double t0, double dt, std::vector<Vec2> v, std::vector<Vec2> f) {
    if (v.size() < 2 || v.size() != f.size() || !(dt > 0.0))
        throw ConfigError("history needs a uniform grid with at least two nodes");
    History h;
    h.constant_ = false;
    h.t0_ = t0;
    h.dt_ = dt;
    h.v_ = std::move(v);
    h.f_ = std::move(f);
    return h;
}

History History::samples(double t0, double dt, std::vector<Vec2> v) {
    if (v.size() < 2 || !(dt > 0.0))
        throw ConfigError("history needs a uniform grid with at least two nodes");
    const std::size_t n = v.size();
    std::vector<Vec2> f(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (i == 0)
            f[i] = (1.0 / dt) * (v[1] - v[0]);
        else if (i == n - 1)
            f[i] = (1.0 / dt) * (v[n - 1] - v[n - 2]);
        else
            f[i] = (0.5 / dt) * (v[i + 1] - v[i - 1]);
    }
    return cubic(t0, dt, std::move(v), std::move(f));
}

namespace {

Vec2 hermite_eval(const Vec2& v0, const Vec2& f0, const Vec2& v1, const Vec2& f1,
                  double dt, double th) {
    const double th2 = th * th, th3 = th2 * th;
    const double h00 = 1.0 - 3.0 * th2 + 2.0 * th3;
    const double h10 = th - 2.0 * th2 + th3;
    const double h01 = 3.0 * th2 - 2.0 * th3;
    const double h11 = th3 - th2;
    return h00 * v0 + (h10 * dt) * f0 + h01 * v1 + (h11 * dt) * f1;
}

Vec2 hermite_deriv(const Vec2& v0, const Vec2& f0, const Vec2& v1, const Vec2& f1,
                   double dt, double th) {
    const double th2 = th * th;
    const double d00 = (-6.0 * th + 6.0 * th2) / dt;
    const double d10 = 1.0 - 4.0 * th + 3.0 * th2;
    const double d01 = (6.0 * th - 6.0 * th2) / dt;
    const double d11 = 3.0 * th2 - 2.0 * th;
    return d00 * v0 + d10 * f0 + d01 * v1 + d11 * f1;
}

} // namespace

Vec2 History::eval(double t) const {
    if (constant_)
        return cval_;
    const double lo = t0_ - dt_ * (static_cast<double>(v_.size()) - 1.0);
    const double tc = std::clamp(t, lo, t0_);
    double u = (tc - lo) / dt_;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, static_cast<int>(v_.size()) - 2);
    return hermite_eval(v_[i], f_[i], v_[i + 1], f_[i + 1], dt_, u - i);
}

double History::span() const {
    return constant_ ? std::numeric_limits<double>::infinity()
                     : dt_ * (static_cast<double>(v_.size()) - 1.0);
}

Vec2 History::back() const { return constant_ ? cval_ : v_.back(); }

double History::max_x() const {
    if (constant_)
        return cval_.x;
    double m = 0.0;
    for (const auto& s : v_)
        m = std::max(m, s.x);
    return m;
}

double History::max_y() const {
    if (constant_)
        return cval_.y;
    double m = 0.0;
    for (const auto& s : v_)
        m = std::max(m, s.y);
    return m;
}

// ---------------------------------------------------------------------------
// Trajectory

Vec2 Trajectory::eval(double t) const {
    const double u = (t - t0) / dt;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, static_cast<int>(v.size()) - 2);
    return hermite_eval(v[i], f[i], v[i + 1], f[i + 1], dt, u - i);
}

Vec2 Trajectory::deriv(double t) const {
    const double u = (t - t0) / dt;
    int i = static_cast<int>(std::floor(u));
    i = std::clamp(i, 0, static_cast<int>(v.size()) - 2);
    return hermite_deriv(v[i], f[i], v[i + 1], f[i + 1], dt, u - i);
}

History Trajectory::tail_history(double span) const {
    const int m = std::min(static_cast<int>(std::ceil(span / dt - 1e-12)) + 1,
                           static_cast<int>(v.size()) - 1);
    if (m < 1)
        throw OutOfWindow("trajectory too short for the requested history span");
    const std::size_t j0 = v.size() - 1 - static_cast<std::size_t>(m);
    std::vector<Vec2> hv(v.begin() + j0, v.end());
    std::vector<Vec2> hf(f.begin() + j0, f.end());
    return History::cubic(t_end(), dt, std::move(hv), std::move(hf));
}

// ---------------------------------------------------------------------------
// Integration

namespace {

double predator_cap(const ModelParams& p, double tau, const History& h) {
    const double beta = beta_of(p, tau);
    const double logistic_peak = p.K * (p.r + p.d) * (p.r + p.d) / (4.0 * p.r);
    const double from_dynamics = (beta / p.m) * logistic_peak / p.d;
    // on [0, tau] the delayed gain is frozen at the initial data, so y can
    // climb to gain_peak/d before the energy bound applies from t = tau on
    const double gain_peak = beta * h.max_x() * h.max_y() / (p.a + h.max_x());
    const double first_interval = std::max(h.max_y(), gain_peak / p.d);
    const double from_history = (beta / p.m) * h.max_x() + first_interval;
    return 1.01 * std::max(from_dynamics, from_history) + 1e-12;
}

} // namespace

double default_dt(const ModelParams& p, double tau, bool scaled) {
    validate_params(p.r, p.K, p.m, p.a, p.c, p.d);
    const double beta = beta_of(p, tau);
    const double y_ref = (beta / p.m) * p.K * (p.r + p.d) * (p.r + p.d) / (4.0 * p.r * p.d);
    double rate = p.r + p.d + p.m * y_ref / p.a;
    if (scaled)
        rate *= tau;
    const double base = scaled ? (1.0 / 400.0) : (tau > 0.0 ? tau / 200.0 : 0.02);
    return std::min(base, 1.0 / rate);
}

namespace {

Trajectory integrate_impl(const ModelParams& p, double tau, const History& h,
                          double t_end, const IntegrateOptions& opt, bool scaled) {
    validate_params(p.r, p.K, p.m, p.a, p.c, p.d);
    if (tau < 0.0)
        throw OutOfDomain("delay must be nonnegative");
    if (scaled && !(tau > 0.0))
        throw OutOfDomain("the unit-delay form requires tau > 0");
    if (!(t_end > 0.0))
        throw StepSizeInvalid("t_end must be positive");

    const double delay = scaled ? 1.0 : tau;
    const double mult = scaled ? tau : 1.0;

    double dt = opt.dt > 0.0 ? opt.dt : default_dt(p, tau, scaled);
    long nsub = 0;
    if (delay > 0.0) {
        nsub = static_cast<long>(std::ceil(delay / dt - 1e-12));
        if (nsub < 20)
            throw StepSizeInvalid("dt must be at most one twentieth of the delay");
        dt = delay / static_cast<double>(nsub);
    }
    const long nsteps = static_cast<long>(std::ceil(t_end / dt - 1e-9));
    if (nsteps < 1)
        throw StepSizeInvalid("t_end shorter than one step");
    if (h.back().x <= 0.0 || h.back().y < 0.0)
        throw PositivityViolated("initial state must have x > 0, y >= 0");

    const double x_cap = 1.001 * std::max(p.K, h.max_x());
    const double y_cap = predator_cap(p, tau, h);

    Trajectory traj;
    traj.t0 = 0.0;
    traj.dt = dt;
    traj.v.reserve(nsteps + 1);
    traj.f.reserve(nsteps + 1);
    traj.v.push_back(h.back());

    auto lookup = [&](double t) -> Vec2 {
        if (t <= 0.0)
            return h.eval(t);
        const double u = t / dt;
        const long i = std::lround(u);
        if (std::abs(u - static_cast<double>(i)) < 1e-9 &&
            i >= 0 && i < static_cast<long>(traj.v.size()))
            return traj.v[static_cast<std::size_t>(i)];
        const long j = static_cast<long>(std::floor(u));
        return hermite_eval(traj.v[j], traj.f[j], traj.v[j + 1], traj.f[j + 1], dt,
                            u - static_cast<double>(j));
    };
    auto frhs = [&](Vec2 cur, Vec2 del) { return mult * system_rhs(p, tau, cur, del); };

    traj.f.push_back(delay > 0.0 ? frhs(traj.v[0], h.eval(-delay))
                                 : frhs(traj.v[0], traj.v[0]));

    for (long n = 0; n < nsteps; ++n) {
        const double t = static_cast<double>(n) * dt;
        const Vec2& u0 = traj.v.back();
        Vec2 k1, k2, k3, k4;
        if (delay > 0.0) {
            const Vec2 dmid = lookup(t + 0.5 * dt - delay);
            k1 = traj.f.back(); // rhs at the node, already computed
            k2 = frhs(u0 + (0.5 * dt) * k1, dmid);
            k3 = frhs(u0 + (0.5 * dt) * k2, dmid);
            k4 = frhs(u0 + dt * k3, lookup(t + dt - delay));
        } else {
            Vec2 s;
            k1 = traj.f.back();
            s = u0 + (0.5 * dt) * k1;
            k2 = frhs(s, s);
            s = u0 + (0.5 * dt) * k2;
            k3 = frhs(s, s);
            s = u0 + dt * k3;
            k4 = frhs(s, s);
        }
        const Vec2 next = u0 + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!(next.x > 0.0) || next.y < 0.0 || !std::isfinite(next.x) || !std::isfinite(next.y))
            throw PositivityViolated("state left the positive cone (reduce dt)");
        if (opt.enforce_bounds && (next.x > x_cap || next.y > y_cap))
            throw PositivityViolated("state exceeded its a-priori bound (reduce dt)");
        traj.v.push_back(next);
        const double tn = static_cast<double>(n + 1) * dt;
        traj.f.push_back(delay > 0.0 ? frhs(next, lookup(tn - delay)) : frhs(next, next));
    }
    return traj;
}

} // namespace

Trajectory integrate(const ModelParams& p, double tau, const History& history,
                     double t_end, const IntegrateOptions& opt) {
    return integrate_impl(p, tau, history, t_end, opt, false);
}

Trajectory integrate_scaled(const ModelParams& p, double tau, const History& history,
                            double t_end, const IntegrateOptions& opt) {
    return integrate_impl(p, tau, history, t_end, opt, true);
}

// ---------------------------------------------------------------------------
// Attractor detection and orbit extraction

namespace {

/// Upward crossings of x = s in [t_from, t_end], refined on the dense output.
std::vector<double> upward_crossings(const Trajectory& traj, double s, double t_from) {
    std::vector<double> out;
    const std::size_t n = traj.v.size();
    std::size_t i0 = 0;
    if (t_from > traj.t0)
        i0 = static_cast<std::size_t>((t_from - traj.t0) / traj.dt);
    for (std::size_t i = i0; i + 1 < n; ++i) {
        const double a = traj.v[i].x - s;
        const double b = traj.v[i + 1].x - s;
        if (!(a <= 0.0 && b > 0.0))
            continue;
        double lo = traj.t0 + traj.dt * static_cast<double>(i);
        double hi = lo + traj.dt;
        for (int it = 0; it < 80; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (traj.eval(mid).x - s <= 0.0)
                lo = mid;
            else
                hi = mid;
        }
        const double tc = 0.5 * (lo + hi);
        if (traj.deriv(tc).x > 0.0)
            out.push_back(tc);
    }
    return out;
}

double rel_dispersion(const std::vector<double>& vals) {
    const auto [mn, mx] = std::minmax_element(vals.begin(), vals.end());
    const double mean = std::accumulate(vals.begin(), vals.end(), 0.0) /
                        static_cast<double>(vals.size());
    return (*mx - *mn) / std::max(std::abs(mean), 1e-300);
}

} // namespace

AttractorInfo detect_attractor(const ModelParams& p, double tau, const Trajectory& traj,
                               double tail_fraction) {
    AttractorInfo info;
    const double t_end = traj.t_end();
    const double t_from = t_end - tail_fraction * (t_end - traj.t0);
    const std::size_t i0 =
        static_cast<std::size_t>(std::max(0.0, (t_from - traj.t0) / traj.dt));

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (std::size_t i = i0; i < traj.v.size(); ++i) {
        xmin = std::min(xmin, traj.v[i].x);
        xmax = std::max(xmax, traj.v[i].x);
        ymin = std::min(ymin, traj.v[i].y);
        ymax = std::max(ymax, traj.v[i].y);
    }
    info.amp = std::max(xmax - xmin, ymax - ymin);
    const double scale = std::max({p.K, std::abs(xmax), std::abs(ymax), 1e-30});

    if (info.amp < 1e-7 * scale) {
        info.kind = AttractorKind::Equilibrium;
        const Vec2 tail{0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
        double best = 1e300;
        for (const auto& eq : equilibria(p, tau)) {
            const double d2 = (eq.x - tail.x) * (eq.x - tail.x) +
                              (eq.y - tail.y) * (eq.y - tail.y);
            if (d2 < best) {
                best = d2;
                info.equilibrium = eq;
            }
        }
        return info;
    }

    double section = 0.5 * (xmin + xmax);
    if (auto eq = interior_equilibrium(p, tau); eq && eq->x > xmin && eq->x < xmax)
        section = eq->x;
    const auto cr = upward_crossings(traj, section, t_from);
    if (cr.size() >= 11) {
        std::vector<double> periods, amps;
        for (std::size_t k = cr.size() - 10; k < cr.size(); ++k) {
            periods.push_back(cr[k] - cr[k - 1]);
            double axmin = 1e300, axmax = -1e300;
            const double steps = 400.0;
            for (int j = 0; j <= 400; ++j) {
                const double t = cr[k - 1] + (cr[k] - cr[k - 1]) * j / steps;
                const double x = traj.eval(t).x;
                axmin = std::min(axmin, x);
                axmax = std::max(axmax, x);
            }
            amps.push_back(axmax - axmin);
        }
        if (rel_dispersion(periods) < 1e-5 && rel_dispersion(amps) < 1e-3) {
            info.kind = AttractorKind::Orbit;
            info.period_estimate = std::accumulate(periods.begin(), periods.end(), 0.0) / 10.0;
            return info;
        }
    }
    info.kind = AttractorKind::Unresolved;
    return info;
}

Orbit extract_orbit(const ModelParams& p, double tau, const Trajectory& traj,
                    double x_section, double tail_fraction) {
    (void)p;
    (void)tau;
    const double t_end = traj.t_end();
    const double t_from = t_end - tail_fraction * (t_end - traj.t0);
    const auto cr = upward_crossings(traj, x_section, t_from);
    if (cr.size() < 2)
        throw SectionNotCrossed("the trajectory tail does not cross the section upward");

    const std::size_t nret = std::min<std::size_t>(10, cr.size() - 1);
    std::vector<double> periods;
    for (std::size_t k = cr.size() - nret; k < cr.size(); ++k)
        periods.push_back(cr[k] - cr[k - 1]);
    const double T = std::accumulate(periods.begin(), periods.end(), 0.0) /
                     static_cast<double>(periods.size());

    Orbit orb;
    orb.period = T;
    orb.stability = Orbit::Stability::Stable;
    const double t1 = cr.back();
    const double t0 = t1 - T;
    const int ns = 512;
    orb.samples.reserve(ns + 1);
    orb.xmin = orb.ymin = 1e300;
    orb.xmax = orb.ymax = -1e300;
    for (int j = 0; j <= ns; ++j) {
        const Vec2 s = traj.eval(t0 + T * j / static_cast<double>(ns));
        orb.samples.push_back(s);
        orb.xmin = std::min(orb.xmin, s.x);
        orb.xmax = std::max(orb.xmax, s.x);
        orb.ymin = std::min(orb.ymin, s.y);
        orb.ymax = std::max(orb.ymax, s.y);
    }
    const Vec2 a = traj.eval(cr[cr.size() - 2]);
    const Vec2 b = traj.eval(cr.back());
    const double scale = std::max({orb.amp_x(), orb.amp_y(), 1e-300});
    orb.closure = std::max(std::abs(a.x - b.x), std::abs(a.y - b.y)) / scale;
    return orb;
}

double lyapunov_value(const ModelParams& p, double tau, const Trajectory& traj, double t) {
    if (t - 1.0 < traj.t0 - 1e-9 || t > traj.t_end() + 1e-9)
        throw OutOfWindow("the functional needs the unit window [t-1, t] inside the trajectory");
    const Vec2 s = traj.eval(t);
    if (!(s.x > 0.0))
        throw OutOfDomain("functional undefined at nonpositive prey density");

    const int m = 128; // composite Simpson panels (even)
    double integral = traj.eval(t - 1.0).x * traj.eval(t - 1.0).y /
                      (p.a + traj.eval(t - 1.0).x);
    for (int j = 1; j < m; ++j) {
        const Vec2 u = traj.eval(t - 1.0 + static_cast<double>(j) / m);
        const double g = u.x * u.y / (p.a + u.x);
        integral += (j % 2 == 1 ? 4.0 : 2.0) * g;
    }
    integral += s.x * s.y / (p.a + s.x);
    integral /= 3.0 * m;

    const double beta = beta_of(p, tau);
    const double point = s.x - p.K - p.K * std::log(s.x / p.K) +
                         p.m * p.K / (p.d * p.a) * s.y;
    return point + tau * (p.m * beta * p.K / (p.d * p.a)) * integral;
}

} // namespace hopfdde
