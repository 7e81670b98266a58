#include "hopfdde/continuation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>

namespace hopfdde {

namespace {

constexpr double kPi = 3.14159265358979323846;

// 4-point Gauss-Legendre abscissae on [0,1]
constexpr double kGauss4[4] = {0.06943184420297371, 0.33000947820757187,
                               0.6699905217924281, 0.9305681557970263};

inline double wrap01(double s) {
    s -= std::floor(s);
    return s >= 1.0 ? s - 1.0 : s;
}

} // namespace

void lagrange_weights(int deg, double t, double* w, double* dw) {
    for (int k = 0; k <= deg; ++k) {
        const double xk = static_cast<double>(k) / deg;
        double num = 1.0, den = 1.0;
        for (int m = 0; m <= deg; ++m) {
            if (m == k)
                continue;
            const double xm = static_cast<double>(m) / deg;
            num *= (t - xm);
            den *= (xk - xm);
        }
        w[k] = num / den;
        double s = 0.0;
        for (int m = 0; m <= deg; ++m) {
            if (m == k)
                continue;
            double pr = 1.0;
            for (int l = 0; l <= deg; ++l) {
                if (l == k || l == m)
                    continue;
                pr *= (t - static_cast<double>(l) / deg);
            }
            s += pr;
        }
        dw[k] = s / den;
    }
}

void PeriodicProfile::eval_both(double s, Vec2& v, Vec2& dv) const {
    s = wrap01(s);
    int j = static_cast<int>(std::floor(s * Nm));
    j = std::min(j, Nm - 1);
    const double t = s * Nm - j;
    double w[16], dwl[16];
    lagrange_weights(deg, t, w, dwl);
    v = {0.0, 0.0};
    dv = {0.0, 0.0};
    for (int k = 0; k <= deg; ++k) {
        const Vec2& u = U[static_cast<std::size_t>(idx(j, k))];
        v = v + w[k] * u;
        dv = dv + dwl[k] * u;
    }
    dv = static_cast<double>(Nm) * dv;
}

Vec2 PeriodicProfile::eval(double s) const {
    Vec2 v, dv;
    eval_both(s, v, dv);
    return v;
}

PeriodicProfile PeriodicProfile::resampled(int new_Nm) const {
    PeriodicProfile q;
    q.Nm = new_Nm;
    q.deg = deg;
    q.U.resize(static_cast<std::size_t>(new_Nm) * deg);
    for (int g = 0; g < q.nodes(); ++g)
        q.U[g] = eval(q.node_phase(g));
    return q;
}

// ---------------------------------------------------------------------------
// Collocation system assembly

namespace {

struct RhsDerivs {
    Vec2 f;
    double f1x, f1y;   // current-state partials of the prey equation
    double f2y;        // current-state partial of the predator equation
    double f2xd, f2yd; // delayed-state partials
    double f2tau;      // explicit delay partial
};

RhsDerivs rhs_with_derivs(const ModelParams& p, double tau, Vec2 cur, Vec2 del) {
    const double beta = beta_of(p, tau);
    const double axc = p.a + cur.x;
    const double axd = p.a + del.x;
    RhsDerivs o;
    o.f.x = p.r * cur.x * (1.0 - cur.x / p.K) - p.m * cur.x * cur.y / axc;
    o.f.y = -p.d * cur.y + beta * del.x * del.y / axd;
    o.f1x = p.r - 2.0 * p.r * cur.x / p.K - p.m * cur.y * p.a / (axc * axc);
    o.f1y = -p.m * cur.x / axc;
    o.f2y = -p.d;
    o.f2xd = beta * del.y * p.a / (axd * axd);
    o.f2yd = beta * del.x / axd;
    o.f2tau = -p.d * beta * del.x * del.y / axd;
    return o;
}

class CollocSystem {
public:
    CollocSystem(const ModelParams& p, double tau_fixed, const PeriodicProfile& ref,
                 const ArclengthConstraint* arc)
        : p_(p), tau_fixed_(tau_fixed), Nm_(ref.Nm), deg_(ref.deg),
          n_(ref.nodes()), arc_(arc) {
        refv_.resize(n_);
        refd_.resize(n_);
        double fs = 0.0;
        for (int g = 0; g < n_; ++g) {
            Vec2 v, dv;
            ref.eval_both(ref.node_phase(g), v, dv);
            refv_[g] = v;
            refd_[g] = dv;
            fs = std::max({fs, std::abs(dv.x), std::abs(dv.y)});
        }
        fscale_ = std::max(fs, 1e-30);
        // collocation-point Lagrange weights are mesh-independent on a uniform mesh
        for (int ci = 0; ci < 4; ++ci)
            lagrange_weights(deg_, kGauss4[ci], wc_[ci], dwc_[ci]);
    }

    int dim() const { return 2 * n_ + 1 + (arc_ ? 1 : 0); }
    bool free_tau() const { return arc_ != nullptr; }
    double fscale() const { return fscale_; }

    void unpack(const Eigen::VectorXd& z, PeriodicProfile& P, double& T, double& tau) const {
        P.Nm = Nm_;
        P.deg = deg_;
        P.U.resize(n_);
        for (int g = 0; g < n_; ++g)
            P.U[g] = {z[2 * g], z[2 * g + 1]};
        T = z[2 * n_];
        tau = free_tau() ? z[2 * n_ + 1] : tau_fixed_;
    }

    /// Residual (and optionally the analytic Jacobian). Returns false when the
    /// point is outside the solvable region (nonpositive period, negative delay,
    /// non-finite entries).
    bool assemble(const Eigen::VectorXd& z, Eigen::VectorXd& R, Eigen::MatrixXd* J) const {
        PeriodicProfile P;
        double T, tau;
        unpack(z, P, T, tau);
        if (!(T > 1e-12) || !(T < 1e12) || tau < -1e-12 || !z.allFinite())
            return false;
        tau = std::max(tau, 0.0);

        R.setZero(dim());
        if (J)
            J->setZero(dim(), dim());
        const double s = 1.0 / (T * fscale_);
        const double dNm = static_cast<double>(Nm_);

        for (int j = 0; j < Nm_; ++j) {
            for (int ci = 0; ci < 4; ++ci) {
                const double sigma = (j + kGauss4[ci]) / dNm;
                Vec2 u{0, 0}, du{0, 0};
                for (int k = 0; k <= deg_; ++k) {
                    const Vec2& node = P.U[static_cast<std::size_t>(P.idx(j, k))];
                    u = u + wc_[ci][k] * node;
                    du = du + dwc_[ci][k] * node;
                }
                du = dNm * du;

                const double sd = wrap01(sigma - tau / T);
                int jd = static_cast<int>(std::floor(sd * dNm));
                jd = std::min(jd, Nm_ - 1);
                const double td = sd * dNm - jd;
                double wd[16], dwd[16];
                lagrange_weights(deg_, td, wd, dwd);
                Vec2 ud{0, 0}, dud{0, 0};
                for (int k = 0; k <= deg_; ++k) {
                    const Vec2& node = P.U[static_cast<std::size_t>(P.idx(jd, k))];
                    ud = ud + wd[k] * node;
                    dud = dud + dwd[k] * node;
                }
                dud = dNm * dud;

                const RhsDerivs F = rhs_with_derivs(p_, tau, u, ud);
                const Vec2 row = du - T * F.f;
                const int rx = 2 * (j * deg_ + ci);
                const int ry = rx + 1;
                R[rx] = row.x * s;
                R[ry] = row.y * s;
                if (!J)
                    continue;

                for (int k = 0; k <= deg_; ++k) {
                    const int g = P.idx(j, k);
                    const double dl = dNm * dwc_[ci][k];
                    (*J)(rx, 2 * g) += s * (dl - T * F.f1x * wc_[ci][k]);
                    (*J)(rx, 2 * g + 1) += s * (-T * F.f1y * wc_[ci][k]);
                    (*J)(ry, 2 * g + 1) += s * (dl - T * F.f2y * wc_[ci][k]);
                    const int gd = P.idx(jd, k);
                    (*J)(ry, 2 * gd) += s * (-T * F.f2xd * wd[k]);
                    (*J)(ry, 2 * gd + 1) += s * (-T * F.f2yd * wd[k]);
                }
                // d(delayed state)/dT = u'(sd) * tau/T^2 ; rows are scaled by 1/(T fscale)
                const double ddel = F.f2xd * dud.x + F.f2yd * dud.y;
                (*J)(rx, 2 * n_) = s * (-F.f.x) - R[rx] / T;
                (*J)(ry, 2 * n_) = s * (-F.f.y - (tau / T) * ddel) - R[ry] / T;
                if (free_tau()) {
                    (*J)(ry, 2 * n_ + 1) = s * (-T * F.f2tau + ddel);
                }
            }
        }

        // integral phase pin against the reference profile
        double ph = 0.0;
        for (int g = 0; g < n_; ++g)
            ph += refd_[g].x * (P.U[g].x - refv_[g].x) +
                  refd_[g].y * (P.U[g].y - refv_[g].y);
        const double pscale = 10.0 / (static_cast<double>(n_) * fscale_);
        R[2 * n_] = ph * pscale;
        if (J) {
            for (int g = 0; g < n_; ++g) {
                (*J)(2 * n_, 2 * g) = refd_[g].x * pscale;
                (*J)(2 * n_, 2 * g + 1) = refd_[g].y * pscale;
            }
        }

        if (arc_) {
            const int m = dim();
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
                acc += arc_->zhat_w[i] * arc_->weights[i] * (z[i] - arc_->z_pred[i]);
            R[2 * n_ + 1] = acc / arc_->ds;
            if (J)
                for (int i = 0; i < m; ++i)
                    (*J)(2 * n_ + 1, i) = arc_->zhat_w[i] * arc_->weights[i] / arc_->ds;
        }
        return true;
    }

private:
    const ModelParams& p_;
    double tau_fixed_;
    int Nm_, deg_, n_;
    const ArclengthConstraint* arc_;
    std::vector<Vec2> refv_, refd_;
    double fscale_ = 1.0;
    double wc_[4][16], dwc_[4][16];
};

Eigen::VectorXd pack_z(const PeriodicProfile& P, double T, double tau, bool free_tau) {
    const int n = P.nodes();
    Eigen::VectorXd z(2 * n + 1 + (free_tau ? 1 : 0));
    for (int g = 0; g < n; ++g) {
        z[2 * g] = P.U[g].x;
        z[2 * g + 1] = P.U[g].y;
    }
    z[2 * n] = T;
    if (free_tau)
        z[2 * n + 1] = tau;
    return z;
}

} // namespace

CollocSolution solve_collocation(const ModelParams& p, double tau,
                                 const PeriodicProfile& guess, double T0,
                                 const ArclengthConstraint* arc,
                                 const CollocOptions& opt) {
    if (guess.deg != 4)
        throw ConfigError("collocation is built for degree-4 elements");
    CollocSystem sys(p, tau, guess, arc);
    Eigen::VectorXd z = pack_z(guess, T0, tau, sys.free_tau());

    CollocSolution out;
    Eigen::VectorXd R(sys.dim()), Rt(sys.dim());
    Eigen::MatrixXd J;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu;
    bool have_j = false;
    double prev = std::numeric_limits<double>::infinity();

    for (int it = 0; it < opt.max_iter; ++it) {
        if (!sys.assemble(z, R, nullptr)) {
            out.iters = it;
            return out;
        }
        const double nr = R.cwiseAbs().maxCoeff();
        if (nr < opt.tol) {
            sys.unpack(z, out.profile, out.T, out.tau);
            out.converged = true;
            out.residual = nr;
            out.iters = it;
            return out;
        }
        if (!have_j || nr > 0.3 * prev) {
            if (!sys.assemble(z, R, &J)) {
                out.iters = it;
                return out;
            }
            lu.compute(J);
            have_j = true;
        }
        const Eigen::VectorXd dz = lu.solve(-R);
        if (!dz.allFinite()) {
            out.iters = it;
            out.residual = nr;
            return out;
        }
        double lam = 1.0;
        prev = nr;
        for (int h = 0; h < 8; ++h) {
            if (sys.assemble(z + lam * dz, Rt, nullptr) &&
                Rt.cwiseAbs().maxCoeff() < nr)
                break;
            lam *= 0.5;
        }
        z += lam * dz;
    }
    if (sys.assemble(z, R, nullptr)) {
        out.residual = R.cwiseAbs().maxCoeff();
        if (out.residual < opt.tol) {
            sys.unpack(z, out.profile, out.T, out.tau);
            out.converged = true;
        }
    }
    out.iters = opt.max_iter;
    return out;
}

double collocation_jacobian_fd_error(const ModelParams& p, double tau,
                                     const PeriodicProfile& guess, double T0,
                                     bool free_tau) {
    ArclengthConstraint arc;
    const int n = guess.nodes();
    if (free_tau) {
        arc.ds = 0.1;
        arc.weights.assign(2 * n + 2, 1.0);
        arc.zhat_w.assign(2 * n + 2, 0.0);
        arc.zhat_w[2 * n + 1] = 1.0;
        arc.z_pred.assign(2 * n + 2, 0.0);
        Eigen::VectorXd zp = pack_z(guess, T0, tau, true);
        for (int i = 0; i < 2 * n + 2; ++i)
            arc.z_pred[i] = zp[i];
    }
    CollocSystem sys(p, tau, guess, free_tau ? &arc : nullptr);
    Eigen::VectorXd z = pack_z(guess, T0, tau, free_tau);

    Eigen::VectorXd R0(sys.dim());
    Eigen::MatrixXd J(sys.dim(), sys.dim());
    if (!sys.assemble(z, R0, &J))
        throw OutOfDomain("invalid collocation point for the derivative check");

    Eigen::MatrixXd Jfd(sys.dim(), sys.dim());
    Eigen::VectorXd Rp(sys.dim()), Rm(sys.dim());
    for (int c = 0; c < sys.dim(); ++c) {
        const double h = 1e-6 * std::max(1.0, std::abs(z[c]));
        Eigen::VectorXd zp = z, zm = z;
        zp[c] += h;
        zm[c] -= h;
        if (!sys.assemble(zp, Rp, nullptr) || !sys.assemble(zm, Rm, nullptr))
            throw OutOfDomain("derivative check stepped outside the solvable region");
        Jfd.col(c) = (Rp - Rm) / (2.0 * h);
    }
    const double scale = std::max(J.cwiseAbs().maxCoeff(), 1.0);
    return (J - Jfd).cwiseAbs().maxCoeff() / scale;
}

// ---------------------------------------------------------------------------
// Branch tracing

namespace {

Orbit orbit_from_profile(const PeriodicProfile& P, double T, double closure) {
    Orbit o;
    o.period = T;
    o.closure = closure;
    o.stability = Orbit::Stability::Unknown;
    o.xmin = o.ymin = 1e300;
    o.xmax = o.ymax = -1e300;
    const int fine = 1024;
    for (int j = 0; j < fine; ++j) {
        const Vec2 v = P.eval(static_cast<double>(j) / fine);
        o.xmin = std::min(o.xmin, v.x);
        o.xmax = std::max(o.xmax, v.x);
        o.ymin = std::min(o.ymin, v.y);
        o.ymax = std::max(o.ymax, v.y);
    }
    const int ns = 256;
    o.samples.reserve(ns + 1);
    for (int j = 0; j <= ns; ++j)
        o.samples.push_back(P.eval(static_cast<double>(j) / ns));
    return o;
}

/// Largest adjacent-node jump relative to the profile amplitude.
double profile_roughness(const PeriodicProfile& P) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& u : P.U) {
        xmin = std::min(xmin, u.x);
        xmax = std::max(xmax, u.x);
        ymin = std::min(ymin, u.y);
        ymax = std::max(ymax, u.y);
    }
    const double ax = std::max(xmax - xmin, 1e-300);
    const double ay = std::max(ymax - ymin, 1e-300);
    double rough = 0.0;
    const int n = P.nodes();
    for (int g = 0; g < n; ++g) {
        const Vec2& u0 = P.U[g];
        const Vec2& u1 = P.U[(g + 1) % n];
        rough = std::max(rough, std::abs(u1.x - u0.x) / ax);
        rough = std::max(rough, std::abs(u1.y - u0.y) / ay);
    }
    return rough;
}

struct TraceContext {
    ModelParams mp;
    StepPolicy pol;
    double tau_bar = 0.0;
    double tau_mx = 0.0;
    double sx = 1.0, sy = 1.0; ///< anchor-equilibrium component scales
};

std::vector<double> metric_weights(const TraceContext& cx, int n,
                                   double amp_x, double amp_y) {
    const double sx = std::max(amp_x, 0.05 * cx.sx);
    const double sy = std::max(amp_y, 0.05 * cx.sy);
    std::vector<double> w(2 * n + 2);
    const double rn = std::sqrt(static_cast<double>(n));
    for (int g = 0; g < n; ++g) {
        w[2 * g] = 1.0 / (sx * rn);
        w[2 * g + 1] = 1.0 / (sy * rn);
    }
    w[2 * n] = 1.0;
    w[2 * n + 1] = 1.0;
    return w;
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

/// Amplitude-vanishing intercept: amp^2 is asymptotically linear in the
/// parameter, so extrapolate that line to zero from the innermost point pair.
double hopf_endpoint_fit(const std::vector<BranchPoint>& pts, double fallback) {
    const std::size_t m = pts.size();
    if (m < 2)
        return fallback;
    const double t2 = pts[m - 1].param, a2 = pts[m - 1].orbit.amp_x();
    const double t1 = pts[m - 2].param, a1 = pts[m - 2].orbit.amp_x();
    const double q1 = a1 * a1, q2 = a2 * a2;
    if (!(q2 > 0.0) || q1 <= 1.44 * q2)
        return fallback; // pair too flat to extrapolate from
    const double dt = q2 * (t2 - t1) / (q1 - q2);
    if (std::abs(dt) > 3.0 * std::abs(t2 - t1))
        return fallback;
    return t2 + dt;
}

/// Continuation loop shared by the Hopf-anchored and cycle-anchored starts.
/// z_prev must be a converged solution paired with an initial weighted tangent.
void run_arclength(const TraceContext& cx, Branch& br, Eigen::VectorXd z_prev,
                   Eigen::VectorXd t_w, int Nm0) {
    const StepPolicy& pol = cx.pol;
    const int deg = pol.degree;
    int Nm = Nm0;
    int n = Nm * deg;

    auto unpack_profile = [&](const Eigen::VectorXd& z, int NmLoc) {
        PeriodicProfile P;
        P.Nm = NmLoc;
        P.deg = deg;
        P.U.resize(static_cast<std::size_t>(NmLoc) * deg);
        for (int g = 0; g < NmLoc * deg; ++g)
            P.U[g] = {z[2 * g], z[2 * g + 1]};
        return P;
    };
    auto with_mesh = [&](const PeriodicProfile& P, double T, double tau) {
        Eigen::VectorXd z = pack_z(P, T, tau, true);
        return z;
    };

    std::optional<Eigen::VectorXd> z_prev2; // always on the current mesh
    double ds = pol.ds0;
    bool armed = false;
    double max_arel = 0.0;
    double last_dir = 0.0;

    auto amp_of = [&](const Eigen::VectorXd& z) {
        double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
        for (int g = 0; g < n; ++g) {
            xmin = std::min(xmin, z[2 * g]);
            xmax = std::max(xmax, z[2 * g]);
            ymin = std::min(ymin, z[2 * g + 1]);
            ymax = std::max(ymax, z[2 * g + 1]);
        }
        return std::pair<double, double>{xmax - xmin, ymax - ymin};
    };
    auto secant_tangent = [&]() {
        if (!z_prev2)
            return;
        const auto [ax, ay] = amp_of(z_prev);
        const std::vector<double> w = metric_weights(cx, n, ax, ay);
        Eigen::VectorXd t(2 * n + 2);
        for (int i = 0; i < 2 * n + 2; ++i)
            t[i] = w[i] * (z_prev[i] - (*z_prev2)[i]);
        const double tn = t.norm();
        if (tn > 1e-300)
            t_w = t / tn;
    };
    /// Re-solve the current point on a doubled mesh; interpolate the secant
    /// companion onto it so the tangent survives the switch.
    auto escalate = [&]() -> bool {
        if (Nm >= pol.mesh_max)
            return false;
        const int Nm_new = std::min(pol.mesh_max, Nm * 2);
        PeriodicProfile fine = unpack_profile(z_prev, Nm).resampled(Nm_new);
        const CollocSolution re =
            solve_collocation(cx.mp, z_prev[2 * n + 1], fine, z_prev[2 * n], nullptr);
        if (!re.converged)
            return false;
        std::optional<Eigen::VectorXd> z2_new;
        if (z_prev2) {
            PeriodicProfile old2 = unpack_profile(*z_prev2, Nm).resampled(Nm_new);
            Eigen::VectorXd z2 = with_mesh(old2, (*z_prev2)[2 * n], (*z_prev2)[2 * n + 1]);
            z2_new = std::move(z2);
        }
        const double tau_here = z_prev[2 * n + 1];
        Nm = Nm_new;
        n = Nm * deg;
        z_prev = with_mesh(re.profile, re.T, tau_here);
        z_prev2 = std::move(z2_new);
        if (z_prev2) {
            secant_tangent();
        } else {
            t_w.setZero(2 * n + 2);
            t_w[2 * n + 1] = last_dir >= 0.0 ? 1.0 : -1.0;
        }
        if (!br.points.empty())
            br.points.back().orbit =
                orbit_from_profile(unpack_profile(z_prev, Nm), re.T, re.residual);
        return true;
    };
    auto record_point = [&](const Eigen::VectorXd& z, double resid) {
        Orbit o = orbit_from_profile(unpack_profile(z, Nm), z[2 * n], resid);
        if (pol.sample_stride > 1 &&
            static_cast<int>(br.points.size()) % pol.sample_stride != 0)
            o.samples.clear(); // keep dense sampling sparse to bound memory
        br.points.push_back({z[2 * n + 1], std::move(o)});
    };

    while (static_cast<int>(br.points.size()) < pol.max_points) {
        const auto [pax, pay] = amp_of(z_prev);
        const std::vector<double> w = metric_weights(cx, n, pax, pay);

        Eigen::VectorXd z_pred = z_prev;
        for (int i = 0; i < 2 * n + 2; ++i)
            z_pred[i] += ds * t_w[i] / w[i];

        ArclengthConstraint arc{to_std(t_w), to_std(z_pred), w, ds};
        const PeriodicProfile guess = unpack_profile(z_pred, Nm);
        const CollocSolution sol =
            solve_collocation(cx.mp, z_pred[2 * n + 1], guess, z_pred[2 * n], &arc);

        bool ok = sol.converged && sol.T > 1e-9 && sol.tau > -1e-12 &&
                  sol.tau < cx.tau_mx * 1.05;
        if (ok && armed) {
            // an exact equilibrium "orbit" means the corrector fell off the branch
            double axmax = -1e300, axmin = 1e300;
            for (const auto& u : sol.profile.U) {
                axmax = std::max(axmax, u.x);
                axmin = std::min(axmin, u.x);
            }
            if (axmax - axmin < 1e-14 * cx.sx)
                ok = false;
        }
        if (!ok) {
            ds *= 0.5;
            if (ds < pol.ds_min) {
                if (escalate()) {
                    ds = pol.ds0;
                    continue;
                }
                br.end = BranchEnd::Lost;
                br.end_param = br.points.empty() ? z_prev[2 * n + 1] : br.points.back().param;
                br.end_period = z_prev[2 * n];
                br.note = "continuation step failed at the minimum step size";
                return;
            }
            continue;
        }

        Eigen::VectorXd z_new = with_mesh(sol.profile, sol.T, sol.tau);
        record_point(z_new, sol.residual);
        const double tau_new = sol.tau;
        const double dtau = tau_new - z_prev[2 * n + 1];
        const bool flipped = last_dir != 0.0 && dtau * last_dir < 0.0;
        if (flipped)
            br.fold_back = true;
        if (dtau != 0.0)
            last_dir = dtau > 0.0 ? 1.0 : -1.0;

        z_prev2 = std::move(z_prev);
        z_prev = std::move(z_new);
        secant_tangent();
        if (sol.iters <= 4)
            ds = std::min(ds * 1.6, pol.ds_max);
        else if (sol.iters > 9)
            ds = std::max(ds * 0.5, pol.ds_min);

        auto arel_of = [&](const Orbit& o) {
            return std::max(o.amp_x() / cx.sx, o.amp_y() / cx.sy);
        };
        const double arel = arel_of(br.points.back().orbit);
        max_arel = std::max(max_arel, arel);
        if (arel > 3.0 * pol.amp_end_rel)
            armed = true;

        if (flipped) {
            // An amplitude-vanishing endpoint is rounded like a fold onto the
            // phase-mirrored sheet; a parameter reversal right after a deep
            // amplitude collapse is that bounce, not a genuine fold.
            const std::size_t look = std::min<std::size_t>(br.points.size(), 14);
            std::size_t k_dip = br.points.size() - look;
            double dip = std::numeric_limits<double>::infinity();
            for (std::size_t k = br.points.size() - look; k < br.points.size(); ++k) {
                const double a = arel_of(br.points[k].orbit);
                if (a < dip) {
                    dip = a;
                    k_dip = k;
                }
            }
            if (dip < 0.05 * max_arel) {
                br.points.resize(k_dip + 1);
                br.fold_back = false;
                br.end = BranchEnd::Hopf;
                br.end_period = br.points.back().orbit.period;
                br.end_param = hopf_endpoint_fit(br.points, br.points.back().param);
                return;
            }
        }

        if (tau_new >= cx.tau_mx * (1.0 - 1e-9)) {
            br.end = BranchEnd::DomainBoundary;
            br.end_param = tau_new;
            br.end_period = sol.T;
            return;
        }
        if (armed && arel < pol.amp_end_rel) {
            br.end = BranchEnd::Hopf;
            br.end_param = hopf_endpoint_fit(br.points, tau_new);
            br.end_period = sol.T;
            return;
        }
        if (Nm < pol.mesh_max && arel > 0.05 &&
            profile_roughness(sol.profile) > 0.30) {
            escalate(); // proactive refinement on rough profiles
            ds = pol.ds0;
        }
    }
    br.end = BranchEnd::Lost;
    br.end_param = br.points.empty() ? 0.0 : br.points.back().param;
    br.end_period = br.points.empty() ? 0.0 : br.points.back().orbit.period;
    br.note = "point budget exhausted";
}

/// Match an amplitude-vanishing endpoint against the catalog.
void match_hopf_end(const TraceContext& cx, Branch& br) {
    if (br.end != BranchEnd::Hopf)
        return;
    try {
        const HopfCatalog cat = hopf_points(cx.mp);
        const HopfPoint* best = nullptr;
        double bestgap = 1e300;
        for (const auto& row : cat.branches)
            for (const auto& hp : row) {
                const double gap = std::abs(hp.tau - br.end_param);
                if (gap < bestgap) {
                    bestgap = gap;
                    best = &hp;
                }
            }
        if (best &&
            bestgap <= std::max(0.02 * best->tau, 1e-3 * cat.tau_bar))
            br.end_hopf = *best;
    } catch (const Error&) {
        // no catalog (K <= K_2): leave the endpoint unmatched
    }
}

Branch trace_colloc_from_hopf(const TraceContext& cx, const HopfPoint& hp) {
    Branch br;
    br.method = TraceMethod::CollocationNewton;
    br.start = Anchor::at_hopf(hp);

    const auto eq = interior_equilibrium(cx.mp, hp.tau);
    if (!eq)
        throw AnchorDegenerate("no interior equilibrium at the anchor delay");
    double H, L, A;
    hla(cx.mp, hp.tau, H, L, A);
    (void)A;
    const double beta = beta_of(cx.mp, hp.tau);
    // eigenvector (1, xi2) of the linearization at the purely imaginary root
    const std::complex<double> xi2 =
        -std::complex<double>(-H, hp.w) * beta / (cx.mp.m * cx.mp.d);

    const int Nm = cx.pol.mesh;
    const int deg = cx.pol.degree;
    const int n = Nm * deg;

    PeriodicProfile base;
    base.Nm = Nm;
    base.deg = deg;
    base.U.assign(n, {eq->x, eq->y});
    Eigen::VectorXd z0 = pack_z(base, hp.period, hp.tau, true);

    Eigen::VectorXd q(2 * n + 2);
    q.setZero();
    for (int g = 0; g < n; ++g) {
        const double th = 2.0 * kPi * base.node_phase(g);
        q[2 * g] = std::cos(th);
        q[2 * g + 1] = xi2.real() * std::cos(th) - xi2.imag() * std::sin(th);
    }
    const std::vector<double> w = metric_weights(cx, n, 0.0, 0.0);
    Eigen::VectorXd t_w(2 * n + 2);
    for (int i = 0; i < 2 * n + 2; ++i)
        t_w[i] = w[i] * q[i];
    t_w /= t_w.norm();

    // first corrected point, stepping down on failure
    double ds = cx.pol.ds0;
    bool started = false;
    Eigen::VectorXd z_first;
    double resid_first = 0.0;
    while (ds >= cx.pol.ds_min) {
        Eigen::VectorXd z_pred = z0;
        for (int i = 0; i < 2 * n + 2; ++i)
            z_pred[i] += ds * t_w[i] / w[i];
        ArclengthConstraint arc{to_std(t_w), to_std(z_pred), w, ds};
        PeriodicProfile guess;
        guess.Nm = Nm;
        guess.deg = deg;
        guess.U.resize(n);
        for (int g = 0; g < n; ++g)
            guess.U[g] = {z_pred[2 * g], z_pred[2 * g + 1]};
        const CollocSolution sol =
            solve_collocation(cx.mp, z_pred[2 * n + 1], guess, z_pred[2 * n], &arc);
        if (sol.converged && sol.T > 1e-9) {
            z_first = pack_z(sol.profile, sol.T, sol.tau, true);
            resid_first = sol.residual;
            started = true;
            break;
        }
        ds *= 0.5;
    }
    if (!started)
        throw LostAtStart("no periodic orbit found next to the anchor");

    // record the first point and hand over to the shared loop
    {
        PeriodicProfile P;
        P.Nm = Nm;
        P.deg = deg;
        P.U.resize(n);
        for (int g = 0; g < n; ++g)
            P.U[g] = {z_first[2 * g], z_first[2 * g + 1]};
        br.points.push_back({z_first[2 * n + 1],
                             orbit_from_profile(P, z_first[2 * n], resid_first)});
    }
    const std::vector<double> w1 = metric_weights(
        cx, n, br.points.back().orbit.amp_x(), br.points.back().orbit.amp_y());
    Eigen::VectorXd t1(2 * n + 2);
    for (int i = 0; i < 2 * n + 2; ++i)
        t1[i] = w1[i] * (z_first[i] - z0[i]);
    t1 /= t1.norm();

    run_arclength(cx, br, z_first, t1, Nm);
    match_hopf_end(cx, br);
    return br;
}

History history_from_orbit(const Orbit& orb, double span, double t0 = 0.0);

Branch trace_colloc_from_cycle(const TraceContext& cx) {
    Branch br;
    br.method = TraceMethod::CollocationNewton;
    br.start = Anchor::ode_cycle();

    if (ode_classification(cx.mp) != OdeClass::UniqueLimitCycle)
        throw LostAtStart("the undelayed system has no limit cycle at these parameters");
    const auto eq = interior_equilibrium(cx.mp, 0.0);

    // settle onto the planar cycle by simulation
    const double w0 = omega(cx.mp, 0.0);
    const double T_guess = 2.0 * kPi / w0;
    History h = History::constant({1.01 * eq->x, 1.01 * eq->y});
    Orbit seed;
    bool have_orbit = false;
    double t_end = 150.0 * T_guess;
    for (int attempt = 0; attempt < 3 && !have_orbit; ++attempt, t_end *= 3.0) {
        IntegrateOptions io;
        io.dt = cx.pol.sim_dt;
        const Trajectory traj = integrate(cx.mp, 0.0, h, t_end, io);
        const AttractorInfo det = detect_attractor(cx.mp, 0.0, traj);
        if (det.kind == AttractorKind::Orbit) {
            seed = extract_orbit(cx.mp, 0.0, traj, eq->x);
            have_orbit = true;
        }
    }
    if (!have_orbit)
        throw LostAtStart("simulation did not settle on the undelayed limit cycle");

    const int Nm = cx.pol.mesh;
    const int deg = cx.pol.degree;
    const int n = Nm * deg;
    PeriodicProfile guess;
    guess.Nm = Nm;
    guess.deg = deg;
    guess.U.resize(n);
    const int ns = static_cast<int>(seed.samples.size()) - 1;
    for (int g = 0; g < n; ++g) {
        const double ph = guess.node_phase(g) * ns;
        const int i0 = std::min(static_cast<int>(ph), ns - 1);
        const double fr = ph - i0;
        guess.U[g] = (1.0 - fr) * seed.samples[i0] + fr * seed.samples[i0 + 1];
    }
    const CollocSolution sol0 = solve_collocation(cx.mp, 0.0, guess, seed.period, nullptr);
    if (!sol0.converged)
        throw LostAtStart("the undelayed cycle did not refine on the periodic mesh");

    Eigen::VectorXd z0 = pack_z(sol0.profile, sol0.T, 0.0, false);
    z0.conservativeResize(2 * n + 2);
    z0[2 * n] = sol0.T;
    z0[2 * n + 1] = 0.0;
    br.points.push_back({0.0, orbit_from_profile(sol0.profile, sol0.T, sol0.residual)});

    Eigen::VectorXd t_w(2 * n + 2);
    t_w.setZero();
    t_w[2 * n + 1] = 1.0; // march the delay upward
    run_arclength(cx, br, z0, t_w, Nm);
    match_hopf_end(cx, br);
    return br;
}

// ---------------------------------------------------------------------------
// Simulation-based continuation (tracks attracting orbits only)

History history_from_orbit(const Orbit& orb, double span, double t0) {
    // replay the orbit periodically on a uniform grid ending at t0
    const int ns = static_cast<int>(orb.samples.size()) - 1;
    const double hstep = orb.period / 512.0;
    const int m = static_cast<int>(std::ceil(span / hstep)) + 2;
    std::vector<Vec2> vals(m + 1);
    for (int i = 0; i <= m; ++i) {
        const double t = t0 - hstep * (m - i); // ends at t0
        double ph = wrap01(t / orb.period);
        const double u = ph * ns;
        const int i0 = std::min(static_cast<int>(u), ns - 1);
        const double fr = u - i0;
        vals[i] = (1.0 - fr) * orb.samples[i0] + fr * orb.samples[i0 + 1];
    }
    return History::samples(t0, hstep, std::move(vals));
}

Branch trace_simulation(const TraceContext& cx, const Anchor& anchor, bool shoot_polish) {
    Branch br;
    br.method = shoot_polish ? TraceMethod::ShootingNewton
                             : TraceMethod::SimulationContinuation;
    br.start = anchor;

    const double dtau0 = cx.pol.dtau0 > 0.0 ? cx.pol.dtau0 : cx.tau_bar / 400.0;
    const double dtau_min = cx.tau_bar / 51200.0;

    double tau, dir;
    Orbit cur;
    if (anchor.kind == AnchorKind::OdeLimitCycle) {
        if (ode_classification(cx.mp) != OdeClass::UniqueLimitCycle)
            throw LostAtStart("the undelayed system has no limit cycle at these parameters");
        const auto eq = interior_equilibrium(cx.mp, 0.0);
        const double T_guess = 2.0 * kPi / omega(cx.mp, 0.0);
        IntegrateOptions io;
        io.dt = cx.pol.sim_dt;
        const Trajectory traj =
            integrate(cx.mp, 0.0, History::constant({1.01 * eq->x, 1.01 * eq->y}),
                      150.0 * T_guess, io);
        if (detect_attractor(cx.mp, 0.0, traj).kind != AttractorKind::Orbit)
            throw LostAtStart("simulation did not settle on the undelayed limit cycle");
        cur = extract_orbit(cx.mp, 0.0, traj, eq->x);
        tau = 0.0;
        dir = 1.0;
        br.points.push_back({tau, cur});
    } else {
        if (anchor.hopf.delta == 0)
            throw AnchorDegenerate("tangential crossing at the anchor");
        dir = anchor.hopf.delta > 0 ? 1.0 : -1.0;
        tau = anchor.hopf.tau + dir * dtau0;
        const auto eq = interior_equilibrium(cx.mp, tau);
        if (!eq)
            throw LostAtStart("no interior equilibrium next to the anchor");
        IntegrateOptions io;
        io.dt = cx.pol.sim_dt;
        const double t_end = 400.0 * std::max(anchor.hopf.period, tau);
        const Trajectory traj = integrate(
            cx.mp, tau, History::constant({1.002 * eq->x, 1.002 * eq->y}), t_end, io);
        if (detect_attractor(cx.mp, tau, traj).kind != AttractorKind::Orbit)
            throw LostAtStart("no attracting orbit detected next to the anchor");
        cur = extract_orbit(cx.mp, tau, traj, eq->x);
        br.points.push_back({tau, cur});
    }

    double dtau = dtau0;
    while (static_cast<int>(br.points.size()) < cx.pol.max_points) {
        const double tau_next = tau + dir * dtau;
        if (tau_next <= 0.0 || tau_next >= cx.tau_mx) {
            br.end = BranchEnd::DomainBoundary;
            br.end_param = std::clamp(tau_next, 0.0, cx.tau_mx);
            br.end_period = cur.period;
            return br;
        }
        const auto eq = interior_equilibrium(cx.mp, tau_next);
        if (!eq) {
            br.end = BranchEnd::DomainBoundary;
            br.end_param = tau_next;
            br.end_period = cur.period;
            return br;
        }
        bool stepped = false;
        for (int attempt = 0; attempt < 2 && !stepped; ++attempt) {
            const double t_end =
                cx.pol.sim_periods * cur.period * (attempt + 1) + 8.0 * tau_next;
            IntegrateOptions io;
            io.dt = cx.pol.sim_dt;
            Trajectory traj;
            try {
                traj = integrate(cx.mp, tau_next,
                                 history_from_orbit(cur, std::max(tau_next, 1e-12)),
                                 t_end, io);
            } catch (const PositivityViolated&) {
                break;
            }
            const AttractorInfo det = detect_attractor(cx.mp, tau_next, traj);
            if (det.kind == AttractorKind::Orbit) {
                Orbit next = extract_orbit(cx.mp, tau_next, traj, eq->x);
                if (shoot_polish && next.period > 1.05 * tau_next) {
                    const ShootResult sr =
                        shooting_refine(cx.mp, tau_next, next, eq->x, cx.pol.sim_dt);
                    if (sr.converged) {
                        next.period = sr.period;
                        next.closure = sr.residual;
                    }
                }
                cur = next;
                tau = tau_next;
                br.points.push_back({tau, cur});
                stepped = true;
            } else if (det.kind == AttractorKind::Equilibrium && det.equilibrium &&
                       det.equilibrium->kind == EqKind::Interior) {
                // amplitude died: the branch closed at a bifurcation point
                br.end = BranchEnd::Hopf;
                br.end_param = hopf_endpoint_fit(br.points, tau_next);
                br.end_period = cur.period;
                match_hopf_end(cx, br);
                return br;
            }
        }
        if (!stepped) {
            dtau *= 0.5;
            if (dtau < dtau_min) {
                br.end = BranchEnd::Lost;
                br.end_param = tau;
                br.end_period = cur.period;
                br.note = "orbit lost below the minimum parameter step";
                return br;
            }
        } else if (dtau < dtau0) {
            dtau = std::min(dtau * 1.3, dtau0);
        }
    }
    br.end = BranchEnd::Lost;
    br.end_param = tau;
    br.end_period = cur.period;
    br.note = "point budget exhausted";
    return br;
}

} // namespace

Branch trace_branch(const ModelParams& p, double K, const Anchor& anchor,
                    const StepPolicy& policy) {
    TraceContext cx;
    cx.mp = with_carrying_capacity(p, K);
    cx.pol = policy;
    if (cx.pol.degree != 4)
        throw ConfigError("branch tracing is built for degree-4 elements");

    const Thresholds th = thresholds(cx.mp, 0.0);
    if (!th.tau_max)
        throw OutOfDomain("no interior dynamics: the delay window is empty");
    cx.tau_mx = *th.tau_max;
    cx.tau_bar = th.tau_bar ? *th.tau_bar : *th.tau_max;

    const double tau_ref = anchor.kind == AnchorKind::Hopf ? anchor.hopf.tau : 0.0;
    const auto eq_ref = interior_equilibrium(cx.mp, tau_ref);
    if (!eq_ref)
        throw OutOfDomain("no interior equilibrium at the anchor");
    cx.sx = eq_ref->x;
    cx.sy = eq_ref->y;

    if (anchor.kind == AnchorKind::Hopf && anchor.hopf.delta == 0)
        throw AnchorDegenerate("tangential crossing at the anchor");

    switch (policy.method) {
    case TraceMethod::CollocationNewton:
        return anchor.kind == AnchorKind::Hopf ? trace_colloc_from_hopf(cx, anchor.hopf)
                                               : trace_colloc_from_cycle(cx);
    case TraceMethod::SimulationContinuation:
        return trace_simulation(cx, anchor, false);
    case TraceMethod::ShootingNewton:
        return trace_simulation(cx, anchor, true);
    }
    throw ConfigError("unknown tracing method");
}

// ---------------------------------------------------------------------------
// Component assembly

namespace {

/// Piecewise-linear lookup of (period, amp_x) along a branch, keyed by tau.
struct BranchTable {
    std::vector<double> tau, period, amp;

    explicit BranchTable(const Branch& b) {
        std::vector<std::size_t> order(b.points.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
            return b.points[i].param < b.points[j].param;
        });
        for (std::size_t k : order) {
            const double t = b.points[k].param;
            if (!tau.empty() && t <= tau.back() + 1e-15)
                continue;
            tau.push_back(t);
            period.push_back(b.points[k].orbit.period);
            amp.push_back(b.points[k].orbit.amp_x());
        }
    }
    bool empty() const { return tau.size() < 2; }
    double lo() const { return tau.front(); }
    double hi() const { return tau.back(); }
    std::pair<double, double> at(double t) const {
        const auto it = std::upper_bound(tau.begin(), tau.end(), t);
        std::size_t i = static_cast<std::size_t>(it - tau.begin());
        i = std::clamp<std::size_t>(i, 1, tau.size() - 1);
        const double fr = (t - tau[i - 1]) / (tau[i] - tau[i - 1]);
        return {period[i - 1] + fr * (period[i] - period[i - 1]),
                amp[i - 1] + fr * (amp[i] - amp[i - 1])};
    }
};

} // namespace

ComponentReport assemble_components(const ModelParams& p,
                                    const std::vector<Branch>& branches) {
    ComponentReport rep;
    HopfCatalog cat = hopf_points(p);

    for (std::size_t bi = 0; bi < cat.branches.size(); ++bi) {
        const auto& roots = cat.branches[bi];
        if (roots.size() != 2)
            continue;
        PairVerdict pv;
        pv.n = static_cast<int>(bi);
        pv.tau_minus = roots[0].tau;
        pv.tau_plus = roots[1].tau;

        const Branch* from_minus = nullptr;
        const Branch* from_plus = nullptr;
        for (const auto& b : branches) {
            if (b.start.kind != AnchorKind::Hopf || b.start.hopf.n != pv.n)
                continue;
            if (std::abs(b.start.hopf.tau - pv.tau_minus) < 1e-9)
                from_minus = &b;
            else if (std::abs(b.start.hopf.tau - pv.tau_plus) < 1e-9)
                from_plus = &b;
        }
        if (!from_minus || !from_plus) {
            pv.note = "missing a traced branch for one of the two anchors";
            rep.pairs.push_back(pv);
            continue;
        }

        const double tol_minus = std::max(0.02 * pv.tau_minus, 1e-3 * cat.tau_bar);
        const double tol_plus = 0.02 * pv.tau_plus;
        const bool a_ends =
            from_minus->end == BranchEnd::Hopf &&
            std::abs(from_minus->end_param - pv.tau_plus) <= tol_plus;
        const bool b_ends =
            from_plus->end == BranchEnd::Hopf &&
            std::abs(from_plus->end_param - pv.tau_minus) <= tol_minus;
        pv.endpoints_match = a_ends && b_ends;

        BranchTable ta(*from_minus), tb(*from_plus);
        bool agree = false;
        if (!ta.empty() && !tb.empty()) {
            const double lo = std::max(ta.lo(), tb.lo());
            const double hi = std::min(ta.hi(), tb.hi());
            if (hi > lo) {
                agree = true;
                double worst = 0.0;
                for (int k = 0; k <= 20; ++k) {
                    const double t = lo + (hi - lo) * (0.05 + 0.9 * k / 20.0);
                    const auto [Ta, Aa] = ta.at(t);
                    const auto [Tb, Ab] = tb.at(t);
                    const double gp = std::abs(Ta - Tb) / std::max(0.5 * (Ta + Tb), 1e-300);
                    const double ga = std::abs(Aa - Ab) / std::max(0.5 * (Aa + Ab), 1e-300);
                    worst = std::max({worst, gp, ga});
                }
                pv.max_overlap_gap = worst;
                // generous: interpolation between sparse trace points adds
                // curvature error on top of any genuine mismatch
                agree = worst < 0.05;
            } else {
                pv.note = "traced branches do not overlap in the parameter";
            }
        }
        pv.verdict = (agree && pv.endpoints_match) ? PairVerdict::Verdict::Coincident
                                                   : PairVerdict::Verdict::Inconclusive;
        rep.pairs.push_back(pv);
    }

    // strict nesting of the per-n anchor intervals
    rep.nested = !rep.pairs.empty();
    for (std::size_t k = 1; k < rep.pairs.size(); ++k) {
        const auto& a = rep.pairs[k - 1];
        const auto& b = rep.pairs[k];
        if (!(b.tau_minus > a.tau_minus && b.tau_plus < a.tau_plus))
            rep.nested = false;
    }
    if (rep.pairs.empty())
        rep.notes.push_back("no two-root catalog branches to pair");
    return rep;
}

ScaledPeriodVerdict scaled_period_check(const ModelParams& p, const Branch& branch, int n) {
    const Thresholds th = thresholds(p, 0.0);
    if (n < 1 || p.K >= th.K_0)
        throw HypothesisNotMet("the scaled-period interval needs K < K_0 and n >= 1");
    if (branch.axis != BranchAxis::Tau)
        throw HypothesisNotMet("the scaled-period interval applies to delay branches");
    ScaledPeriodVerdict v;
    v.min_ratio = 1e300;
    v.max_ratio = -1e300;
    v.pass = true;
    const double lo = 1.0 / (n + 1.0);
    const double hi = 1.0 / static_cast<double>(n);
    for (const auto& bp : branch.points) {
        if (bp.param <= 0.0)
            continue;
        const double ratio = bp.orbit.period / bp.param;
        v.min_ratio = std::min(v.min_ratio, ratio);
        v.max_ratio = std::max(v.max_ratio, ratio);
        ++v.checked;
        if (!(ratio > lo && ratio < hi))
            v.pass = false;
    }
    if (v.checked == 0)
        v.pass = false;
    return v;
}

// ---------------------------------------------------------------------------
// Single shooting with periodic replay history

ShootResult shooting_refine(const ModelParams& p, double tau, const Orbit& orbit,
                            double x_section, double dt) {
    if (!(orbit.period > 1.05 * tau))
        throw OutOfDomain("single shooting needs the period to exceed the delay");
    ShootResult res;
    res.y0 = orbit.samples.front().y;
    res.period = orbit.period;
    const double scale = std::max({orbit.amp_x(), orbit.amp_y(), 1e-300});

    History hist = tau > 0.0 ? history_from_orbit(orbit, tau)
                             : History::constant(orbit.samples.front());
    IntegrateOptions io;
    io.dt = dt;
    io.enforce_bounds = false;
    const int m = 1024;
    const double span = std::max(tau, 1e-12);

    // splice the replay history so it ends exactly at the section state
    auto spliced = [&](double y0) {
        std::vector<Vec2> vals(m + 1);
        for (int i = 0; i <= m; ++i)
            vals[i] = hist.eval(-span + span * i / m);
        vals[m] = {x_section, y0};
        return History::samples(0.0, span / m, std::move(vals));
    };

    for (int it = 0; it < 40; ++it) {
        const double hT = 1e-6 * res.period;
        const double hy = 1e-6 * std::max(std::abs(res.y0), scale);

        const Trajectory base = integrate(p, tau, spliced(res.y0), res.period + 2.0 * hT, io);
        const Vec2 end = base.eval(res.period);
        const double r1 = (end.x - x_section) / scale;
        const double r2 = (end.y - res.y0) / scale;
        res.residual = std::max(std::abs(r1), std::abs(r2));
        res.iters = it;
        if (res.residual < 1e-9) {
            res.converged = true;
            return res;
        }

        // finite-difference Jacobian of the return state w.r.t. (y0, T)
        const Trajectory by = integrate(p, tau, spliced(res.y0 + hy),
                                        res.period + 2.0 * hT, io);
        const Vec2 endy = by.eval(res.period);
        const Vec2 endT = base.eval(res.period + hT);

        const double j11 = ((endy.x - x_section) / scale - r1) / hy;
        const double j21 = ((endy.y - (res.y0 + hy)) / scale - r2) / hy;
        const double j12 = ((endT.x - x_section) / scale - r1) / hT;
        const double j22 = ((endT.y - res.y0) / scale - r2) / hT;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-300)
            break;
        const double dy = (-r1 * j22 + r2 * j12) / det;
        const double dT = (-j11 * r2 + j21 * r1) / det;
        res.y0 += dy;
        res.period += dT;
        if (!(res.period > 1.05 * tau) || !std::isfinite(res.y0))
            break;

        // refresh the replay history from the new trajectory's final loop
        if (tau > 0.0) {
            std::vector<Vec2> hv(m + 1);
            for (int i = 0; i <= m; ++i)
                hv[i] = base.eval(res.period - span + span * i / m);
            hist = History::samples(0.0, span / m, std::move(hv));
        }
    }
    return res;
}

} // namespace hopfdde
