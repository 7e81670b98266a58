#pragma once

#include <optional>
#include <vector>

#include "hopfdde/errors.hpp"
#include "hopfdde/model.hpp"

namespace hopfdde {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

/// Right-hand side of the delayed system; cur is the state at t, del at t - tau.
Vec2 system_rhs(const ModelParams& p, double tau, Vec2 cur, Vec2 del);

/// Initial data on [t0 - span, t0]; evaluation clamps outside the domain.
class History {
public:
    static History constant(Vec2 v);
    /// Piecewise-cubic Hermite data on a uniform grid ending at t0.
    static History cubic(double t0, double dt, std::vector<Vec2> v, std::vector<Vec2> f);
    /// Values only; derivatives are filled in by centered differences.
    static History samples(double t0, double dt, std::vector<Vec2> v);

    Vec2 eval(double t) const;
    double t0() const { return t0_; }
    double span() const;
    Vec2 back() const; ///< value at t0
    double max_x() const;
    double max_y() const;

private:
    bool constant_ = true;
    Vec2 cval_{};
    double t0_ = 0.0;
    double dt_ = 0.0;
    std::vector<Vec2> v_, f_;
};

/// Dense solution on a uniform grid with cubic Hermite interpolation between nodes.
class Trajectory {
public:
    double t0 = 0.0;
    double dt = 0.0;
    std::vector<Vec2> v; ///< node values
    std::vector<Vec2> f; ///< node derivatives

    double t_end() const { return t0 + dt * (static_cast<double>(v.size()) - 1.0); }
    Vec2 eval(double t) const;
    Vec2 deriv(double t) const;
    /// Final stretch of length >= span packaged as initial data for a follow-on run.
    History tail_history(double span) const;
};

struct IntegrateOptions {
    double dt = 0.0;           ///< <= 0 picks the default step
    bool enforce_bounds = true; ///< online positivity and upper-bound checks
};

/// Default step: tau/200 (unscaled) or 1/400 (scaled), capped by the local rate scale.
double default_dt(const ModelParams& p, double tau, bool scaled);

/// Method-of-steps RK4 for the delayed system; tau = 0 integrates the plain ODE.
/// History covers [-tau, 0] (constant histories always qualify).
Trajectory integrate(const ModelParams& p, double tau, const History& history,
                     double t_end, const IntegrateOptions& opt = {});

/// Same dynamics rescaled to unit delay: time in units of tau, RHS multiplied by tau.
Trajectory integrate_scaled(const ModelParams& p, double tau, const History& history,
                            double t_end, const IntegrateOptions& opt = {});

struct Orbit {
    double period = 0.0;
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    std::vector<Vec2> samples; ///< uniform-in-time samples over one period
    enum class Stability { Stable, Unknown } stability = Stability::Unknown;
    double closure = 0.0; ///< relative mismatch of the section return (or Newton residual)

    double amp_x() const { return xmax - xmin; }
    double amp_y() const { return ymax - ymin; }
};

enum class AttractorKind { Equilibrium, Orbit, Unresolved };

struct AttractorInfo {
    AttractorKind kind = AttractorKind::Unresolved;
    std::optional<Equilibrium> equilibrium; ///< set when kind == Equilibrium
    double amp = 0.0;                       ///< tail oscillation amplitude (max over components)
    double period_estimate = 0.0;           ///< set when kind == Orbit
};

/// Classifies the trailing tail_fraction of a trajectory.
AttractorInfo detect_attractor(const ModelParams& p, double tau, const Trajectory& traj,
                               double tail_fraction = 0.4);

/// Poincare section x = x_section with dx/dt > 0; period from the last 10 returns.
Orbit extract_orbit(const ModelParams& p, double tau, const Trajectory& traj,
                    double x_section, double tail_fraction = 0.4);

/// Energy-style functional of the unit-delay system evaluated at time t
/// (requires the window [t-1, t] inside the trajectory).
double lyapunov_value(const ModelParams& p, double tau, const Trajectory& traj, double t);

} // namespace hopfdde
