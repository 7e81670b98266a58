#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hopfdde/integrate.hpp"
#include "hopfdde/model.hpp"
#include "hopfdde/spectral.hpp"

namespace hopfdde {

// ---------------------------------------------------------------------------
// Periodic collocation: piecewise Lagrange polynomials of fixed degree on a
// uniform mesh over one normalized period, collocated at Gauss points.

/// Periodic profile u(phase) on [0,1): Nm intervals, degree deg, nodes at
/// interval_start + (k/deg)*h for k = 0..deg-1.
struct PeriodicProfile {
    int Nm = 0;
    int deg = 4;
    std::vector<Vec2> U; ///< Nm*deg nodes

    int nodes() const { return Nm * deg; }
    double node_phase(int g) const { return static_cast<double>(g) / nodes(); }
    /// Global node index of interval j, local Lagrange node k (k == deg wraps).
    int idx(int j, int k) const { return k < deg ? j * deg + k : ((j + 1) % Nm) * deg; }
    Vec2 eval(double s) const;
    /// Value and phase-derivative at phase s.
    void eval_both(double s, Vec2& v, Vec2& dv) const;
    /// Resample this profile onto a finer/coarser uniform mesh.
    PeriodicProfile resampled(int new_Nm) const;
};

/// Lagrange value and derivative weights at local coordinate t for nodes k/deg.
void lagrange_weights(int deg, double t, double* w, double* dw);

struct CollocOptions {
    int max_iter = 30;
    double tol = 3e-10; ///< max-norm of the nondimensionalized residual
};

/// Pseudo-arclength constraint in a weighted metric: the solution must satisfy
/// dot(zhat_w, weights*(z - z_pred)) = 0, where z = (U nodes..., T, tau).
struct ArclengthConstraint {
    std::vector<double> zhat_w;  ///< normalized tangent in the weighted metric
    std::vector<double> z_pred;  ///< predictor point
    std::vector<double> weights; ///< per-unknown metric weights
    double ds = 0.0;
};

struct CollocSolution {
    PeriodicProfile profile;
    double T = 0.0;
    double tau = 0.0;
    bool converged = false;
    double residual = 0.0; ///< final nondimensionalized residual (max norm)
    int iters = 0;
};

/// Newton solve of the periodic collocation system. With arc == nullptr, tau is
/// held fixed and the unknowns are (U, T); with an arclength constraint, tau
/// joins the unknowns. The phase is pinned by integral orthogonality to the
/// initial guess. Jacobians are analytic; rows are nondimensionalized by the
/// reference profile's derivative scale.
CollocSolution solve_collocation(const ModelParams& p, double tau,
                                 const PeriodicProfile& guess, double T0,
                                 const ArclengthConstraint* arc = nullptr,
                                 const CollocOptions& opt = {});

/// Finite-difference cross-check hook for the analytic Jacobian (max relative
/// entry error on a random perturbation); used by the test suite.
double collocation_jacobian_fd_error(const ModelParams& p, double tau,
                                     const PeriodicProfile& guess, double T0,
                                     bool free_tau);

// ---------------------------------------------------------------------------
// Branch tracing

enum class BranchAxis { Tau, CarryingCapacity };
enum class TraceMethod { SimulationContinuation, ShootingNewton, CollocationNewton };
enum class AnchorKind { Hopf, OdeLimitCycle };
enum class BranchEnd { Hopf, Lost, DomainBoundary };

struct Anchor {
    AnchorKind kind = AnchorKind::Hopf;
    HopfPoint hopf{}; ///< valid when kind == Hopf

    static Anchor at_hopf(const HopfPoint& h) { return {AnchorKind::Hopf, h}; }
    static Anchor ode_cycle() { return {AnchorKind::OdeLimitCycle, {}}; }
};

struct BranchPoint {
    double param = 0.0; ///< tau along the branch
    Orbit orbit;
};

struct StepPolicy {
    TraceMethod method = TraceMethod::CollocationNewton;
    // collocation stepping
    double ds0 = 0.02;
    double ds_max = 0.25;
    double ds_min = 1e-6;
    int mesh = 48;        ///< initial interval count
    int mesh_max = 160;   ///< escalation ceiling
    int degree = 4;
    double amp_end_rel = 2e-3; ///< relative amplitude treated as branch closure
    int max_points = 20000;
    // simulation stepping
    double dtau0 = 0.0;     ///< 0 picks tau_bar/400
    double sim_dt = 0.0;    ///< 0 picks the integrator default
    double sim_periods = 60.0; ///< integration length per step, in orbit periods
    int sample_stride = 8;  ///< keep orbit samples on every k-th stored point
};

struct Branch {
    BranchAxis axis = BranchAxis::Tau;
    TraceMethod method = TraceMethod::CollocationNewton;
    Anchor start;
    BranchEnd end = BranchEnd::Lost;
    std::optional<HopfPoint> end_hopf; ///< matched catalog point when end == Hopf
    double end_param = 0.0; ///< termination parameter (amplitude-vanishing fit for Hopf ends)
    double end_period = 0.0; ///< period at/near the endpoint
    bool fold_back = false; ///< parameter direction reversed at least once
    std::vector<BranchPoint> points;
    std::string note;
};

/// Traces the periodic-orbit branch through the anchor at carrying capacity K.
Branch trace_branch(const ModelParams& p, double K, const Anchor& anchor,
                    const StepPolicy& policy = {});

// ---------------------------------------------------------------------------
// Component assembly and lemma checks

struct PairVerdict {
    int n = 0;
    double tau_minus = 0.0, tau_plus = 0.0; ///< catalog anchors
    enum class Verdict { Coincident, Inconclusive } verdict = Verdict::Inconclusive;
    double max_overlap_gap = 0.0; ///< worst relative disagreement on the overlap
    bool endpoints_match = false;
    std::string note;
};

struct ComponentReport {
    std::vector<PairVerdict> pairs;
    bool nested = false;
    std::vector<std::string> notes;
};

/// Pairs branches by their anchor's branch index n and checks coincidence
/// (5% agreement on the overlap, endpoints at each other's anchors) and
/// nesting of the per-n parameter intervals.
ComponentReport assemble_components(const ModelParams& p,
                                    const std::vector<Branch>& branches);

struct ScaledPeriodVerdict {
    bool pass = false;
    double min_ratio = 0.0, max_ratio = 0.0;
    std::size_t checked = 0;
};

/// Verifies T(tau)/tau in (1/(n+1), 1/n) along the branch (requires K < K_0, n >= 1).
ScaledPeriodVerdict scaled_period_check(const ModelParams& p, const Branch& branch, int n);

// ---------------------------------------------------------------------------
// Single-shooting refinement (periodic replay history), used as an independent
// certifier for stable orbits with period exceeding the delay.

struct ShootResult {
    double y0 = 0.0;
    double period = 0.0;
    double residual = 0.0;
    int iters = 0;
    bool converged = false;
};

ShootResult shooting_refine(const ModelParams& p, double tau, const Orbit& orbit,
                            double x_section, double dt = 0.0);

} // namespace hopfdde
