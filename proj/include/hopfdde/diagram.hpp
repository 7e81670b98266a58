#pragma once
#include <array>
#include <optional>
#include <vector>

#include "hopfdde/spectral.hpp"

namespace hopfdde {

enum class CurveKind { Transcritical, Hopf };
enum class CurveTopology { Line, Loop, Unknown };

/// One bifurcation curve in the (tau, K) plane.
struct DiagramCurve {
    CurveKind kind = CurveKind::Transcritical;
    int n = -1; ///< Hopf angle-branch index; -1 for the transcritical curve
    std::vector<std::array<double, 2>> points; ///< ordered (tau, K)
    CurveTopology topology = CurveTopology::Unknown;
};

/// V_a: interior equilibrium unstable (oscillations possible).
/// V_b: interior equilibrium locally stable.
/// V_c: tau >= tau_max, prey-only equilibrium globally stable.
enum class RegionLabel { Va, Vb, Vc };

const char* region_name(RegionLabel l);

/// ell_n(tau, K) = tau w - theta_n evaluated at carrying capacity K.
/// Defined for K > K_2 and 0 <= tau <= tau_bar(K); OutOfDomain otherwise.
double ell_n(const ModelParams& p, double tau, double K, int n);

/// Transcritical curve K = K_1(tau) = ad/(cme^{-d tau} - d) on the given grid.
/// Grid entries past the domain end (cme^{-d tau} <= d) are dropped.
DiagramCurve transcritical_curve(const ModelParams& p,
                                 const std::vector<double>& tau_grid);

/// Hopf curve ell_n(tau, K) = 0 traced by predictor-corrector continuation
/// from a seed on the curve (|ell_n| <= 1e-6 required, else SeedNotOnCurve).
/// For n = 0 the natural seed is (0, K_0). Traces both directions from the
/// seed; stops at domain exits (Line) or on return to the seed (Loop).
DiagramCurve hopf_curve(const ModelParams& p, int n, std::array<double, 2> seed,
                        int max_steps = 4000);

/// A catalog-derived seed (tau_n^-, K) on the branch-n Hopf curve, found by
/// sampling carrying capacities up to K_hi (default 8 K_0). Empty when no
/// sampled K produces branch-n critical delays.
std::optional<std::array<double, 2>> hopf_curve_seed(const ModelParams& p, int n,
                                                     double K_hi = 0.0);

/// Region of the (tau, K) plane: V_c if tau >= tau_max (with tau_max = 0 when
/// the interior equilibrium never exists), else V_a if ell_0 > 0, V_b
/// otherwise (including where ell_0 is undefined).
RegionLabel classify_region(const ModelParams& p, double tau, double K);

/// Smallest positive root of ell_0(tau, K_0) = 0: the delay below which the
/// first Hopf threshold in K sits below K_0. Requires cm > (1 + sqrt 2) d.
double tau_star(const ModelParams& p);

/// Hopf thresholds in K at fixed tau: roots of ell_n(tau, K) = 0 over all n,
/// each verified by refining a characteristic root to |Re lambda| < 1e-8,
/// merged and sorted ascending. Scans K up to K_hi (default 8 K_0).
std::vector<double> hopf_in_K(const ModelParams& p, double tau, double K_hi = 0.0);

} // namespace hopfdde
