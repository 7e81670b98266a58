#pragma once
#include <complex>
#include <optional>
#include <vector>

#include "hopfdde/model.hpp"

namespace hopfdde {

/// Coefficients of the characteristic equation at the interior equilibrium,
///   P(lambda, tau) = lambda^2 + (d - H) lambda + e^{-lambda tau} (-d lambda + L) - d H,
/// plus the purely-imaginary-root data when it exists (K > K_2, tau <= tau_bar).
struct SpectralProfile {
    double tau = 0.0;
    double H = 0.0;
    double L = 0.0;
    double A = 0.0;
    std::optional<double> w;      ///< positive root of the quartic in w^2
    std::optional<double> sin_tw; ///< required sin(tau w) for P(iw)=0
    std::optional<double> cos_tw; ///< required cos(tau w) for P(iw)=0
};

/// H, L, A at tau. Requires cm > d and 0 <= tau < tau_max.
void hla(const ModelParams& p, double tau, double& H, double& L, double& A);

SpectralProfile spectral_profile(const ModelParams& p, double tau);

/// w(tau) = sqrt((sqrt(H^4 - 4 d^2 H^2 + 4 L^2) - H^2)/2). Requires K > K_2, 0 <= tau <= tau_bar.
double omega(const ModelParams& p, double tau);

/// theta_n(tau) = +/- arccos(cos expression) + 2 n pi, sign from the sin expression.
double theta_n(const ModelParams& p, double tau, int n);

/// S_n(tau) = tau - theta_n(tau)/w(tau); -inf sentinel at w == 0.
double s_n(const ModelParams& p, double tau, int n);

struct HopfPoint {
    int n;         ///< angle-branch index (>= 0)
    int i;         ///< 1-based ordinal within the branch
    double tau;    ///< critical delay
    double w;      ///< crossing frequency
    double period; ///< 2 pi / w
    double theta;  ///< tau * w
    int delta;     ///< sign of d/dtau [tau w - theta_n]; 0 = tangential
    int gamma1;    ///< first crossing number, -delta
};

struct HopfCatalog {
    std::vector<std::vector<HopfPoint>> branches; ///< branches[n] sorted by tau
    std::vector<int> chi;                         ///< chi[n] = branches[n].size()
    std::optional<double> zeta;                   ///< min of theta_0 over [0,tau_bar] (K < K_0 only)
    double M = 0.0;                               ///< max of tau*w over [0,tau_bar]
    int N_bound = -1;                             ///< largest N with (2N+1)pi < M; -1 if M <= pi
    double tau_bar = 0.0;

    std::vector<HopfPoint> all() const; ///< flattened, sorted by (n, tau)
};

/// Enumerate all Hopf critical delays by scanning S_n sign changes on a uniform grid.
HopfCatalog hopf_points(const ModelParams& p, int grid = 4096);

/// P(lambda, tau).
std::complex<double> char_poly(const ModelParams& p, double tau, std::complex<double> lambda);

/// Newton refinement of a characteristic root from a seed; |P| < 1e-10 at the result.
std::complex<double> char_root_refine(const ModelParams& p, double tau, std::complex<double> seed);

/// Number of characteristic roots with Re > 0, via argument-principle contour counting.
int unstable_root_count(const ModelParams& p, double tau);

} // namespace hopfdde
