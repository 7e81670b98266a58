#pragma once
#include <optional>
#include <vector>

#include "hopfdde/errors.hpp"

namespace hopfdde {

/// Parameters of the delayed predator-prey system
///   x' = r x (1 - x/K) - m x y / (a + x)
///   y' = -d y + c m e^{-d tau} x(t-tau) y(t-tau) / (a + x(t-tau))
struct ModelParams {
    double r; ///< prey intrinsic growth rate [1/time]
    double K; ///< carrying capacity [density]
    double m; ///< predation rate
    double a; ///< half-saturation constant [density]
    double c; ///< conversion efficiency
    double d; ///< predator death rate [1/time]
    bool c0_feasible; ///< c*m > d (first half of condition C0)
};

ModelParams validate_params(double r, double K, double m, double a, double c, double d);

/// Same params with a different carrying capacity (used by diagram sweeps).
ModelParams with_carrying_capacity(ModelParams p, double K);

/// beta(tau) = c m e^{-d tau}
double beta_of(const ModelParams& p, double tau);

struct Thresholds {
    double K_c; ///< ad/(cm-d): transcritical threshold of the ODE
    double K_0; ///< a(cm+d)/(cm-d): ODE Hopf threshold
    double K_2; ///< ad(3cm+d)/(c^2m^2-d^2): hexic-domain threshold
    std::optional<double> K_1;       ///< ad/(cme^{-d tau}-d), absent if cme^{-d tau} <= d
    std::optional<double> tau_max;   ///< (1/d) ln(Kcm/(ad+dK)), absent if argument <= 1
    std::optional<double> tau_bar;   ///< end of the w(tau) domain, present iff K > K_2
    std::optional<double> tau_breve; ///< root of H(tau)=0, present iff cm(K-a) > d(K+a)
};

Thresholds thresholds(const ModelParams& p, double tau);

enum class EqKind { Origin, PreyOnly, Interior };

struct Equilibrium {
    EqKind kind;
    double x;
    double y;
};

/// Origin and PreyOnly always; Interior iff cm > d and tau < tau_max.
std::vector<Equilibrium> equilibria(const ModelParams& p, double tau);

/// Interior equilibrium or nullopt when it does not exist.
std::optional<Equilibrium> interior_equilibrium(const ModelParams& p, double tau);

enum class OdeClass { PreyOnlyGAS, InteriorGAS, UniqueLimitCycle, Degenerate };

/// Classification of the tau=0 (ODE) system by K against K_c and K_0.
OdeClass ode_classification(const ModelParams& p);

} // namespace hopfdde
