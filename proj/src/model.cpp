#include "hopfdde/model.hpp"

#include <cmath>
#include <string>

namespace hopfdde {

ModelParams validate_params(double r, double K, double m, double a, double c, double d) {
    auto check = [](double v, const char* name) {
        if (!(v > 0.0) || !std::isfinite(v))
            throw NonPositiveParameter(std::string(name) + " must be strictly positive");
    };
    check(r, "r");
    check(K, "K");
    check(m, "m");
    check(a, "a");
    check(c, "c");
    check(d, "d");
    return ModelParams{r, K, m, a, c, d, c * m > d};
}

ModelParams with_carrying_capacity(ModelParams p, double K) {
    if (!(K > 0.0) || !std::isfinite(K))
        throw NonPositiveParameter("K must be strictly positive");
    p.K = K;
    return p;
}

double beta_of(const ModelParams& p, double tau) {
    return p.c * p.m * std::exp(-p.d * tau);
}

Thresholds thresholds(const ModelParams& p, double tau) {
    if (!p.c0_feasible)
        throw ConditionC0Violated("thresholds require c*m > d");
    const double cm = p.c * p.m;
    Thresholds t;
    t.K_c = p.a * p.d / (cm - p.d);
    t.K_0 = p.a * (cm + p.d) / (cm - p.d);
    t.K_2 = p.a * p.d * (3.0 * cm + p.d) / (cm * cm - p.d * p.d);

    const double beta = beta_of(p, tau);
    if (beta > p.d)
        t.K_1 = p.a * p.d / (beta - p.d);

    const double arg_max = p.K * cm / (p.a * p.d + p.d * p.K);
    if (arg_max > 1.0)
        t.tau_max = std::log(arg_max) / p.d;

    if (p.K > t.K_2) {
        // Unique root of L(tau) + d H(tau) = 0 in closed form (quadratic in K beta).
        const double s = std::sqrt(9.0 * p.a * p.a + 4.0 * p.a * p.K + 4.0 * p.K * p.K);
        const double arg_bar = (cm * s - 3.0 * p.a * cm) / (2.0 * (p.a * p.d + p.d * p.K));
        if (arg_bar > 1.0)
            t.tau_bar = std::log(arg_bar) / p.d;
        else
            t.tau_bar = 0.0; // K > K_2 guarantees arg_bar > 1; keep a defined value
    }

    if (p.K > p.a && cm * (p.K - p.a) > p.d * (p.K + p.a))
        t.tau_breve = std::log(cm * (p.K - p.a) / (p.d * (p.K + p.a))) / p.d;

    return t;
}

std::optional<Equilibrium> interior_equilibrium(const ModelParams& p, double tau) {
    const double beta = beta_of(p, tau);
    if (beta <= p.d)
        return std::nullopt;
    const double xs = p.a * p.d / (beta - p.d);
    const double num = p.K * beta - p.K * p.d - p.d * p.a;
    if (num <= 0.0) // equivalent to tau >= tau_max (or K <= K_1)
        return std::nullopt;
    const double ys = p.r * p.c * std::exp(-p.d * tau) * p.a * num /
                      (p.K * (beta - p.d) * (beta - p.d));
    return Equilibrium{EqKind::Interior, xs, ys};
}

std::vector<Equilibrium> equilibria(const ModelParams& p, double tau) {
    std::vector<Equilibrium> out;
    out.push_back({EqKind::Origin, 0.0, 0.0});
    out.push_back({EqKind::PreyOnly, p.K, 0.0});
    if (auto e = interior_equilibrium(p, tau))
        out.push_back(*e);
    return out;
}

OdeClass ode_classification(const ModelParams& p) {
    if (!p.c0_feasible)
        throw ConditionC0Violated("ode_classification requires c*m > d");
    const Thresholds t = thresholds(p, 0.0);
    const double rel = 1e-12;
    if (std::abs(p.K - t.K_c) <= rel * t.K_c || std::abs(p.K - t.K_0) <= rel * t.K_0)
        return OdeClass::Degenerate;
    if (p.K < t.K_c)
        return OdeClass::PreyOnlyGAS;
    if (p.K < t.K_0)
        return OdeClass::InteriorGAS;
    return OdeClass::UniqueLimitCycle;
}

} // namespace hopfdde
