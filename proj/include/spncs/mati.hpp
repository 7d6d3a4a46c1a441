#pragma once

#include <stdexcept>

namespace spncs {

/// Inputs of the transmission-interval bound: growth constant L of the
/// error dynamics, L2 gain gamma, and the protocol contraction margin
/// lambda_star in (0,1).
struct MatiParams {
    double L = 0.0;
    double gamma = 1.0;
    double lambda_star = 0.5;

    void validate() const;
};

struct MatiDomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Clock function phi with phi(0) = 1/lambda_star, strictly decreasing,
/// solving phi' = -2 L phi - gamma (phi^2 + 1).
struct PhiClock {
    MatiParams params;

    double value_at_zero() const { return 1.0 / params.lambda_star; }
};

namespace mati {

/// Largest transmission interval for which phi stays >= lambda_star.
/// Piecewise closed form, branch selected by the sign of gamma - L
/// (relative band 1e-9 treats gamma == L).
double mati_bound(const MatiParams& p);

/// phi(tau) by the closed-form solution of the Riccati clock ODE, on the
/// same branch split as mati_bound.
double phi_eval(const PhiClock& clock, double tau);

/// The tau with phi(tau) = lambda_star, found by bisection on phi_eval.
/// Agrees with mati_bound to 1e-8 relative.
double phi_crossing_time(const PhiClock& clock);

}  // namespace mati
}  // namespace spncs
