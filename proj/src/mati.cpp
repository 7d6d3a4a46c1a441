#include "spncs/mati.hpp"

#include <algorithm>
#include <cmath>

namespace spncs {

void MatiParams::validate() const {
    if (!(gamma > 0.0)) {
        throw MatiDomainError("mati: gamma must be positive");
    }
    if (!(lambda_star > 0.0 && lambda_star < 1.0)) {
        throw MatiDomainError("mati: lambda_star must lie in (0,1)");
    }
    if (!(L >= 0.0)) {
        throw MatiDomainError("mati: L must be nonnegative");
    }
}

namespace mati {
namespace {

enum class Branch { GammaAboveL, GammaEqualL, GammaBelowL, Lzero };

Branch select_branch(const MatiParams& p) {
    if (p.L == 0.0) return Branch::Lzero;
    if (std::abs(p.gamma - p.L) <= 1e-9 * std::max(p.gamma, p.L)) return Branch::GammaEqualL;
    return p.gamma > p.L ? Branch::GammaAboveL : Branch::GammaBelowL;
}

double acoth(double x) { return std::atanh(1.0 / x); }

}  // namespace

double mati_bound(const MatiParams& p) {
    p.validate();
    const double lam = p.lambda_star;
    switch (select_branch(p)) {
        case Branch::Lzero:
            return (std::atan(1.0 / lam) - std::atan(lam)) / p.gamma;
        case Branch::GammaEqualL:
            return (1.0 - lam) / (1.0 + lam) / p.L;
        case Branch::GammaAboveL: {
            const double r = std::sqrt((p.gamma / p.L) * (p.gamma / p.L) - 1.0);
            const double arg =
                r * (1.0 - lam) / (2.0 * (lam / (1.0 + lam)) * (p.gamma / p.L - 1.0) + 1.0 + lam);
            return std::atan(arg) / (p.L * r);
        }
        case Branch::GammaBelowL: {
            const double r = std::sqrt(1.0 - (p.gamma / p.L) * (p.gamma / p.L));
            const double arg =
                r * (1.0 - lam) / (2.0 * (lam / (1.0 + lam)) * (p.gamma / p.L - 1.0) + 1.0 + lam);
            return std::atanh(arg) / (p.L * r);
        }
    }
    return 0.0;
}

double phi_eval(const PhiClock& clock, double tau) {
    const MatiParams& p = clock.params;
    p.validate();
    if (tau < 0.0) {
        throw MatiDomainError("phi_eval: tau must be nonnegative");
    }
    const double phi0 = clock.value_at_zero();
    if (tau == 0.0) return phi0;
    switch (select_branch(p)) {
        case Branch::Lzero:
            return std::tan(std::atan(phi0) - p.gamma * tau);
        case Branch::GammaEqualL:
            // phi' = -gamma (phi + 1)^2
            return -1.0 + 1.0 / (1.0 / (phi0 + 1.0) + p.gamma * tau);
        case Branch::GammaAboveL: {
            const double s = std::sqrt(p.gamma * p.gamma - p.L * p.L);
            const double x0 = (p.gamma * phi0 + p.L) / s;
            const double x = std::tan(std::atan(x0) - s * tau);
            return (s * x - p.L) / p.gamma;
        }
        case Branch::GammaBelowL: {
            const double s = std::sqrt(p.L * p.L - p.gamma * p.gamma);
            const double x0 = (p.gamma * phi0 + p.L) / s;
            // phi0 > 0 puts x0 above both equilibria, so the coth branch applies.
            const double x = 1.0 / std::tanh(s * tau + acoth(x0));
            return (s * x - p.L) / p.gamma;
        }
    }
    return 0.0;
}

double phi_crossing_time(const PhiClock& clock) {
    const MatiParams& p = clock.params;
    p.validate();
    const double target = p.lambda_star;

    double hi = mati_bound(p);
    double lo = 0.0;
    // Guard the bracket: phi is strictly decreasing, phi(0) = 1/lam > lam.
    while (phi_eval(clock, hi) > target) hi *= 1.0 + 1e-9;
    for (int it = 0; it < 200 && (hi - lo) > 1e-15 * std::max(1.0, hi); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (phi_eval(clock, mid) > target) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

}  // namespace mati
}  // namespace spncs
