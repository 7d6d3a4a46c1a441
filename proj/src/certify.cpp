#include "spncs/certify.hpp"

#include "spncs/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace spncs {

void DesignConstants::validate() const {
    numerics::require_symmetric(P_s, "P_s");
    numerics::require_symmetric(P_f, "P_f");
    if (numerics::sym_eig_extremes(P_s).first <= 0.0 ||
        numerics::sym_eig_extremes(P_f).first <= 0.0) {
        throw ConstraintError("design constants: P_s and P_f must be positive definite");
    }
    if (!(gamma_s > 0.0 && gamma_f > 0.0)) {
        throw ConstraintError("design constants: gains must be positive");
    }
    if (!(lambda_star_s > proto_s.lambda && lambda_star_s < 1.0) ||
        !(lambda_star_f > proto_f.lambda && lambda_star_f < 1.0)) {
        throw ConstraintError("design constants: lambda_star must lie in (lambda, 1)");
    }
    if (!(a_rho_s > 0.0 && a_rho_f > 0.0)) {
        throw ConstraintError("design constants: a_rho must be positive");
    }
    if (L_s < 0.0 || L_f < 0.0 || L1 < 0.0 || L1_f < 0.0) {
        throw ConstraintError("design constants: growth/gradient constants must be nonnegative");
    }
}

namespace certify {
namespace {

using numerics::spectral_norm;
using numerics::sym_eig_extremes;

Matrix sym_block(const Matrix& top_left, const Matrix& top_right, const Matrix& bottom_right) {
    Matrix m(top_left.rows() + bottom_right.rows(), top_left.cols() + bottom_right.cols());
    m.topLeftCorner(top_left.rows(), top_left.cols()) = top_left;
    m.topRightCorner(top_right.rows(), top_right.cols()) = top_right;
    m.bottomLeftCorner(top_right.cols(), top_right.rows()) = top_right.transpose();
    m.bottomRightCorner(bottom_right.rows(), bottom_right.cols()) = bottom_right;
    return m;
}

}  // namespace

Matrix lmi_matrix(const ClosedLoop& cl, const DesignConstants& dc, LmiSide side) {
    dc.validate();
    const bool slow = side == LmiSide::Slow;
    const Matrix& P = slow ? dc.P_s : dc.P_f;
    const Matrix& A11l = slow ? cl.A11s : cl.A11f;
    const Matrix& A12l = slow ? cl.A12s : cl.A12f;
    const Matrix& AH = slow ? cl.A21s : cl.A21f;
    const double a_rho = slow ? dc.a_rho_s : dc.a_rho_f;
    const double gain = slow ? dc.gamma_s : dc.gamma_f;
    const double aw = slow ? dc.proto_s.a_w_lower : dc.proto_f.a_w_lower;

    if (P.rows() != A11l.rows()) {
        throw DimensionError("lmi_matrix: P does not match the reduced/boundary block");
    }
    const Matrix top = P * A11l + A11l.transpose() * P +
                       a_rho * Matrix::Identity(P.rows(), P.cols()) + AH.transpose() * AH;
    const Matrix br =
        (a_rho - gain * gain * aw * aw) * Matrix::Identity(A12l.cols(), A12l.cols());
    return sym_block(top, P * A12l, br);
}

LmiReport lmi_feasible(const ClosedLoop& cl, const DesignConstants& dc, double tol) {
    LmiReport r;
    const Matrix ms = lmi_matrix(cl, dc, LmiSide::Slow);
    const Matrix mf = lmi_matrix(cl, dc, LmiSide::Fast);
    r.lmax_slow = sym_eig_extremes(ms).second;
    r.lmax_fast = sym_eig_extremes(mf).second;
    r.slow_feasible = r.lmax_slow <= tol;
    r.fast_feasible = r.lmax_fast <= tol;
    return r;
}

LmiSearchResult lmi_perturbation_search(const ClosedLoop& cl, const DesignConstants& dc,
                                        LmiSide side, double rel_range, double tol,
                                        std::uint64_t seed, int max_draws) {
    LmiSearchResult res;
    res.perturbed = dc;
    SplitMix64 rng(seed);

    auto attempt = [&](const DesignConstants& cand) {
        const Matrix m = lmi_matrix(cl, cand, side);
        const double lmax = sym_eig_extremes(m).second;
        if (lmax <= tol) {
            res.found = true;
            res.lmax = lmax;
            res.perturbed = cand;
        }
        return res.found;
    };

    // Deterministic corners first: the gain alone often restores margin.
    const double corner[] = {1.0 + rel_range, 1.0 - rel_range};
    for (const double gscale : corner) {
        DesignConstants cand = dc;
        (side == LmiSide::Slow ? cand.gamma_s : cand.gamma_f) *= gscale;
        ++res.draws_used;
        if (attempt(cand)) return res;
    }
    for (int i = 0; i < max_draws; ++i) {
        DesignConstants cand = dc;
        Matrix& P = side == LmiSide::Slow ? cand.P_s : cand.P_f;
        for (Eigen::Index r = 0; r < P.rows(); ++r) {
            for (Eigen::Index c = r; c < P.cols(); ++c) {
                const double f = 1.0 + rng.next_in(-rel_range, rel_range);
                P(r, c) *= f;
                P(c, r) = P(r, c);
            }
        }
        (side == LmiSide::Slow ? cand.gamma_s : cand.gamma_f) *=
            1.0 + rng.next_in(-rel_range, rel_range);
        (side == LmiSide::Slow ? cand.a_rho_s : cand.a_rho_f) *=
            1.0 + rng.next_in(-rel_range, rel_range);
        ++res.draws_used;
        if (attempt(cand)) return res;
    }
    res.lmax = sym_eig_extremes(lmi_matrix(cl, dc, side)).second;
    return res;
}

ExponentialGains exponential_gains(const DesignConstants& dc) {
    dc.validate();
    ExponentialGains g;
    g.a_s = dc.a_rho_s * std::min(1.0, dc.proto_s.a_w_lower * dc.proto_s.a_w_lower);
    g.a_f = dc.a_rho_f * std::min(1.0, dc.proto_f.a_w_lower * dc.proto_f.a_w_lower);

    const auto [vs_lo, vs_hi] = sym_eig_extremes(dc.P_s);
    const auto [vf_lo, vf_hi] = sym_eig_extremes(dc.P_f);
    g.a_Us_lower = std::min(vs_lo, dc.gamma_s * dc.lambda_star_s * dc.proto_s.a_w_lower *
                                       dc.proto_s.a_w_lower);
    g.a_Us_upper = std::max(vs_hi, dc.gamma_s / dc.lambda_star_s * dc.proto_s.a_w_upper *
                                       dc.proto_s.a_w_upper);
    g.a_Uf_lower = std::min(vf_lo, dc.gamma_f * dc.lambda_star_f * dc.proto_f.a_w_lower *
                                       dc.proto_f.a_w_lower);
    g.a_Uf_upper = std::max(vf_hi, dc.gamma_f / dc.lambda_star_f * dc.proto_f.a_w_upper *
                                       dc.proto_f.a_w_upper);
    g.a_psi_s = 1.0 / std::sqrt(g.a_Us_lower);
    g.a_psi_f = 1.0 / std::sqrt(g.a_Uf_lower);
    return g;
}

InterconnectionConstants interconnection_constants(const ClosedLoop& cl,
                                                   const DesignConstants& dc) {
    dc.validate();
    InterconnectionConstants out;
    const double gl_s = dc.gamma_s / dc.lambda_star_s;
    const double gl_f = dc.gamma_f / dc.lambda_star_f;

    Matrix lb1(2, 2);
    lb1 << spectral_norm(dc.P_s * cl.A13), spectral_norm(dc.P_s * cl.A14),
        gl_s * dc.proto_s.a_w_upper * dc.L1 * spectral_norm(cl.A22),
        gl_s * dc.proto_s.a_w_upper * dc.L1 * spectral_norm(cl.A24);
    out.lambda_b1 = lb1;
    out.b1 = spectral_norm(lb1);

    // Fast-side coupling through the quasi-steady-state and fast-output
    // gradients, split into (x,e_s) x (y,e_f) and (y,e_f) x (y,e_f)
    // bilinear blocks.
    const Matrix PfAi = dc.P_f * cl.A33_inv;
    const Matrix m_x = cl.A31 * cl.A11s + cl.A32 * cl.A21s;
    const Matrix m_es = cl.A31 * cl.A12s + cl.A32 * cl.A22s;
    const Matrix m_y = cl.A31 * cl.A13 + cl.A32 * cl.A23;
    const Matrix m_ef = cl.A31 * cl.A14 + cl.A32 * cl.A24;
    const Matrix& K = cl.dk_dx;

    Matrix lb2(2, 2);
    lb2 << spectral_norm(PfAi * m_x), gl_f * dc.proto_f.a_w_upper * dc.L1_f * spectral_norm(K * cl.A11s),
        spectral_norm(PfAi * m_es), gl_f * dc.proto_f.a_w_upper * dc.L1_f * spectral_norm(K * cl.A12s);
    out.lambda_b2 = lb2;
    out.b2 = spectral_norm(lb2);

    const double d11 = spectral_norm(PfAi * m_y);
    const double d22 = gl_f * dc.proto_f.a_w_upper * dc.L1_f * spectral_norm(K * cl.A14);
    const double off =
        0.5 * (spectral_norm(PfAi * m_ef) + gl_f * dc.proto_f.a_w_upper * dc.L1_f * spectral_norm(K * cl.A13));
    Matrix lb3(2, 2);
    lb3 << d11, off, off, d22;
    out.lambda_b3 = lb3;
    out.b3 = sym_eig_extremes(lb3).second;
    return out;
}

std::pair<double, double> slow_jump_constants(const ClosedLoop& cl, const DesignConstants& dc) {
    dc.validate();
    const Matrix Ai_A32 = cl.A33_inv * cl.A32;
    const double aw = dc.proto_s.a_w_lower;
    const double lambda1 = spectral_norm(Ai_A32.transpose() * dc.P_f * Ai_A32) / (aw * aw);
    const double vf_lo = sym_eig_extremes(dc.P_f).first;
    const double lambda2 = 2.0 * spectral_norm(dc.P_f * Ai_A32) / (aw * std::sqrt(vf_lo));
    return {lambda1, lambda2};
}

double composite_weight(double lambda1, double lambda2, double gamma_s, double lambda_star_s,
                        double lambda_decay, double mu, double miati_s, WeightMode /*mode*/) {
    const double gl = gamma_s * lambda_star_s;
    const double a = lambda1 / gl;
    const double B = 0.5 * (lambda2 / gl + lambda2);
    const double c = 1.0 - lambda_decay * std::exp(mu * miati_s);
    if (c >= 0.0) {
        throw ConstraintError("composite_weight: lambda_decay too small (needs lambda e^{mu tau} > 1)");
    }
    if (a == 0.0 && B == 0.0) return 1.0;
    double u;
    if (a == 0.0) {
        u = -c / B;
    } else {
        u = (-B + std::sqrt(B * B - 4.0 * a * c)) / (2.0 * a);
    }
    return u * u;
}

double a_d_of(double d, double lambda1, double lambda2, double gamma_s, double lambda_star_s) {
    if (!(d > 0.0)) throw ConstraintError("a_d: d must be positive");
    const double gl = gamma_s * lambda_star_s;
    return 1.0 + lambda1 / gl * d + 0.5 * (lambda2 / gl + lambda2) * std::sqrt(d);
}

double epsilon_star(double d, double mu, double a_s, double a_f, double a_psi_s, double a_psi_f,
                    double b1, double b2, double b3) {
    const double head = a_s * a_psi_s * a_psi_s;
    if (!(mu > 0.0 && mu < head)) {
        throw ConstraintError("epsilon_star: need 0 < mu < a_s a_psi_s^2");
    }
    if (!(d > 0.0)) throw ConstraintError("epsilon_star: d must be positive");
    const double cross = (b1 + d * b2) * (b1 + d * b2) * a_psi_s * a_psi_s * a_psi_f * a_psi_f /
                         (4.0 * (head - mu));
    const double denom = a_psi_f / (a_f * d) * (cross + mu * d) + b3 * a_psi_f * a_psi_f / a_f;
    return 1.0 / denom;
}

std::pair<double, double> decay_constants(const Certificate& cert, double mati_s, double miati_s,
                                          double h1) {
    const double lam = cert.lambda_decay;
    if (!(lam > 0.0 && lam < 1.0)) {
        throw ConstraintError("decay_constants: lambda_decay must lie in (0,1)");
    }
    const double aU_lo = std::min(cert.gains.a_Us_lower, cert.d_star * cert.gains.a_Uf_lower);
    const double aU_hi = std::max(cert.gains.a_Us_upper, cert.d_star * cert.gains.a_Uf_upper);
    const double log_inv = std::log(1.0 / lam);
    const double c1 = h1 * h1 * std::sqrt(cert.a_d * aU_hi / (lam * aU_lo)) *
                      std::exp(log_inv * miati_s / (4.0 * mati_s));
    const double c2 = log_inv / (4.0 * mati_s) * std::min(1.0, miati_s);
    return {c1, c2};
}

double coordinate_change_constant(const ClosedLoop& cl) {
    Matrix h(cl.Hx.rows(), cl.Hx.cols() + cl.He.cols());
    h << cl.Hx, cl.He;
    return 1.0 + spectral_norm(h);
}

Certificate build_certificate(const ClosedLoop& cl, const DesignConstants& dc, double miati_s,
                              double mati_s, const CertifyOptions& opts) {
    dc.validate();
    Certificate cert;
    cert.miati_s = miati_s;
    cert.mati_s = mati_s;
    cert.mati_s_bound = mati::mati_bound(dc.slow_mati_params());
    cert.mati_f_bound_fast_time = mati::mati_bound(dc.fast_mati_params());
    if (mati_s > cert.mati_s_bound) {
        throw ConstraintError("certificate: mati_s exceeds the transmission-interval bound");
    }
    cert.gains = exponential_gains(dc);

    const auto inter = interconnection_constants(cl, dc);
    cert.b1 = inter.b1;
    cert.b2 = inter.b2;
    cert.b3 = inter.b3;
    std::tie(cert.lambda1, cert.lambda2) = slow_jump_constants(cl, dc);

    const double mu_head = cert.gains.a_s * cert.gains.a_psi_s * cert.gains.a_psi_s;
    cert.mu = opts.mu_override.value_or(opts.mu_fraction * mu_head);
    if (!(cert.mu > 0.0 && cert.mu < mu_head)) {
        throw ConstraintError("certificate: mu outside (0, a_s a_psi_s^2)");
    }
    cert.lambda_decay =
        opts.lambda_decay_override.value_or(std::exp(-0.5 * cert.mu * miati_s));
    if (!(cert.lambda_decay > std::exp(-cert.mu * miati_s) && cert.lambda_decay < 1.0)) {
        throw ConstraintError("certificate: lambda_decay outside (e^{-mu tau_miati_s}, 1)");
    }

    cert.d_star = composite_weight(cert.lambda1, cert.lambda2, dc.gamma_s, dc.lambda_star_s,
                                   cert.lambda_decay, cert.mu, miati_s, WeightMode::UGES);
    cert.a_d = a_d_of(cert.d_star, cert.lambda1, cert.lambda2, dc.gamma_s, dc.lambda_star_s);
    cert.epsilon_star = epsilon_star(cert.d_star, cert.mu, cert.gains.a_s, cert.gains.a_f,
                                     cert.gains.a_psi_s, cert.gains.a_psi_f, cert.b1, cert.b2,
                                     cert.b3);
    cert.h1 = coordinate_change_constant(cl);
    std::tie(cert.c1, cert.c2) = decay_constants(cert, mati_s, miati_s, cert.h1);
    return cert;
}

LyapunovSplit lyapunov_U(const ClosedLoop& cl, const DesignConstants& dc, const Certificate& cert,
                         const HybridState& y_state, const ProtocolSpec& proto_s,
                         const ProtocolSpec& proto_f) {
    if (y_state.x.size() != cl.n_x() || y_state.e_s.size() != cl.n_es() ||
        y_state.z.size() != cl.n_z() || y_state.e_f.size() != cl.n_ef()) {
        throw DimensionError("lyapunov_U: state does not match the closed loop");
    }
    if (y_state.tau_s > cert.mati_s_bound * (1.0 + 1e-9)) {
        throw ClockRangeError("lyapunov_U: tau_s beyond the slow clock-function domain");
    }
    if (y_state.tau_f > cert.mati_f_bound_fast_time * (1.0 + 1e-9)) {
        throw ClockRangeError("lyapunov_U: tau_f beyond the fast clock-function domain");
    }
    LyapunovSplit u;
    const double ws = protocols::protocol_lyapunov(proto_s, y_state.kappa_s, y_state.e_s);
    const double wf = protocols::protocol_lyapunov(proto_f, y_state.kappa_f, y_state.e_f);
    const double phi_s = mati::phi_eval({dc.slow_mati_params()}, std::min(y_state.tau_s, cert.mati_s_bound));
    const double phi_f =
        mati::phi_eval({dc.fast_mati_params()}, std::min(y_state.tau_f, cert.mati_f_bound_fast_time));
    u.U_s = (y_state.x.transpose() * dc.P_s * y_state.x).value() + dc.gamma_s * phi_s * ws * ws;
    u.U_f = (y_state.z.transpose() * dc.P_f * y_state.z).value() + dc.gamma_f * phi_f * wf * wf;
    u.U = u.U_s + cert.d_star * u.U_f;
    return u;
}

MonitorReport monitor_trajectory(const HybridTrajectory& traj, const ClosedLoop& cl,
                                 const ClockConfig& cfg, const DesignConstants& dc,
                                 const Certificate& cert, const ProtocolSpec& proto_s,
                                 const ProtocolSpec& proto_f, const MonitorOptions& opts) {
    MonitorReport rep;
    rep.sample_count = traj.samples.size();
    rep.envelope_worst_margin = std::numeric_limits<double>::infinity();
    if (traj.samples.empty()) return rep;

    const auto& first = traj.samples.front();
    if (first.state.x.size() != cl.n_x() || first.state.e_s.size() != cl.n_es() ||
        first.state.z.size() != cl.n_z() || first.state.e_f.size() != cl.n_ef()) {
        throw ScenarioMismatchError("monitor: trajectory does not match the closed loop");
    }

    auto distance = [](const HybridState& s) {
        return std::sqrt(s.x.squaredNorm() + s.e_s.squaredNorm() + s.z.squaredNorm() +
                         s.e_f.squaredNorm());
    };
    auto U_of = [&](const HybridState& s) {
        return lyapunov_U(cl, dc, cert, hybridsim::to_y_coords(cl, s), proto_s, proto_f).U;
    };

    rep.initial_distance = distance(first.state);
    std::uint64_t slow_count = 0;

    double prev_U = U_of(first.state);
    double seg_t0 = first.t;
    double seg_U0 = prev_U;

    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
        const auto& s = traj.samples[i];
        const double U = U_of(s.state);

        if (s.event == EventKind::FastJump || s.event == EventKind::SlowJump) {
            if (i == 0 || traj.samples[i - 1].t != s.t) {
                throw ScenarioMismatchError("monitor: jump sample without a landing sample");
            }
            const double bound = s.event == EventKind::FastJump
                                     ? prev_U * (1.0 + opts.slack_rel) + opts.slack_abs
                                     : cert.a_d * prev_U * (1.0 + opts.slack_rel) + opts.slack_abs;
            if (U > bound) {
                rep.violations.push_back({s.t, s.j,
                                          s.event == EventKind::FastJump ? "fast_jump" : "slow_jump",
                                          U - bound});
            }
            if (s.event == EventKind::FastJump) {
                ++rep.fast_jumps;
            } else {
                ++rep.slow_jumps;
                ++slow_count;
            }
            if (s.t > seg_t0 && seg_U0 > 1e-300 && prev_U > 1e-300) {
                rep.segment_rates.push_back(
                    {seg_t0, s.t, -(std::log(prev_U) - std::log(seg_U0)) / (s.t - seg_t0)});
            }
            seg_t0 = s.t;
            seg_U0 = U;
        }

        const double dist = distance(s.state);
        const double envelope =
            cert.c1 * rep.initial_distance *
                std::exp(-cert.c2 * (s.t + static_cast<double>(slow_count))) +
            opts.practical_offset_nu;
        if (dist > envelope * (1.0 + opts.slack_rel) + opts.slack_abs) {
            rep.violations.push_back({s.t, s.j, "envelope", dist - envelope});
        }
        if (dist > 1e-300) {
            rep.envelope_worst_margin = std::min(rep.envelope_worst_margin, envelope / dist);
        }
        prev_U = U;
    }
    (void)cfg;
    return rep;
}

DesignConstants example_design_constants() {
    DesignConstants dc;
    dc.P_s = (Matrix(2, 2) << 54.91, -1.76, -1.76, 1.81).finished();
    dc.P_f = (Matrix(2, 2) << 1.12, 0.018, 0.018, 0.65).finished();
    dc.gamma_s = 2.58;
    dc.lambda_star_s = 0.33;
    dc.a_rho_s = 1.16;
    dc.gamma_f = 0.64;
    dc.lambda_star_f = 0.46;
    dc.a_rho_f = 0.41;
    dc.L_s = 0.0;
    dc.L_f = 0.0;
    dc.proto_s = {0.0, 1.0, 1.0};
    dc.proto_f = {0.0, 1.0, 1.0};
    dc.L1 = 1.0;
    dc.L1_f = 1.0;
    return dc;
}

Matrix example_lambda_b1_matrix() {
    const double a2 = 0.2, a6 = 0.37, k = 1.5;
    const double p11 = 54.91, p12 = 1.76, p22 = 1.81;
    const double gl = 2.58 / 0.33;
    Matrix m(3, 3);
    m << a2 * p11, a6 * p12, 0.0,
         a2 * p12, 0.0, a6 * p22,
         0.0, gl * a6 * k, gl * a6 * k;
    return 2.0 * m;
}

ExampleFixture example_fixture() {
    ExampleFixture f;
    f.plant = ltimodel::example_plant();
    f.controller = ltimodel::example_controller();
    f.design = example_design_constants();
    f.proto_s = {ProtocolKind::ResetAll, NodePartition::scalar_nodes(1)};
    f.proto_f = {ProtocolKind::ResetAll, NodePartition::scalar_nodes(1)};
    return f;
}

}  // namespace certify
}  // namespace spncs
