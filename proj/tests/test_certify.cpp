#include "spncs/certify.hpp"

#include "spncs/scenario.hpp"
#include "test_helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace spncs;
using namespace spncs::certify;

namespace {

struct Fixture {
    ExampleFixture fx = example_fixture();
    ClosedLoop cl = ltimodel::assemble_closed_loop(fx.plant, fx.controller);
};

ClockConfig fixture_clocks(const ExampleFixture& fx, double epsilon) {
    ClockConfig cfg;
    cfg.mode = ChannelMode::Dual;
    cfg.miati_s = fx.miati_s;
    cfg.mati_s = fx.mati_s;
    cfg.epsilon = epsilon;
    cfg.mati_f = epsilon * mati::mati_bound(fx.design.fast_mati_params());
    cfg.miati_f = 0.5 * cfg.mati_f;
    return cfg;
}

DesignConstants decoupled_design() {
    DesignConstants dc;
    dc.P_s = Matrix::Identity(2, 2);
    dc.P_f = Matrix::Identity(2, 2);
    dc.gamma_s = 1.0;
    dc.gamma_f = 1.0;
    dc.lambda_star_s = 0.5;
    dc.lambda_star_f = 0.5;
    dc.a_rho_s = 1.0;
    dc.a_rho_f = 1.0;
    dc.proto_s = {0.0, 1.0, 1.0};
    dc.proto_f = {0.0, 1.0, 1.0};
    return dc;
}

}  // namespace

TEST_CASE("LMI on the worked example") {
    Fixture f;
    const auto rep = lmi_feasible(f.cl, f.fx.design, 0.05);
    // Slow side: feasible within the rounding of the example constants.
    CHECK(rep.lmax_slow == doctest::Approx(0.0214372646).epsilon(1e-6));
    CHECK(rep.slow_feasible);
    // Fast side: marginal, a_rho_f - gamma_f^2 = 4e-4 above zero.
    CHECK(rep.lmax_fast == doctest::Approx(4e-4).epsilon(1e-6));
    CHECK_FALSE(lmi_feasible(f.cl, f.fx.design, 0.0).fast_feasible);

    const Matrix ms = lmi_matrix(f.cl, f.fx.design, LmiSide::Slow);
    CHECK(numerics::is_neg_semidefinite(ms, 0.05));

    const auto search =
        lmi_perturbation_search(f.cl, f.fx.design, LmiSide::Fast, 0.02, 0.0, 424242);
    CHECK(search.found);
    CHECK(search.lmax <= 0.0);
}

TEST_CASE("LMI feasibility for contracting dynamics is immediate") {
    // A11 = -I, A12 = 0, AH = 0, P = I, a_rho = 1, gamma a_w = 2.
    ClosedLoop cl;
    cl.A11s = -Matrix::Identity(2, 2);
    cl.A12s = Matrix::Zero(2, 1);
    cl.A21s = Matrix::Zero(1, 2);
    DesignConstants dc = decoupled_design();
    dc.gamma_s = 2.0;
    const Matrix m = lmi_matrix(cl, dc, LmiSide::Slow);
    CHECK(numerics::is_neg_semidefinite(m, 0.0));
    const auto [lo, hi] = numerics::sym_eig_extremes(m);
    CHECK(hi <= 0.0);
}

TEST_CASE("exponential gains of the example") {
    Fixture f;
    // Reset-to-zero protocols on both sides: one-transmission contraction.
    CHECK(f.fx.design.proto_s.lambda == 0.0);
    CHECK(f.fx.design.proto_f.lambda == 0.0);
    const auto g = exponential_gains(f.fx.design);
    CHECK(g.a_s == doctest::Approx(1.16).epsilon(1e-12));
    CHECK(g.a_f == doctest::Approx(0.41).epsilon(1e-12));
    CHECK(numerics::sym_eig_extremes(f.fx.design.P_s).first ==
          doctest::Approx(1.7517).epsilon(1e-3));
    // a_Us floor comes from the protocol term gamma_s lambda_s*.
    CHECK(g.a_Us_lower == doctest::Approx(2.58 * 0.33).epsilon(1e-12));
    CHECK(g.a_Us_upper == doctest::Approx(54.968271).epsilon(1e-6));
    CHECK(g.a_Uf_lower == doctest::Approx(0.64 * 0.46).epsilon(1e-12));
    CHECK(g.a_psi_s == doctest::Approx(1.0 / std::sqrt(0.8514)).epsilon(1e-12));
    CHECK(g.a_psi_f == doctest::Approx(1.0 / std::sqrt(0.2944)).epsilon(1e-12));
}

TEST_CASE("slow-jump inflation constants") {
    Fixture f;
    const auto [l1, l2] = slow_jump_constants(f.cl, f.fx.design);
    // Printed specialization: (n2/a2)^2 |p11_f|.
    CHECK(l1 == doctest::Approx(9.072e-5).epsilon(1e-9));
    CHECK(l2 == doctest::Approx(0.0250218843).epsilon(1e-6));
    // The entrywise route upper-bounds the spectral one within 5%.
    const double l2_entrywise =
        2.0 * (0.0018 / 0.2) * (1.12 + 0.018) /
        std::sqrt(numerics::sym_eig_extremes(f.fx.design.P_f).first);
    CHECK(std::abs(l2 - l2_entrywise) / l2_entrywise < 0.05);

    const auto [dp, dc] = testing::decoupled_loop();
    const ClosedLoop dcl = ltimodel::assemble_closed_loop(dp, dc);
    const auto [dl1, dl2] = slow_jump_constants(dcl, decoupled_design());
    CHECK(dl1 == 0.0);
    CHECK(dl2 == 0.0);
}

TEST_CASE("interconnection constants") {
    Fixture f;
    const auto inter = interconnection_constants(f.cl, f.fx.design);
    CHECK(inter.b1 == doctest::Approx(11.0550115).epsilon(1e-6));
    CHECK(inter.b2 == doctest::Approx(0.0489018346).epsilon(1e-6));
    CHECK(inter.b3 == doctest::Approx(0.2024876178).epsilon(1e-6));

    // Printed example matrix (carrying its factor 2) against twice the
    // generic block path.
    const double b1_fixture = numerics::spectral_norm(example_lambda_b1_matrix());
    CHECK(std::abs(2.0 * inter.b1 - b1_fixture) / b1_fixture < 0.05);

    // Fully decoupled loop: all three constants vanish.
    const auto [dp, dc] = testing::decoupled_loop();
    const ClosedLoop dcl = ltimodel::assemble_closed_loop(dp, dc);
    const auto zero = interconnection_constants(dcl, decoupled_design());
    CHECK(zero.b1 == 0.0);
    CHECK(zero.b2 == 0.0);
    CHECK(zero.b3 == 0.0);

    // With the W_s gradient row removed, b1 is linear in P_s.
    DesignConstants scaled = f.fx.design;
    scaled.L1 = 0.0;
    const double base = interconnection_constants(f.cl, scaled).b1;
    scaled.P_s *= 2.0;
    CHECK(interconnection_constants(f.cl, scaled).b1 == doctest::Approx(2.0 * base).epsilon(1e-12));
}

TEST_CASE("composite weight and slow-jump factor") {
    // Vacuous coupling: any positive weight works, pick 1.
    CHECK(composite_weight(0.0, 0.0, 1.0, 0.5, 0.9, 1.0, 0.3, WeightMode::UGES) == 1.0);

    // Linear fallback: lambda1 = 0, lambda2 = 0.2, gamma_s lambda_s* = 1,
    // lambda e^{mu tau} = 1.5 gives sqrt(d) = 0.5 / 0.2 so d = 6.25, and
    // the slow-jump factor then exactly cancels the decay budget.
    const double mu = 1.0, tau = std::log(1.5);
    const double d_lin = composite_weight(0.0, 0.2, 1.0, 1.0, 1.0 / std::exp(mu * tau) * 1.5, mu,
                                          tau, WeightMode::UGES);
    CHECK(d_lin == doctest::Approx(6.25).epsilon(1e-12));
    CHECK(a_d_of(d_lin, 0.0, 0.2, 1.0, 1.0) == doctest::Approx(1.5).epsilon(1e-12));

    CHECK(a_d_of(1.0, 0.0, 0.0, 2.0, 0.4) == 1.0);
    CHECK(a_d_of(4.0, 2.0 * 0.4, 0.0, 2.0, 0.4) == doctest::Approx(5.0).epsilon(1e-14));

    // lambda too small: the contraction budget cannot absorb any jump.
    CHECK_THROWS_AS(composite_weight(1e-3, 1e-2, 1.0, 0.5, 0.5, 1.0, 0.1, WeightMode::UGES),
                    ConstraintError);
}

TEST_CASE("certificate pipeline on the worked example") {
    Fixture f;
    const Certificate cert =
        build_certificate(f.cl, f.fx.design, f.fx.miati_s, f.fx.mati_s, {});

    CHECK(cert.mati_s_bound == doctest::Approx(0.3617446535).epsilon(1e-9));
    CHECK(cert.mati_f_bound_fast_time == doctest::Approx(1.1070606959).epsilon(1e-9));
    CHECK(cert.mu == doctest::Approx(0.8992248062).epsilon(1e-9));
    CHECK(cert.lambda_decay == doctest::Approx(0.8644002373).epsilon(1e-9));
    CHECK(cert.d_star == doctest::Approx(31.8267056).epsilon(1e-6));
    CHECK(cert.a_d == doctest::Approx(1.1568715).epsilon(1e-6));
    CHECK(cert.epsilon_star == doctest::Approx(0.0184888978).epsilon(1e-6));
    CHECK(cert.c1 == doctest::Approx(31.8839040).epsilon(1e-6));
    CHECK(cert.c2 == doctest::Approx(0.0327878721).epsilon(1e-9));
    CHECK(cert.h1 == doctest::Approx(1.8219178).epsilon(1e-6));

    // The weight is the root that makes the inflation offset the decay.
    CHECK(std::abs(cert.a_d * std::exp(-cert.mu * f.fx.miati_s) - cert.lambda_decay) < 1e-9);
    CHECK(cert.a_d >= 1.0);
    CHECK(cert.mu < cert.gains.a_s * cert.gains.a_psi_s * cert.gains.a_psi_s);
}

TEST_CASE("certificate pipeline collapses on the decoupled loop") {
    const auto [dp, dcm] = testing::decoupled_loop();
    const ClosedLoop dcl = ltimodel::assemble_closed_loop(dp, dcm);
    const Certificate cert = build_certificate(dcl, decoupled_design(), 0.25, 0.5, {});
    CHECK(cert.b1 == 0.0);
    CHECK(cert.b2 == 0.0);
    CHECK(cert.b3 == 0.0);
    CHECK(cert.lambda1 == 0.0);
    CHECK(cert.d_star == 1.0);
    CHECK(cert.a_d == 1.0);
    CHECK(cert.epsilon_star ==
          doctest::Approx(cert.gains.a_f / (cert.gains.a_psi_f * cert.mu)).epsilon(1e-12));
}

TEST_CASE("epsilon_star formula behavior") {
    // Decoupled limit.
    CHECK(epsilon_star(2.0, 0.5, 1.0, 0.8, 1.1, 1.3, 0, 0, 0) ==
          doctest::Approx(0.8 / (1.3 * 0.5)).epsilon(1e-12));
    // Strictly decreasing in each coupling constant, increasing in a_f.
    const double base = epsilon_star(2.0, 0.5, 1.0, 0.8, 1.1, 1.3, 1.0, 0.2, 0.3);
    CHECK(epsilon_star(2.0, 0.5, 1.0, 0.8, 1.1, 1.3, 2.0, 0.2, 0.3) < base);
    CHECK(epsilon_star(2.0, 0.5, 1.0, 0.8, 1.1, 1.3, 1.0, 0.4, 0.3) < base);
    CHECK(epsilon_star(2.0, 0.5, 1.0, 0.8, 1.1, 1.3, 1.0, 0.2, 0.6) < base);
    CHECK(epsilon_star(2.0, 0.5, 1.0, 1.6, 1.1, 1.3, 1.0, 0.2, 0.3) > base);
    // mu at or above the ceiling is rejected.
    CHECK_THROWS_AS(epsilon_star(2.0, 1.3, 1.0, 0.8, 1.0, 1.3, 0, 0, 0), ConstraintError);
}

TEST_CASE("decay constants") {
    Certificate cert;
    cert.gains = {1, 1, 1, 1, 1, 1, 1, 1};
    cert.d_star = 1.0;
    cert.a_d = 1.0;
    cert.lambda_decay = std::exp(-1.0);
    auto [c1, c2] = decay_constants(cert, 1.0, 1.0, 1.0);
    CHECK(c2 == doctest::Approx(0.25).epsilon(1e-14));
    CHECK(c1 == doctest::Approx(std::exp(0.5) * std::exp(0.25)).epsilon(1e-12));

    cert.lambda_decay = 1.0 - 1e-12;
    auto [c1b, c2b] = decay_constants(cert, 1.0, 1.0, 1.0);
    CHECK(c2b < 1e-12);  // no contraction left as lambda -> 1
    CHECK(c1b == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("composite Lyapunov function") {
    Fixture f;
    const Certificate cert =
        build_certificate(f.cl, f.fx.design, f.fx.miati_s, f.fx.mati_s, {});

    HybridState origin;
    origin.x = Vector::Zero(2);
    origin.e_s = Vector::Zero(1);
    origin.z = Vector::Zero(2);
    origin.e_f = Vector::Zero(1);
    const auto u0 = lyapunov_U(f.cl, f.fx.design, cert, origin, f.fx.proto_s, f.fx.proto_f);
    CHECK(u0.U == 0.0);

    SplitMix64 rng(31);
    for (int rep = 0; rep < 20; ++rep) {
        HybridState s;
        s.x = testing::random_block(rng, 2, 1);
        s.e_s = Vector::Zero(1);
        s.z = Vector::Zero(2);
        s.e_f = Vector::Zero(1);
        s.tau_s = rng.next_in(0.0, cert.mati_s_bound);
        const auto u = lyapunov_U(f.cl, f.fx.design, cert, s, f.fx.proto_s, f.fx.proto_f);
        CHECK(u.U_s == doctest::Approx((s.x.transpose() * f.fx.design.P_s * s.x).value())
                           .epsilon(1e-12));
    }

    const double aU_lo = std::min(cert.gains.a_Us_lower, cert.d_star * cert.gains.a_Uf_lower);
    const double aU_hi = std::max(cert.gains.a_Us_upper, cert.d_star * cert.gains.a_Uf_upper);
    for (int rep = 0; rep < 1000; ++rep) {
        HybridState s;
        s.x = testing::random_block(rng, 2, 1);
        s.e_s = testing::random_block(rng, 1, 1);
        s.z = testing::random_block(rng, 2, 1);
        s.e_f = testing::random_block(rng, 1, 1);
        s.tau_s = rng.next_in(0.0, cert.mati_s_bound);
        s.tau_f = rng.next_in(0.0, cert.mati_f_bound_fast_time);
        const double sq = s.x.squaredNorm() + s.e_s.squaredNorm() + s.z.squaredNorm() +
                          s.e_f.squaredNorm();
        const auto u = lyapunov_U(f.cl, f.fx.design, cert, s, f.fx.proto_s, f.fx.proto_f);
        CHECK(u.U >= aU_lo * sq - 1e-9);
        CHECK(u.U <= aU_hi * sq + 1e-9);
    }

    // For fixed errors the clock-weighted terms decay with the clocks.
    HybridState held;
    held.x = Vector::Zero(2);
    held.e_s = Vector::Constant(1, 0.7);
    held.z = Vector::Zero(2);
    held.e_f = Vector::Constant(1, 0.4);
    double prev_Us = 1e300, prev_Uf = 1e300;
    for (int i = 0; i <= 20; ++i) {
        held.tau_s = cert.mati_s_bound * i / 20.0;
        held.tau_f = cert.mati_f_bound_fast_time * i / 20.0;
        const auto u = lyapunov_U(f.cl, f.fx.design, cert, held, f.fx.proto_s, f.fx.proto_f);
        CHECK(u.U_s < prev_Us);
        CHECK(u.U_f < prev_Uf);
        prev_Us = u.U_s;
        prev_Uf = u.U_f;
    }

    HybridState late = origin;
    late.tau_s = 10.0;
    CHECK_THROWS_AS(lyapunov_U(f.cl, f.fx.design, cert, late, f.fx.proto_s, f.fx.proto_f),
                    ClockRangeError);
}

TEST_CASE("monitor accepts certified runs and flags corrupted ones") {
    Fixture f;
    const Certificate cert =
        build_certificate(f.cl, f.fx.design, f.fx.miati_s, f.fx.mati_s, {});
    const ClockConfig cfg = fixture_clocks(f.fx, 0.01);
    const ProtocolSpec reset{ProtocolKind::ResetAll, NodePartition::scalar_nodes(1)};

    SplitMix64 rng(32);
    HybridState x0;
    x0.x = testing::random_block(rng, 2, 1, 3.0);
    x0.e_s = testing::random_block(rng, 1, 1, 3.0);
    x0.z = testing::random_block(rng, 2, 1, 3.0);
    x0.e_f = testing::random_block(rng, 1, 1, 3.0);

    auto traj = hybridsim::simulate(f.cl, cfg, x0, {PolicyKind::Latest, TieBreak::SlowFirst, {}},
                                    reset, reset, 3.0, hybridsim::default_step(cfg));
    const auto rep = monitor_trajectory(traj, f.cl, cfg, f.fx.design, cert, reset, reset);
    CHECK(rep.ok());
    CHECK(rep.fast_jumps > 0);
    CHECK(rep.slow_jumps > 0);
    CHECK(rep.envelope_worst_margin > 1.0);
    CHECK(!rep.segment_rates.empty());

    // Zero initial state: everything is trivially satisfied.
    HybridState zero;
    zero.x = Vector::Zero(2);
    zero.e_s = Vector::Zero(1);
    zero.z = Vector::Zero(2);
    zero.e_f = Vector::Zero(1);
    auto zero_traj = hybridsim::simulate(f.cl, cfg, zero,
                                         {PolicyKind::Latest, TieBreak::SlowFirst, {}}, reset,
                                         reset, 1.0, hybridsim::default_step(cfg));
    CHECK(monitor_trajectory(zero_traj, f.cl, cfg, f.fx.design, cert, reset, reset).ok());

    // Inflate the error held after one early fast transmission.
    for (std::size_t i = 1; i < traj.samples.size(); ++i) {
        auto& s = traj.samples[i];
        if (s.event == EventKind::FastJump && traj.samples[i - 1].state.e_f.norm() > 1e-3) {
            s.state.e_f = 5.0 * traj.samples[i - 1].state.e_f;
            break;
        }
    }
    const auto bad = monitor_trajectory(traj, f.cl, cfg, f.fx.design, cert, reset, reset);
    REQUIRE(bad.violations.size() == 1);
    CHECK(bad.violations.front().kind == "fast_jump");

    // Empty trajectory: empty report.
    CHECK(monitor_trajectory(HybridTrajectory{}, f.cl, cfg, f.fx.design, cert, reset, reset)
              .ok());
}

TEST_CASE("jump bounds hold well below the time-scale threshold") {
    Fixture f;
    const Certificate cert =
        build_certificate(f.cl, f.fx.design, f.fx.miati_s, f.fx.mati_s, {});
    const double eps = 0.008;
    REQUIRE(eps <= 0.5 * cert.epsilon_star);
    const ClockConfig cfg = fixture_clocks(f.fx, eps);
    const Scenario s = scenario::builtin_example();
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const HybridState x0 = s.initial_state(f.cl, seed);
        const auto traj = hybridsim::simulate(f.cl, cfg, x0,
                                              {PolicyKind::Latest, TieBreak::SlowFirst, {}},
                                              f.fx.proto_s, f.fx.proto_f, 10.0,
                                              hybridsim::default_step(cfg));
        const auto rep =
            monitor_trajectory(traj, f.cl, cfg, f.fx.design, cert, f.fx.proto_s, f.fx.proto_f);
        CHECK(rep.ok());
        CHECK(rep.fast_jumps > 0);
        CHECK(rep.slow_jumps > 0);
    }
}
