#include "spncs/scheduler.hpp"

#include <doctest.h>

#include <vector>

using namespace spncs;
using namespace spncs::scheduler;

namespace {

ClockConfig spec_cfg() {
    ClockConfig cfg;
    cfg.miati_s = 0.324;
    cfg.mati_s = 0.36;
    cfg.miati_f = 0.006;
    cfg.mati_f = 0.018;
    cfg.epsilon = 0.01;
    cfg.mode = ChannelMode::Dual;
    return cfg;
}

ClockState at(const ClockConfig& cfg, double tau_s, double phys_fast) {
    return {tau_s, phys_fast / cfg.epsilon, 0, 0};
}

struct Run {
    std::vector<double> slow, fast;
    ClockState state;
};

// Membership up to a relative boundary tolerance; clocks advanced by
// summed float steps can overshoot a closed interval by a few ulp.
bool member_tol(const ClockConfig& cfg, const ClockState& s,
                bool Classification::* field) {
    for (const double shrink : {1.0, 1.0 - 1e-9}) {
        ClockState probe{s.tau_s * shrink, s.tau_f * shrink, s.kappa_s, s.kappa_f};
        if (classify(cfg, probe).*field) return true;
    }
    return false;
}

// Drives the pure clock mechanism for n events.
Run drive(const ClockConfig& cfg, const JumpPolicy& policy, int n) {
    Run run;
    SplitMix64 rng(policy.seed.value_or(0));
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
        const NextEvent ev = next_event(cfg, run.state, policy,
                                        policy.seed ? &rng : nullptr);
        t += ev.dt;
        run.state.tau_s += ev.dt;
        run.state.tau_f += ev.dt / cfg.epsilon;
        if (ev.kind == JumpKind::Slow) {
            REQUIRE(member_tol(cfg, run.state, &Classification::slow_jump_allowed));
            run.state.tau_s = 0.0;
            run.state.kappa_s += 1;
            run.slow.push_back(t);
        } else {
            REQUIRE(member_tol(cfg, run.state, &Classification::fast_jump_allowed));
            run.state.tau_f = 0.0;
            run.state.kappa_f += 1;
            run.fast.push_back(t);
        }
        REQUIRE(member_tol(cfg, run.state, &Classification::in_flow));  // closure after reset
    }
    return run;
}

}  // namespace

TEST_CASE("flow and jump set membership") {
    const ClockConfig cfg = spec_cfg();

    auto c = classify(cfg, at(cfg, 0.33, 0.008));
    CHECK(c.in_flow);
    CHECK(c.slow_jump_allowed);
    CHECK(c.fast_jump_allowed);

    c = classify(cfg, at(cfg, 0.10, 0.003));
    CHECK(c.in_flow);
    CHECK_FALSE(c.slow_jump_allowed);
    CHECK_FALSE(c.fast_jump_allowed);

    c = classify(cfg, at(cfg, 0.002, 0.017));
    CHECK_FALSE(c.in_flow);
    CHECK_FALSE(c.slow_jump_allowed);
    CHECK_FALSE(c.fast_jump_allowed);
}

TEST_CASE("next event under the simple modes") {
    ClockConfig slow_only;
    slow_only.mode = ChannelMode::SlowOnly;
    slow_only.miati_s = 0.3;
    slow_only.mati_s = 0.5;
    const NextEvent latest =
        next_event(slow_only, {0, 0, 0, 0}, {PolicyKind::Latest, TieBreak::SlowFirst, {}});
    CHECK(latest.dt == 0.5);
    CHECK(latest.kind == JumpKind::Slow);

    ClockConfig fast_only;
    fast_only.mode = ChannelMode::FastOnly;
    fast_only.miati_f = 0.004;
    fast_only.mati_f = 0.02;
    fast_only.epsilon = 0.01;
    const NextEvent earliest =
        next_event(fast_only, {0, 0, 0, 0}, {PolicyKind::Earliest, TieBreak::SlowFirst, {}});
    CHECK(earliest.dt == 0.004);
    CHECK(earliest.kind == JumpKind::Fast);
}

TEST_CASE("dual mode latest policy defers the slow jump") {
    const ClockConfig cfg = spec_cfg();
    // Both clocks just reset: the slow window is empty until tau_s grows,
    // so the fast deadline rules.
    const NextEvent ev =
        next_event(cfg, {0, 0, 0, 0}, {PolicyKind::Latest, TieBreak::SlowFirst, {}});
    CHECK(ev.kind == JumpKind::Fast);
    CHECK(ev.dt == doctest::Approx(cfg.mati_f).epsilon(1e-15));

    const Run run = drive(cfg, {PolicyKind::Latest, TieBreak::SlowFirst, {}}, 300);
    CHECK(validate_sequence(cfg, run.slow, run.fast));
    CHECK(run.slow.size() >= 2);
}

TEST_CASE("sequence validation") {
    const ClockConfig cfg = spec_cfg();

    // Fast ticks every 12 ms; the tick colliding with the first slow
    // transmission shifts by 6 ms, keeping every gap inside its window.
    std::vector<double> slow = {0.36, 0.705};
    std::vector<double> fast;
    for (int k = 1; k <= 58; ++k) {
        const double t = 0.012 * k;
        fast.push_back(std::abs(t - 0.36) < 1e-12 ? 0.366 : t);
    }
    CHECK(validate_sequence(cfg, slow, fast));

    CHECK_FALSE(validate_sequence(cfg, {0.1, 0.15}, {}));          // slow gap below MIATI
    CHECK_FALSE(validate_sequence(cfg, {0.36}, {0.361, 0.373}));   // cross-clock spacing
}

TEST_CASE("soundness across policies and modes") {
    std::vector<JumpPolicy> policies = {
        {PolicyKind::Earliest, TieBreak::SlowFirst, {}},
        {PolicyKind::Latest, TieBreak::SlowFirst, {}},
        {PolicyKind::Latest, TieBreak::FastFirst, {}},
        {PolicyKind::UniformRandom, TieBreak::SlowFirst, 42},
    };
    for (const auto& policy : policies) {
        {
            const ClockConfig cfg = spec_cfg();
            const Run run = drive(cfg, policy, 500);
            CHECK(validate_sequence(cfg, run.slow, run.fast));
        }
        {
            ClockConfig cfg;
            cfg.mode = ChannelMode::SlowOnly;
            cfg.miati_s = 0.2;
            cfg.mati_s = 0.45;
            const Run run = drive(cfg, policy, 500);
            CHECK(run.fast.empty());
            CHECK(validate_sequence(cfg, run.slow, {}));
        }
        {
            ClockConfig cfg;
            cfg.mode = ChannelMode::FastOnly;
            cfg.miati_f = 0.004;
            cfg.mati_f = 0.02;
            cfg.epsilon = 0.05;
            const Run run = drive(cfg, policy, 500);
            CHECK(run.slow.empty());
            CHECK(validate_sequence(cfg, {}, run.fast));
        }
    }
}

TEST_CASE("degenerate fast window miati_f == mati_f/2") {
    ClockConfig cfg = spec_cfg();
    cfg.miati_f = 0.009;
    cfg.mati_f = 0.018;
    // The slow jump's fast-clock window collapses to a single point; the
    // boundary stays admissible.
    auto c = classify(cfg, at(cfg, 0.33, 0.009));
    CHECK(c.slow_jump_allowed);
    for (const auto kind : {PolicyKind::Earliest, PolicyKind::Latest}) {
        const Run run = drive(cfg, {kind, TieBreak::SlowFirst, {}}, 500);
        CHECK(validate_sequence(cfg, run.slow, run.fast));
        CHECK(!run.slow.empty());
    }
}

TEST_CASE("infeasible continuation raises") {
    const ClockConfig cfg = spec_cfg();
    // Past every deadline: no window remains.
    CHECK_THROWS_AS(next_event(cfg, at(cfg, 0.5, 0.02), {PolicyKind::Latest, TieBreak::SlowFirst, {}}),
                    ScheduleInfeasibleError);
}

TEST_CASE("config validation") {
    ClockConfig cfg = spec_cfg();
    cfg.miati_f = 0.01;  // above mati_f / 2 in dual mode
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = spec_cfg();
    cfg.epsilon = 0.0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    JumpPolicy p{PolicyKind::UniformRandom, TieBreak::SlowFirst, {}};
    CHECK_THROWS_AS(p.validate(), std::invalid_argument);
}
