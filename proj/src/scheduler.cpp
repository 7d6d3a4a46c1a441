#include "spncs/scheduler.hpp"

#include <algorithm>
#include <cmath>

namespace spncs {

void ClockConfig::validate() const {
    if (slow_active() && !(miati_s > 0.0 && miati_s <= mati_s)) {
        throw std::invalid_argument("clocks: need 0 < miati_s <= mati_s");
    }
    if (fast_active()) {
        if (!(miati_f > 0.0 && miati_f <= mati_f)) {
            throw std::invalid_argument("clocks: need 0 < miati_f <= mati_f");
        }
        if (mode == ChannelMode::Dual && miati_f > 0.5 * mati_f + 1e-15) {
            throw std::invalid_argument("clocks: dual mode requires miati_f <= mati_f / 2");
        }
    }
    if (!(epsilon > 0.0)) {
        throw std::invalid_argument("clocks: epsilon must be positive");
    }
}

void JumpPolicy::validate() const {
    if ((kind == PolicyKind::UniformRandom) != seed.has_value()) {
        throw std::invalid_argument("policy: seed present iff kind is UniformRandom");
    }
}

namespace scheduler {
namespace {

// Tolerance absorbing accumulated rounding in realized jump times.
constexpr double kTimingSlack = 1e-9;

// Rounding tolerance for admissible-window endpoints: a clock advanced by
// summed float steps may sit a few ulp past a boundary.
constexpr double kWindowTol = 1e-12;

struct Window {
    double lo = 0.0;
    double hi = -1.0;
    bool valid() const { return hi >= lo - kWindowTol && hi >= -kWindowTol; }
    double length() const { return valid() ? std::max(hi - lo, 0.0) : 0.0; }
    double earliest() const { return lo; }
    double latest() const { return std::max(hi, lo); }
};

// Admissible flow durations until a slow jump, from clock state (tau_s, T)
// with T the physical fast clock.
Window slow_window(const ClockConfig& cfg, double tau_s, double T) {
    Window w;
    if (!cfg.slow_active()) return w;
    double lo = cfg.miati_s - tau_s;
    double hi = cfg.mati_s - tau_s;
    if (cfg.mode == ChannelMode::Dual) {
        lo = std::max(lo, cfg.miati_f - T);
        hi = std::min(hi, (cfg.mati_f - cfg.miati_f) - T);
    }
    w.lo = std::max(lo, 0.0);
    w.hi = hi;
    return w;
}

Window fast_window(const ClockConfig& cfg, double tau_s, double T) {
    Window w;
    if (!cfg.fast_active()) return w;
    double lo = cfg.miati_f - T;
    double hi = cfg.mati_f - T;
    if (cfg.mode == ChannelMode::Dual) {
        lo = std::max(lo, cfg.miati_f - tau_s);
        hi = std::min(hi, (cfg.mati_s - cfg.miati_f) - tau_s);
    }
    w.lo = std::max(lo, 0.0);
    w.hi = hi;
    return w;
}

bool in_interval(double v, double lo, double hi) { return v >= lo && v <= hi; }

}  // namespace

Classification classify(const ClockConfig& cfg, const ClockState& s) {
    cfg.validate();
    Classification c;
    const double T = cfg.epsilon * s.tau_f;

    switch (cfg.mode) {
        case ChannelMode::SlowOnly:
            c.slow_jump_allowed = in_interval(s.tau_s, cfg.miati_s, cfg.mati_s);
            c.in_flow = in_interval(s.tau_s, 0.0, cfg.mati_s);
            return c;
        case ChannelMode::FastOnly:
            c.fast_jump_allowed = in_interval(T, cfg.miati_f, cfg.mati_f);
            c.in_flow = in_interval(T, 0.0, cfg.mati_f);
            return c;
        case ChannelMode::Dual:
            break;
    }

    c.slow_jump_allowed = in_interval(s.tau_s, cfg.miati_s, cfg.mati_s) &&
                          in_interval(T, cfg.miati_f, cfg.mati_f - cfg.miati_f);
    c.fast_jump_allowed = in_interval(s.tau_s, cfg.miati_f, cfg.mati_s - cfg.miati_f) &&
                          in_interval(T, cfg.miati_f, cfg.mati_f);
    const bool in_c1a = in_interval(s.tau_s, 0.0, cfg.miati_f) &&
                        in_interval(T, 0.0, s.tau_s + cfg.mati_f - cfg.miati_f);
    const bool in_c1b = in_interval(T, 0.0, cfg.miati_f) &&
                        in_interval(s.tau_s, cfg.miati_f, T + cfg.mati_s - cfg.miati_f);
    c.in_flow = c.slow_jump_allowed || c.fast_jump_allowed || in_c1a || in_c1b;
    return c;
}

NextEvent next_event(const ClockConfig& cfg, const ClockState& s, const JumpPolicy& policy,
                     SplitMix64* rng) {
    cfg.validate();
    policy.validate();
    const double T = cfg.epsilon * s.tau_f;
    const Window ws = slow_window(cfg, s.tau_s, T);
    const Window wf = fast_window(cfg, s.tau_s, T);

    if (!ws.valid() && !wf.valid()) {
        throw ScheduleInfeasibleError("next_event: no admissible continuation");
    }

    const bool prefer_slow = policy.tie_break == TieBreak::SlowFirst;
    auto pick = [&](double dt_s, double dt_f, bool latest) -> NextEvent {
        if (ws.valid() && wf.valid()) {
            if (dt_s == dt_f) return {dt_s, prefer_slow ? JumpKind::Slow : JumpKind::Fast};
            const bool slow_wins = latest ? dt_s > dt_f : dt_s < dt_f;
            return slow_wins ? NextEvent{dt_s, JumpKind::Slow} : NextEvent{dt_f, JumpKind::Fast};
        }
        return ws.valid() ? NextEvent{dt_s, JumpKind::Slow} : NextEvent{dt_f, JumpKind::Fast};
    };

    switch (policy.kind) {
        case PolicyKind::Earliest:
            return pick(ws.earliest(), wf.earliest(), false);
        case PolicyKind::Latest:
            return pick(ws.latest(), wf.latest(), true);
        case PolicyKind::UniformRandom: {
            const double total = ws.length() + wf.length();
            if (total < 1e-15 || rng == nullptr) {
                // Point windows (or no generator): fall back to the latest rule.
                return pick(ws.valid() ? ws.latest() : 0.0, wf.valid() ? wf.latest() : 0.0, true);
            }
            const double u = rng->next_in(0.0, total);
            if (ws.valid() && u < ws.length()) return {ws.lo + u, JumpKind::Slow};
            return {wf.lo + (u - ws.length()), JumpKind::Fast};
        }
    }
    throw ScheduleInfeasibleError("next_event: unreachable");
}

bool validate_sequence(const ClockConfig& cfg, const std::vector<double>& slow_times,
                       const std::vector<double>& fast_times) {
    cfg.validate();
    auto sorted = [](const std::vector<double>& v) {
        return std::is_sorted(v.begin(), v.end());
    };
    if (!sorted(slow_times) || !sorted(fast_times)) return false;

    auto gaps_ok = [](const std::vector<double>& v, double lo, double hi) {
        for (std::size_t i = 1; i < v.size(); ++i) {
            const double gap = v[i] - v[i - 1];
            if (gap < lo - kTimingSlack || gap > hi + kTimingSlack) return false;
        }
        return true;
    };

    if (cfg.slow_active() && !gaps_ok(slow_times, cfg.miati_s, cfg.mati_s)) return false;
    if (cfg.fast_active() && !gaps_ok(fast_times, cfg.miati_f, cfg.mati_f)) return false;

    if (cfg.mode == ChannelMode::Dual) {
        std::vector<double> merged;
        merged.reserve(slow_times.size() + fast_times.size());
        std::merge(slow_times.begin(), slow_times.end(), fast_times.begin(), fast_times.end(),
                   std::back_inserter(merged));
        for (std::size_t i = 1; i < merged.size(); ++i) {
            if (merged[i] - merged[i - 1] < cfg.miati_f - kTimingSlack) return false;
        }
    }
    return true;
}

}  // namespace scheduler
}  // namespace spncs
