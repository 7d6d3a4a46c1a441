#pragma once

#include "spncs/rng.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace spncs {

enum class ChannelMode { Dual, SlowOnly, FastOnly };

/// Timing bounds of the shared channel. All durations are physical
/// seconds; the fast clock itself runs stretched (physical elapsed time
/// since the last fast transmission is epsilon * tau_f).
struct ClockConfig {
    double miati_s = 0.0;
    double mati_s = 0.0;
    double miati_f = 0.0;
    double mati_f = 0.0;
    double epsilon = 1.0;
    ChannelMode mode = ChannelMode::Dual;

    bool slow_active() const { return mode != ChannelMode::FastOnly; }
    bool fast_active() const { return mode != ChannelMode::SlowOnly; }
    void validate() const;
};

struct ClockState {
    double tau_s = 0.0;   // time since last slow transmission
    double tau_f = 0.0;   // stretched fast clock; physical = epsilon * tau_f
    std::uint64_t kappa_s = 0;
    std::uint64_t kappa_f = 0;
};

struct Classification {
    bool in_flow = false;
    bool slow_jump_allowed = false;
    bool fast_jump_allowed = false;
};

enum class PolicyKind { Earliest, Latest, UniformRandom };
enum class TieBreak { SlowFirst, FastFirst };

struct JumpPolicy {
    PolicyKind kind = PolicyKind::Latest;
    TieBreak tie_break = TieBreak::SlowFirst;
    std::optional<std::uint64_t> seed;  // required iff kind == UniformRandom

    void validate() const;
};

enum class JumpKind { Slow, Fast };

struct NextEvent {
    double dt = 0.0;       // physical flow duration until the jump
    JumpKind kind = JumpKind::Slow;
};

struct ScheduleInfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

namespace scheduler {

/// Membership of (tau_s, epsilon*tau_f) in the flow and jump sets.
/// All interval bounds are inclusive. Unreachable states simply report
/// all-false.
Classification classify(const ClockConfig& cfg, const ClockState& s);

/// Flow duration until the next admissible jump under a timing policy.
/// Both clocks advance affinely, so the admissible windows are interval
/// intersections computed in closed form. UniformRandom draws from the
/// union of the slow and fast windows using the caller's generator.
NextEvent next_event(const ClockConfig& cfg, const ClockState& s, const JumpPolicy& policy,
                     SplitMix64* rng = nullptr);

/// Checks a realized schedule against the three gap constraints:
/// slow gaps in [miati_s, mati_s], fast gaps in [miati_f, mati_f], and
/// every adjacent pair in the merged list at least miati_f apart.
bool validate_sequence(const ClockConfig& cfg, const std::vector<double>& slow_times,
                       const std::vector<double>& fast_times);

}  // namespace scheduler
}  // namespace spncs
