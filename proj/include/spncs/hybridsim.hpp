#pragma once

#include "spncs/ltimodel.hpp"
#include "spncs/protocols.hpp"
#include "spncs/scheduler.hpp"

#include <functional>
#include <stdexcept>
#include <vector>

namespace spncs {

/// Full state of the dual-clock hybrid model. tau_f is the stretched
/// fast clock: physical elapsed time since the last fast transmission is
/// epsilon * tau_f.
struct HybridState {
    Vector x, e_s, z, e_f;
    double tau_s = 0.0;
    double tau_f = 0.0;
    std::uint64_t kappa_s = 0;
    std::uint64_t kappa_f = 0;

    ClockState clocks() const { return {tau_s, tau_f, kappa_s, kappa_f}; }
};

enum class EventKind { FlowSample, SlowJump, FastJump };

struct TrajectorySample {
    double t = 0.0;
    std::uint64_t j = 0;
    HybridState state;
    EventKind event = EventKind::FlowSample;
};

struct TrajectoryInvariantError : std::logic_error {
    using std::logic_error::logic_error;
};

struct HybridTrajectory {
    std::vector<TrajectorySample> samples;

    std::vector<double> slow_jump_times() const;
    std::vector<double> fast_jump_times() const;

    /// Hybrid-time monotonicity, jump bookkeeping, and gap constraints.
    /// Throws TrajectoryInvariantError on violation.
    void finalize_and_check(const ClockConfig& cfg) const;
};

struct StiffStepError : std::runtime_error {
    double suggested_step;
    StiffStepError(const std::string& what, double suggestion)
        : std::runtime_error(what), suggested_step(suggestion) {}
};

struct StepUnderflowError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct JumpSetViolationError : std::logic_error {
    using std::logic_error::logic_error;
};

struct StateDims {
    Eigen::Index n_x = 0, n_es = 0, n_z = 0, n_ef = 0;
    Eigen::Index total() const { return n_x + n_es + n_z + n_ef; }
};

namespace hybridsim {

/// Continuous-state derivative of the hybrid flow, evaluated blockwise.
/// Clock rates are tau_s' = 1, tau_f' = 1/epsilon; counters freeze.
HybridState flow_map(const ClosedLoop& cl, const HybridState& s, double epsilon);

/// The same flow as one stacked matrix acting on (x, e_s, z, e_f); the
/// simulator applies this matrix, tests compare it against flow_map.
Matrix stacked_flow_matrix(const ClosedLoop& cl, double epsilon);

/// Slow transmission: e_s <- h_s(kappa_s, e_s), tau_s <- 0, kappa_s + 1.
HybridState jump_slow(const HybridState& s, const ProtocolSpec& proto, const ClockConfig& cfg);

/// Fast transmission: e_f <- h_f(kappa_f, e_f), tau_f <- 0, kappa_f + 1.
HybridState jump_fast(const HybridState& s, const ProtocolSpec& proto, const ClockConfig& cfg);

/// z <-> y coordinate change about the quasi-steady state.
HybridState to_y_coords(const ClosedLoop& cl, const HybridState& s);
HybridState from_y_coords(const ClosedLoop& cl, const HybridState& y);

/// Default integration step: resolves the fast layer with >= 50 samples
/// per fast inter-transmission interval.
double default_step(const ClockConfig& cfg);

using FlowFn = std::function<Vector(const Vector& packed, double epsilon)>;
using JumpFn = std::function<Vector(std::uint64_t kappa, const Vector& error)>;

/// Fixed-step RK4 with exact landing on clock events (events are affine
/// in t, so no root finding). Jumps follow the policy's selection from
/// the admissible windows; equal-instant availability is ordered by the
/// policy tie-break. Records every record_stride-th flow sample, all
/// event landings, and all jumps.
HybridTrajectory simulate(const ClosedLoop& cl, const ClockConfig& cfg, const HybridState& x0,
                          const JumpPolicy& policy, const ProtocolSpec& proto_s,
                          const ProtocolSpec& proto_f, double t_end, double step,
                          std::size_t record_stride = 1);

/// Same machinery with caller-provided dynamics; no stiffness guard and
/// no certificates (the caller asserts the model assumptions).
HybridTrajectory simulate_generic(const FlowFn& flow, const JumpFn& slow_update,
                                  const JumpFn& fast_update, const StateDims& dims,
                                  const ClockConfig& cfg, const HybridState& x0,
                                  const JumpPolicy& policy, double t_end, double step,
                                  std::size_t record_stride = 1);

}  // namespace hybridsim
}  // namespace spncs
