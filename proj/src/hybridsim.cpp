#include "spncs/hybridsim.hpp"

#include <cmath>
#include <sstream>

namespace spncs {

std::vector<double> HybridTrajectory::slow_jump_times() const {
    std::vector<double> out;
    for (const auto& s : samples)
        if (s.event == EventKind::SlowJump) out.push_back(s.t);
    return out;
}

std::vector<double> HybridTrajectory::fast_jump_times() const {
    std::vector<double> out;
    for (const auto& s : samples)
        if (s.event == EventKind::FastJump) out.push_back(s.t);
    return out;
}

void HybridTrajectory::finalize_and_check(const ClockConfig& cfg) const {
    double t = -1.0;
    std::uint64_t j = 0;
    bool first = true;
    for (const auto& s : samples) {
        if (first) {
            t = s.t;
            j = s.j;
            first = false;
            continue;
        }
        if (s.t < t || (s.t == t && s.j < j)) {
            throw TrajectoryInvariantError("trajectory: hybrid time not nondecreasing");
        }
        if (s.event == EventKind::FlowSample) {
            if (s.j != j) throw TrajectoryInvariantError("trajectory: j changed without a jump");
        } else {
            if (s.j != j + 1) throw TrajectoryInvariantError("trajectory: jump must increment j by 1");
            if (s.t != t) throw TrajectoryInvariantError("trajectory: t must freeze across a jump");
        }
        t = s.t;
        j = s.j;
    }
    if (!scheduler::validate_sequence(cfg, slow_jump_times(), fast_jump_times())) {
        throw TrajectoryInvariantError("trajectory: realized schedule violates timing constraints");
    }
}

namespace hybridsim {
namespace {

constexpr double kMinStep = 1e-15;

Vector pack(const HybridState& s) {
    Vector v(s.x.size() + s.e_s.size() + s.z.size() + s.e_f.size());
    v << s.x, s.e_s, s.z, s.e_f;
    return v;
}

void unpack(const Vector& v, HybridState& s) {
    Eigen::Index off = 0;
    s.x = v.segment(off, s.x.size()); off += s.x.size();
    s.e_s = v.segment(off, s.e_s.size()); off += s.e_s.size();
    s.z = v.segment(off, s.z.size()); off += s.z.size();
    s.e_f = v.segment(off, s.e_f.size());
}

Vector rk4_step(const FlowFn& f, const Vector& v, double eps, double h) {
    const Vector k1 = f(v, eps);
    const Vector k2 = f(v + (0.5 * h) * k1, eps);
    const Vector k3 = f(v + (0.5 * h) * k2, eps);
    const Vector k4 = f(v + h * k3, eps);
    return v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

struct Engine {
    const ClockConfig& cfg;
    const JumpPolicy& policy;
    double t_end;
    double h;
    std::size_t stride;

    HybridTrajectory run(const FlowFn& flow, const JumpFn& slow_update, const JumpFn& fast_update,
                         const HybridState& x0) {
        cfg.validate();
        policy.validate();
        if (!(h > 0.0)) throw std::invalid_argument("simulate: step must be positive");

        SplitMix64 rng(policy.seed.value_or(0));
        HybridState s = x0;
        Vector v = pack(s);
        double t = 0.0;
        std::uint64_t j = 0;
        std::size_t step_count = 0;

        HybridTrajectory traj;
        auto record = [&](EventKind ev) {
            unpack(v, s);
            traj.samples.push_back({t, j, s, ev});
        };
        record(EventKind::FlowSample);

        while (t < t_end) {
            const NextEvent ev = scheduler::next_event(cfg, s.clocks(), policy,
                                                       policy.seed ? &rng : nullptr);
            const bool capped = ev.dt > t_end - t;
            double remaining = capped ? t_end - t : ev.dt;
            if (!capped && remaining > 0.0 && remaining < kMinStep) {
                throw StepUnderflowError("simulate: inter-event duration underflow at t = " +
                                         std::to_string(t));
            }
            while (remaining > 0.0) {
                double chunk = std::min(h, remaining);
                if (remaining - chunk < kMinStep) chunk = remaining;  // land exactly
                v = rk4_step(flow, v, cfg.epsilon, chunk);
                if (!v.allFinite()) {
                    throw NonFiniteError("simulate: non-finite state at t = " + std::to_string(t));
                }
                t += chunk;
                s.tau_s += chunk;
                s.tau_f += chunk / cfg.epsilon;
                remaining -= chunk;
                ++step_count;
                const bool landing = remaining <= 0.0;
                if (landing || step_count % stride == 0) record(EventKind::FlowSample);
            }
            if (capped) break;

            unpack(v, s);
            if (ev.kind == JumpKind::Slow) {
                s.e_s = slow_update(s.kappa_s, s.e_s);
                s.tau_s = 0.0;
                s.kappa_s += 1;
                ++j;
                v = pack(s);
                record(EventKind::SlowJump);
            } else {
                s.e_f = fast_update(s.kappa_f, s.e_f);
                s.tau_f = 0.0;
                s.kappa_f += 1;
                ++j;
                v = pack(s);
                record(EventKind::FastJump);
            }
        }

        traj.finalize_and_check(cfg);
        return traj;
    }
};

void check_state_dims(const ClosedLoop& cl, const HybridState& s) {
    if (s.x.size() != cl.n_x() || s.e_s.size() != cl.n_es() || s.z.size() != cl.n_z() ||
        s.e_f.size() != cl.n_ef()) {
        throw DimensionError("hybrid state does not match the closed loop dimensions");
    }
}

}  // namespace

HybridState flow_map(const ClosedLoop& cl, const HybridState& s, double epsilon) {
    check_state_dims(cl, s);
    if (!(epsilon > 0.0)) throw std::invalid_argument("flow_map: epsilon must be positive");
    HybridState d = s;
    d.x = cl.A11 * s.x + cl.A12 * s.e_s + cl.A13 * s.z + cl.A14 * s.e_f;
    d.e_s = cl.A21 * s.x + cl.A22 * s.e_s + cl.A23 * s.z + cl.A24 * s.e_f;
    d.z = (cl.A31 * s.x + cl.A32 * s.e_s + cl.A33 * s.z + cl.A34 * s.e_f) / epsilon;
    d.e_f = (epsilon * cl.A41eps + cl.A41) * s.x / epsilon +
            (epsilon * cl.A42eps + cl.A42) * s.e_s / epsilon +
            (epsilon * cl.A43eps + cl.A43) * s.z / epsilon +
            (epsilon * cl.A44eps + cl.A44) * s.e_f / epsilon;
    d.tau_s = 1.0;
    d.tau_f = 1.0 / epsilon;
    d.kappa_s = 0;
    d.kappa_f = 0;
    return d;
}

Matrix stacked_flow_matrix(const ClosedLoop& cl, double epsilon) {
    const auto nx = cl.n_x(), nes = cl.n_es(), nz = cl.n_z(), nef = cl.n_ef();
    Matrix f(nx + nes + nz + nef, nx + nes + nz + nef);
    Eigen::Index r = 0;
    auto put_row = [&](const Matrix& c1, const Matrix& c2, const Matrix& c3, const Matrix& c4) {
        f.block(r, 0, c1.rows(), nx) = c1;
        f.block(r, nx, c1.rows(), nes) = c2;
        f.block(r, nx + nes, c1.rows(), nz) = c3;
        f.block(r, nx + nes + nz, c1.rows(), nef) = c4;
        r += c1.rows();
    };
    put_row(cl.A11, cl.A12, cl.A13, cl.A14);
    put_row(cl.A21, cl.A22, cl.A23, cl.A24);
    put_row(cl.A31 / epsilon, cl.A32 / epsilon, cl.A33 / epsilon, cl.A34 / epsilon);
    put_row(cl.A41eps + cl.A41 / epsilon, cl.A42eps + cl.A42 / epsilon,
            cl.A43eps + cl.A43 / epsilon, cl.A44eps + cl.A44 / epsilon);
    return f;
}

HybridState jump_slow(const HybridState& s, const ProtocolSpec& proto, const ClockConfig& cfg) {
    if (!scheduler::classify(cfg, s.clocks()).slow_jump_allowed) {
        throw JumpSetViolationError("jump_slow: state outside the slow jump set");
    }
    HybridState out = s;
    out.e_s = protocols::protocol_jump(proto, s.kappa_s, s.e_s);
    out.tau_s = 0.0;
    out.kappa_s += 1;
    return out;
}

HybridState jump_fast(const HybridState& s, const ProtocolSpec& proto, const ClockConfig& cfg) {
    if (!scheduler::classify(cfg, s.clocks()).fast_jump_allowed) {
        throw JumpSetViolationError("jump_fast: state outside the fast jump set");
    }
    HybridState out = s;
    out.e_f = protocols::protocol_jump(proto, s.kappa_f, s.e_f);
    out.tau_f = 0.0;
    out.kappa_f += 1;
    return out;
}

HybridState to_y_coords(const ClosedLoop& cl, const HybridState& s) {
    check_state_dims(cl, s);
    HybridState y = s;
    y.z = s.z - (cl.Hx * s.x + cl.He * s.e_s);
    return y;
}

HybridState from_y_coords(const ClosedLoop& cl, const HybridState& y) {
    check_state_dims(cl, y);
    HybridState s = y;
    s.z = y.z + (cl.Hx * y.x + cl.He * y.e_s);
    return s;
}

double default_step(const ClockConfig& cfg) {
    switch (cfg.mode) {
        case ChannelMode::SlowOnly: return cfg.miati_s / 50.0;
        case ChannelMode::FastOnly: return cfg.mati_f / 50.0;
        case ChannelMode::Dual: return std::min(cfg.mati_f, cfg.miati_s) / 50.0;
    }
    return cfg.miati_s / 50.0;
}

HybridTrajectory simulate(const ClosedLoop& cl, const ClockConfig& cfg, const HybridState& x0,
                          const JumpPolicy& policy, const ProtocolSpec& proto_s,
                          const ProtocolSpec& proto_f, double t_end, double step,
                          std::size_t record_stride) {
    check_state_dims(cl, x0);
    if (cl.n_z() > 0) {
        const double a33_norm = numerics::spectral_norm(cl.A33);
        const double limit = cfg.epsilon / (2.0 * std::max(a33_norm, 1e-300));
        if (step > limit) {
            std::ostringstream msg;
            msg << "simulate: step " << step << " too large for the fast layer; use step <= "
                << limit;
            throw StiffStepError(msg.str(), limit);
        }
    }
    const Matrix f = stacked_flow_matrix(cl, cfg.epsilon);
    FlowFn flow = [&f](const Vector& v, double) -> Vector { return f * v; };
    JumpFn slow_update = [&](std::uint64_t kappa, const Vector& e) {
        return protocols::protocol_jump(proto_s, kappa, e);
    };
    JumpFn fast_update = [&](std::uint64_t kappa, const Vector& e) {
        return protocols::protocol_jump(proto_f, kappa, e);
    };
    Engine engine{cfg, policy, t_end, step, record_stride};
    return engine.run(flow, slow_update, fast_update, x0);
}

HybridTrajectory simulate_generic(const FlowFn& flow, const JumpFn& slow_update,
                                  const JumpFn& fast_update, const StateDims& dims,
                                  const ClockConfig& cfg, const HybridState& x0,
                                  const JumpPolicy& policy, double t_end, double step,
                                  std::size_t record_stride) {
    if (x0.x.size() != dims.n_x || x0.e_s.size() != dims.n_es || x0.z.size() != dims.n_z ||
        x0.e_f.size() != dims.n_ef) {
        throw DimensionError("simulate_generic: initial state does not match dims");
    }
    Engine engine{cfg, policy, t_end, step, record_stride};
    return engine.run(flow, slow_update, fast_update, x0);
}

}  // namespace hybridsim
}  // namespace spncs
