#include "spncs/scenario.hpp"

#include "spncs/rng.hpp"

#include <cmath>
#include <fstream>

namespace spncs {

using nlohmann::json;

ClosedLoop Scenario::closed_loop() const {
    return ltimodel::assemble_closed_loop(plant, controller);
}

ClockConfig Scenario::clock_config(double epsilon) const {
    ClockConfig cfg;
    cfg.mode = mode;
    cfg.epsilon = epsilon;
    cfg.miati_s = miati_s;
    cfg.mati_s = mati_s;
    if (cfg.fast_active()) {
        if (fast_clocks_from_bound) {
            if (!design) {
                throw ScenarioError("scenario: fast clock bounds require design constants");
            }
            cfg.mati_f = epsilon * mati::mati_bound(design->fast_mati_params());
            cfg.miati_f = 0.5 * cfg.mati_f;
        } else {
            cfg.mati_f = mati_f.value();
            cfg.miati_f = miati_f.value();
        }
    }
    cfg.validate();
    return cfg;
}

HybridState Scenario::initial_state(const ClosedLoop& cl, std::uint64_t seed) const {
    HybridState s;
    s.x = Vector::Zero(cl.n_x());
    s.e_s = Vector::Zero(cl.n_es());
    s.z = Vector::Zero(cl.n_z());
    s.e_f = Vector::Zero(cl.n_ef());

    const auto n = cl.n_x() + cl.n_es() + cl.n_z() + cl.n_ef();
    SplitMix64 rng(seed);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        // Box-Muller on SplitMix64 draws keeps states reproducible.
        const double u1 = std::max(rng.next_unit(), 1e-300);
        const double u2 = rng.next_unit();
        v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }
    if (v.norm() > 0) v.normalize();
    v *= initial_norm * (0.25 + 0.75 * rng.next_unit());

    Eigen::Index off = 0;
    s.x = v.segment(off, cl.n_x()); off += cl.n_x();
    s.e_s = v.segment(off, cl.n_es()); off += cl.n_es();
    s.z = v.segment(off, cl.n_z()); off += cl.n_z();
    s.e_f = v.segment(off, cl.n_ef());
    return s;
}

namespace scenario {
namespace {

double require_number(const json& j, const std::string& key) {
    if (!j.contains(key) || !j.at(key).is_number()) {
        throw ScenarioError("scenario: missing numeric field '" + key + "'");
    }
    return j.at(key).get<double>();
}

ProtocolSpec parse_protocol(const json& j, const std::string& label) {
    ProtocolSpec p;
    const std::string kind = j.value("kind", "reset_all");
    if (kind == "reset_all") {
        p.kind = ProtocolKind::ResetAll;
    } else if (kind == "tod") {
        p.kind = ProtocolKind::TOD;
    } else if (kind == "round_robin") {
        p.kind = ProtocolKind::RoundRobin;
    } else {
        throw ScenarioError("scenario: unknown protocol kind '" + kind + "' for " + label);
    }
    p.partition.node_sizes.clear();
    if (j.contains("node_sizes")) {
        for (const auto& v : j.at("node_sizes")) {
            p.partition.node_sizes.push_back(v.get<Eigen::Index>());
        }
    } else {
        p.partition.node_sizes = {1};
    }
    p.validate();
    return p;
}

PlantMatrices parse_plant(const json& j) {
    PlantMatrices p;
    p.A11p = parse_matrix(j.at("A11p"), "A11p");
    p.A12p = parse_matrix(j.at("A12p"), "A12p");
    p.A21p = parse_matrix(j.at("A21p"), "A21p");
    p.A22p = parse_matrix(j.at("A22p"), "A22p");
    p.A13p = parse_matrix(j.at("A13p"), "A13p");
    p.A14p = parse_matrix(j.at("A14p"), "A14p");
    p.A23p = parse_matrix(j.at("A23p"), "A23p");
    p.A24p = parse_matrix(j.at("A24p"), "A24p");
    p.Ax_ps = parse_matrix(j.at("Ax_ps"), "Ax_ps");
    p.Ax_pf = parse_matrix(j.at("Ax_pf"), "Ax_pf");
    p.Az_pf = parse_matrix(j.at("Az_pf"), "Az_pf");
    return p;
}

ControllerMatrices parse_controller(const json& j) {
    ControllerMatrices c;
    c.A11c = parse_matrix(j.at("A11c"), "A11c");
    c.A12c = parse_matrix(j.at("A12c"), "A12c");
    c.A21c = parse_matrix(j.at("A21c"), "A21c");
    c.A22c = parse_matrix(j.at("A22c"), "A22c");
    c.A13c = parse_matrix(j.at("A13c"), "A13c");
    c.A14c = parse_matrix(j.at("A14c"), "A14c");
    c.A23c = parse_matrix(j.at("A23c"), "A23c");
    c.A24c = parse_matrix(j.at("A24c"), "A24c");
    c.Ax_cs = parse_matrix(j.at("Ax_cs"), "Ax_cs");
    c.Ax_cf = parse_matrix(j.at("Ax_cf"), "Ax_cf");
    c.Az_cf = parse_matrix(j.at("Az_cf"), "Az_cf");
    return c;
}

DesignConstants parse_design(const json& j) {
    DesignConstants dc;
    dc.P_s = parse_matrix(j.at("P_s"), "P_s");
    dc.P_f = parse_matrix(j.at("P_f"), "P_f");
    dc.gamma_s = require_number(j, "gamma_s");
    dc.gamma_f = require_number(j, "gamma_f");
    dc.lambda_star_s = require_number(j, "lambda_star_s");
    dc.lambda_star_f = require_number(j, "lambda_star_f");
    dc.a_rho_s = require_number(j, "a_rho_s");
    dc.a_rho_f = require_number(j, "a_rho_f");
    dc.L_s = j.value("L_s", 0.0);
    dc.L_f = j.value("L_f", 0.0);
    dc.L1 = j.value("L1", 1.0);
    dc.L1_f = j.value("L1_f", 1.0);
    return dc;
}

}  // namespace

Matrix parse_matrix(const json& j, const std::string& name) {
    try {
        if (j.is_object()) {
            const auto rows = j.at("rows").get<Eigen::Index>();
            const auto cols = j.at("cols").get<Eigen::Index>();
            const auto& entries = j.at("entries");
            if (static_cast<Eigen::Index>(entries.size()) != rows * cols) {
                throw ScenarioError("scenario: matrix '" + name + "' entries do not match dims");
            }
            Matrix m(rows, cols);
            Eigen::Index idx = 0;
            for (const auto& v : entries) {
                m(idx / std::max<Eigen::Index>(cols, 1), idx % std::max<Eigen::Index>(cols, 1)) =
                    v.get<double>();
                ++idx;
            }
            if (!m.allFinite()) {
                throw ScenarioError("scenario: matrix '" + name + "' has non-finite entries");
            }
            return m;
        }
        if (j.is_array()) {
            const auto rows = static_cast<Eigen::Index>(j.size());
            if (rows == 0) return Matrix(0, 0);
            const auto cols = static_cast<Eigen::Index>(j.at(0).size());
            Matrix m(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                const auto& row = j.at(static_cast<std::size_t>(r));
                if (static_cast<Eigen::Index>(row.size()) != cols) {
                    throw ScenarioError("scenario: ragged matrix '" + name + "'");
                }
                for (Eigen::Index c = 0; c < cols; ++c) {
                    m(r, c) = row.at(static_cast<std::size_t>(c)).get<double>();
                }
            }
            if (!m.allFinite()) {
                throw ScenarioError("scenario: matrix '" + name + "' has non-finite entries");
            }
            return m;
        }
    } catch (const json::exception& e) {
        throw ScenarioError("scenario: malformed matrix '" + name + "': " + e.what());
    }
    throw ScenarioError("scenario: matrix '" + name + "' must be an array or {rows, cols, entries}");
}

json matrix_to_json(const Matrix& m) {
    json j;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    json entries = json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        for (Eigen::Index c = 0; c < m.cols(); ++c) entries.push_back(m(r, c));
    }
    j["entries"] = std::move(entries);
    return j;
}

Scenario builtin_example() {
    Scenario s;
    s.builtin_example = true;
    const auto fixture = certify::example_fixture();
    s.plant = fixture.plant;
    s.controller = fixture.controller;
    s.design = fixture.design;
    s.proto_s = fixture.proto_s;
    s.proto_f = fixture.proto_f;
    s.mode = ChannelMode::Dual;
    s.miati_s = fixture.miati_s;
    s.mati_s = fixture.mati_s;
    s.fast_clocks_from_bound = true;
    return s;
}

Scenario from_json(const json& j) {
    try {
        if (j.value("model", "") == "example" || j.value("builtin", "") == "example") {
            Scenario s = builtin_example();
            // Simulation/certify overrides still apply to the builtin model.
            if (j.contains("simulation")) {
                const auto& sim = j.at("simulation");
                if (sim.contains("epsilon")) {
                    s.epsilons.clear();
                    for (const auto& e : sim.at("epsilon")) s.epsilons.push_back(e.get<double>());
                }
                s.t_end = sim.value("t_end", s.t_end);
                if (sim.contains("step") && !sim.at("step").is_null()) {
                    s.step = sim.at("step").get<double>();
                }
                if (sim.contains("seeds")) {
                    s.seeds.clear();
                    for (const auto& v : sim.at("seeds")) s.seeds.push_back(v.get<std::uint64_t>());
                }
            }
            return s;
        }

        Scenario s;
        s.plant = parse_plant(j.at("plant"));
        s.controller = parse_controller(j.at("controller"));
        if (j.contains("design_constants")) {
            s.design = parse_design(j.at("design_constants"));
        }
        if (j.contains("protocols")) {
            s.proto_s = parse_protocol(j.at("protocols").at("slow"), "slow");
            s.proto_f = parse_protocol(j.at("protocols").at("fast"), "fast");
        }

        const auto& clocks = j.at("clocks");
        const std::string mode = clocks.value("mode", "dual");
        if (mode == "dual") s.mode = ChannelMode::Dual;
        else if (mode == "slow_only") s.mode = ChannelMode::SlowOnly;
        else if (mode == "fast_only") s.mode = ChannelMode::FastOnly;
        else throw ScenarioError("scenario: unknown channel mode '" + mode + "'");
        if (s.mode != ChannelMode::FastOnly) {
            s.miati_s = require_number(clocks, "miati_s");
            s.mati_s = require_number(clocks, "mati_s");
        }
        if (s.mode != ChannelMode::SlowOnly) {
            if (clocks.contains("mati_f") && !clocks.at("mati_f").is_null()) {
                s.mati_f = clocks.at("mati_f").get<double>();
                s.miati_f = require_number(clocks, "miati_f");
                s.fast_clocks_from_bound = false;
            } else {
                s.fast_clocks_from_bound = true;
            }
        }

        if (j.contains("simulation")) {
            const auto& sim = j.at("simulation");
            if (sim.contains("epsilon")) {
                s.epsilons.clear();
                for (const auto& e : sim.at("epsilon")) s.epsilons.push_back(e.get<double>());
                if (s.epsilons.empty()) throw ScenarioError("scenario: epsilon list empty");
            }
            s.t_end = sim.value("t_end", 20.0);
            if (sim.contains("step") && !sim.at("step").is_null()) {
                s.step = sim.at("step").get<double>();
            }
            const std::string pol = sim.value("policy", "latest");
            if (pol == "latest") s.policy.kind = PolicyKind::Latest;
            else if (pol == "earliest") s.policy.kind = PolicyKind::Earliest;
            else if (pol == "random") s.policy.kind = PolicyKind::UniformRandom;
            else throw ScenarioError("scenario: unknown policy '" + pol + "'");
            const std::string tie = sim.value("tie_break", "slow_first");
            if (tie == "slow_first") s.policy.tie_break = TieBreak::SlowFirst;
            else if (tie == "fast_first") s.policy.tie_break = TieBreak::FastFirst;
            else throw ScenarioError("scenario: unknown tie break '" + tie + "'");
            if (sim.contains("seeds")) {
                s.seeds.clear();
                for (const auto& v : sim.at("seeds")) s.seeds.push_back(v.get<std::uint64_t>());
            }
            if (sim.contains("initial") && sim.at("initial").contains("states")) {
                for (const auto& st : sim.at("initial").at("states")) {
                    Vector v(st.size());
                    for (std::size_t i = 0; i < st.size(); ++i) v[static_cast<Eigen::Index>(i)] = st.at(i).get<double>();
                    s.initial_states.push_back(std::move(v));
                }
            } else if (sim.contains("initial")) {
                s.initial_norm = sim.at("initial").value("norm", 10.0);
            }
        }
        if (s.policy.kind == PolicyKind::UniformRandom) {
            s.policy.seed = s.seeds.empty() ? 0 : s.seeds.front();
        }

        if (j.contains("certify")) {
            const auto& c = j.at("certify");
            s.certify_opts.mu_fraction = c.value("mu_fraction", 0.66);
            if (c.contains("mu") && !c.at("mu").is_null()) {
                s.certify_opts.mu_override = c.at("mu").get<double>();
            }
            if (c.contains("lambda_decay") && !c.at("lambda_decay").is_null()) {
                s.certify_opts.lambda_decay_override = c.at("lambda_decay").get<double>();
            }
            s.monitor_opts.slack_abs = c.value("slack_abs", 1e-9);
            s.monitor_opts.slack_rel = c.value("slack_rel", 1e-9);
            s.lmi_tol = c.value("lmi_tol", 0.05);
        }
        if (j.contains("output")) {
            s.out_dir = j.at("output").value("dir", "out");
        }

        // Cross-checks before any computation starts.
        const ClosedLoop cl = s.closed_loop();
        if (s.proto_s.partition.total_dim() != cl.n_es() ||
            s.proto_f.partition.total_dim() != cl.n_ef()) {
            throw ScenarioError("scenario: protocol partitions do not match error dimensions");
        }
        for (const auto& v : s.initial_states) {
            if (v.size() != cl.n_x() + cl.n_es() + cl.n_z() + cl.n_ef()) {
                throw ScenarioError("scenario: initial state dimension mismatch");
            }
        }
        return s;
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("scenario: malformed JSON: ") + e.what());
    }
}

Scenario load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("scenario: cannot open '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw ScenarioError(std::string("scenario: parse error: ") + e.what());
    }
    return from_json(j);
}

}  // namespace scenario
}  // namespace spncs
