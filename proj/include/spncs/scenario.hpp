#pragma once

#include "spncs/certify.hpp"

#include <optional>
#include <string>
#include <vector>

// Single-header nlohmann/json lives in vendor/.
#include <json.hpp>

namespace spncs {

struct ScenarioError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Everything one run needs: model, timing, protocols, certificate
/// inputs, and the simulation grid. Parsed and cross-validated before
/// any computation starts.
struct Scenario {
    bool builtin_example = false;
    PlantMatrices plant;
    ControllerMatrices controller;
    std::optional<DesignConstants> design;
    ProtocolSpec proto_s{ProtocolKind::ResetAll, NodePartition::scalar_nodes(1)};
    ProtocolSpec proto_f{ProtocolKind::ResetAll, NodePartition::scalar_nodes(1)};

    ChannelMode mode = ChannelMode::Dual;
    double miati_s = 0.0, mati_s = 0.0;
    std::optional<double> miati_f, mati_f;   // absent: derived from the fast bound
    bool fast_clocks_from_bound = true;

    std::vector<double> epsilons{0.01};
    double t_end = 20.0;
    std::optional<double> step;
    JumpPolicy policy{PolicyKind::Latest, TieBreak::SlowFirst, std::nullopt};
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    std::vector<Vector> initial_states;      // packed (x, e_s, z, e_f); empty: seeded random
    double initial_norm = 10.0;

    CertifyOptions certify_opts;
    MonitorOptions monitor_opts;
    double lmi_tol = 0.05;
    std::string out_dir = "out";

    ClosedLoop closed_loop() const;
    /// Clock configuration for one epsilon; fast bounds derived as
    /// mati_f = epsilon * T(L_f, gamma_f, lambda_f*) and miati_f = mati_f/2
    /// unless explicit values were given.
    ClockConfig clock_config(double epsilon) const;
    /// Seeded random initial state of norm <= initial_norm, clocks zero.
    HybridState initial_state(const ClosedLoop& cl, std::uint64_t seed) const;
};

namespace scenario {

Scenario from_json(const nlohmann::json& j);
Scenario load(const std::string& path);
Scenario builtin_example();

Matrix parse_matrix(const nlohmann::json& j, const std::string& name);
nlohmann::json matrix_to_json(const Matrix& m);

}  // namespace scenario
}  // namespace spncs
