#pragma once

#include "spncs/certify.hpp"
#include "spncs/hybridsim.hpp"

#include <json.hpp>
#include <string>
#include <vector>

namespace spncs::report {

nlohmann::json certificate_json(const Certificate& cert);
nlohmann::json monitor_json(const MonitorReport& rep);
nlohmann::json lmi_json(const LmiReport& lmi, const LmiSearchResult* search);

/// CSV with header t,j,event,x...,e_s...,tau_s,kappa_s,z...,e_f...,tau_f,kappa_f.
std::string trajectory_csv(const HybridTrajectory& traj);

/// Inverse of trajectory_csv; dimensions are recovered from the header.
HybridTrajectory trajectory_from_csv(const std::string& csv);

/// CSV with header time,kind,kappa for a realized transmission schedule.
std::string schedule_csv(const HybridTrajectory& traj);

/// Per-jump U values for plotting: t,j,event,U_s,U_f,U.
std::string lyapunov_csv(const HybridTrajectory& traj, const ClosedLoop& cl,
                         const DesignConstants& dc, const Certificate& cert,
                         const ProtocolSpec& proto_s, const ProtocolSpec& proto_f);

/// Log-scale polyline plot of U(t) with jump markers.
std::string svg_lyapunov_plot(const HybridTrajectory& traj, const ClosedLoop& cl,
                              const DesignConstants& dc, const Certificate& cert,
                              const ProtocolSpec& proto_s, const ProtocolSpec& proto_f);

/// |xi(t,j)| against the certified envelope c1 |xi0| exp(-c2 (t+j)).
std::string svg_envelope_plot(const HybridTrajectory& traj, const Certificate& cert);

void write_file(const std::string& path, const std::string& contents);

}  // namespace spncs::report
