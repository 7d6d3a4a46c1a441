#include "spncs/report.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace spncs::report {

using nlohmann::json;

namespace {

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct PolySeries {
    std::vector<std::pair<double, double>> points;  // (t, value)
};

// Minimal hand-emitted SVG: log-y polylines over a fixed viewport.
std::string svg_log_plot(const std::vector<PolySeries>& series,
                         const std::vector<std::string>& colors,
                         const std::vector<std::pair<double, double>>& markers,
                         const std::string& title) {
    const double W = 900, H = 480, ml = 70, mr = 20, mt = 40, mb = 50;
    double t_min = 1e300, t_max = -1e300, v_min = 1e300, v_max = -1e300;
    for (const auto& s : series) {
        for (const auto& [t, v] : s.points) {
            if (v <= 0 || !std::isfinite(v)) continue;
            t_min = std::min(t_min, t);
            t_max = std::max(t_max, t);
            v_min = std::min(v_min, v);
            v_max = std::max(v_max, v);
        }
    }
    if (t_max <= t_min) { t_min = 0; t_max = 1; }
    if (v_max <= v_min) { v_min = 1e-12; v_max = 1; }
    v_min = std::max(v_min, v_max * 1e-16);
    const double ly_min = std::log10(v_min), ly_max = std::log10(v_max);

    auto px = [&](double t) { return ml + (t - t_min) / (t_max - t_min) * (W - ml - mr); };
    auto py = [&](double v) {
        const double ly = std::log10(std::max(v, v_min));
        return H - mb - (ly - ly_min) / std::max(ly_max - ly_min, 1e-12) * (H - mt - mb);
    };

    std::ostringstream s;
    s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    s << "<rect width='100%' height='100%' fill='white'/>\n";
    s << "<text x='" << W / 2 << "' y='24' text-anchor='middle' font-size='16'>" << title
      << "</text>\n";
    s << "<line x1='" << ml << "' y1='" << H - mb << "' x2='" << W - mr << "' y2='" << H - mb
      << "' stroke='black'/>\n";
    s << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << H - mb
      << "' stroke='black'/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double t = t_min + i * (t_max - t_min) / 4;
        s << "<text x='" << px(t) << "' y='" << H - mb + 20
          << "' text-anchor='middle' font-size='11'>" << t << "</text>\n";
        const double lv = ly_min + i * (ly_max - ly_min) / 4;
        s << "<text x='" << ml - 8 << "' y='" << py(std::pow(10.0, lv)) + 4
          << "' text-anchor='end' font-size='11'>1e" << static_cast<int>(std::round(lv))
          << "</text>\n";
    }
    for (std::size_t k = 0; k < series.size(); ++k) {
        s << "<polyline fill='none' stroke='" << colors[k % colors.size()]
          << "' stroke-width='1.2' points='";
        for (const auto& [t, v] : series[k].points) {
            if (v <= 0 || !std::isfinite(v)) continue;
            s << px(t) << "," << py(v) << " ";
        }
        s << "'/>\n";
    }
    for (const auto& [t, v] : markers) {
        if (v <= 0) continue;
        s << "<circle cx='" << px(t) << "' cy='" << py(v) << "' r='2.2' fill='crimson'/>\n";
    }
    s << "</svg>\n";
    return s.str();
}

double state_distance(const HybridState& st) {
    return std::sqrt(st.x.squaredNorm() + st.e_s.squaredNorm() + st.z.squaredNorm() +
                     st.e_f.squaredNorm());
}

}  // namespace

json certificate_json(const Certificate& cert) {
    json j;
    j["mati_s_bound"] = cert.mati_s_bound;
    j["mati_f_bound_fast_time"] = cert.mati_f_bound_fast_time;
    j["a_s"] = cert.gains.a_s;
    j["a_f"] = cert.gains.a_f;
    j["a_Us_lower"] = cert.gains.a_Us_lower;
    j["a_Us_upper"] = cert.gains.a_Us_upper;
    j["a_Uf_lower"] = cert.gains.a_Uf_lower;
    j["a_Uf_upper"] = cert.gains.a_Uf_upper;
    j["a_psi_s"] = cert.gains.a_psi_s;
    j["a_psi_f"] = cert.gains.a_psi_f;
    j["b1"] = cert.b1;
    j["b2"] = cert.b2;
    j["b3"] = cert.b3;
    j["lambda1"] = cert.lambda1;
    j["lambda2"] = cert.lambda2;
    j["mu"] = cert.mu;
    j["lambda_decay"] = cert.lambda_decay;
    j["d_star"] = cert.d_star;
    j["a_d"] = cert.a_d;
    j["epsilon_star"] = cert.epsilon_star;
    j["c1"] = cert.c1;
    j["c2"] = cert.c2;
    j["h1"] = cert.h1;
    j["miati_s"] = cert.miati_s;
    j["mati_s"] = cert.mati_s;
    return j;
}

json monitor_json(const MonitorReport& rep) {
    json j;
    j["samples"] = rep.sample_count;
    j["fast_jumps"] = rep.fast_jumps;
    j["slow_jumps"] = rep.slow_jumps;
    j["envelope_worst_margin"] = rep.envelope_worst_margin;
    j["initial_distance"] = rep.initial_distance;
    j["ok"] = rep.ok();
    json viol = json::array();
    for (const auto& v : rep.violations) {
        viol.push_back({{"t", v.t}, {"j", v.j}, {"kind", v.kind}, {"amount", v.amount}});
    }
    j["violations"] = std::move(viol);
    json rates = json::array();
    for (const auto& r : rep.segment_rates) {
        rates.push_back({{"t_start", r.t_start}, {"t_end", r.t_end}, {"rate", r.rate}});
    }
    j["segment_rates"] = std::move(rates);
    return j;
}

json lmi_json(const LmiReport& lmi, const LmiSearchResult* search) {
    json j;
    j["slow_feasible"] = lmi.slow_feasible;
    j["fast_feasible"] = lmi.fast_feasible;
    j["lmax_slow"] = lmi.lmax_slow;
    j["lmax_fast"] = lmi.lmax_fast;
    if (search != nullptr) {
        j["perturbation_search"] = {{"found", search->found},
                                    {"lmax", search->lmax},
                                    {"draws_used", search->draws_used}};
    }
    return j;
}

std::string trajectory_csv(const HybridTrajectory& traj) {
    std::ostringstream out;
    if (traj.samples.empty()) return "";
    const auto& st0 = traj.samples.front().state;
    out << "t,j,event";
    for (Eigen::Index i = 0; i < st0.x.size(); ++i) out << ",x" << i;
    for (Eigen::Index i = 0; i < st0.e_s.size(); ++i) out << ",e_s" << i;
    out << ",tau_s,kappa_s";
    for (Eigen::Index i = 0; i < st0.z.size(); ++i) out << ",z" << i;
    for (Eigen::Index i = 0; i < st0.e_f.size(); ++i) out << ",e_f" << i;
    out << ",tau_f,kappa_f\n";
    for (const auto& s : traj.samples) {
        const char* ev = s.event == EventKind::FlowSample
                             ? "flow"
                             : (s.event == EventKind::SlowJump ? "slow_jump" : "fast_jump");
        out << fmt(s.t) << "," << s.j << "," << ev;
        for (Eigen::Index i = 0; i < s.state.x.size(); ++i) out << "," << fmt(s.state.x[i]);
        for (Eigen::Index i = 0; i < s.state.e_s.size(); ++i) out << "," << fmt(s.state.e_s[i]);
        out << "," << fmt(s.state.tau_s) << "," << s.state.kappa_s;
        for (Eigen::Index i = 0; i < s.state.z.size(); ++i) out << "," << fmt(s.state.z[i]);
        for (Eigen::Index i = 0; i < s.state.e_f.size(); ++i) out << "," << fmt(s.state.e_f[i]);
        out << "," << fmt(s.state.tau_f) << "," << s.state.kappa_f << "\n";
    }
    return out.str();
}

HybridTrajectory trajectory_from_csv(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line)) {
        throw std::runtime_error("trajectory csv: missing header");
    }
    std::vector<std::string> cols;
    {
        std::istringstream hs(line);
        std::string c;
        while (std::getline(hs, c, ',')) cols.push_back(c);
    }
    auto count_prefix = [&](const std::string& p) {
        Eigen::Index n = 0;
        for (const auto& c : cols) {
            if (c.rfind(p, 0) == 0 && c.size() > p.size() &&
                std::isdigit(static_cast<unsigned char>(c[p.size()]))) {
                ++n;
            }
        }
        return n;
    };
    const Eigen::Index nx = count_prefix("x");
    const Eigen::Index nes = count_prefix("e_s");
    const Eigen::Index nz = count_prefix("z");
    const Eigen::Index nef = count_prefix("e_f");

    HybridTrajectory traj;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string tok;
        std::vector<std::string> f;
        while (std::getline(ls, tok, ',')) f.push_back(tok);
        std::size_t i = 0;
        TrajectorySample s;
        s.t = std::stod(f.at(i++));
        s.j = std::stoull(f.at(i++));
        const std::string ev = f.at(i++);
        s.event = ev == "flow" ? EventKind::FlowSample
                               : (ev == "slow_jump" ? EventKind::SlowJump : EventKind::FastJump);
        auto read_vec = [&](Eigen::Index n) {
            Vector v(n);
            for (Eigen::Index k = 0; k < n; ++k) v[k] = std::stod(f.at(i++));
            return v;
        };
        s.state.x = read_vec(nx);
        s.state.e_s = read_vec(nes);
        s.state.tau_s = std::stod(f.at(i++));
        s.state.kappa_s = std::stoull(f.at(i++));
        s.state.z = read_vec(nz);
        s.state.e_f = read_vec(nef);
        s.state.tau_f = std::stod(f.at(i++));
        s.state.kappa_f = std::stoull(f.at(i++));
        traj.samples.push_back(std::move(s));
    }
    return traj;
}

std::string schedule_csv(const HybridTrajectory& traj) {
    std::ostringstream out;
    out << "time,kind,kappa\n";
    for (const auto& s : traj.samples) {
        if (s.event == EventKind::SlowJump) {
            out << fmt(s.t) << ",slow," << s.state.kappa_s - 1 << "\n";
        } else if (s.event == EventKind::FastJump) {
            out << fmt(s.t) << ",fast," << s.state.kappa_f - 1 << "\n";
        }
    }
    return out.str();
}

std::string lyapunov_csv(const HybridTrajectory& traj, const ClosedLoop& cl,
                         const DesignConstants& dc, const Certificate& cert,
                         const ProtocolSpec& proto_s, const ProtocolSpec& proto_f) {
    std::ostringstream out;
    out << "t,j,event,U_s,U_f,U\n";
    for (const auto& s : traj.samples) {
        const auto u = certify::lyapunov_U(cl, dc, cert, hybridsim::to_y_coords(cl, s.state),
                                           proto_s, proto_f);
        const char* ev = s.event == EventKind::FlowSample
                             ? "flow"
                             : (s.event == EventKind::SlowJump ? "slow_jump" : "fast_jump");
        out << fmt(s.t) << "," << s.j << "," << ev << "," << fmt(u.U_s) << "," << fmt(u.U_f) << ","
            << fmt(u.U) << "\n";
    }
    return out.str();
}

std::string svg_lyapunov_plot(const HybridTrajectory& traj, const ClosedLoop& cl,
                              const DesignConstants& dc, const Certificate& cert,
                              const ProtocolSpec& proto_s, const ProtocolSpec& proto_f) {
    PolySeries u_series;
    std::vector<std::pair<double, double>> jump_markers;
    for (const auto& s : traj.samples) {
        const auto u = certify::lyapunov_U(cl, dc, cert, hybridsim::to_y_coords(cl, s.state),
                                           proto_s, proto_f);
        u_series.points.push_back({s.t, u.U});
        if (s.event != EventKind::FlowSample) jump_markers.push_back({s.t, u.U});
    }
    return svg_log_plot({u_series}, {"steelblue"}, jump_markers,
                        "Composite Lyapunov function U along the trajectory");
}

std::string svg_envelope_plot(const HybridTrajectory& traj, const Certificate& cert) {
    PolySeries dist, env;
    double xi0 = traj.samples.empty() ? 0.0 : state_distance(traj.samples.front().state);
    std::uint64_t slow_count = 0;
    for (const auto& s : traj.samples) {
        if (s.event == EventKind::SlowJump) ++slow_count;
        dist.points.push_back({s.t, state_distance(s.state)});
        env.points.push_back(
            {s.t, cert.c1 * xi0 * std::exp(-cert.c2 * (s.t + static_cast<double>(slow_count)))});
    }
    return svg_log_plot({dist, env}, {"steelblue", "darkorange"}, {},
                        "|xi(t,j)| against the certified exponential envelope");
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << contents;
}

}  // namespace spncs::report
