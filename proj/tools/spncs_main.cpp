#include "spncs/certify.hpp"
#include "spncs/report.hpp"
#include "spncs/scenario.hpp"

#include <CLI11.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace spncs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitSchema = 2;
constexpr int kExitInfeasible = 3;
constexpr int kExitNumericalGuard = 4;

struct CliOptions {
    std::string scenario_path;
    std::string out_dir;
    std::string trajectory_path;
    std::vector<double> epsilons;
    std::vector<std::uint64_t> seeds;
    std::string policy;
    double step = 0.0;
};

Scenario load_scenario(const CliOptions& opt) {
    Scenario s = opt.scenario_path.empty() ? scenario::builtin_example()
                                           : scenario::load(opt.scenario_path);
    if (!opt.epsilons.empty()) s.epsilons = opt.epsilons;
    if (!opt.seeds.empty()) s.seeds = opt.seeds;
    if (!opt.out_dir.empty()) s.out_dir = opt.out_dir;
    if (opt.step > 0.0) s.step = opt.step;
    if (!opt.policy.empty()) {
        if (opt.policy == "earliest") s.policy.kind = PolicyKind::Earliest;
        else if (opt.policy == "latest") s.policy.kind = PolicyKind::Latest;
        else if (opt.policy == "random") s.policy.kind = PolicyKind::UniformRandom;
        else throw ScenarioError("unknown policy '" + opt.policy + "'");
        if (s.policy.kind == PolicyKind::UniformRandom && !s.policy.seed) {
            s.policy.seed = s.seeds.empty() ? 0 : s.seeds.front();
        }
        if (s.policy.kind != PolicyKind::UniformRandom) s.policy.seed.reset();
    }
    return s;
}

void emit(const Scenario& s, const std::string& name, const std::string& contents) {
    fs::create_directories(s.out_dir);
    report::write_file((fs::path(s.out_dir) / name).string(), contents);
}

unsigned thread_budget() {
    if (const char* env = std::getenv("SPNCS_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

json run_one_simulation(const Scenario& s, const ClosedLoop& cl, double epsilon,
                        std::uint64_t seed, const Vector* explicit_x0, HybridTrajectory* out_traj) {
    const ClockConfig cfg = s.clock_config(epsilon);
    HybridState x0;
    if (explicit_x0 != nullptr) {
        x0.x = explicit_x0->segment(0, cl.n_x());
        x0.e_s = explicit_x0->segment(cl.n_x(), cl.n_es());
        x0.z = explicit_x0->segment(cl.n_x() + cl.n_es(), cl.n_z());
        x0.e_f = explicit_x0->segment(cl.n_x() + cl.n_es() + cl.n_z(), cl.n_ef());
    } else {
        x0 = s.initial_state(cl, seed);
    }
    if (!scheduler::classify(cfg, x0.clocks()).in_flow) {
        throw ScenarioError("simulate: initial clocks outside the flow set");
    }
    JumpPolicy policy = s.policy;
    if (policy.kind == PolicyKind::UniformRandom) policy.seed = seed;
    const double h = s.step.value_or(hybridsim::default_step(cfg));
    HybridTrajectory traj =
        hybridsim::simulate(cl, cfg, x0, policy, s.proto_s, s.proto_f, s.t_end, h);

    const auto& last = traj.samples.back().state;
    const double xi0 = std::sqrt(x0.x.squaredNorm() + x0.e_s.squaredNorm() + x0.z.squaredNorm() +
                                 x0.e_f.squaredNorm());
    const double xiT = std::sqrt(last.x.squaredNorm() + last.e_s.squaredNorm() +
                                 last.z.squaredNorm() + last.e_f.squaredNorm());
    json summary;
    summary["epsilon"] = epsilon;
    summary["seed"] = seed;
    summary["t_end"] = s.t_end;
    summary["step"] = h;
    summary["initial_distance"] = xi0;
    summary["terminal_distance"] = xiT;
    summary["terminal_over_initial"] = xi0 > 0 ? xiT / xi0 : 0.0;
    summary["diverged"] = !(xiT < 1e6 * std::max(xi0, 1.0));
    summary["slow_jumps"] = traj.slow_jump_times().size();
    summary["fast_jumps"] = traj.fast_jump_times().size();
    summary["schedule_valid"] =
        scheduler::validate_sequence(cfg, traj.slow_jump_times(), traj.fast_jump_times());
    if (out_traj != nullptr) *out_traj = std::move(traj);
    return summary;
}

int cmd_mati(const Scenario& s) {
    if (!s.design) throw ConstraintError("mati: scenario has no design constants");
    json out;
    if (s.mode != ChannelMode::FastOnly) {
        out["mati_s_bound"] = mati::mati_bound(s.design->slow_mati_params());
    }
    if (s.mode != ChannelMode::SlowOnly) {
        const double tf = mati::mati_bound(s.design->fast_mati_params());
        out["mati_f_bound_fast_time"] = tf;
        json per_eps = json::array();
        for (const double eps : s.epsilons) {
            per_eps.push_back({{"epsilon", eps},
                               {"mati_f_physical", eps * tf},
                               {"miati_f_constraint", 0.5 * eps * tf}});
        }
        out["fast_physical"] = std::move(per_eps);
    }
    std::cout << out.dump(2) << "\n";
    emit(s, "mati.json", out.dump(2) + "\n");
    return kExitOk;
}

int cmd_design(const Scenario& s, Certificate* out_cert) {
    if (!s.design) throw ConstraintError("design: scenario has no design constants");
    const ClosedLoop cl = s.closed_loop();
    const auto lmi = certify::lmi_feasible(cl, *s.design, s.lmi_tol);

    json out;
    LmiSearchResult search;
    const bool marginal = lmi.lmax_slow > 0.0 || lmi.lmax_fast > 0.0;
    if (marginal) {
        const LmiSide side = lmi.lmax_slow > lmi.lmax_fast ? LmiSide::Slow : LmiSide::Fast;
        search = certify::lmi_perturbation_search(cl, *s.design, side, 0.02, 0.0, 424242);
        out["lmi"] = report::lmi_json(lmi, &search);
    } else {
        out["lmi"] = report::lmi_json(lmi, nullptr);
    }
    if (!lmi.slow_feasible || !lmi.fast_feasible) {
        std::cerr << "design: LMI infeasible at tolerance " << s.lmi_tol
                  << " (lmax_slow = " << lmi.lmax_slow << ", lmax_fast = " << lmi.lmax_fast
                  << ")\n";
        std::cout << out.dump(2) << "\n";
        return kExitInfeasible;
    }

    const Certificate cert =
        certify::build_certificate(cl, *s.design, s.miati_s, s.mati_s, s.certify_opts);
    out["certificate"] = report::certificate_json(cert);
    for (const double eps : s.epsilons) {
        out["fast_clock_bounds"].push_back(
            {{"epsilon", eps},
             {"mati_f_physical", eps * cert.mati_f_bound_fast_time},
             {"miati_f_constraint", 0.5 * eps * cert.mati_f_bound_fast_time}});
    }
    std::cout << out.dump(2) << "\n";
    emit(s, "certificate.json", out.dump(2) + "\n");
    if (out_cert != nullptr) *out_cert = cert;
    return kExitOk;
}

int cmd_simulate(const Scenario& s) {
    const ClosedLoop cl = s.closed_loop();
    json runs = json::array();
    int idx = 0;
    for (const double eps : s.epsilons) {
        if (!s.initial_states.empty()) {
            for (std::size_t i = 0; i < s.initial_states.size(); ++i) {
                HybridTrajectory traj;
                json summary = run_one_simulation(s, cl, eps, static_cast<std::uint64_t>(i),
                                                  &s.initial_states[i], &traj);
                summary["grid_index"] = idx;
                emit(s, "trajectory_" + std::to_string(idx) + ".csv",
                     report::trajectory_csv(traj));
                emit(s, "schedule_" + std::to_string(idx) + ".csv", report::schedule_csv(traj));
                runs.push_back(std::move(summary));
                ++idx;
            }
        } else {
            for (const auto seed : s.seeds) {
                HybridTrajectory traj;
                json summary = run_one_simulation(s, cl, eps, seed, nullptr, &traj);
                summary["grid_index"] = idx;
                emit(s, "trajectory_" + std::to_string(idx) + ".csv",
                     report::trajectory_csv(traj));
                emit(s, "schedule_" + std::to_string(idx) + ".csv", report::schedule_csv(traj));
                runs.push_back(std::move(summary));
                ++idx;
            }
        }
    }
    json out;
    out["runs"] = std::move(runs);
    std::cout << out.dump(2) << "\n";
    emit(s, "simulate_summary.json", out.dump(2) + "\n");
    return kExitOk;
}

int cmd_certify(const Scenario& s, const std::string& trajectory_path) {
    if (!s.design) throw ConstraintError("certify: scenario has no design constants");
    const ClosedLoop cl = s.closed_loop();
    const Certificate cert =
        certify::build_certificate(cl, *s.design, s.miati_s, s.mati_s, s.certify_opts);

    json reports = json::array();
    int idx = 0;
    auto monitor_one = [&](const HybridTrajectory& traj, double eps) {
        const ClockConfig cfg = s.clock_config(eps);
        const MonitorReport rep = certify::monitor_trajectory(traj, cl, cfg, *s.design, cert,
                                                              s.proto_s, s.proto_f, s.monitor_opts);
        json jrep = report::monitor_json(rep);
        jrep["epsilon"] = eps;
        jrep["grid_index"] = idx;
        emit(s, "lyapunov_" + std::to_string(idx) + ".csv",
             report::lyapunov_csv(traj, cl, *s.design, cert, s.proto_s, s.proto_f));
        emit(s, "lyapunov_" + std::to_string(idx) + ".svg",
             report::svg_lyapunov_plot(traj, cl, *s.design, cert, s.proto_s, s.proto_f));
        emit(s, "envelope_" + std::to_string(idx) + ".svg",
             report::svg_envelope_plot(traj, cert));
        reports.push_back(std::move(jrep));
        ++idx;
    };

    if (!trajectory_path.empty()) {
        std::ifstream in(trajectory_path);
        if (!in) throw ScenarioError("certify: cannot open trajectory '" + trajectory_path + "'");
        std::stringstream buf;
        buf << in.rdbuf();
        monitor_one(report::trajectory_from_csv(buf.str()), s.epsilons.front());
    } else {
        for (const double eps : s.epsilons) {
            for (const auto seed : s.seeds) {
                HybridTrajectory traj;
                run_one_simulation(s, cl, eps, seed, nullptr, &traj);
                monitor_one(traj, eps);
            }
        }
    }

    json out;
    out["certificate"] = report::certificate_json(cert);
    out["monitor_reports"] = reports;
    bool all_ok = true;
    for (const auto& r : out["monitor_reports"]) all_ok = all_ok && r.at("ok").get<bool>();
    out["all_ok"] = all_ok;
    std::cout << out.dump(2) << "\n";
    emit(s, "certify_report.json", out.dump(2) + "\n");
    return kExitOk;
}

int cmd_reproduce_example(const Scenario& base) {
    Scenario s = scenario::builtin_example();
    s.out_dir = base.out_dir;
    const ClosedLoop cl = s.closed_loop();
    const DesignConstants& dc = *s.design;

    struct Row {
        std::string name;
        double reference;
        double computed;
    };
    std::vector<Row> rows;

    const double ts = mati::mati_bound(dc.slow_mati_params());
    const double tf = mati::mati_bound(dc.fast_mati_params());
    rows.push_back({"mati_s_bound [s]", 0.3601, ts});
    rows.push_back({"mati_f_bound [fast time]", 1.11, tf});

    const Certificate cert = certify::build_certificate(cl, dc, s.miati_s, s.mati_s, {});
    rows.push_back({"epsilon_star", 0.0162, cert.epsilon_star});

    const auto [l1, l2] = certify::slow_jump_constants(cl, dc);
    rows.push_back({"lambda1", 9.072e-5, l1});
    const double pf_min = numerics::sym_eig_extremes(dc.P_f).first;
    const double l2_entrywise = 2.0 * (0.0018 / 0.2) * (1.12 + 0.018) / std::sqrt(pf_min);
    rows.push_back({"lambda2", l2_entrywise, l2});

    const auto lmi = certify::lmi_feasible(cl, dc, 0.05);
    rows.push_back({"lmi_lmax_slow (<= 0.05)", 0.0, lmi.lmax_slow});
    rows.push_back({"lmi_lmax_fast (marginal)", 0.0, lmi.lmax_fast});

    const auto inter = certify::interconnection_constants(cl, dc);
    const double b1_fixture = numerics::spectral_norm(certify::example_lambda_b1_matrix());
    rows.push_back({"b1 (fixture vs 2x generic)", b1_fixture, 2.0 * inter.b1});

    json out = json::array();
    std::cout << "quantity                     reference      computed      rel.dev\n";
    for (const auto& r : rows) {
        const double dev = r.reference != 0.0 ? (r.computed - r.reference) / r.reference : r.computed;
        std::printf("%-28s %12.6g %12.6g %10.3g\n", r.name.c_str(), r.reference, r.computed, dev);
        out.push_back({{"name", r.name},
                       {"reference", r.reference},
                       {"computed", r.computed},
                       {"relative_deviation", dev}});
    }
    emit(s, "reproduce_example.json", out.dump(2) + "\n");
    return kExitOk;
}

int cmd_sweep(const Scenario& s) {
    const ClosedLoop cl = s.closed_loop();
    struct Entry {
        double eps;
        std::uint64_t seed;
    };
    std::vector<Entry> grid;
    for (const double eps : s.epsilons) {
        for (const auto seed : s.seeds) grid.push_back({eps, seed});
    }
    std::vector<json> results(grid.size());
    std::atomic<std::size_t> next{0};
    const unsigned workers = std::min<unsigned>(thread_budget(), static_cast<unsigned>(grid.size()));

    auto work = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= grid.size()) return;
            json summary = run_one_simulation(s, cl, grid[i].eps, grid[i].seed, nullptr, nullptr);
            summary["grid_index"] = i;
            results[i] = std::move(summary);
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
    for (auto& th : pool) th.join();

    json out;
    out["grid"] = json::array();
    for (auto& r : results) out["grid"].push_back(std::move(r));
    std::cout << out.dump(2) << "\n";
    emit(s, "sweep.json", out.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Simulator and stability-certificate toolkit for two-time-scale "
                 "networked control systems sharing one channel"};
    app.require_subcommand(1);
    app.fallthrough();

    CliOptions opt;
    app.add_option("--scenario", opt.scenario_path, "Scenario JSON (default: builtin example)");
    app.add_option("--out", opt.out_dir, "Output directory");
    app.add_option("--epsilon", opt.epsilons, "Override epsilon list");
    app.add_option("--seed", opt.seeds, "Override seed list");
    app.add_option("--policy", opt.policy, "earliest|latest|random");
    app.add_option("--step", opt.step, "Integration step [s]");

    auto* c_mati = app.add_subcommand("mati", "Transmission-interval bounds");
    auto* c_design = app.add_subcommand("design", "LMI check and certificate pipeline");
    auto* c_sim = app.add_subcommand("simulate", "Run the hybrid simulation grid");
    auto* c_cert = app.add_subcommand("certify", "Monitor trajectories against the certificate");
    c_cert->add_option("--trajectory", opt.trajectory_path, "Trajectory CSV to monitor");
    auto* c_repro = app.add_subcommand("reproduce-example", "Reported-vs-computed table");
    auto* c_sweep = app.add_subcommand("sweep", "Parallel parameter sweep");

    CLI11_PARSE(app, argc, argv);

    try {
        const Scenario s = load_scenario(opt);
        if (c_mati->parsed()) return cmd_mati(s);
        if (c_design->parsed()) return cmd_design(s, nullptr);
        if (c_sim->parsed()) return cmd_simulate(s);
        if (c_cert->parsed()) return cmd_certify(s, opt.trajectory_path);
        if (c_repro->parsed()) return cmd_reproduce_example(s);
        if (c_sweep->parsed()) return cmd_sweep(s);
    } catch (const ScenarioError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitSchema;
    } catch (const StiffStepError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalGuard;
    } catch (const StepUnderflowError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalGuard;
    } catch (const SingularMatrixError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumericalGuard;
    } catch (const ConstraintError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const ScheduleInfeasibleError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInfeasible;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
