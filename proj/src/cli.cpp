#include "koopctl/cli.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "koopctl/dmd.hpp"
#include "koopctl/dynamics.hpp"
#include "koopctl/errors.hpp"
#include "koopctl/harness.hpp"
#include "koopctl/io.hpp"

namespace koopctl {

namespace {

using nlohmann::json;

std::optional<std::uint64_t> seed_from_environment() {
    const char* raw = std::getenv("KOOPCTL_SEED");
    if (!raw || !*raw) return std::nullopt;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(raw, &end, 10);
    if (end == raw || *end != '\0')
        throw ConfigError("KOOPCTL_SEED must be a non-negative integer");
    return static_cast<std::uint64_t>(v);
}

struct SimulateArgs {
    std::string system;
    std::string out;
    int horizon = 200;
    std::uint64_t seed = 0;
    double noise_std = 1e-2;
    double dt = 0.1;
    int substeps = 4;
    bool rossler_standard = false;
};

void do_simulate(const SimulateArgs& a) {
    SystemSpec spec = SystemSpec::preset(system_kind_from_name(a.system));
    spec.noise_std = a.noise_std;
    spec.dt = a.dt;
    spec.substeps = a.substeps;
    spec.rossler_standard = a.rossler_standard;
    spec.validate();
    Trajectory traj = rollout_random(spec, a.horizon, a.seed);
    write_trajectory_csv(a.out, traj, spec.dt);
    std::cout << "wrote " << a.out << " (" << traj.length() << " rows)\n";
}

struct DmdArgs {
    std::string in;
    std::string out;
    int delay = 5;
    int rank = 2;
};

void do_dmd(const DmdArgs& a) {
    Trajectory traj = read_trajectory_csv(a.in);
    HankelConfig cfg;
    cfg.delay = a.delay;
    cfg.rank = a.rank;
    const std::vector<Complex> values = estimate_eigs(traj, cfg);
    json arr = json::array();
    for (const Complex& v : values)
        arr.push_back({{"re", v.real()},
                       {"im", v.imag()},
                       {"abs", std::abs(v)},
                       {"arg", std::arg(v)}});
    if (a.out.empty()) {
        std::cout << arr.dump(2) << '\n';
    } else {
        std::ofstream f(a.out);
        if (!f) throw IoError("cannot open for writing", a.out);
        f << arr.dump(2) << '\n';
        std::cout << "wrote " << a.out << '\n';
    }
}

void print_report(const EvalReport& r) {
    std::cout << "method " << r.method << " on " << r.system << ", target (" << r.target_abs
              << ", " << r.target_arg << "): mean error " << r.mean_error << " +- "
              << r.stderr_error << " over " << r.repeats << " repeats x " << r.runs
              << " runs\n";
}

void do_experiment(const std::string& config_path, const std::vector<std::string>& overrides,
                   bool dry_run) {
    const ExperimentConfig cfg =
        ExperimentConfig::load(config_path, overrides, seed_from_environment());
    if (dry_run) {
        run_experiment(cfg, true);
        std::cout << "config ok (hash " << cfg.hash() << "); nothing written\n";
        return;
    }
    const EvalReport report = run_experiment(cfg);
    print_report(report);
    std::cout << "artifacts in " << cfg.output_dir << '\n';
}

void do_evaluate(const std::string& config_path, const std::vector<std::string>& overrides,
                 const std::string& checkpoint_path, std::string out) {
    const ExperimentConfig cfg =
        ExperimentConfig::load(config_path, overrides, seed_from_environment());
    const Checkpoint ckpt = load_checkpoint(checkpoint_path);
    const auto controller = controller_from_checkpoint(ckpt, cfg.hash());
    OdeSystem env(cfg.system_spec(), cfg.seed);
    const EvalReport report = evaluate(env, controller, cfg);
    if (out.empty())
        out = (std::filesystem::path(cfg.output_dir) / "eval_report.json").string();
    const std::filesystem::path parent = std::filesystem::path(out).parent_path();
    if (!parent.empty()) std::filesystem::create_directories(parent);
    std::ofstream f(out);
    if (!f) throw IoError("cannot open for writing", out);
    f << report.to_json().dump(2) << '\n';
    print_report(report);
    std::cout << "wrote " << out << '\n';
}

void do_report(const std::vector<std::string>& files, const std::string& out) {
    const std::vector<ReportRow> rows = aggregate_reports(files);
    std::printf("%-10s %-10s %-10s %-6s %12s %12s\n", "system", "target_abs", "target_arg",
                "method", "mean_error", "stderr");
    for (const ReportRow& r : rows)
        std::printf("%-10s %-10.4g %-10.4g %-6s %12.6g %12.6g\n", r.system.c_str(),
                    r.target_abs, r.target_arg, r.method.c_str(), r.mean_error,
                    r.stderr_error);
    if (!out.empty()) {
        write_report_csv(out, rows);
        std::cout << "wrote " << out << '\n';
    }
}

} // namespace

int run_cli(int argc, const char* const* argv) {
    CLI::App app{"Koopman-eigenvalue pole-placement control experiments"};
    app.require_subcommand(1);

    SimulateArgs sim;
    CLI::App* simulate = app.add_subcommand("simulate", "Roll out a system under random control");
    simulate->add_option("--system", sim.system, "vdp, fn, duffing or rossler")->required();
    simulate->add_option("--out", sim.out, "trajectory CSV path")->required();
    simulate->add_option("--horizon", sim.horizon, "number of measurements");
    simulate->add_option("--seed", sim.seed, "random seed");
    simulate->add_option("--noise-std", sim.noise_std, "measurement noise std");
    simulate->add_option("--dt", sim.dt, "integration step");
    simulate->add_option("--substeps", sim.substeps, "RK4 substeps per dt");
    simulate->add_flag("--rossler-standard", sim.rossler_standard,
                       "use the textbook Rossler coupling");

    DmdArgs dmd;
    CLI::App* dmd_cmd = app.add_subcommand("dmd", "Estimate eigenvalues from a trajectory CSV");
    dmd_cmd->add_option("--in", dmd.in, "trajectory CSV path")->required();
    dmd_cmd->add_option("--out", dmd.out, "eigenvalue JSON path (stdout if omitted)");
    dmd_cmd->add_option("--delay", dmd.delay, "Hankel time delay");
    dmd_cmd->add_option("--rank", dmd.rank, "truncation rank");

    std::string config_path;
    std::vector<std::string> overrides;
    bool dry_run = false;
    CLI::App* train_cmd = app.add_subcommand("train", "Train the proposed method per config");
    train_cmd->add_option("--config", config_path, "flat JSON config path");
    train_cmd->add_option("--set", overrides, "override, key=value")->take_all();
    train_cmd->add_flag("--dry-run", dry_run, "validate config and write nothing");

    std::string baseline_method;
    CLI::App* baseline_cmd = app.add_subcommand("baseline", "Run a baseline method per config");
    baseline_cmd->add_option("--config", config_path, "flat JSON config path");
    baseline_cmd->add_option("--set", overrides, "override, key=value")->take_all();
    baseline_cmd->add_option("--method", baseline_method, "sl, sn or rl")->required();
    baseline_cmd->add_flag("--dry-run", dry_run, "validate config and write nothing");

    std::string checkpoint_path;
    std::string eval_out;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "Re-evaluate a saved checkpoint");
    eval_cmd->add_option("--config", config_path, "flat JSON config path");
    eval_cmd->add_option("--set", overrides, "override, key=value")->take_all();
    eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON path")->required();
    eval_cmd->add_option("--out", eval_out, "eval report path");

    std::vector<std::string> report_files;
    std::string report_out;
    CLI::App* report_cmd = app.add_subcommand("report", "Aggregate eval reports into a table");
    report_cmd->add_option("files", report_files, "eval report JSON files")->required();
    report_cmd->add_option("--out", report_out, "summary CSV path");

    try {
        app.parse(argc, argv);
        if (simulate->parsed()) {
            do_simulate(sim);
        } else if (dmd_cmd->parsed()) {
            do_dmd(dmd);
        } else if (train_cmd->parsed()) {
            const ExperimentConfig probe =
                ExperimentConfig::load(config_path, overrides, seed_from_environment());
            if (probe.method != "ours")
                throw ConfigError("train runs the proposed method; use `baseline --method " +
                                  probe.method + "` instead");
            do_experiment(config_path, overrides, dry_run);
        } else if (baseline_cmd->parsed()) {
            if (baseline_method != "sl" && baseline_method != "sn" && baseline_method != "rl")
                throw ConfigError("baseline --method must be sl, sn or rl");
            std::vector<std::string> with_method = overrides;
            with_method.push_back("method=" + baseline_method);
            do_experiment(config_path, with_method, dry_run);
        } else if (eval_cmd->parsed()) {
            do_evaluate(config_path, overrides, checkpoint_path, eval_out);
        } else if (report_cmd->parsed()) {
            do_report(report_files, report_out);
        }
        return 0;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return 4;
    } catch (const Error& e) {
        std::cerr << "numeric error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace koopctl
