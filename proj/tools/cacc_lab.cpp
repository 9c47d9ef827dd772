// cacc-lab: closed-loop CACC experiments, drag-model fitting and invariant-set export.
#include <cacc/config.hpp>
#include <cacc/errors.hpp>
#include <cacc/invariant_set.hpp>
#include <cacc/param_fit.hpp>
#include <cacc/scenario.hpp>

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace cacc;

namespace {

int cmd_simulate(const std::string& config, const std::string& sweep, const std::string& out) {
    ScenarioConfig cfg = load_config(config);
    if (!sweep.empty()) {
        const SweepVar s = parse_sweep(sweep);
        if (s != cfg.sweep || cfg.values.empty()) cfg.values = ScenarioConfig::default_values(s);
        cfg.sweep = s;
    }
    FamilyStore store;
    const RunSet runs = run(cfg, &store);
    const auto [fe, fc] = savings_tables(cfg);
    const EnergyReport rep = energy_report(runs, cfg.vehicle, cfg.powertrain, cfg.mpc.bounds, fe, fc);
    print_report(std::cout, rep);
    if (!out.empty()) {
        export_runs(runs, rep, cfg, out);
        std::cout << "wrote " << out << '\n';
    }
    bool safe = true;
    for (const auto& row : rep.rows)
        if (row.label != "front" && !row.safety.ok) safe = false;
    if (!safe) std::cerr << "safety violated in at least one run\n";
    return safe ? 0 : 1;
}

int cmd_fit(const std::string& data, const std::string& out, const std::string& vehicle, double fraction,
            std::uint64_t seed) {
    const VehicleParams known = vehicle.empty() ? VehicleParams{} : load_vehicle_params(vehicle);
    const auto samples = load_drive_log(data);
    const Split s = split(samples, fraction, seed);
    FitResult r = fit(s.train, known, DragCoefficients{}, FitOptions{});
    validate(r, known, s.validation);
    fs::create_directories(out);
    {
        std::ofstream os(fs::path(out) / "fit_report.txt");
        if (!os) throw IoError("cannot write report in " + out);
        write_fit_report(os, r, s.train.size(), s.validation.size());
    }
    save_vehicle_params(fs::path(out) / "fitted_params.ini", with_coefficients(known, r.coef));
    write_fit_report(std::cout, r, s.train.size(), s.validation.size());
    return 0;
}

int cmd_invariant(const std::string& config, const std::string& out) {
    const ScenarioConfig cfg = load_config(config);
    const auto sys =
        build_linear_system(cfg.vehicle, cfg.mpc.bounds, cfg.invariant.grade, cfg.invariant.half_drag_shrink);
    const InvariantFamily fam = compute_invariant_family(sys, cfg.invariant.options);
    save_family(out, fam, family_hash(sys, cfg.invariant.options));
    std::cout << fam.slices.size() << " slices, front-speed step " << fam.grid_step << " m/s, stopped-front slice "
              << (fam.converged ? "converged" : "NOT converged") << " after " << fam.base_iterations
              << " iterations\nwrote " << out << '\n';
    return fam.converged ? 0 : 1;
}

int cmd_report(const std::string& dir) {
    const ScenarioConfig cfg = load_config(fs::path(dir) / "config.ini");
    const RunSet runs = load_runs(dir);
    const auto [fe, fc] = savings_tables(cfg);
    const EnergyReport rep = energy_report(runs, cfg.vehicle, cfg.powertrain, cfg.mpc.bounds, fe, fc);
    print_report(std::cout, rep);
    for (const auto& row : rep.rows)
        if (row.label != "front" && !row.safety.ok) return 1;
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cooperative adaptive cruise control lab"};
    app.require_subcommand(1);

    std::string config, sweep, out, data, vehicle, runs;
    double fraction = 0.8;
    std::uint64_t seed = 1;

    auto* sim = app.add_subcommand("simulate", "run the closed-loop scenario (optionally a parameter sweep)");
    sim->add_option("--config", config, "scenario config (INI)")->required()->check(CLI::ExistingFile);
    sim->add_option("--sweep", sweep, "h | a_min | n_t | noise")
        ->check(CLI::IsMember({"h", "a_min", "n_t", "noise", "none"}));
    sim->add_option("--out", out, "directory for trajectories, report and plot data");

    auto* fit = app.add_subcommand("fit", "fit rolling and distance-dependent drag coefficients to a drive log");
    fit->add_option("--data", data, "drive log CSV")->required()->check(CLI::ExistingFile);
    fit->add_option("--out", out, "output directory")->required();
    fit->add_option("--vehicle", vehicle, "INI with the known [vehicle] parameters")->check(CLI::ExistingFile);
    fit->add_option("--fraction", fraction, "training fraction")->capture_default_str();
    fit->add_option("--seed", seed, "split seed")->capture_default_str();

    auto* inv = app.add_subcommand("invariant", "compute and export the safe-set family");
    inv->add_option("--config", config, "scenario config (INI)")->required()->check(CLI::ExistingFile);
    inv->add_option("--out", out, "output directory")->required();

    auto* rep = app.add_subcommand("report", "recompute the energy table from exported runs");
    rep->add_option("--runs", runs, "directory written by simulate --out")->required()->check(CLI::ExistingDirectory);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*sim) return cmd_simulate(config, sweep, out);
        if (*fit) return cmd_fit(data, out, vehicle, fraction, seed);
        if (*inv) return cmd_invariant(config, out);
        if (*rep) return cmd_report(runs);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 2;
}
