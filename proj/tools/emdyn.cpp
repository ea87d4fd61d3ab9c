// emdyn: EM / delta-EM fitting, Lyapunov diagnostics, stability certificates
// and basin maps for finite mixtures.

#include "emdyn/commands.hpp"
#include "emdyn/errors.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

void add_model_flags(CLI::App* cmd, emdyn::ModelFlags& flags) {
    cmd->add_option("--components,-K", flags.components, "number of components (without a config model block)");
    cmd->add_option("--family", flags.family, "gaussian-diag | poisson");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EM dynamics toolkit for finite mixtures"};
    app.require_subcommand(1);

    emdyn::GlobalOptions global;
    std::string out = ".";
    std::string config;
    app.add_option("--seed", global.seed, "master seed")->capture_default_str();
    app.add_option("--config", config, "JSON config with optional model and solver blocks");
    app.add_option("--out", out, "output directory")->capture_default_str();
    app.add_option("--delta", global.delta, "use delta-EM with this ball radius")
        ->check(CLI::PositiveNumber);
    app.add_option("--threads", global.threads, "worker threads (0 = all cores)");

    emdyn::SynthOptions synth;
    std::string synth_params;
    auto* synth_cmd = app.add_subcommand("synth", "sample a dataset from a mixture");
    synth_cmd->add_option("--params", synth_params, "parameter JSON file");
    synth_cmd->add_option("--family", synth.family, "gaussian-diag | poisson (flag form)");
    synth_cmd->add_option("--weights", synth.weights)->delimiter(',');
    synth_cmd->add_option("--means", synth.means)->delimiter(',');
    synth_cmd->add_option("--variances", synth.variances)->delimiter(',');
    synth_cmd->add_option("--rates", synth.rates)->delimiter(',');
    synth_cmd->add_option("-n,--n", synth.n, "number of observations")->capture_default_str();

    emdyn::FitOptions fit;
    std::string fit_data, fit_init;
    auto* fit_cmd = app.add_subcommand("fit", "run EM or delta-EM");
    fit_cmd->add_option("--data", fit_data)->required();
    fit_cmd->add_option("--init", fit_init, "initial parameter JSON");
    fit_cmd->add_option("--init-seed", fit.init_seed, "seed for the random initialization");
    fit_cmd->add_option("--units", fit.units, "likelihood | log-likelihood")->capture_default_str();
    add_model_flags(fit_cmd, fit.model);

    emdyn::DiagnoseOptions diag;
    std::string diag_data, diag_traj, diag_star;
    auto* diag_cmd = app.add_subcommand("diagnose", "Lyapunov columns for an existing trajectory");
    diag_cmd->add_option("--data", diag_data)->required();
    diag_cmd->add_option("--trajectory", diag_traj)->required();
    diag_cmd->add_option("--theta-star", diag_star, "reference point (default: best row)");
    diag_cmd->add_option("--units", diag.units)->capture_default_str();
    add_model_flags(diag_cmd, diag.model);

    emdyn::StabilityOptions stab;
    std::string stab_data, stab_star;
    auto* stab_cmd = app.add_subcommand("stability", "classify an equilibrium and certify exponential stability");
    stab_cmd->add_option("--data", stab_data)->required();
    stab_cmd->add_option("--theta-star", stab_star)->required();
    stab_cmd->add_option("--radius", stab.radius)->capture_default_str();
    stab_cmd->add_option("--samples", stab.samples)->capture_default_str();
    stab_cmd->add_option("--units", stab.units)->capture_default_str();
    stab_cmd->add_option("--start-fraction", stab.start_fraction)->capture_default_str();
    stab_cmd->add_option("--best-loglik", stab.best_known_loglik, "label a local max reaching this value as MLE-candidate");

    emdyn::BasinCommandOptions basin;
    std::string basin_data, basin_center;
    bool no_canonical = false;
    auto* basin_cmd = app.add_subcommand("basin", "sample a ball and map where the iterates go");
    basin_cmd->add_option("--data", basin_data)->required();
    basin_cmd->add_option("--center", basin_center)->required();
    basin_cmd->add_option("--radius", basin.radius)->capture_default_str();
    basin_cmd->add_option("--samples", basin.samples)->capture_default_str();
    basin_cmd->add_option("--merge-radius", basin.merge_radius)->capture_default_str();
    basin_cmd->add_option("--max-iters", basin.max_iters)->capture_default_str();
    basin_cmd->add_option("--stop-tol", basin.stop_tol)->capture_default_str();
    basin_cmd->add_flag("--no-canonicalize", no_canonical, "merge limit points without relabelling");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    global.out = out;
    if (!config.empty()) global.config = config;

    try {
        if (synth_cmd->parsed()) {
            if (!synth_params.empty()) synth.params = synth_params;
            emdyn::cmd_synth(global, synth);
        } else if (fit_cmd->parsed()) {
            fit.data = fit_data;
            if (!fit_init.empty()) fit.init = fit_init;
            const auto report = emdyn::cmd_fit(global, fit);
            std::printf("status %s, %d iterations, loglik %.17g\n",
                        report["status"].get<std::string>().c_str(), report["iterations"].get<int>(),
                        report["final_loglik"].get<double>());
        } else if (diag_cmd->parsed()) {
            diag.data = diag_data;
            diag.trajectory = diag_traj;
            if (!diag_star.empty()) diag.theta_star = diag_star;
            emdyn::cmd_diagnose(global, diag);
        } else if (stab_cmd->parsed()) {
            stab.data = stab_data;
            stab.theta_star = stab_star;
            const auto report = emdyn::cmd_stability(global, stab);
            std::printf("%s\n", report["certificate"]["classification"].get<std::string>().c_str());
        } else if (basin_cmd->parsed()) {
            basin.data = basin_data;
            basin.center = basin_center;
            basin.canonicalize_labels = !no_canonical;
            const auto report = emdyn::cmd_basin(global, basin);
            const auto& rf = report["basin"]["return_fraction"];
            if (!rf.is_null()) std::printf("return fraction %.17g\n", rf.get<double>());
        }
    } catch (const emdyn::InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return 2;
    } catch (const emdyn::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
    return 0;
}
