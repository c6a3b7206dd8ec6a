// msflab: experiment runner for the impact-oscillator master stability function.
//
//   msflab <subcommand> --config <path> [--out <dir>] [--preset elastic|inelastic] [--jobs N] [--plot]

#include <msflab/config.hpp>
#include <msflab/experiments.hpp>

#include <CLI11/CLI11.hpp>

#include <iostream>
#include <map>
#include <string>

int main(int argc, char** argv) {
    CLI::App app{"Master stability function experiments for coupled impact oscillators"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string preset;
    std::size_t jobs = 0;
    bool plot = false;
    bool print_config = false;

    const std::map<std::string, std::string> about{
        {"tle", "TLE at one coupling parameter alpha + i beta (tle.alpha, tle.beta)"},
        {"msf-sweep", "TLE over the sweep grid (alpha x beta, or alpha = -2 sigma)"},
        {"probe", "two-oscillator probe at probe.sigma"},
        {"bifurcation", "probe over the sigma grid: local maxima of |x1 - x2|"},
        {"network", "per-mode TLEs and synchronization verdict for network.graph"},
        {"simulate", "single oscillator run from simulate.x0, v0, tau0; impact log"},
    };
    for (const auto& name : msflab::subcommands()) {
        CLI::App* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--config,-c", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
        sub->add_option("--out,-o", out_dir,
                        "output directory (default: config output.dir, then $" + std::string(msflab::kOutEnvVar) +
                            ", then ./" + std::string(msflab::kDefaultOutDir) + ")");
        sub->add_option("--preset", preset, "bundled parameter set, overridden by the config file")
            ->check(CLI::IsMember({"elastic", "inelastic"}));
        sub->add_option("--jobs,-j", jobs, "worker threads for grids (0: available parallelism)");
        sub->add_flag("--plot", plot, "write SVG figures");
        sub->add_flag("--print-config", print_config, "print the effective configuration and exit");
    }
    app.footer("Exit status: 0 ok, 1 error, 2 finished with unconverged TLE points.");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : msflab::kExitError;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        msflab::ExperimentConfig base;
        if (!preset.empty()) base.oscillator = msflab::preset_params(preset);
        const msflab::ExperimentConfig config =
            config_path.empty() ? base : msflab::load_config(config_path, base);
        if (print_config) {
            std::cout << msflab::to_json(config).dump(2) << '\n';
            return msflab::kExitOk;
        }
        msflab::RunOptions options;
        options.out_dir = out_dir;
        options.jobs = jobs;
        options.plot = plot;
        return msflab::run_subcommand(name, config, options);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return msflab::kExitError;
    }
}
