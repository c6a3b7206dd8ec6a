#pragma once

// Subcommand runner shared by the msflab CLI and the tests.
//
// Exit status: 0 when every point succeeded (and every TLE converged),
// 2 when everything finished but some TLE did not converge, 1 on any error.

#include <msflab/config.hpp>
#include <msflab/csv.hpp>
#include <msflab/error.hpp>
#include <msflab/msf_engine.hpp>
#include <msflab/network.hpp>
#include <msflab/plot.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <iostream>
#include <string>
#include <string_view>
#include <vector>

namespace msflab {

enum ExitStatus : int { kExitOk = 0, kExitError = 1, kExitUnconverged = 2 };

inline constexpr std::string_view kOutEnvVar = "MSFLAB_OUT";
inline constexpr std::string_view kDefaultOutDir = "msflab-out";

inline const std::vector<std::string>& subcommands() {
    static const std::vector<std::string> names{"tle", "msf-sweep", "probe", "bifurcation", "network", "simulate"};
    return names;
}

struct RunOptions {
    /// Overrides config and environment when non-empty.
    std::string out_dir;
    std::size_t jobs = 0;
    /// Forces plotting on; the config's output.plot also enables it.
    bool plot = false;
    std::ostream* log = &std::cerr;
    std::ostream* report = &std::cout;
};

/// --out, then output.dir, then $MSFLAB_OUT, then ./msflab-out.
inline std::filesystem::path resolve_out_dir(const ExperimentConfig& c, const RunOptions& o) {
    if (!o.out_dir.empty()) return o.out_dir;
    if (!c.output.dir.empty()) return c.output.dir;
    if (const char* env = std::getenv(std::string(kOutEnvVar).c_str()); env && *env) return env;
    return std::string(kDefaultOutDir);
}

namespace detail {

class Runner {
public:
    Runner(const ExperimentConfig& c, const RunOptions& o) : c_(c), o_(o), dir_(resolve_out_dir(c, o)) {
        std::filesystem::create_directories(dir_);
    }

    int tle() {
        const std::vector<MSFQuery> q{c_.query};
        const auto points = evaluate_queries(c_.oscillator, c_.coupling_matrix(), q, c_.tle, o_.jobs);
        write("tle.csv", [&](std::ostream& out) { csv::write_tle(out, points); });
        note_points(points);
        if (points.front().result)
            *o_.report << "tle(" << csv::number(c_.query.alpha) << ", " << csv::number(c_.query.beta)
                       << ") = " << csv::number(points.front().result->lambda)
                       << (points.front().result->converged ? "" : " (not converged)") << '\n';
        return finish();
    }

    int msf_sweep() {
        std::vector<double> alphas;
        if (c_.sweep.along_sigma) {
            for (double s : linear_grid(c_.sweep.sigma_min, c_.sweep.sigma_max, c_.sweep.sigma_steps))
                alphas.push_back(-2.0 * s);
        } else {
            alphas = linear_grid(c_.sweep.alpha_min, c_.sweep.alpha_max, c_.sweep.alpha_steps);
        }
        const auto betas = linear_grid(c_.sweep.beta_min, c_.sweep.beta_max, c_.sweep.beta_steps);
        const auto points = msflab::msf_sweep(c_.oscillator, c_.coupling_matrix(), alphas, betas, c_.tle, o_.jobs);
        const auto path = write("msf_sweep.csv", [&](std::ostream& out) { csv::write_tle(out, points); });
        note_points(points);
        if (plotting()) figure(path, "msf_sweep.svg", [&](std::istream& in, std::ostream& out) {
            plot::tle_figure(in, out, c_.sweep.along_sigma);
        });
        return finish();
    }

    int probe() {
        // A single probe uses rng_seed as given; grids derive per-sigma seeds.
        std::vector<BifurcationColumn> columns(1);
        columns[0].sigma = c_.probe.sigma;
        try {
            columns[0].probe = run_probe(c_.oscillator, c_.coupling_matrix(), c_.probe);
        } catch (const Error& e) {
            fail("sigma=" + csv::number(c_.probe.sigma) + ": " + e.what());
        }
        write("probe.csv", [&](std::ostream& out) { csv::write_probe(out, columns); });
        for (const auto& col : columns)
            if (col.probe)
                *o_.report << "sigma=" << csv::number(col.sigma) << ' '
                           << (col.probe->synchronized ? "synchronized" : "not synchronized") << '\n';
        return finish();
    }

    int bifurcation() {
        const auto columns = scan(linear_grid(c_.sweep.sigma_min, c_.sweep.sigma_max, c_.sweep.sigma_steps));
        const auto path = write("bifurcation.csv", [&](std::ostream& out) { csv::write_bifurcation(out, columns); });
        write("probe.csv", [&](std::ostream& out) { csv::write_probe(out, columns); });
        if (plotting()) figure(path, "bifurcation.svg", [](std::istream& in, std::ostream& out) {
            plot::bifurcation_figure(in, out);
        });
        return finish();
    }

    int network() {
        if (c_.network.graph.empty()) throw Error(ErrorCode::Config, "network.graph is required for 'network'");
        const CouplingGraph g = load_graph(c_.network.graph);
        std::vector<std::string> errors;
        const ModeSpectrum spectrum =
            network_modes(c_.oscillator, c_.coupling_matrix(), g, c_.network.sigma, c_.tle, o_.jobs, std::nullopt, &errors);
        write("modes.csv", [&](std::ostream& out) { csv::write_modes(out, spectrum, c_.network.sigma); });
        for (std::size_t k = 0; k < spectrum.modes.size(); ++k) {
            if (!spectrum.modes[k]) {
                fail("mode " + std::to_string(k) + ": " + errors[k]);
            } else if (!spectrum.modes[k]->converged) {
                ++unconverged_;
            }
        }
        std::string line;
        try {
            line = "verdict: " + std::string(to_string(sync_verdict(spectrum, c_.network.verdict_margin)));
        } catch (const Error& e) {
            line = "verdict: incomplete";
            fail(e.what());
        }
        *o_.report << line << '\n';
        write("verdict.txt", [&](std::ostream& out) { out << line << '\n'; });
        return finish();
    }

    int simulate_run() {
        const OscState start{c_.simulate.x0, c_.simulate.v0, c_.simulate.tau0};
        const auto run =
            simulate(c_.oscillator, start, c_.simulate.periods * c_.oscillator.forcing_period(), c_.tle.scan_step);
        write("events.csv", [&](std::ostream& out) { csv::write_events(out, run.events); });
        *o_.report << run.events.size() << " impacts; final state x=" << csv::number(run.final_state.x)
                   << " v=" << csv::number(run.final_state.v) << '\n';
        return finish();
    }

private:
    [[nodiscard]] bool plotting() const { return o_.plot || c_.output.plot; }

    std::vector<BifurcationColumn> scan(const std::vector<double>& sigmas) {
        auto columns = bifurcation_scan(c_.oscillator, c_.coupling_matrix(), sigmas, c_.probe, o_.jobs);
        for (const auto& col : columns)
            if (!col.error.empty()) fail("sigma=" + csv::number(col.sigma) + ": " + col.error);
        return columns;
    }

    void note_points(const std::vector<SweepPoint>& points) {
        for (const auto& pt : points) {
            if (!pt.result)
                fail("alpha=" + csv::number(pt.query.alpha) + " beta=" + csv::number(pt.query.beta) + ": " + pt.error);
            else if (!pt.result->converged)
                ++unconverged_;
        }
    }

    void fail(const std::string& what) { failures_.push_back(what); }

    template <typename Writer>
    std::filesystem::path write(const std::string& name, Writer&& writer) {
        const auto path = dir_ / name;
        std::ofstream out(path, std::ios::binary);
        if (!out) throw Error(ErrorCode::Config, "cannot write '" + path.string() + "'");
        writer(out);
        if (!out) throw Error(ErrorCode::Config, "write failed for '" + path.string() + "'");
        *o_.log << "wrote " << path.string() << '\n';
        return path;
    }

    template <typename Render>
    void figure(const std::filesystem::path& csv_path, const std::string& name, Render&& render) {
        std::ifstream in(csv_path, std::ios::binary);
        try {
            std::ostringstream svg;
            render(in, svg);
            write(name, [&](std::ostream& out) { out << svg.str(); });
        } catch (const Error& e) {
            fail(name + ": " + e.what());
        }
    }

    int finish() {
        if (!failures_.empty()) {
            *o_.log << failures_.size() << " point(s) failed:\n";
            for (const auto& f : failures_) *o_.log << "  " << f << '\n';
            return kExitError;
        }
        if (unconverged_ > 0) {
            *o_.log << unconverged_ << " TLE result(s) did not converge within max_periods\n";
            return kExitUnconverged;
        }
        return kExitOk;
    }

    const ExperimentConfig& c_;
    const RunOptions& o_;
    std::filesystem::path dir_;
    std::vector<std::string> failures_;
    std::size_t unconverged_ = 0;
};

}  // namespace detail

/// Runs one subcommand and writes its outputs. Errors that stop the whole run
/// (bad config, unreadable graph, I/O) are reported and yield kExitError.
inline int run_subcommand(std::string_view name, const ExperimentConfig& config, const RunOptions& options = {}) {
    try {
        detail::Runner runner(config, options);
        if (name == "tle") return runner.tle();
        if (name == "msf-sweep") return runner.msf_sweep();
        if (name == "probe") return runner.probe();
        if (name == "bifurcation") return runner.bifurcation();
        if (name == "network") return runner.network();
        if (name == "simulate") return runner.simulate_run();
        throw Error(ErrorCode::Config, "unknown subcommand '" + std::string(name) + "'");
    } catch (const std::exception& e) {
        *options.log << "error: " << e.what() << '\n';
        return kExitError;
    }
}

}  // namespace msflab
