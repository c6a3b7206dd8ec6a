#pragma once

// Experiment configuration: JSON with one object per section. Every omitted
// field takes its protocol default, so `{}` is a complete configuration for
// the elastic parameter set.

#include <msflab/error.hpp>
#include <msflab/msf_engine.hpp>
#include <msflab/network.hpp>
#include <msflab/oscillator.hpp>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace msflab {

struct SweepGrid {
    double alpha_min = -2.0;
    double alpha_max = 0.0;
    std::size_t alpha_steps = 21;
    double beta_min = 0.0;
    double beta_max = 0.0;
    std::size_t beta_steps = 1;
    double sigma_min = 0.0;
    double sigma_max = 1.0;
    std::size_t sigma_steps = 21;
    /// msf-sweep along the probe axis alpha = -2 sigma instead of the alpha grid.
    bool along_sigma = false;

    bool operator==(const SweepGrid&) const = default;
};

struct NetworkSection {
    /// Graph file; relative paths are resolved against the config file.
    std::string graph;
    double sigma = 0.2;
    double verdict_margin = kDefaultVerdictMargin;

    bool operator==(const NetworkSection&) const = default;
};

struct SimulateSection {
    double x0 = 0.0;
    double v0 = 0.0;
    double tau0 = 0.0;
    double periods = 50.0;

    bool operator==(const SimulateSection&) const = default;
};

struct OutputSection {
    /// Empty: use --out, then MSFLAB_OUT, then ./msflab-out.
    std::string dir;
    bool plot = false;

    bool operator==(const OutputSection&) const = default;
};

struct ExperimentConfig {
    ImpactOscillatorParams oscillator = presets::elastic();
    std::array<std::array<double, 2>, 2> coupling{{{0.0, 0.0}, {1.0, 0.0}}};
    TLESettings tle;
    MSFQuery query;
    ProbeSettings probe;
    SweepGrid sweep;
    NetworkSection network;
    SimulateSection simulate;
    OutputSection output;

    [[nodiscard]] CouplingMatrixH coupling_matrix() const {
        CouplingMatrixH h;
        h << coupling[0][0], coupling[0][1], coupling[1][0], coupling[1][1];
        return h;
    }
};

inline bool operator==(const ImpactOscillatorParams& a, const ImpactOscillatorParams& b) {
    return a.zeta == b.zeta && a.eta == b.eta && a.f == b.f && a.x_w == b.x_w && a.R == b.R &&
           a.wall_enabled == b.wall_enabled;
}
inline bool operator==(const TLESettings& a, const TLESettings& b) {
    return a.transient_periods == b.transient_periods && a.max_periods == b.max_periods &&
           a.sample_window == b.sample_window && a.std_tolerance == b.std_tolerance && a.scan_step == b.scan_step &&
           a.jacobi_delta == b.jacobi_delta;
}
inline bool operator==(const ProbeSettings& a, const ProbeSettings& b) {
    return a.sigma == b.sigma && a.perturbation_magnitude == b.perturbation_magnitude && a.rng_seed == b.rng_seed &&
           a.max_periods == b.max_periods && a.sync_threshold == b.sync_threshold &&
           a.record_window == b.record_window && a.transient_periods == b.transient_periods &&
           a.scan_step == b.scan_step;
}
inline bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.oscillator == b.oscillator && a.coupling == b.coupling && a.tle == b.tle &&
           a.query.alpha == b.query.alpha && a.query.beta == b.query.beta && a.probe == b.probe &&
           a.sweep == b.sweep && a.network == b.network && a.simulate == b.simulate && a.output == b.output;
}

/// Evenly spaced grid; steps == 1 yields {lo}.
inline std::vector<double> linear_grid(double lo, double hi, std::size_t steps) {
    std::vector<double> out;
    if (steps == 0) return out;
    if (steps == 1) return {lo};
    out.reserve(steps);
    for (std::size_t i = 0; i < steps; ++i)
        out.push_back(i + 1 == steps ? hi : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1));
    return out;
}

namespace detail {

using nlohmann::json;

/// 1-based line of a byte offset.
inline std::size_t line_of(const std::string& text, std::size_t offset) {
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

/// Best-effort line of `"key"` inside `"section"`, 0 when not found.
inline std::size_t key_line(const std::string& text, const std::string& section, const std::string& key) {
    std::size_t from = 0;
    if (!section.empty()) {
        from = text.find('"' + section + '"');
        if (from == std::string::npos) return 0;
    }
    if (key.empty()) return line_of(text, from);
    const std::size_t at = text.find('"' + key + '"', from);
    return at == std::string::npos ? 0 : line_of(text, at);
}

class ConfigReader {
public:
    ConfigReader(const std::string& source, const std::string& text) : source_(source), text_(text) {}

    [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& what) const {
        std::ostringstream msg;
        msg << source_;
        if (const std::size_t line = key_line(text_, section, key); line > 0) msg << ':' << line;
        msg << ": " << (section.empty() ? "" : section + (key.empty() ? "" : ".")) << key << ": " << what;
        throw Error(ErrorCode::Config, msg.str());
    }

    /// Checks that `obj` is an object and contains only `allowed` keys.
    void require_keys(const json& obj, const std::string& section, std::initializer_list<const char*> allowed) const {
        if (!obj.is_object()) fail(section, "", "must be an object");
        for (const auto& [key, value] : obj.items()) {
            const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* k) { return key == k; });
            if (!known) fail(section, key, "unknown key");
        }
    }

    template <typename T>
    void read(const json& obj, const std::string& section, const char* key, T& out) const {
        const auto it = obj.find(key);
        if (it == obj.end()) return;
        try {
            if constexpr (std::is_same_v<T, bool>) {
                if (!it->is_boolean()) fail(section, key, "expected true or false");
                out = it->template get<bool>();
            } else if constexpr (std::is_same_v<T, std::string>) {
                if (!it->is_string()) fail(section, key, "expected a string");
                out = it->template get<std::string>();
            } else if constexpr (std::is_integral_v<T>) {
                if (!it->is_number_unsigned()) fail(section, key, "expected a non-negative integer");
                out = it->template get<T>();
            } else {
                if (!it->is_number()) fail(section, key, "expected a number");
                out = it->template get<T>();
            }
        } catch (const json::exception& e) {
            fail(section, key, e.what());
        }
    }

    [[nodiscard]] const std::string& text() const { return text_; }

private:
    std::string source_;
    std::string text_;
};

}  // namespace detail

/// Range checks across sections. Throws a config error naming the field.
inline void validate(const ExperimentConfig& c, const detail::ConfigReader& reader) {
    auto guard = [&](const std::string& section, const std::string& key, auto&& check) {
        try {
            check();
        } catch (const Error& e) {
            reader.fail(section, key, e.what());
        }
    };
    guard("oscillator", "", [&] { validate(c.oscillator); });
    guard("tle", "", [&] { validate(c.tle); });
    guard("probe", "", [&] { validate(c.probe); });
    if (!std::isfinite(c.query.alpha)) reader.fail("tle", "alpha", "must be finite");
    if (!std::isfinite(c.query.beta)) reader.fail("tle", "beta", "must be finite");
    for (const auto& row : c.coupling)
        for (double v : row)
            if (!std::isfinite(v)) reader.fail("coupling", "H", "entries must be finite");
    if (c.sweep.alpha_steps == 0) reader.fail("sweep", "alpha_steps", "must be positive");
    if (c.sweep.beta_steps == 0) reader.fail("sweep", "beta_steps", "must be positive");
    if (c.sweep.sigma_steps == 0) reader.fail("sweep", "sigma_steps", "must be positive");
    if (!(c.sweep.alpha_min <= c.sweep.alpha_max)) reader.fail("sweep", "alpha_min", "must not exceed alpha_max");
    if (!(c.sweep.beta_min <= c.sweep.beta_max)) reader.fail("sweep", "beta_min", "must not exceed beta_max");
    if (!(c.sweep.sigma_min <= c.sweep.sigma_max)) reader.fail("sweep", "sigma_min", "must not exceed sigma_max");
    if (!std::isfinite(c.network.sigma)) reader.fail("network", "sigma", "must be finite");
    if (!(c.network.verdict_margin >= 0.0)) reader.fail("network", "verdict_margin", "must be non-negative");
    if (!(c.simulate.periods >= 0.0) || !std::isfinite(c.simulate.periods))
        reader.fail("simulate", "periods", "must be non-negative");
    if (!c.network.graph.empty() && !std::filesystem::exists(c.network.graph))
        reader.fail("network", "graph", "file not found: " + c.network.graph);
}

/// Parses a configuration. `source` names the input in diagnostics and, when
/// it is a path, anchors relative graph paths.
inline ExperimentConfig parse_config(const std::string& text, const std::string& source = "<config>",
                                     ExperimentConfig c = {}) {
    using nlohmann::json;
    const detail::ConfigReader reader(source, text);
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        std::ostringstream msg;
        msg << source << ':' << detail::line_of(text, e.byte == 0 ? 0 : e.byte - 1) << ": malformed JSON: " << e.what();
        throw Error(ErrorCode::Config, msg.str());
    }
    reader.require_keys(root, "",
                        {"oscillator", "coupling", "tle", "probe", "sweep", "network", "simulate", "output"});

    if (const auto it = root.find("oscillator"); it != root.end()) {
        reader.require_keys(*it, "oscillator", {"zeta", "eta", "f", "x_w", "R", "wall_enabled"});
        reader.read(*it, "oscillator", "zeta", c.oscillator.zeta);
        reader.read(*it, "oscillator", "eta", c.oscillator.eta);
        reader.read(*it, "oscillator", "f", c.oscillator.f);
        reader.read(*it, "oscillator", "x_w", c.oscillator.x_w);
        reader.read(*it, "oscillator", "R", c.oscillator.R);
        reader.read(*it, "oscillator", "wall_enabled", c.oscillator.wall_enabled);
    }
    if (const auto it = root.find("coupling"); it != root.end()) {
        reader.require_keys(*it, "coupling", {"H"});
        if (const auto h = it->find("H"); h != it->end()) {
            const bool shape_ok = h->is_array() && h->size() == 2 &&
                                  std::all_of(h->begin(), h->end(), [](const json& row) {
                                      return row.is_array() && row.size() == 2 &&
                                             std::all_of(row.begin(), row.end(),
                                                         [](const json& v) { return v.is_number(); });
                                  });
            if (!shape_ok) reader.fail("coupling", "H", "expected a 2x2 array of numbers");
            for (std::size_t r = 0; r < 2; ++r)
                for (std::size_t col = 0; col < 2; ++col) c.coupling[r][col] = (*h)[r][col].get<double>();
        }
    }
    if (const auto it = root.find("tle"); it != root.end()) {
        reader.require_keys(*it, "tle",
                            {"transient_periods", "max_periods", "sample_window", "std_tolerance", "scan_step",
                             "jacobi_delta", "alpha", "beta"});
        reader.read(*it, "tle", "transient_periods", c.tle.transient_periods);
        reader.read(*it, "tle", "max_periods", c.tle.max_periods);
        reader.read(*it, "tle", "sample_window", c.tle.sample_window);
        reader.read(*it, "tle", "std_tolerance", c.tle.std_tolerance);
        reader.read(*it, "tle", "scan_step", c.tle.scan_step);
        reader.read(*it, "tle", "jacobi_delta", c.tle.jacobi_delta);
        reader.read(*it, "tle", "alpha", c.query.alpha);
        reader.read(*it, "tle", "beta", c.query.beta);
    }
    if (const auto it = root.find("probe"); it != root.end()) {
        reader.require_keys(*it, "probe",
                            {"sigma", "perturbation_magnitude", "rng_seed", "max_periods", "sync_threshold",
                             "record_window", "transient_periods", "scan_step"});
        reader.read(*it, "probe", "sigma", c.probe.sigma);
        reader.read(*it, "probe", "perturbation_magnitude", c.probe.perturbation_magnitude);
        reader.read(*it, "probe", "rng_seed", c.probe.rng_seed);
        reader.read(*it, "probe", "max_periods", c.probe.max_periods);
        reader.read(*it, "probe", "sync_threshold", c.probe.sync_threshold);
        reader.read(*it, "probe", "record_window", c.probe.record_window);
        reader.read(*it, "probe", "transient_periods", c.probe.transient_periods);
        reader.read(*it, "probe", "scan_step", c.probe.scan_step);
    }
    if (const auto it = root.find("sweep"); it != root.end()) {
        reader.require_keys(*it, "sweep",
                            {"alpha_min", "alpha_max", "alpha_steps", "beta_min", "beta_max", "beta_steps",
                             "sigma_min", "sigma_max", "sigma_steps", "along_sigma"});
        reader.read(*it, "sweep", "alpha_min", c.sweep.alpha_min);
        reader.read(*it, "sweep", "alpha_max", c.sweep.alpha_max);
        reader.read(*it, "sweep", "alpha_steps", c.sweep.alpha_steps);
        reader.read(*it, "sweep", "beta_min", c.sweep.beta_min);
        reader.read(*it, "sweep", "beta_max", c.sweep.beta_max);
        reader.read(*it, "sweep", "beta_steps", c.sweep.beta_steps);
        reader.read(*it, "sweep", "sigma_min", c.sweep.sigma_min);
        reader.read(*it, "sweep", "sigma_max", c.sweep.sigma_max);
        reader.read(*it, "sweep", "sigma_steps", c.sweep.sigma_steps);
        reader.read(*it, "sweep", "along_sigma", c.sweep.along_sigma);
    }
    if (const auto it = root.find("network"); it != root.end()) {
        reader.require_keys(*it, "network", {"graph", "sigma", "verdict_margin"});
        reader.read(*it, "network", "graph", c.network.graph);
        reader.read(*it, "network", "sigma", c.network.sigma);
        reader.read(*it, "network", "verdict_margin", c.network.verdict_margin);
        if (it->contains("graph") && !c.network.graph.empty()) {
            const std::filesystem::path graph(c.network.graph);
            const std::filesystem::path base = std::filesystem::path(source).parent_path();
            if (graph.is_relative() && std::filesystem::exists(base)) c.network.graph = (base / graph).string();
        }
    }
    if (const auto it = root.find("simulate"); it != root.end()) {
        reader.require_keys(*it, "simulate", {"x0", "v0", "tau0", "periods"});
        reader.read(*it, "simulate", "x0", c.simulate.x0);
        reader.read(*it, "simulate", "v0", c.simulate.v0);
        reader.read(*it, "simulate", "tau0", c.simulate.tau0);
        reader.read(*it, "simulate", "periods", c.simulate.periods);
    }
    if (const auto it = root.find("output"); it != root.end()) {
        reader.require_keys(*it, "output", {"dir", "plot"});
        reader.read(*it, "output", "dir", c.output.dir);
        reader.read(*it, "output", "plot", c.output.plot);
    }
    validate(c, reader);
    return c;
}

inline ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {}) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Config, "cannot open config file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path, std::move(base));
}

/// Effective configuration with every field spelled out.
inline nlohmann::json to_json(const ExperimentConfig& c) {
    using nlohmann::json;
    json j;
    j["oscillator"] = {{"zeta", c.oscillator.zeta}, {"eta", c.oscillator.eta},     {"f", c.oscillator.f},
                       {"x_w", c.oscillator.x_w},   {"R", c.oscillator.R},         {"wall_enabled", c.oscillator.wall_enabled}};
    j["coupling"] = {{"H", {{c.coupling[0][0], c.coupling[0][1]}, {c.coupling[1][0], c.coupling[1][1]}}}};
    j["tle"] = {{"transient_periods", c.tle.transient_periods},
                {"max_periods", c.tle.max_periods},
                {"sample_window", c.tle.sample_window},
                {"std_tolerance", c.tle.std_tolerance},
                {"scan_step", c.tle.scan_step},
                {"jacobi_delta", c.tle.jacobi_delta},
                {"alpha", c.query.alpha},
                {"beta", c.query.beta}};
    j["probe"] = {{"sigma", c.probe.sigma},
                  {"perturbation_magnitude", c.probe.perturbation_magnitude},
                  {"rng_seed", c.probe.rng_seed},
                  {"max_periods", c.probe.max_periods},
                  {"sync_threshold", c.probe.sync_threshold},
                  {"record_window", c.probe.record_window},
                  {"transient_periods", c.probe.transient_periods},
                  {"scan_step", c.probe.scan_step}};
    j["sweep"] = {{"alpha_min", c.sweep.alpha_min}, {"alpha_max", c.sweep.alpha_max},
                  {"alpha_steps", c.sweep.alpha_steps}, {"beta_min", c.sweep.beta_min},
                  {"beta_max", c.sweep.beta_max},   {"beta_steps", c.sweep.beta_steps},
                  {"sigma_min", c.sweep.sigma_min}, {"sigma_max", c.sweep.sigma_max},
                  {"sigma_steps", c.sweep.sigma_steps}, {"along_sigma", c.sweep.along_sigma}};
    j["network"] = {{"graph", c.network.graph}, {"sigma", c.network.sigma}, {"verdict_margin", c.network.verdict_margin}};
    j["simulate"] = {{"x0", c.simulate.x0}, {"v0", c.simulate.v0}, {"tau0", c.simulate.tau0}, {"periods", c.simulate.periods}};
    j["output"] = {{"dir", c.output.dir}, {"plot", c.output.plot}};
    return j;
}

/// Named bundled parameter sets.
inline ImpactOscillatorParams preset_params(const std::string& name) {
    if (name == "elastic") return presets::elastic();
    if (name == "inelastic") return presets::inelastic();
    throw Error(ErrorCode::Config, "unknown preset '" + name + "' (expected elastic or inelastic)");
}

}  // namespace msflab
