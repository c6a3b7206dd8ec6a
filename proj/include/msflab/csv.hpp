#pragma once

// CSV output with fixed headers. Numbers use the shortest round-trip form
// from std::to_chars, which is locale independent ('.' decimal separator).

#include <msflab/error.hpp>
#include <msflab/msf_engine.hpp>
#include <msflab/network.hpp>
#include <msflab/oscillator.hpp>

#include <charconv>
#include <complex>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace msflab::csv {

inline constexpr std::string_view kTleHeader = "alpha,beta,tle,converged,periods_used";
inline constexpr std::string_view kProbeHeader = "sigma,synchronized,sync_time";
inline constexpr std::string_view kBifurcationHeader = "sigma,local_max";
inline constexpr std::string_view kEventsHeader = "tau_c,v_pre,v_post";
inline constexpr std::string_view kModesHeader = "k,gamma_re,gamma_im,alpha,beta,tle,converged";

inline std::string number(double v) {
    if (v == 0.0) v = 0.0;  // no "-0"
    char buf[32];
    const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw Error(ErrorCode::Numerical, "cannot format number");
    return {buf, end};
}

inline std::string_view boolean(bool b) { return b ? "true" : "false"; }

/// One TLE row per successful point; failed points are skipped (they are
/// reported separately by the runner).
inline void write_tle(std::ostream& out, const std::vector<SweepPoint>& points) {
    out << kTleHeader << '\n';
    for (const auto& pt : points) {
        if (!pt.result) continue;
        out << number(pt.query.alpha) << ',' << number(pt.query.beta) << ',' << number(pt.result->lambda) << ','
            << boolean(pt.result->converged) << ',' << pt.result->periods_used << '\n';
    }
}

/// sync_time is empty for unsynchronized runs.
inline void write_probe(std::ostream& out, const std::vector<BifurcationColumn>& columns) {
    out << kProbeHeader << '\n';
    for (const auto& c : columns) {
        if (!c.probe) continue;
        out << number(c.sigma) << ',' << boolean(c.probe->synchronized) << ',';
        if (c.probe->sync_time) out << number(*c.probe->sync_time);
        out << '\n';
    }
}

inline void write_bifurcation(std::ostream& out, const std::vector<BifurcationColumn>& columns) {
    out << kBifurcationHeader << '\n';
    for (const auto& c : columns)
        for (double m : c.points) out << number(c.sigma) << ',' << number(m) << '\n';
}

inline void write_events(std::ostream& out, const std::vector<EventRecord>& events) {
    out << kEventsHeader << '\n';
    for (const auto& e : events) out << number(e.tau_c) << ',' << number(e.v_pre) << ',' << number(e.v_post) << '\n';
}

/// Mode k is evaluated at alpha + i beta = sigma gamma_k (0 for k = 0).
inline void write_modes(std::ostream& out, const ModeSpectrum& spectrum, double sigma) {
    out << kModesHeader << '\n';
    for (std::size_t k = 0; k < spectrum.eigenvalues.size(); ++k) {
        const cplx gamma = spectrum.eigenvalues[k];
        const cplx q = k == 0 ? cplx{} : sigma * gamma;
        out << k << ',' << number(gamma.real()) << ',' << number(gamma.imag()) << ',' << number(q.real()) << ','
            << number(q.imag()) << ',';
        if (k < spectrum.modes.size() && spectrum.modes[k])
            out << number(spectrum.modes[k]->lambda) << ',' << boolean(spectrum.modes[k]->converged);
        else
            out << ",";
        out << '\n';
    }
}

/// Header plus rows of raw cells.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    [[nodiscard]] std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw Error(ErrorCode::Config, "CSV has no column '" + std::string(name) + "'");
    }
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream fields(line);
    while (std::getline(fields, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

inline Table read(std::istream& in) {
    Table t;
    std::string line;
    if (!std::getline(in, line)) throw Error(ErrorCode::EmptyPlot, "CSV input is empty");
    t.header = split_line(line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (cells.size() != t.header.size()) throw Error(ErrorCode::Config, "CSV row has wrong number of cells");
        t.rows.push_back(std::move(cells));
    }
    return t;
}

inline double parse_number(const std::string& cell) {
    double v = 0.0;
    const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc{} || end != cell.data() + cell.size())
        throw Error(ErrorCode::Config, "not a number in CSV: '" + cell + "'");
    return v;
}

}  // namespace msflab::csv
