#pragma once

// Static SVG figures: TLE curves (polyline, zero line, unconverged points
// drawn hollow) and bifurcation scatter plots.

#include <msflab/csv.hpp>
#include <msflab/error.hpp>

#include <algorithm>
#include <cmath>
#include <iterator>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace msflab::plot {

struct CurvePoint {
    double x = 0.0;
    double y = 0.0;
    bool converged = true;
};

struct Curve {
    std::string label;
    std::vector<CurvePoint> points;
};

struct ScatterPoint {
    double x = 0.0;
    double y = 0.0;
};

struct Axes {
    std::string title;
    std::string x_label;
    std::string y_label;
};

namespace detail {

inline constexpr double kWidth = 720.0;
inline constexpr double kHeight = 480.0;
inline constexpr double kLeft = 80.0;
inline constexpr double kRight = 30.0;
inline constexpr double kTop = 40.0;
inline constexpr double kBottom = 60.0;

inline const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

/// 1, 2 or 5 times a power of ten, giving about `target` intervals.
inline double nice_step(double span, int target = 6) {
    const double raw = span / target;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * mag >= raw) return m * mag;
    return 10.0 * mag;
}

struct Range {
    double lo;
    double hi;
};

inline Range padded(double lo, double hi) {
    if (!(hi > lo)) {
        const double pad = lo == 0.0 ? 1.0 : 0.1 * std::abs(lo);
        return {lo - pad, hi + pad};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

inline std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << (std::abs(v) < 1e-12 ? 0.0 : v);
    return s.str();
}

class Canvas {
public:
    Canvas(Range x, Range y) : x_(x), y_(y) {}

    [[nodiscard]] double px(double x) const {
        return kLeft + (x - x_.lo) / (x_.hi - x_.lo) * (kWidth - kLeft - kRight);
    }
    [[nodiscard]] double py(double y) const {
        return kHeight - kBottom - (y - y_.lo) / (y_.hi - y_.lo) * (kHeight - kTop - kBottom);
    }

    void frame(std::ostream& out, const Axes& axes) const {
        out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
            << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
        out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
        out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">"
            << escape(axes.title) << "</text>\n";
        out << "<g class=\"axes\" stroke=\"black\" fill=\"none\">\n";
        out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << kWidth - kLeft - kRight
            << "\" height=\"" << kHeight - kTop - kBottom << "\"/>\n";
        out << "</g>\n";
        ticks(out);
        out << "<text class=\"x-label\" x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 15
            << "\" text-anchor=\"middle\">" << escape(axes.x_label) << "</text>\n";
        out << "<text class=\"y-label\" x=\"20\" y=\"" << (kTop + kHeight - kBottom) / 2
            << "\" text-anchor=\"middle\" transform=\"rotate(-90 20 " << (kTop + kHeight - kBottom) / 2 << ")\">"
            << escape(axes.y_label) << "</text>\n";
    }

    void zero_line(std::ostream& out) const {
        if (y_.lo > 0.0 || y_.hi < 0.0) return;
        out << "<line class=\"zero-line\" x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << py(0.0)
            << "\" y2=\"" << py(0.0) << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
    }

private:
    void ticks(std::ostream& out) const {
        const double xs = nice_step(x_.hi - x_.lo);
        for (double t = std::ceil(x_.lo / xs) * xs; t <= x_.hi; t += xs) {
            out << "<line x1=\"" << px(t) << "\" x2=\"" << px(t) << "\" y1=\"" << kHeight - kBottom << "\" y2=\""
                << kHeight - kBottom + 5 << "\" stroke=\"black\"/>";
            out << "<text x=\"" << px(t) << "\" y=\"" << kHeight - kBottom + 18 << "\" text-anchor=\"middle\">"
                << fmt(t) << "</text>\n";
        }
        const double ys = nice_step(y_.hi - y_.lo);
        for (double t = std::ceil(y_.lo / ys) * ys; t <= y_.hi; t += ys) {
            out << "<line x1=\"" << kLeft - 5 << "\" x2=\"" << kLeft << "\" y1=\"" << py(t) << "\" y2=\"" << py(t)
                << "\" stroke=\"black\"/>";
            out << "<text x=\"" << kLeft - 8 << "\" y=\"" << py(t) + 4 << "\" text-anchor=\"end\">" << fmt(t)
                << "</text>\n";
        }
    }

    Range x_;
    Range y_;
};

}  // namespace detail

/// One polyline per curve. Converged points are filled dots, unconverged
/// points hollow red rings.
inline void render_curves(std::ostream& out, const std::vector<Curve>& curves, const Axes& axes) {
    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = 0.0, y_hi = 0.0;
    std::size_t count = 0;
    for (const auto& c : curves)
        for (const auto& p : c.points) {
            x_lo = std::min(x_lo, p.x);
            x_hi = std::max(x_hi, p.x);
            y_lo = std::min(y_lo, p.y);
            y_hi = std::max(y_hi, p.y);
            ++count;
        }
    if (count == 0) throw Error(ErrorCode::EmptyPlot, "no points to plot");
    const detail::Canvas canvas(detail::padded(x_lo, x_hi), detail::padded(y_lo, y_hi));
    canvas.frame(out, axes);
    canvas.zero_line(out);
    bool any_unconverged = false;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        const char* color = detail::kPalette[i % std::size(detail::kPalette)];
        std::vector<CurvePoint> pts = curves[i].points;
        std::stable_sort(pts.begin(), pts.end(), [](const CurvePoint& a, const CurvePoint& b) { return a.x < b.x; });
        out << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t k = 0; k < pts.size(); ++k)
            out << (k ? " " : "") << canvas.px(pts[k].x) << ',' << canvas.py(pts[k].y);
        out << "\"/>\n";
        for (const auto& p : pts) {
            if (p.converged) {
                out << "<circle class=\"converged\" cx=\"" << canvas.px(p.x) << "\" cy=\"" << canvas.py(p.y)
                    << "\" r=\"3\" fill=\"" << color << "\"/>\n";
            } else {
                any_unconverged = true;
                out << "<circle class=\"unconverged\" cx=\"" << canvas.px(p.x) << "\" cy=\"" << canvas.py(p.y)
                    << "\" r=\"4\" fill=\"white\" stroke=\"#d62728\" stroke-width=\"1.5\"/>\n";
            }
        }
    }
    double legend_y = detail::kTop + 16;
    for (std::size_t i = 0; i < curves.size(); ++i) {
        if (curves[i].label.empty()) continue;
        out << "<text x=\"" << detail::kWidth - detail::kRight - 8 << "\" y=\"" << legend_y
            << "\" text-anchor=\"end\" fill=\"" << detail::kPalette[i % std::size(detail::kPalette)] << "\">"
            << detail::escape(curves[i].label) << "</text>\n";
        legend_y += 16;
    }
    if (any_unconverged)
        out << "<text x=\"" << detail::kWidth - detail::kRight - 8 << "\" y=\"" << legend_y
            << "\" text-anchor=\"end\" fill=\"#d62728\">&#9675; not converged</text>\n";
    out << "</svg>\n";
}

/// One marker per point.
inline void render_scatter(std::ostream& out, const std::vector<ScatterPoint>& points, const Axes& axes) {
    if (points.empty()) throw Error(ErrorCode::EmptyPlot, "no points to plot");
    double x_lo = INFINITY, x_hi = -INFINITY, y_lo = 0.0, y_hi = 0.0;
    for (const auto& p : points) {
        x_lo = std::min(x_lo, p.x);
        x_hi = std::max(x_hi, p.x);
        y_lo = std::min(y_lo, p.y);
        y_hi = std::max(y_hi, p.y);
    }
    const detail::Canvas canvas(detail::padded(x_lo, x_hi), detail::padded(y_lo, y_hi));
    canvas.frame(out, axes);
    for (const auto& p : points)
        out << "<circle class=\"marker\" cx=\"" << canvas.px(p.x) << "\" cy=\"" << canvas.py(p.y)
            << "\" r=\"1.2\" fill=\"black\"/>\n";
    out << "</svg>\n";
}

/// TLE figure from a TLE CSV. With `along_sigma` the x axis is sigma = -alpha/2.
/// Rows are grouped into one curve per beta.
inline void tle_figure(std::istream& csv_in, std::ostream& svg, bool along_sigma = false) {
    const csv::Table t = csv::read(csv_in);
    const std::size_t ca = t.column("alpha"), cb = t.column("beta"), ct = t.column("tle"), cc = t.column("converged");
    std::map<double, Curve> by_beta;
    for (const auto& row : t.rows) {
        const double alpha = csv::parse_number(row[ca]);
        const double beta = csv::parse_number(row[cb]);
        auto& curve = by_beta[beta];
        curve.label = "beta = " + detail::fmt(beta);
        curve.points.push_back({along_sigma ? -alpha / 2.0 : alpha, csv::parse_number(row[ct]), row[cc] == "true"});
    }
    std::vector<Curve> curves;
    for (auto& [beta, curve] : by_beta) curves.push_back(std::move(curve));
    if (curves.size() == 1) curves.front().label.clear();
    render_curves(svg, curves,
                  {"Transverse Lyapunov exponent", along_sigma ? "sigma (alpha = -2 sigma)" : "alpha", "TLE"});
}

inline void bifurcation_figure(std::istream& csv_in, std::ostream& svg) {
    const csv::Table t = csv::read(csv_in);
    const std::size_t cs = t.column("sigma"), cm = t.column("local_max");
    std::vector<ScatterPoint> pts;
    pts.reserve(t.rows.size());
    for (const auto& row : t.rows) pts.push_back({csv::parse_number(row[cs]), csv::parse_number(row[cm])});
    render_scatter(svg, pts, {"Bifurcation diagram, two-oscillator probe", "sigma", "local maxima of |x1 - x2|"});
}

}  // namespace msflab::plot
