#pragma once

// Transversal Lyapunov exponent of
//
//   xi' = [DF + (alpha + i beta) H] xi
//
// for the impact oscillator. The single-oscillator Jacobi matrix of every
// scan step (analytic exp(J h) between impacts, finite-perturbation estimate
// across impacts) is turned into the coupled step propagator
//
//   exp(log(Phi_single) + (alpha + i beta) H h)
//
// and a unit perturbation is pushed through these propagators with
// renormalization after every step.
//
// The single-oscillator Jacobians do not depend on the coupling parameter, so
// they are recorded once on a ReferenceTape and replayed for every query.

#include <msflab/error.hpp>
#include <msflab/flow_jacobian.hpp>
#include <msflab/matrix_functions.hpp>
#include <msflab/oscillator.hpp>
#include <msflab/parallel.hpp>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace msflab {

struct MSFQuery {
    double alpha = 0.0;
    double beta = 0.0;

    [[nodiscard]] cplx value() const { return {alpha, beta}; }
};

using CouplingMatrixH = RealMatrix<2>;

/// Linear spring coupling acting on the velocity equation through positions.
inline CouplingMatrixH spring_coupling() {
    CouplingMatrixH h;
    h << 0.0, 0.0, 1.0, 0.0;
    return h;
}

/// Generator of the segment dynamics, [[0, 1], [-1, -2 zeta]].
inline RealMatrix<2> segment_generator(const ImpactOscillatorParams& p) {
    RealMatrix<2> j;
    j << 0.0, 1.0, -1.0, -2.0 * p.zeta;
    return j;
}

struct TLESettings {
    std::size_t transient_periods = 500;
    std::size_t max_periods = 2000;
    std::size_t sample_window = 100;
    double std_tolerance = 1e-5;
    double scan_step = 1e-3;
    double jacobi_delta = 1e-7;
};

inline void validate(const TLESettings& s) {
    auto fail = [](const char* what) { throw Error(ErrorCode::InvalidParameter, what); };
    if (s.max_periods == 0) fail("max_periods must be positive");
    if (s.sample_window == 0) fail("sample_window must be positive");
    if (s.sample_window > s.max_periods) fail("sample_window cannot exceed max_periods");
    if (!(s.std_tolerance > 0.0)) fail("std_tolerance must be positive");
    if (!(s.scan_step > 0.0)) fail("scan_step must be positive");
    if (!(s.jacobi_delta > 0.0)) fail("jacobi_delta must be positive");
}

enum class WarningKind { Grazing, InconsistentJacobian, MultiImpactWindow, ImaginaryDiscarded };

struct TLEWarning {
    WarningKind kind;
    double tau = 0.0;
    double magnitude = 0.0;
};

struct TLEResult {
    double lambda = 0.0;
    bool converged = false;
    std::size_t periods_used = 0;
    std::size_t transient_periods = 0;
    /// Standard deviation of the last sample_window samples (NaN if fewer).
    double final_std = 0.0;
    /// Running estimate lambda(t) = log_growth_sum / elapsed, one per forcing period.
    std::vector<double> samples;
    std::vector<TLEWarning> warnings;
    /// Largest Frobenius norm of the imaginary part dropped on impact-free / impact steps.
    double max_imag_free = 0.0;
    double max_imag_event = 0.0;
};

struct StepPropagator {
    ComplexMatrix<2> matrix;
    /// Frobenius norm of the imaginary part removed (beta == 0 only).
    double discarded_imag = 0.0;
};

/// exp(log(phi_single) + (alpha + i beta) H h). For beta == 0 the result is
/// projected onto the reals and the size of the removed part is reported.
inline StepPropagator coupled_step_propagator(const RealMatrix<2>& phi_single, const CouplingMatrixH& h_matrix,
                                              const MSFQuery& q, double h) {
    if (!(h > 0.0)) throw Error(ErrorCode::InvalidParameter, "coupled_step_propagator: h must be positive");
    const ComplexMatrix<2> generator =
        mat_log<2>(phi_single) + q.value() * h * ComplexMatrix<2>(h_matrix.cast<cplx>());
    StepPropagator out{mat_exp<2>(generator), 0.0};
    if (q.beta == 0.0) {
        out.discarded_imag = out.matrix.imag().norm();
        out.matrix.imag().setZero();
    }
    return out;
}

/// State reached after `periods` forcing periods from (0, 0) at tau = 0.
inline OscState settle(const ImpactOscillatorParams& p, std::size_t periods,
                       double scan_step = oscillator_limits::kDefaultScanStep) {
    const OscState origin{0.0, 0.0, 0.0};
    return simulate(p, origin, static_cast<double>(periods) * p.forcing_period(), scan_step).final_state;
}

/// Number of scan steps after which `periods` forcing periods have elapsed.
inline std::size_t steps_for_periods(const ImpactOscillatorParams& p, double scan_step, std::size_t periods) {
    return static_cast<std::size_t>(std::ceil(static_cast<double>(periods) * p.forcing_period() / scan_step));
}

struct TapeEvent {
    std::size_t step = 0;
    RealMatrix<2> phi;
    double tau_c = 0.0;
    std::size_t impacts = 1;
    bool grazing = false;
    bool consistent = true;
};

/// Base trajectory marched on the grid tau0 + k h together with the
/// single-oscillator Jacobi matrix of every step that contains an impact.
/// Impact-free steps all share free_phi() = exp(J h).
class ReferenceTape {
public:
    ReferenceTape(const ImpactOscillatorParams& p, const OscState& base, const TLESettings& settings)
        : params_(p),
          h_(settings.scan_step),
          delta_(settings.jacobi_delta),
          tau0_(base.tau),
          current_(base),
          free_phi_(mat_exp<2>(RealMatrix<2>(segment_generator(p) * settings.scan_step))),
          steady_(steady_state_coefficients(p)) {}

    /// Marches the base trajectory until at least `steps` steps are recorded.
    void extend_to(std::size_t steps) {
        while (steps_ < steps) advance();
    }

    [[nodiscard]] std::size_t steps() const { return steps_; }
    [[nodiscard]] double step() const { return h_; }
    [[nodiscard]] const RealMatrix<2>& free_phi() const { return free_phi_; }
    [[nodiscard]] const std::vector<TapeEvent>& events() const { return events_; }
    [[nodiscard]] const ImpactOscillatorParams& params() const { return params_; }
    [[nodiscard]] const OscState& current() const { return current_; }

private:
    void advance() {
        const OscState start = current_;
        const detail::FreeFlight<double> flight(params_, steady_, start);
        OscState end = flight.at(h_);
        if (params_.wall_enabled && end.x > params_.x_w) record_event(start, end);
        end.tau = tau0_ + static_cast<double>(steps_ + 1) * h_;
        current_ = end;
        ++steps_;
    }

    void record_event(const OscState& start, OscState& end) {
        const auto run = simulate(params_, start, h_, h_);
        end = run.final_state;
        TapeEvent ev;
        ev.step = steps_;
        ev.impacts = run.events.size();
        ev.tau_c = run.events.empty() ? start.tau : run.events.front().tau_c;
        for (const auto& e : run.events) ev.grazing = ev.grazing || e.grazing;

        auto estimate = [&](double delta) {
            if (ev.impacts == 1) return event_window_jacobian(params_, start, h_, delta, h_);
            return estimate_jacobian<2, double>(oscillator_flow<double>(params_, start.tau, h_), {start.x, start.v},
                                                h_, delta);
        };
        try {
            JacobiEstimate<2> est = estimate(delta_);
            if (!est.consistent) est = estimate(delta_ / 10.0);
            ev.phi = est.phi;
            ev.consistent = est.consistent;
        } catch (const Error& e) {
            std::ostringstream msg;
            msg << "impact at tau_c=" << ev.tau_c << ": " << e.what();
            const ErrorCode code =
                e.code() == ErrorCode::GrazingSingularity ? ErrorCode::NonInvertible : e.code();
            throw Error(code, msg.str());
        }
        events_.push_back(ev);
    }

    ImpactOscillatorParams params_;
    double h_;
    double delta_;
    double tau0_;
    OscState current_;
    RealMatrix<2> free_phi_;
    SteadyState steady_;
    std::size_t steps_ = 0;
    std::vector<TapeEvent> events_;
};

namespace detail {

inline double tail_std(const std::vector<double>& samples, std::size_t window) {
    if (samples.size() < window || window < 2) return std::nan("");
    const auto first = samples.end() - static_cast<std::ptrdiff_t>(window);
    double mean = 0.0;
    for (auto it = first; it != samples.end(); ++it) mean += *it;
    mean /= static_cast<double>(window);
    double var = 0.0;
    for (auto it = first; it != samples.end(); ++it) var += (*it - mean) * (*it - mean);
    return std::sqrt(var / static_cast<double>(window - 1));
}

}  // namespace detail

/// Replays a tape for one coupling parameter. `ensure(k)` must make at least
/// k steps available on the tape (or throw).
inline TLEResult march_tle(const ReferenceTape& tape, const CouplingMatrixH& h_matrix, const MSFQuery& q,
                           const TLESettings& settings, ComplexVector<2> xi,
                           const std::function<void(std::size_t)>& ensure) {
    validate(settings);
    const double h = tape.step();
    const ImpactOscillatorParams& p = tape.params();
    if (!(xi.norm() > 0.0)) throw Error(ErrorCode::InvalidParameter, "initial perturbation must be non-zero");

    TLEResult out;
    out.transient_periods = settings.transient_periods;
    out.final_std = std::nan("");
    const StepPropagator free_step = coupled_step_propagator(tape.free_phi(), h_matrix, q, h);
    out.max_imag_free = free_step.discarded_imag;

    double log_sum = 0.0;
    std::size_t k = 0;
    std::size_t next_event = 0;
    for (std::size_t period = 1; period <= settings.max_periods; ++period) {
        const std::size_t k_end = steps_for_periods(p, h, period);
        ensure(k_end);
        const auto& events = tape.events();
        while (k < k_end) {
            ComplexVector<2> next;
            if (next_event < events.size() && events[next_event].step == k) {
                const TapeEvent& ev = events[next_event++];
                StepPropagator step;
                try {
                    step = coupled_step_propagator(ev.phi, h_matrix, q, h);
                } catch (const Error& e) {
                    std::ostringstream msg;
                    msg << "impact at tau_c=" << ev.tau_c << ": " << e.what();
                    throw Error(e.code(), msg.str());
                }
                out.max_imag_event = std::max(out.max_imag_event, step.discarded_imag);
                if (step.discarded_imag > 1e-9)
                    out.warnings.push_back({WarningKind::ImaginaryDiscarded, ev.tau_c, step.discarded_imag});
                if (ev.grazing) out.warnings.push_back({WarningKind::Grazing, ev.tau_c, 0.0});
                if (!ev.consistent) out.warnings.push_back({WarningKind::InconsistentJacobian, ev.tau_c, 0.0});
                if (ev.impacts > 1)
                    out.warnings.push_back({WarningKind::MultiImpactWindow, ev.tau_c, static_cast<double>(ev.impacts)});
                next = step.matrix * xi;
            } else {
                next = free_step.matrix * xi;
            }
            const double grown = next.norm();
            const double before = xi.norm();
            if (!(grown > 0.0) || !std::isfinite(grown))
                throw Error(ErrorCode::Propagation, "perturbation vanished or became non-finite");
            log_sum += std::log(grown / before);
            xi = next / grown;
            ++k;
        }
        out.samples.push_back(log_sum / (static_cast<double>(k) * h));
        out.periods_used = period;
        out.final_std = detail::tail_std(out.samples, settings.sample_window);
        if (out.samples.size() >= settings.sample_window && out.final_std < settings.std_tolerance) {
            out.converged = true;
            break;
        }
    }
    out.lambda = out.samples.back();
    return out;
}

inline ComplexVector<2> default_perturbation() { return ComplexVector<2>(cplx{1.0, 0.0}, cplx{0.0, 0.0}); }

/// TLE for one coupling parameter. Without base_state the oscillator is
/// first settled for settings.transient_periods forcing periods from rest.
inline TLEResult compute_tle(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix, const MSFQuery& q,
                             const TLESettings& settings, const std::optional<OscState>& base_state = std::nullopt) {
    validate(p);
    validate(settings);
    const OscState base = base_state ? *base_state : settle(p, settings.transient_periods, settings.scan_step);
    ReferenceTape tape(p, base, settings);
    return march_tle(tape, h_matrix, q, settings, default_perturbation(),
                     [&tape](std::size_t steps) { tape.extend_to(steps); });
}

struct SweepPoint {
    MSFQuery query;
    std::optional<TLEResult> result;
    std::string error;
};

/// TLE for a list of queries sharing one transient and one reference tape.
/// Per-query failures are recorded, never propagated.
inline std::vector<SweepPoint> evaluate_queries(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix,
                                                const std::vector<MSFQuery>& queries, const TLESettings& settings,
                                                std::size_t jobs = 0,
                                                const std::optional<OscState>& base_state = std::nullopt) {
    validate(p);
    validate(settings);
    std::vector<SweepPoint> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) out[i].query = queries[i];

    std::optional<ReferenceTape> tape;
    try {
        const OscState base = base_state ? *base_state : settle(p, settings.transient_periods, settings.scan_step);
        tape.emplace(p, base, settings);
        tape->extend_to(steps_for_periods(p, settings.scan_step, settings.max_periods));
    } catch (const Error& e) {
        for (auto& point : out) point.error = e.what();
        return out;
    }

    const ReferenceTape& shared = *tape;
    auto full = [&shared](std::size_t steps) {
        if (steps > shared.steps()) throw Error(ErrorCode::Numerical, "reference tape too short");
    };
    parallel_for(queries.size(), jobs, [&](std::size_t i) {
        try {
            out[i].result = march_tle(shared, h_matrix, queries[i], settings, default_perturbation(), full);
        } catch (const Error& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

/// Grid of TLE values, alphas outer and betas inner.
inline std::vector<SweepPoint> msf_sweep(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix,
                                         const std::vector<double>& alphas, const std::vector<double>& betas,
                                         const TLESettings& settings, std::size_t jobs = 0,
                                         const std::optional<OscState>& base_state = std::nullopt) {
    if (alphas.empty() || betas.empty()) throw Error(ErrorCode::InvalidParameter, "msf_sweep: empty grid");
    std::vector<MSFQuery> queries;
    queries.reserve(alphas.size() * betas.size());
    for (double a : alphas)
        for (double b : betas) queries.push_back({a, b});
    return evaluate_queries(p, h_matrix, queries, settings, jobs, base_state);
}

}  // namespace msflab
