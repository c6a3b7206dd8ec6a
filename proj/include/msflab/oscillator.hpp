#pragma once

// Dimensionless forced impact oscillator
//
//   x' = v
//   v' = -2 zeta v - x + f cos(eta tau)
//   x(tau_c) = x_w  =>  v(tau_c+) = -R v(tau_c-)
//
// simulated exactly: the motion between impacts is the closed-form
// underdamped solution, impacts are located by scanning x - x_w on a regular
// grid and refining sign changes by bisection.

#include <msflab/error.hpp>

#include <cmath>
#include <deque>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <vector>

namespace msflab {

namespace oscillator_limits {
inline constexpr double kDefaultScanStep = 1e-3;
/// Bisection stops once the impact-time bracket is this narrow.
inline constexpr double kBisectionTolerance = 1e-12;
/// |v_pre| below this flags the impact as grazing.
inline constexpr double kGrazingVelocity = 1e-8;
/// Allowed |x - x_w| when a reset is applied.
inline constexpr double kWallTolerance = 1e-9;
/// More impacts than this within one forcing period abort the run.
inline constexpr std::size_t kChatterCap = 10000;
}  // namespace oscillator_limits

struct ImpactOscillatorParams {
    double zeta = 0.05;
    double eta = 0.712;
    double f = 1.0;
    double x_w = 2.0;
    double R = 1.0;
    bool wall_enabled = true;

    [[nodiscard]] double damped_frequency() const { return std::sqrt(1.0 - zeta * zeta); }
    [[nodiscard]] double forcing_period() const { return 2.0 * std::numbers::pi / eta; }
};

struct DimensionalParams {
    double m = 1.0;
    double c = 0.0;
    double k = 1.0;
    double F = 1.0;
    double Omega = 1.0;
    double X_w = 0.0;
};

/// Phase-space point (x, v) at dimensionless time tau. The scalar is a
/// template parameter so the closed-form flow can be evaluated in extended
/// precision; the library itself runs in double.
template <typename Real>
struct BasicOscState {
    Real x = 0;
    Real v = 0;
    Real tau = 0;
};
using OscState = BasicOscState<double>;

template <typename Real>
struct BasicEventRecord {
    Real tau_c = 0;
    Real v_pre = 0;
    Real v_post = 0;
    bool grazing = false;
};
using EventRecord = BasicEventRecord<double>;

template <typename Real>
struct BasicImpactOutcome {
    BasicOscState<Real> state;
    BasicEventRecord<Real> event;
};
using ImpactOutcome = BasicImpactOutcome<double>;

template <typename Real>
struct BasicSimulationResult {
    BasicOscState<Real> final_state;
    std::vector<BasicEventRecord<Real>> events;
};
using SimulationResult = BasicSimulationResult<double>;

/// Particular-solution coefficients: x_p(tau) = a cos(eta tau) + b sin(eta tau).
struct SteadyState {
    double a = 0.0;
    double b = 0.0;
};

namespace presets {
/// R = 1.0, x_w = 2.0, zeta = 0.05, eta = 0.712
inline ImpactOscillatorParams elastic() { return {0.05, 0.712, 1.0, 2.0, 1.0, true}; }
/// R = 0.9, x_w = 1.5, zeta = 0.05, eta = 0.5975
inline ImpactOscillatorParams inelastic() { return {0.05, 0.5975, 1.0, 1.5, 0.9, true}; }
}  // namespace presets

inline void validate(const ImpactOscillatorParams& p) {
    auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidParameter, what); };
    if (!(p.zeta >= 0.0 && p.zeta < 1.0)) fail("zeta must lie in [0, 1)");
    if (!(p.eta > 0.0) || !std::isfinite(p.eta)) fail("eta must be positive");
    if (!(p.f >= 0.0) || !std::isfinite(p.f)) fail("f must be non-negative");
    if (!(p.R > 0.0 && p.R <= 1.0)) fail("R must lie in (0, 1]");
    if (p.wall_enabled && !std::isfinite(p.x_w)) fail("x_w must be finite when the wall is enabled");
}

/// zeta = c / (2 sqrt(mk)), eta = Omega / omega, x_w = k X_w / F; positions are
/// scaled by F/k so the forcing amplitude becomes 1.
inline ImpactOscillatorParams nondimensionalize(const DimensionalParams& d) {
    if (!(d.m > 0.0) || !(d.k > 0.0) || !(d.F > 0.0) || !(d.Omega > 0.0) || !(d.c >= 0.0))
        throw Error(ErrorCode::InvalidParameter, "nondimensionalize: m, k, F, Omega must be positive and c >= 0");
    const double omega = std::sqrt(d.k / d.m);
    ImpactOscillatorParams p;
    p.zeta = d.c / (2.0 * std::sqrt(d.m * d.k));
    p.eta = d.Omega / omega;
    p.f = 1.0;
    p.x_w = d.k * d.X_w / d.F;
    p.R = 1.0;
    p.wall_enabled = true;
    return p;
}

inline SteadyState steady_state_coefficients(const ImpactOscillatorParams& p) {
    validate(p);
    if (p.f == 0.0) return {};
    const double detune = 1.0 - p.eta * p.eta;
    const double damp = 2.0 * p.zeta * p.eta;
    const double d = detune * detune + damp * damp;
    if (d == 0.0) throw Error(ErrorCode::Resonance, "undamped forcing at the natural frequency has no steady state");
    return {detune * p.f / d, damp * p.f / d};
}

/// Mechanical energy (x^2 + v^2) / 2 of the unforced oscillator.
template <typename Real>
Real mechanical_energy(const BasicOscState<Real>& s) {
    return (s.x * s.x + s.v * s.v) / 2;
}

namespace detail {

// Closed-form free flight from a fixed start state.
template <typename Real>
class FreeFlight {
public:
    FreeFlight(const ImpactOscillatorParams& p, const SteadyState& ss, const BasicOscState<Real>& start)
        : zeta_(p.zeta), eta_(p.eta), a_(ss.a), b_(ss.b), tau0_(start.tau) {
        using std::cos;
        using std::sin;
        using std::sqrt;
        wd_ = sqrt(Real(1) - zeta_ * zeta_);
        c0_ = cos(eta_ * tau0_);
        s0_ = sin(eta_ * tau0_);
        y0_ = start.x - (a_ * c0_ + b_ * s0_);
        yd0_ = start.v - eta_ * (b_ * c0_ - a_ * s0_);
    }

    /// State after local time t >= 0.
    [[nodiscard]] BasicOscState<Real> at(const Real& t) const {
        using std::cos;
        using std::exp;
        using std::sin;
        const Real decay = exp(-zeta_ * t);
        const Real cw = cos(wd_ * t);
        const Real sw = sin(wd_ * t);
        const Real y = decay * (y0_ * cw + (yd0_ + zeta_ * y0_) / wd_ * sw);
        const Real yd = decay * (yd0_ * cw - (y0_ + zeta_ * yd0_) / wd_ * sw);
        // Forcing phase rotated in local time; eta * (tau0 + t) would lose
        // the sub-ulp part of t once tau0 is large.
        const Real ce = cos(eta_ * t);
        const Real se = sin(eta_ * t);
        const Real c = c0_ * ce - s0_ * se;
        const Real s = s0_ * ce + c0_ * se;
        return {y + a_ * c + b_ * s, yd + eta_ * (b_ * c - a_ * s), tau0_ + t};
    }

private:
    Real zeta_;
    Real eta_;
    Real a_;
    Real b_;
    Real tau0_;
    Real wd_ = 0;
    Real c0_ = 0;
    Real s0_ = 0;
    Real y0_ = 0;
    Real yd0_ = 0;
};

// Earliest local time in (0, horizon] where gap(t) becomes positive, checked at
// multiples of scan_step (and at horizon), refined by bisection. The returned
// time is the lower bracket end, so gap <= 0 there. Only approaches from the
// admissible side count: a start with gap > kWallTolerance (a perturbed state
// just past the wall) is ignored until the gap has been non-positive at a scan
// point. Starts within the tolerance stay armed, so a state reset at the wall
// cannot slip through it on rounding.
template <typename Real, typename Gap>
std::optional<Real> scan_for_crossing(Gap&& gap, const Real& horizon, const Real& scan_step) {
    if (!(horizon > 0)) return std::nullopt;
    Real prev = 0;
    bool armed = !(gap(Real(0)) > Real(oscillator_limits::kWallTolerance));
    for (long k = 1;; ++k) {
        Real t = static_cast<Real>(k) * scan_step;
        const bool last = t >= horizon;
        if (last) t = horizon;
        const bool beyond = gap(t) > 0;
        if (beyond && !armed) {
            if (last) return std::nullopt;
            prev = t;
            continue;
        }
        armed = true;
        if (beyond) {
            Real lo = prev;
            Real hi = t;
            while (hi - lo > Real(oscillator_limits::kBisectionTolerance)) {
                const Real mid = (lo + hi) / 2;
                if (mid <= lo || mid >= hi) break;
                if (gap(mid) > 0)
                    hi = mid;
                else
                    lo = mid;
            }
            return lo;
        }
        if (last) return std::nullopt;
        prev = t;
    }
}

template <typename Real>
void require_scan_step(const Real& scan_step) {
    using std::isfinite;
    if (!(scan_step > 0) || !isfinite(scan_step))
        throw Error(ErrorCode::InvalidParameter, "scan step must be positive");
}

}  // namespace detail

/// Closed-form propagation over an impact-free interval of length dt.
template <typename Real>
BasicOscState<Real> propagate_free(const ImpactOscillatorParams& p, const BasicOscState<Real>& s,
                                   const std::type_identity_t<Real>& dt) {
    if (!(dt >= 0)) throw Error(ErrorCode::InvalidParameter, "propagate_free: dt must be non-negative");
    if (dt == 0) return s;
    const detail::FreeFlight<Real> flight(p, steady_state_coefficients(p), s);
    return flight.at(dt);
}

/// Earliest impact time in (s.tau, s.tau + horizon], or nullopt. Sign changes
/// of x - x_w are looked for every scan_step only.
template <typename Real>
std::optional<Real> detect_next_impact(const ImpactOscillatorParams& p, const BasicOscState<Real>& s,
                                       const std::type_identity_t<Real>& horizon,
                                       const std::type_identity_t<Real>& scan_step = oscillator_limits::kDefaultScanStep) {
    detail::require_scan_step(scan_step);
    if (!p.wall_enabled) return std::nullopt;
    const detail::FreeFlight<Real> flight(p, steady_state_coefficients(p), s);
    const Real wall = p.x_w;
    const auto t = detail::scan_for_crossing<Real>([&](const Real& lt) { return flight.at(lt).x - wall; }, horizon,
                                                   scan_step);
    if (!t) return std::nullopt;
    return s.tau + *t;
}

/// Reset law v+ = -R v-. Position is left unchanged.
template <typename Real>
BasicImpactOutcome<Real> apply_impact(const ImpactOscillatorParams& p, const BasicOscState<Real>& s) {
    using std::abs;
    if (!p.wall_enabled) throw Error(ErrorCode::InvalidParameter, "apply_impact: wall is disabled");
    if (!(abs(s.x - Real(p.x_w)) <= Real(oscillator_limits::kWallTolerance)))
        throw Error(ErrorCode::InvalidParameter, "apply_impact: state is not at the wall");
    BasicImpactOutcome<Real> out;
    out.state = {s.x, -Real(p.R) * s.v, s.tau};
    out.event = {s.tau, s.v, out.state.v, abs(s.v) < Real(oscillator_limits::kGrazingVelocity)};
    return out;
}

/// Event-driven simulation over `duration`. After every impact the scan grid
/// restarts at the impact time.
template <typename Real>
BasicSimulationResult<Real> simulate(const ImpactOscillatorParams& p, const BasicOscState<Real>& s0,
                                     const std::type_identity_t<Real>& duration,
                                     const std::type_identity_t<Real>& scan_step = oscillator_limits::kDefaultScanStep) {
    validate(p);
    detail::require_scan_step(scan_step);
    if (!(duration >= 0)) throw Error(ErrorCode::InvalidParameter, "simulate: duration must be non-negative");
    const SteadyState ss = steady_state_coefficients(p);
    const Real tau_end = s0.tau + duration;
    const Real period = p.forcing_period();
    const Real wall = p.x_w;

    BasicSimulationResult<Real> out;
    BasicOscState<Real> s = s0;
    Real remaining = duration;
    std::deque<Real> recent;
    while (true) {
        const detail::FreeFlight<Real> flight(p, ss, s);
        std::optional<Real> hit;
        if (p.wall_enabled)
            hit = detail::scan_for_crossing<Real>([&](const Real& t) { return flight.at(t).x - wall; }, remaining,
                                                  scan_step);
        if (!hit) {
            if (remaining > 0) s = flight.at(remaining);
            s.tau = tau_end;
            break;
        }
        const auto impact = apply_impact(p, flight.at(*hit));
        out.events.push_back(impact.event);
        s = impact.state;
        remaining -= *hit;

        recent.push_back(s.tau);
        while (s.tau - recent.front() > period) recent.pop_front();
        if (recent.size() > oscillator_limits::kChatterCap) {
            std::ostringstream msg;
            msg << "more than " << oscillator_limits::kChatterCap
                << " impacts within one forcing period ending at tau=" << static_cast<double>(s.tau)
                << " (last v_pre=" << static_cast<double>(impact.event.v_pre) << ")";
            throw Error(ErrorCode::Chatter, msg.str());
        }
    }
    out.final_state = s;
    return out;
}

}  // namespace msflab
