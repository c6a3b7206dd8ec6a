#pragma once

// Trajectory Jacobi matrix by finite perturbations of the initial condition
// along the standard basis:
//
//   Phi_t(x0) ~ [phi_t(x0 + d e_1) - phi_t(x0), ..., phi_t(x0 + d e_n) - phi_t(x0)] / d
//
// The flow map is a black box that also reports how many events (impacts)
// the trajectory crossed. The estimate is only meaningful when every
// perturbed trajectory crosses the same events as the central one; that is
// recorded in `consistent` and left to the caller to act on.

#include <msflab/error.hpp>
#include <msflab/matrix_functions.hpp>
#include <msflab/oscillator.hpp>

#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <vector>

namespace msflab {

inline constexpr double kDefaultJacobiDelta = 1e-7;

template <typename Real, std::size_t N>
struct FlowSample {
    std::array<Real, N> state{};
    std::size_t events = 0;
};

/// Evaluator (x0, t) -> (phi_t(x0), events crossed). Must be deterministic.
template <typename F, typename Real, std::size_t N>
concept FlowMap = requires(const F& flow, const std::array<Real, N>& x0, const Real& t) {
    { flow(x0, t) } -> std::convertible_to<FlowSample<Real, N>>;
};

template <std::size_t N>
struct JacobiEstimate {
    RealMatrix<static_cast<int>(N)> phi;
    double delta_used = 0.0;
    /// Central trajectory first, then one entry per basis direction.
    std::vector<std::size_t> event_counts;
    bool consistent = true;
};

template <std::size_t N, typename Real, typename Flow>
    requires FlowMap<Flow, Real, N>
JacobiEstimate<N> estimate_jacobian(const Flow& flow, const std::array<Real, N>& x0, const std::type_identity_t<Real>& t,
                                    const std::type_identity_t<Real>& delta) {
    using std::isfinite;
    if (!(delta > 0)) throw Error(ErrorCode::InvalidParameter, "estimate_jacobian: delta must be positive");
    if (!(t >= 0)) throw Error(ErrorCode::InvalidParameter, "estimate_jacobian: t must be non-negative");

    JacobiEstimate<N> out;
    out.delta_used = static_cast<double>(delta);
    if (t == 0) {
        out.phi.setIdentity();
        out.event_counts.assign(N + 1, 0);
        return out;
    }

    auto evaluate = [&](const std::array<Real, N>& x) {
        FlowSample<Real, N> sample = flow(x, t);
        for (const auto& v : sample.state)
            if (!isfinite(v)) throw Error(ErrorCode::Propagation, "estimate_jacobian: flow returned a non-finite state");
        return sample;
    };

    const FlowSample<Real, N> central = evaluate(x0);
    out.event_counts.push_back(central.events);
    for (std::size_t i = 0; i < N; ++i) {
        std::array<Real, N> shifted = x0;
        shifted[i] += delta;
        const FlowSample<Real, N> moved = evaluate(shifted);
        out.event_counts.push_back(moved.events);
        out.consistent = out.consistent && moved.events == central.events;
        for (std::size_t r = 0; r < N; ++r)
            out.phi(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) =
                static_cast<double>((moved.state[r] - central.state[r]) / delta);
    }
    return out;
}

template <std::size_t N, typename Flow>
    requires FlowMap<Flow, double, N>
JacobiEstimate<N> estimate_jacobian(const Flow& flow, const std::array<double, N>& x0, double t) {
    return estimate_jacobian<N, double>(flow, x0, t, kDefaultJacobiDelta);
}

/// Event-driven impact-oscillator flow starting at time tau0.
template <typename Real = double>
auto oscillator_flow(const ImpactOscillatorParams& p, const std::type_identity_t<Real>& tau0,
                     const std::type_identity_t<Real>& scan_step = oscillator_limits::kDefaultScanStep) {
    return [p, tau0, scan_step](const std::array<Real, 2>& x0, const Real& t) {
        const auto run = simulate<Real>(p, BasicOscState<Real>{x0[0], x0[1], tau0}, t, scan_step);
        return FlowSample<Real, 2>{{run.final_state.x, run.final_state.v}, run.events.size()};
    };
}

/// Jacobi matrix of the oscillator flow across a short window that contains
/// exactly one impact of the central trajectory. Singularity is only checked
/// for consistent estimates.
inline JacobiEstimate<2> event_window_jacobian(const ImpactOscillatorParams& p, const OscState& s_pre, double window,
                                               double delta = kDefaultJacobiDelta,
                                               double scan_step = oscillator_limits::kDefaultScanStep) {
    if (!(window > 0.0) || window > 2.0 * scan_step)
        throw Error(ErrorCode::InvalidWindow, "event window must be positive and at most two scan steps");
    const auto flow = oscillator_flow<double>(p, s_pre.tau, scan_step);
    JacobiEstimate<2> est = estimate_jacobian<2, double>(flow, {s_pre.x, s_pre.v}, window, delta);
    if (est.event_counts.front() != 1)
        throw Error(ErrorCode::InvalidWindow, "central trajectory has " + std::to_string(est.event_counts.front()) +
                                                  " impacts in the window, expected exactly one");
    // An inconsistent estimate mixes trajectories with and without the reset
    // and carries no meaning; the caller decides whether to retry.
    if (!est.consistent) return est;
    Eigen::JacobiSVD<RealMatrix<2>> svd(est.phi);
    const auto& sv = svd.singularValues();
    if (!(sv(1) >= matrix_limits::kSingular * sv(0)))
        throw Error(ErrorCode::GrazingSingularity, "event-window Jacobian is singular (grazing impact?)");
    return est;
}

}  // namespace msflab
