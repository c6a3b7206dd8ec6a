#include <msflab/flow_jacobian.hpp>

#include "oracles.hpp"

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <numbers>

using namespace msflab;

namespace {

using quad = boost::multiprecision::cpp_bin_float_quad;

ImpactOscillatorParams no_wall(double zeta = 0.05, double eta = 0.712, double f = 1.0) {
    return {zeta, eta, f, 2.0, 1.0, false};
}

Eigen::Matrix2d generator(const ImpactOscillatorParams& p) {
    Eigen::Matrix2d j;
    j << 0.0, 1.0, -1.0, -2.0 * p.zeta;
    return j;
}

double max_abs(const Eigen::Matrix2d& m) { return m.cwiseAbs().maxCoeff(); }

/// State a short time before the first impact after `skip` impacts, so an
/// event window of `window` centred on the impact contains exactly it.
OscState state_before_impact(const ImpactOscillatorParams& p, double lead, std::size_t skip, EventRecord* event) {
    const auto run = simulate(p, OscState{}, 60.0 * p.forcing_period());
    EXPECT_GT(run.events.size(), skip);
    const EventRecord e = run.events.at(skip);
    if (event) *event = e;
    return simulate(p, OscState{}, e.tau_c - lead).final_state;
}

}  // namespace

TEST(EstimateJacobian, ZeroDurationIsIdentity) {
    const auto est = estimate_jacobian<2>(oscillator_flow(presets::elastic(), 0.0), {0.3, 0.1}, 0.0);
    EXPECT_TRUE(est.phi.isIdentity(0.0));
    EXPECT_TRUE(est.consistent);
}

TEST(EstimateJacobian, UndampedRotation) {
    const auto p = no_wall(0.0, 0.5, 0.0);
    const auto est = estimate_jacobian<2>(oscillator_flow(p, 0.0), {1.0, 0.0}, std::numbers::pi / 2.0);
    Eigen::Matrix2d expected;
    expected << 0.0, 1.0, -1.0, 0.0;
    EXPECT_LT(max_abs(est.phi - expected), 1e-6);
}

TEST(EstimateJacobian, SmoothFlowIsExactForAnyDelta) {
    // The segment flow is affine, so forward differences are exact up to
    // rounding; quad precision keeps rounding out of the way for small delta.
    const auto p = no_wall();
    const auto flow = oscillator_flow<quad>(p, quad(1.3));
    for (double t : {0.1, 0.5, 1.0}) {
        const Eigen::Matrix2d expected = (generator(p) * t).exp();
        for (double delta : {1e-9, 1e-7, 1e-5, 1e-3}) {
            const auto est = estimate_jacobian<2, quad>(flow, {quad(0.2), quad(-0.4)}, quad(t), quad(delta));
            EXPECT_LT(max_abs(est.phi - expected), 1e-9) << "t=" << t << " delta=" << delta;
            EXPECT_EQ(est.delta_used, delta);
        }
    }
}

TEST(EstimateJacobian, DoublePrecisionDefaultDelta) {
    const auto p = no_wall();
    const auto est = estimate_jacobian<2>(oscillator_flow(p, 0.0), {0.2, -0.4}, 0.5);
    EXPECT_LT(max_abs(est.phi - (generator(p) * 0.5).exp()), 1e-8);
    EXPECT_EQ(est.delta_used, kDefaultJacobiDelta);
}

TEST(EstimateJacobian, Composition) {
    const auto p = no_wall();
    const std::array<double, 2> x0{0.7, 0.3};
    const double t1 = 0.4, t2 = 0.9, tau0 = 2.0;
    const auto whole = estimate_jacobian<2>(oscillator_flow(p, tau0), x0, t1 + t2);
    const auto first = estimate_jacobian<2>(oscillator_flow(p, tau0), x0, t1);
    const auto mid = propagate_free(p, OscState{x0[0], x0[1], tau0}, t1);
    const auto second = estimate_jacobian<2>(oscillator_flow(p, mid.tau), {mid.x, mid.v}, t2);
    EXPECT_LT(max_abs(whole.phi - second.phi * first.phi), 1e-8);
}

TEST(EstimateJacobian, LinearFlowDoesNotDependOnStart) {
    const auto p = no_wall();
    const auto a = estimate_jacobian<2>(oscillator_flow(p, 0.0), {0.0, 0.0}, 1.5);
    const auto b = estimate_jacobian<2>(oscillator_flow(p, 0.0), {5.0, -3.0}, 1.5);
    EXPECT_LT(max_abs(a.phi - b.phi), 1e-6);
}

TEST(EstimateJacobian, FlagsInconsistentEventCounts) {
    const auto flow = [](const std::array<double, 2>& x, double) {
        return FlowSample<double, 2>{x, x[0] > 1.0 ? 1u : 0u};
    };
    const auto est = estimate_jacobian<2, double>(flow, {1.0 - 1e-8, 0.0}, 1.0, 1e-7);
    EXPECT_FALSE(est.consistent);
    EXPECT_EQ(est.event_counts, (std::vector<std::size_t>{0, 1, 0}));
    const auto fine = estimate_jacobian<2, double>(flow, {0.5, 0.0}, 1.0, 1e-7);
    EXPECT_TRUE(fine.consistent);
}

TEST(EstimateJacobian, NonFiniteFlowIsPropagationError) {
    const auto flow = [](const std::array<double, 2>& x, double) {
        return FlowSample<double, 2>{{x[0], x[1] > 0.5 ? NAN : x[1]}, 0};
    };
    try {
        (void)estimate_jacobian<2, double>(flow, {0.0, 0.5}, 1.0, 1e-3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Propagation);
    }
}

TEST(EstimateJacobian, RejectsBadArguments) {
    const auto flow = oscillator_flow(no_wall(), 0.0);
    EXPECT_THROW((estimate_jacobian<2, double>(flow, {0.0, 0.0}, 1.0, 0.0)), Error);
    EXPECT_THROW((estimate_jacobian<2, double>(flow, {0.0, 0.0}, -1.0, 1e-7)), Error);
}

TEST(EventWindow, ElasticDeterminantAndSaltation) {
    const auto p = presets::elastic();
    EventRecord e;
    const OscState s = state_before_impact(p, 5e-4, 3, &e);
    const auto est = event_window_jacobian(p, s, 1e-3);
    ASSERT_TRUE(est.consistent);
    const double before = e.tau_c - s.tau;
    const Eigen::Matrix2d expected =
        (generator(p) * (1e-3 - before)).exp() * oracle::saltation(p, e) * (generator(p) * before).exp();
    EXPECT_LT(max_abs(est.phi - expected), 1e-4 * std::max(1.0, max_abs(expected)));
    EXPECT_NEAR(est.phi.determinant(), std::exp(-2.0 * p.zeta * 1e-3), 1e-3);
}

TEST(EventWindow, InelasticDeterminant) {
    const auto p = presets::inelastic();
    EventRecord e;
    const OscState s = state_before_impact(p, 5e-4, 3, &e);
    const auto est = event_window_jacobian(p, s, 1e-3);
    ASSERT_TRUE(est.consistent);
    EXPECT_NEAR(est.phi.determinant(), 0.81, 1e-2);
    const double before = e.tau_c - s.tau;
    const Eigen::Matrix2d expected =
        (generator(p) * (1e-3 - before)).exp() * oracle::saltation(p, e) * (generator(p) * before).exp();
    EXPECT_LT(max_abs(est.phi - expected), 1e-4 * std::max(1.0, max_abs(expected)));
}

TEST(EventWindow, StableAcrossDeltas) {
    const auto p = presets::elastic();
    const OscState s = state_before_impact(p, 5e-4, 2, nullptr);
    const auto ref = event_window_jacobian(p, s, 1e-3, 1e-7);
    for (double delta : {1e-6, 1e-8}) {
        const auto est = event_window_jacobian(p, s, 1e-3, delta);
        ASSERT_TRUE(est.consistent);
        EXPECT_LT(max_abs(est.phi - ref.phi), 1e-3 * max_abs(ref.phi)) << delta;
    }
}

TEST(EventWindow, ImpactAtWindowStartIsInconsistent) {
    // A +delta shift in x puts the perturbed start past the wall, so that
    // trajectory has no admissible impact.
    const auto p = presets::elastic();
    const OscState s{p.x_w - 5e-8, 1.0, 0.0};
    const auto est = event_window_jacobian(p, s, 1e-3);
    EXPECT_FALSE(est.consistent);
    EXPECT_EQ(est.event_counts.front(), 1u);
}

TEST(EventWindow, InvalidWindows) {
    const auto p = presets::elastic();
    auto code_of = [&](const OscState& s, double w) {
        try {
            (void)event_window_jacobian(p, s, w);
        } catch (const Error& e) {
            return e.code();
        }
        return ErrorCode::Propagation;
    };
    const OscState s = state_before_impact(p, 5e-4, 1, nullptr);
    EXPECT_EQ(code_of(s, 0.0), ErrorCode::InvalidWindow);
    EXPECT_EQ(code_of(s, 3e-3), ErrorCode::InvalidWindow);
    EXPECT_EQ(code_of(OscState{0.0, 0.0, 0.0}, 1e-3), ErrorCode::InvalidWindow);
}
