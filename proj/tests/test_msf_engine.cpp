#include <msflab/msf_engine.hpp>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <complex>

using namespace msflab;

namespace {

ImpactOscillatorParams no_wall() { return {0.05, 0.712, 1.0, 2.0, 1.0, false}; }

/// Largest real part of the roots of l^2 + 2 zeta l + (1 - q) = 0, the
/// characteristic polynomial of J + q H for spring coupling.
double smooth_oracle(double zeta, std::complex<double> q) {
    const std::complex<double> disc = std::sqrt(zeta * zeta - (1.0 - q));
    return std::max((-zeta + disc).real(), (-zeta - disc).real());
}

TLESettings quick(std::size_t periods = 60) {
    TLESettings s;
    s.transient_periods = 50;
    s.max_periods = periods;
    s.sample_window = std::min<std::size_t>(20, periods);
    return s;
}

Eigen::Matrix2d jacobian_generator() {
    Eigen::Matrix2d j;
    j << 0.0, 1.0, -1.0, -0.1;
    return j;
}

}  // namespace

TEST(CoupledStep, ZeroCouplingReturnsSingleJacobian) {
    const Eigen::Matrix2d phi = (jacobian_generator() * 1e-3).exp();
    const auto out = coupled_step_propagator(phi, spring_coupling(), {0.0, 0.0}, 1e-3);
    EXPECT_LT((out.matrix.real() - phi).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_EQ(out.matrix.imag().norm(), 0.0);
}

TEST(CoupledStep, MatchesSummedGenerator) {
    const double h = 1e-3;
    const Eigen::Matrix2d j = jacobian_generator();
    const Eigen::Matrix2d phi = (j * h).exp();
    const auto out = coupled_step_propagator(phi, spring_coupling(), {-2.0, 0.0}, h);
    const Eigen::Matrix2d expected = ((j - 2.0 * spring_coupling()) * h).exp();
    EXPECT_LT((out.matrix.real() - expected).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(out.discarded_imag, 1e-12);
}

TEST(CoupledStep, ZeroCouplingMatrixReturnsSingleJacobian) {
    Eigen::Matrix2d phi;
    phi << -1.0, 0.002, 0.3, -0.98;
    for (const MSFQuery q : {MSFQuery{0.7, 0.0}, MSFQuery{-1.5, 2.0}}) {
        const auto out = coupled_step_propagator(phi, Eigen::Matrix2d::Zero(), q, 1e-3);
        EXPECT_LT((out.matrix - phi.cast<cplx>()).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(CoupledStep, ComplexParameterKeepsImaginaryPart) {
    const double h = 1e-3;
    const Eigen::Matrix2d j = jacobian_generator();
    const auto out = coupled_step_propagator((j * h).exp(), spring_coupling(), {0.0, 1.0}, h);
    const Eigen::Matrix2cd expected =
        ((j.cast<cplx>() + cplx(0.0, 1.0) * spring_coupling().cast<cplx>()) * cplx(h)).exp();
    EXPECT_LT((out.matrix - expected).cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_GT(out.matrix.imag().norm(), 1e-6);
    EXPECT_EQ(out.discarded_imag, 0.0);
}

TEST(CoupledStep, Errors) {
    Eigen::Matrix2d singular;
    singular << 1.0, 2.0, 2.0, 4.0;
    try {
        (void)coupled_step_propagator(singular, spring_coupling(), {0.0, 0.0}, 1e-3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonInvertible);
    }
    EXPECT_THROW(coupled_step_propagator(Eigen::Matrix2d::Identity(), spring_coupling(), {0.0, 0.0}, 0.0), Error);
}

TEST(ComputeTle, SmoothLimitMatchesEigenvalues) {
    const auto p = no_wall();
    const OscState base{0.0, 0.0, 0.0};
    for (double alpha : {-2.0, -1.0, 0.0, 1.0, 2.0}) {
        const auto r = compute_tle(p, spring_coupling(), {alpha, 0.0}, TLESettings{}, base);
        EXPECT_NEAR(r.lambda, smooth_oracle(p.zeta, alpha), 1e-3) << "alpha=" << alpha;
        EXPECT_LT(r.max_imag_free, 1e-6);
        EXPECT_EQ(r.max_imag_event, 0.0);
    }
    EXPECT_NEAR(smooth_oracle(0.05, 2.0), 0.95125, 1e-5);
}

TEST(ComputeTle, SmoothLimitComplexParameter) {
    const auto p = no_wall();
    for (const cplx q : {cplx(0.0, 1.0), cplx(-1.0, 0.5)}) {
        const auto r = compute_tle(p, spring_coupling(), {q.real(), q.imag()}, TLESettings{}, OscState{});
        EXPECT_NEAR(r.lambda, smooth_oracle(p.zeta, q), 1e-3) << q;
    }
}

TEST(ComputeTle, SmoothLimitConvergesWithSettledBase) {
    const auto r = compute_tle(no_wall(), spring_coupling(), {0.0, 0.0}, TLESettings{});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.lambda, -0.05, 1e-3);
    EXPECT_LT(r.final_std, 1e-5);
    EXPECT_EQ(r.transient_periods, 500u);
}

TEST(ComputeTle, StepSizeRobustness) {
    const auto p = no_wall();
    for (double alpha : {-1.0, 1.0}) {
        TLESettings coarse;
        TLESettings fine;
        fine.scan_step = coarse.scan_step / 2.0;
        const auto a = compute_tle(p, spring_coupling(), {alpha, 0.0}, coarse, OscState{});
        const auto b = compute_tle(p, spring_coupling(), {alpha, 0.0}, fine, OscState{});
        EXPECT_LT(std::abs(a.lambda - b.lambda), 5e-4) << "alpha=" << alpha;
    }
}

TEST(ComputeTle, ConvergenceMetadata) {
    const auto p = presets::elastic();
    const auto settings = quick(40);
    const auto r = compute_tle(p, spring_coupling(), {-0.6, 0.0}, settings);
    EXPECT_EQ(r.samples.size(), r.periods_used);
    EXPECT_LE(r.periods_used, settings.max_periods);
    EXPECT_EQ(r.lambda, r.samples.back());
    if (r.converged) {
        EXPECT_LT(r.final_std, settings.std_tolerance);
    } else {
        EXPECT_EQ(r.periods_used, settings.max_periods);
    }

    TLESettings tight = quick(30);
    tight.std_tolerance = 1e-300;
    const auto never = compute_tle(p, spring_coupling(), {0.0, 0.0}, tight);
    EXPECT_FALSE(never.converged);
    EXPECT_EQ(never.periods_used, 30u);
    EXPECT_TRUE(std::isfinite(never.final_std));
}

TEST(ComputeTle, ImaginaryPartIsReportedOnImpactSteps) {
    const auto r = compute_tle(presets::elastic(), spring_coupling(), {-0.4, 0.0}, quick(30));
    EXPECT_LT(r.max_imag_free, 1e-6);
    EXPECT_TRUE(std::isfinite(r.max_imag_event));
    for (const auto& w : r.warnings)
        if (w.kind == WarningKind::ImaginaryDiscarded) {
            EXPECT_GT(w.magnitude, 1e-9);
            EXPECT_LE(w.magnitude, r.max_imag_event);
        }
}

TEST(ComputeTle, RejectsInvalidSettings) {
    TLESettings s;
    s.sample_window = s.max_periods + 1;
    EXPECT_THROW(compute_tle(no_wall(), spring_coupling(), {}, s, OscState{}), Error);
    s = TLESettings{};
    s.std_tolerance = 0.0;
    EXPECT_THROW(compute_tle(no_wall(), spring_coupling(), {}, s, OscState{}), Error);
}

TEST(ReferenceTape, EventJacobiansHaveSaltationDeterminant) {
    for (const auto& p : {presets::elastic(), presets::inelastic()}) {
        const TLESettings s = quick();
        ReferenceTape tape(p, settle(p, 50), s);
        tape.extend_to(steps_for_periods(p, s.scan_step, 20));
        ASSERT_FALSE(tape.events().empty());
        EXPECT_GE(tape.steps(), steps_for_periods(p, s.scan_step, 20));
        for (const auto& ev : tape.events()) {
            if (!ev.consistent || ev.impacts != 1) continue;
            EXPECT_NEAR(ev.phi.determinant(), p.R * p.R, 2e-3 * p.R * p.R) << "tau_c=" << ev.tau_c;
        }
        const Eigen::Matrix2d free = (segment_generator(p) * s.scan_step).exp();
        EXPECT_LT((tape.free_phi() - free).cwiseAbs().maxCoeff(), 1e-15);
    }
}

TEST(MarchTle, ScalingInitialPerturbationLeavesLambdaUnchanged) {
    const auto p = presets::elastic();
    const TLESettings s = quick(30);
    ReferenceTape tape(p, settle(p, 50), s);
    auto ensure = [&tape](std::size_t k) { tape.extend_to(k); };
    const auto unit = march_tle(tape, spring_coupling(), {-0.3, 0.0}, s, default_perturbation(), ensure);
    for (double scale : {1e-6, 3.0, 1e8}) {
        const auto scaled =
            march_tle(tape, spring_coupling(), {-0.3, 0.0}, s, default_perturbation() * cplx(scale), ensure);
        EXPECT_NEAR(scaled.lambda, unit.lambda, 1e-12) << scale;
    }
    EXPECT_THROW(march_tle(tape, spring_coupling(), {}, s, ComplexVector<2>::Zero(), ensure), Error);
}

TEST(MsfSweep, NoWallGridIsFlatForNegativeAlpha) {
    const auto points = msf_sweep(no_wall(), spring_coupling(), {0.0, -0.5, -1.0}, {0.0}, TLESettings{}, 0, OscState{});
    ASSERT_EQ(points.size(), 3u);
    for (const auto& pt : points) {
        ASSERT_TRUE(pt.result) << pt.error;
        EXPECT_NEAR(pt.result->lambda, -0.05, 1e-3) << pt.query.alpha;
        EXPECT_EQ(pt.query.beta, 0.0);
    }
    EXPECT_EQ(points[1].query.alpha, -0.5);
}

TEST(MsfSweep, SinglePoint) {
    const auto points = msf_sweep(no_wall(), spring_coupling(), {0.0}, {0.0}, TLESettings{}, 1, OscState{});
    ASSERT_EQ(points.size(), 1u);
    ASSERT_TRUE(points[0].result);
    EXPECT_NEAR(points[0].result->lambda, -0.05, 1e-3);
}

TEST(MsfSweep, GridOrderAlphaOuterBetaInner) {
    const auto points =
        msf_sweep(no_wall(), spring_coupling(), {-1.0, 0.0}, {0.0, 0.5, 1.0}, quick(20), 0, OscState{});
    ASSERT_EQ(points.size(), 6u);
    EXPECT_EQ(points[0].query.alpha, -1.0);
    EXPECT_EQ(points[2].query.beta, 1.0);
    EXPECT_EQ(points[3].query.alpha, 0.0);
    EXPECT_EQ(points[3].query.beta, 0.0);
}

TEST(MsfSweep, EmptyGridIsAnError) {
    EXPECT_THROW(msf_sweep(no_wall(), spring_coupling(), {}, {0.0}, TLESettings{}), Error);
    EXPECT_THROW(msf_sweep(no_wall(), spring_coupling(), {0.0}, {}, TLESettings{}), Error);
}

TEST(MsfSweep, DeterministicAcrossWorkerCounts) {
    const auto p = presets::elastic();
    const std::vector<double> alphas{0.0, -0.4, -0.8, -1.2, -1.6};
    const auto serial = msf_sweep(p, spring_coupling(), alphas, {0.0}, quick(25), 1);
    const auto parallel = msf_sweep(p, spring_coupling(), alphas, {0.0}, quick(25), 4);
    ASSERT_EQ(serial.size(), parallel.size());
    for (std::size_t i = 0; i < serial.size(); ++i) {
        ASSERT_TRUE(serial[i].result && parallel[i].result);
        EXPECT_EQ(serial[i].result->lambda, parallel[i].result->lambda);
        EXPECT_EQ(serial[i].result->samples, parallel[i].result->samples);
    }
}

TEST(MsfSweep, SharedTapeMatchesIndependentRuns) {
    const auto p = presets::inelastic();
    const auto settings = quick(25);
    const OscState base = settle(p, settings.transient_periods);
    const auto grid = msf_sweep(p, spring_coupling(), {-0.2, -1.0}, {0.0}, settings, 0, base);
    for (const auto& pt : grid) {
        ASSERT_TRUE(pt.result);
        const auto alone = compute_tle(p, spring_coupling(), pt.query, settings, base);
        EXPECT_EQ(pt.result->lambda, alone.lambda);
    }
}
