#include <msflab/network.hpp>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

using namespace msflab;

namespace {

ImpactOscillatorParams no_wall() { return {0.05, 0.712, 1.0, 2.0, 1.0, false}; }

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an error";
    return ErrorCode::Numerical;
}

void expect_spectrum(const CouplingGraph& g, const std::vector<double>& expected) {
    const auto values = graph_spectrum(g);
    ASSERT_EQ(values.size(), expected.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        EXPECT_NEAR(values[i].real(), expected[i], 1e-9) << i;
        EXPECT_LT(std::abs(values[i].imag()), 1e-9);
    }
}

}  // namespace

TEST(GraphSpectrum, TwoNode) { expect_spectrum(two_node_graph(), {0.0, -2.0}); }

TEST(GraphSpectrum, AllToAllThree) { expect_spectrum(all_to_all_graph(3), {0.0, -3.0, -3.0}); }

TEST(GraphSpectrum, RingFour) { expect_spectrum(ring_graph(4), {0.0, -2.0, -2.0, -4.0}); }

TEST(GraphSpectrum, ZeroModeFirstForRandomDiffusiveGraphs) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const Eigen::Index n = 2 + trial % 6;
        CouplingGraph g{Eigen::MatrixXd::Zero(n, n)};
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) g.G(i, j) = g.G(j, i) = u(rng);
        for (Eigen::Index i = 0; i < n; ++i) g.G(i, i) = -(g.G.row(i).sum());
        // Make row sums exactly zero in floating point.
        for (Eigen::Index i = 0; i < n; ++i) g.G(i, i) -= g.G.row(i).sum();
        const auto values = graph_spectrum(g);
        EXPECT_LT(std::abs(values.front()), 1e-9);
        for (const auto& v : values) EXPECT_LT(std::abs(v.imag()), 1e-9);
    }
}

TEST(GraphSpectrum, DirectedGraphCanBeComplex) {
    CouplingGraph g{Eigen::MatrixXd::Zero(3, 3)};
    g.G << -1.0, 1.0, 0.0, 0.0, -1.0, 1.0, 1.0, 0.0, -1.0;
    const auto values = graph_spectrum(g);
    EXPECT_LT(std::abs(values.front()), 1e-9);
    EXPECT_NEAR(std::abs(values[1].imag()), std::sqrt(3.0) / 2.0, 1e-9);
    EXPECT_NEAR(values[1].real(), -1.5, 1e-9);
}

TEST(Graph, RowSumViolation) {
    CouplingGraph g{Eigen::MatrixXd(2, 2)};
    g.G << -1.0, 1.0, 1.0, -0.9;
    EXPECT_EQ(code_of([&] { graph_spectrum(g); }), ErrorCode::InvalidGraph);
    EXPECT_EQ(code_of([&] { validate(CouplingGraph{Eigen::MatrixXd(2, 3)}); }), ErrorCode::InvalidGraph);
}

TEST(Graph, ParsesPlainTextMatrix) {
    std::istringstream in("# all-to-all\n-2 1 1\n 1 -2 1   # middle\n\n1 1 -2\n");
    const auto g = parse_graph(in);
    EXPECT_EQ(g.n_nodes(), 3u);
    EXPECT_TRUE(g.symmetric());
    EXPECT_EQ(g.G, all_to_all_graph(3).G);
}

TEST(Graph, ParseErrorsNameTheLine) {
    std::istringstream bad_token("-1 1\n1 x\n");
    try {
        (void)parse_graph(bad_token);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidGraph);
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    }
    std::istringstream ragged("-1 1\n1\n");
    EXPECT_EQ(code_of([&] { parse_graph(ragged); }), ErrorCode::InvalidGraph);
    std::istringstream empty("# nothing\n");
    EXPECT_EQ(code_of([&] { parse_graph(empty); }), ErrorCode::InvalidGraph);
    std::istringstream unbalanced("-1 1\n1 0\n");
    EXPECT_EQ(code_of([&] { parse_graph(unbalanced); }), ErrorCode::InvalidGraph);
    EXPECT_EQ(code_of([] { load_graph("/nonexistent/graph.txt"); }), ErrorCode::InvalidGraph);
}

TEST(SyncVerdict, Examples) {
    EXPECT_EQ(sync_verdict(std::vector<double>{-0.02, -0.05}), SyncVerdict::Stable);
    EXPECT_EQ(sync_verdict(std::vector<double>{0.01, -0.3}), SyncVerdict::Unstable);
    EXPECT_EQ(sync_verdict(std::vector<double>{-0.0004}), SyncVerdict::Marginal);
    EXPECT_EQ(std::string(to_string(SyncVerdict::Marginal)), "marginal");
}

TEST(SyncVerdict, MissingModesAreIncomplete) {
    EXPECT_EQ(code_of([] { sync_verdict(std::vector<double>{}); }), ErrorCode::Incomplete);
    ModeSpectrum s;
    s.eigenvalues = {0.0, -2.0};
    s.modes = {TLEResult{}, std::nullopt};
    EXPECT_EQ(code_of([&] { sync_verdict(s); }), ErrorCode::Incomplete);
    s.modes[1] = TLEResult{};
    s.modes[1]->lambda = -0.1;
    EXPECT_EQ(sync_verdict(s), SyncVerdict::Stable);
}

TEST(NetworkModes, SmoothRingSharesDegenerateModes) {
    TLESettings t;
    t.max_periods = 300;
    const auto spectrum = network_modes(no_wall(), spring_coupling(), ring_graph(4), 0.25, t, 0, OscState{});
    ASSERT_EQ(spectrum.modes.size(), 4u);
    for (const auto& m : spectrum.modes) {
        ASSERT_TRUE(m);
        // alpha = sigma gamma <= 0 keeps the discriminant negative: -zeta.
        EXPECT_NEAR(m->lambda, -0.05, 2e-3);
    }
    EXPECT_EQ(spectrum.modes[1]->lambda, spectrum.modes[2]->lambda);
    EXPECT_EQ(sync_verdict(spectrum), SyncVerdict::Stable);
}

TEST(NetworkPropagator, BlocksMatchFullExponential) {
    const auto p = no_wall();
    const auto g = all_to_all_graph(3);
    const double sigma = 0.3, t = 0.7;
    const NetworkPropagator prop(p, spring_coupling(), g, sigma);
    Eigen::MatrixXd big = Eigen::MatrixXd::Zero(6, 6);
    for (int i = 0; i < 3; ++i) {
        big.block<2, 2>(2 * i, 2 * i) = segment_generator(p);
        for (int j = 0; j < 3; ++j) big.block<2, 2>(2 * i, 2 * j) += sigma * g.G(i, j) * spring_coupling();
    }
    const Eigen::MatrixXd full = (big * t).exp();
    const std::vector<Eigen::Vector2d> y{{0.1, -0.2}, {0.5, 0.3}, {-0.4, 0.8}};
    std::vector<Eigen::Vector2d> out;
    prop.apply(prop.blocks(t), y, out);
    Eigen::VectorXd stacked(6);
    for (int i = 0; i < 3; ++i) stacked.segment<2>(2 * i) = y[static_cast<std::size_t>(i)];
    const Eigen::VectorXd expected = full * stacked;
    for (int i = 0; i < 3; ++i)
        EXPECT_LT((out[static_cast<std::size_t>(i)] - expected.segment<2>(2 * i)).norm(), 1e-12);
}

TEST(Probe, ZeroPerturbationStaysIdentical) {
    ProbeSettings s;
    s.sigma = 0.0;
    s.perturbation_magnitude = 0.0;
    s.max_periods = 200;
    s.transient_periods = 50;
    const auto p = presets::elastic();
    const auto probe = run_probe(p, spring_coupling(), s);
    EXPECT_TRUE(probe.synchronized);
    EXPECT_EQ(probe.final_spread, 0.0);
    EXPECT_EQ(probe.sync_time, 0.0);

    // Sync detection off, so the identical copies run the full length.
    NetworkRunSettings r = to_run_settings(s);
    r.sync_threshold = 0.0;
    const OscState base = settle(p, 50);
    const auto result = simulate_network(p, spring_coupling(), two_node_graph(), {base, base}, r);
    EXPECT_FALSE(result.synchronized);
    EXPECT_EQ(result.final_spread, 0.0);
    EXPECT_TRUE(result.local_maxima.empty());
    EXPECT_GT(result.impacts, 0u);
}

TEST(Probe, SyncManifoldIsInvariant) {
    const auto p = presets::inelastic();
    const OscState base = settle(p, 50);
    for (double sigma : {0.0, 0.2, 1.0}) {
        for (const auto& g : {two_node_graph(), all_to_all_graph(3), ring_graph(4)}) {
            NetworkRunSettings r;
            r.sigma = sigma;
            r.max_periods = 60;
            r.record_window = 60;
            r.sync_threshold = 0.0;
            const std::vector<OscState> nodes(g.n_nodes(), base);
            const auto result = simulate_network(p, spring_coupling(), g, nodes, r);
            EXPECT_LT(result.final_spread, 1e-12) << "sigma=" << sigma << " n=" << g.n_nodes();
            for (double m : result.local_maxima) EXPECT_LT(m, 1e-12);
        }
    }
}

TEST(Probe, SmoothDifferenceFollowsTransverseExponential) {
    // Without a wall the difference x_2 - x_1 obeys e' = (J - 2 sigma H) e.
    const auto p = no_wall();
    const double sigma = 0.3;
    const OscState a{0.2, -0.1, 3.0};
    const OscState b{0.2 + 1e-3, -0.1 - 2e-3, 3.0};
    NetworkRunSettings r;
    r.sigma = sigma;
    r.max_periods = 3;
    r.record_window = 3;
    r.sync_threshold = 0.0;
    const auto result = simulate_network(p, spring_coupling(), two_node_graph(), {a, b}, r);
    const Eigen::Matrix2d gen = segment_generator(p) - 2.0 * sigma * spring_coupling();
    const Eigen::Vector2d e = (gen * result.duration).exp() * Eigen::Vector2d(1e-3, -2e-3);
    EXPECT_NEAR(result.final_spread, e.norm(), 1e-12);
}

TEST(Probe, ElasticUncoupledDoesNotSynchronize) {
    ProbeSettings s;
    s.sigma = 0.0;
    s.rng_seed = 3;
    s.max_periods = 300;
    const auto r = run_probe(presets::elastic(), spring_coupling(), s);
    EXPECT_FALSE(r.synchronized);
    EXPECT_FALSE(r.sync_time);
    EXPECT_GT(r.final_spread, 1e-6);
    EXPECT_GT(r.local_maxima.size(), 10u);
}

TEST(Probe, ElasticSynchronizesWhereTransverseExponentIsNegative) {
    // alpha = -2 sigma = -0.6, where the elastic TLE is about -0.039.
    const auto p = presets::elastic();
    TLESettings t;
    const auto tle = compute_tle(p, spring_coupling(), {-0.6, 0.0}, t);
    ASSERT_LT(tle.lambda, -0.01);
    ProbeSettings s;
    s.sigma = 0.3;
    s.rng_seed = 4;
    const auto r = run_probe(p, spring_coupling(), s);
    EXPECT_TRUE(r.synchronized);
    ASSERT_TRUE(r.sync_time);
    EXPECT_LT(*r.sync_time, r.duration);
    for (double m : r.local_maxima) EXPECT_LT(m, s.sync_threshold);
    EXPECT_LT(r.final_spread, s.sync_threshold);
}

TEST(Probe, SwappingNodesGivesIdenticalMaxima) {
    const auto p = presets::elastic();
    const OscState base = settle(p, 100);
    const auto nodes = perturbed_nodes(base, 2, 1e-3, 9);
    NetworkRunSettings r;
    r.sigma = 0.15;
    r.max_periods = 200;
    const auto forward = simulate_network(p, spring_coupling(), two_node_graph(), nodes, r);
    const auto swapped = simulate_network(p, spring_coupling(), two_node_graph(), {nodes[1], nodes[0]}, r);
    EXPECT_EQ(forward.local_maxima, swapped.local_maxima);
    EXPECT_EQ(forward.synchronized, swapped.synchronized);
    EXPECT_EQ(forward.impacts, swapped.impacts);
}

TEST(Probe, SeedDeterminism) {
    ProbeSettings s;
    s.sigma = 0.1;
    s.rng_seed = 42;
    s.max_periods = 200;
    s.transient_periods = 100;
    const auto p = presets::inelastic();
    const auto a = run_probe(p, spring_coupling(), s);
    const auto b = run_probe(p, spring_coupling(), s);
    EXPECT_EQ(a.local_maxima, b.local_maxima);
    EXPECT_EQ(a.final_spread, b.final_spread);
    s.rng_seed = 43;
    const auto c = run_probe(p, spring_coupling(), s);
    EXPECT_NE(a.final_spread, c.final_spread);
}

TEST(Probe, PerturbationHasRequestedMagnitude) {
    const OscState base{0.5, -0.5, 10.0};
    const auto nodes = perturbed_nodes(base, 4, 1e-3, 17);
    EXPECT_EQ(nodes[0].x, base.x);
    EXPECT_EQ(nodes[0].v, base.v);
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        EXPECT_NEAR(std::hypot(nodes[i].x - base.x, nodes[i].v - base.v), 1e-3, 1e-15);
        EXPECT_EQ(nodes[i].tau, base.tau);
    }
    EXPECT_NE(nodes[1].x, nodes[2].x);
}

TEST(Probe, RejectsInvalidSettings) {
    ProbeSettings s;
    s.record_window = s.max_periods + 1;
    EXPECT_EQ(code_of([&] { run_probe(presets::elastic(), spring_coupling(), s); }), ErrorCode::InvalidParameter);
    s = ProbeSettings{};
    s.perturbation_magnitude = -1.0;
    EXPECT_EQ(code_of([&] { run_probe(presets::elastic(), spring_coupling(), s); }), ErrorCode::InvalidParameter);
}

TEST(Bifurcation, UncoupledColumnIsNonDegenerate) {
    ProbeSettings s;
    s.rng_seed = 7;
    s.max_periods = 300;
    const auto cols = bifurcation_scan(presets::elastic(), spring_coupling(), {0.0}, s);
    ASSERT_EQ(cols.size(), 1u);
    ASSERT_TRUE(cols[0].probe) << cols[0].error;
    EXPECT_FALSE(cols[0].probe->synchronized);
    const std::set<double> distinct(cols[0].points.begin(), cols[0].points.end());
    EXPECT_GT(distinct.size(), 20u);
}

TEST(Bifurcation, EverywhereStableCollapsesToZero) {
    ProbeSettings s;
    s.max_periods = 400;
    const auto cols = bifurcation_scan(no_wall(), spring_coupling(), {0.0, 0.25, 0.5, 1.0}, s);
    for (const auto& c : cols) {
        ASSERT_TRUE(c.probe) << c.error;
        EXPECT_TRUE(c.probe->synchronized) << c.sigma;
        EXPECT_EQ(c.points, std::vector<double>{0.0});
    }
}

TEST(Bifurcation, BitwiseReproducibleAcrossRunsAndWorkers) {
    ProbeSettings s;
    s.rng_seed = 5;
    s.max_periods = 150;
    s.transient_periods = 100;
    const std::vector<double> sigmas{0.0, 0.1, 0.2, 0.3};
    const auto p = presets::elastic();
    const auto a = bifurcation_scan(p, spring_coupling(), sigmas, s, 1);
    const auto b = bifurcation_scan(p, spring_coupling(), sigmas, s, 3);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].sigma, b[i].sigma);
        EXPECT_EQ(a[i].points, b[i].points);
        EXPECT_EQ(a[i].error, b[i].error);
    }
    EXPECT_NE(derive_seed(5, 0), derive_seed(5, 1));
    EXPECT_EQ(derive_seed(5, 2), derive_seed(5, 2));
}

TEST(Bifurcation, EmptyGridIsAnError) {
    EXPECT_EQ(code_of([] { bifurcation_scan(presets::elastic(), spring_coupling(), {}, ProbeSettings{}); }),
              ErrorCode::InvalidParameter);
}
