#pragma once

// Networks of diffusively coupled impact oscillators:
//
//   X_i' = F(X_i) + sigma * sum_j G_ij H X_j,   rows of G sum to zero,
//
// their coupling spectra, synchronization verdicts from per-mode TLEs, and
// direct simulation of the coupled network (the two-oscillator probe and its
// N-node generalization).

#include <msflab/error.hpp>
#include <msflab/matrix_functions.hpp>
#include <msflab/msf_engine.hpp>
#include <msflab/oscillator.hpp>
#include <msflab/parallel.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <limits>
#include <string_view>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace msflab {

struct CouplingGraph {
    Eigen::MatrixXd G;

    [[nodiscard]] std::size_t n_nodes() const { return static_cast<std::size_t>(G.rows()); }
    /// Exact symmetry; the network simulator relies on it for bitwise
    /// invariance of the synchronous manifold.
    [[nodiscard]] bool symmetric() const { return G == G.transpose(); }
};

namespace graph_limits {
inline constexpr double kRowSumTolerance = 1e-12;
}

inline void validate(const CouplingGraph& g) {
    if (g.G.rows() == 0 || g.G.rows() != g.G.cols())
        throw Error(ErrorCode::InvalidGraph, "coupling matrix must be square and non-empty");
    if (!detail::all_finite(g.G)) throw Error(ErrorCode::InvalidGraph, "coupling matrix has non-finite entries");
    for (Eigen::Index i = 0; i < g.G.rows(); ++i) {
        const double sum = g.G.row(i).sum();
        if (std::abs(sum) > graph_limits::kRowSumTolerance) {
            std::ostringstream msg;
            msg << "row " << i << " sums to " << sum << ", diffusive coupling needs zero row sums";
            throw Error(ErrorCode::InvalidGraph, msg.str());
        }
    }
}

inline CouplingGraph two_node_graph() {
    CouplingGraph g{Eigen::MatrixXd(2, 2)};
    g.G << -1.0, 1.0, 1.0, -1.0;
    return g;
}

/// Off-diagonal 1, diagonal -(n-1).
inline CouplingGraph all_to_all_graph(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    CouplingGraph g{Eigen::MatrixXd::Ones(m, m)};
    g.G.diagonal().setConstant(-static_cast<double>(n - 1));
    return g;
}

/// Each node coupled to its two ring neighbours.
inline CouplingGraph ring_graph(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    CouplingGraph g{Eigen::MatrixXd::Zero(m, m)};
    for (Eigen::Index i = 0; i < m; ++i) {
        g.G(i, (i + 1) % m) += 1.0;
        g.G(i, (i + m - 1) % m) += 1.0;
        g.G(i, i) -= 2.0;
    }
    return g;
}

/// Whitespace-separated rows, one matrix row per non-empty line. '#' starts a
/// comment. Row sums are validated on load.
inline CouplingGraph parse_graph(std::istream& in) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::vector<double> row;
        std::string token;
        while (fields >> token) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(token, &used));
                if (used != token.size()) throw std::invalid_argument(token);
            } catch (const std::exception&) {
                throw Error(ErrorCode::InvalidGraph,
                            "line " + std::to_string(line_no) + ": not a number: '" + token + "'");
            }
        }
        if (!row.empty()) rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(ErrorCode::InvalidGraph, "graph file has no rows");
    const auto n = static_cast<Eigen::Index>(rows.size());
    CouplingGraph g{Eigen::MatrixXd(n, n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        if (static_cast<Eigen::Index>(rows[static_cast<std::size_t>(i)].size()) != n)
            throw Error(ErrorCode::InvalidGraph, "graph matrix is not square");
        for (Eigen::Index j = 0; j < n; ++j) g.G(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    validate(g);
    return g;
}

inline CouplingGraph load_graph(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::InvalidGraph, "cannot open graph file '" + path + "'");
    return parse_graph(in);
}

/// Eigenvalues of G with gamma_0 (the one nearest zero) first and the rest in
/// descending real part. Symmetric graphs yield exactly real eigenvalues.
inline std::vector<cplx> graph_spectrum(const CouplingGraph& g) {
    validate(g);
    std::vector<cplx> values;
    if (g.symmetric()) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.G, Eigen::EigenvaluesOnly);
        for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) values.emplace_back(solver.eigenvalues()(i), 0.0);
    } else {
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(g.G.cast<cplx>(), false);
        for (Eigen::Index i = 0; i < solver.eigenvalues().size(); ++i) values.push_back(solver.eigenvalues()(i));
    }
    const auto zero = std::min_element(values.begin(), values.end(),
                                       [](cplx a, cplx b) { return std::abs(a) < std::abs(b); });
    std::iter_swap(values.begin(), zero);
    std::sort(values.begin() + 1, values.end(), [](cplx a, cplx b) {
        if (a.real() != b.real()) return a.real() > b.real();
        return a.imag() > b.imag();
    });
    return values;
}

struct ModeSpectrum {
    std::vector<cplx> eigenvalues;
    /// One entry per eigenvalue; index 0 is the synchronous mode.
    std::vector<std::optional<TLEResult>> modes;
};

enum class SyncVerdict { Stable, Unstable, Marginal };

[[nodiscard]] constexpr std::string_view to_string(SyncVerdict v) noexcept {
    switch (v) {
        case SyncVerdict::Stable: return "stable";
        case SyncVerdict::Unstable: return "unstable";
        case SyncVerdict::Marginal: return "marginal";
    }
    return "unknown";
}

inline constexpr double kDefaultVerdictMargin = 1e-3;

inline SyncVerdict sync_verdict(std::span<const double> transverse, double margin = kDefaultVerdictMargin) {
    if (transverse.empty()) throw Error(ErrorCode::Incomplete, "no transverse modes");
    bool all_negative = true;
    for (double lambda : transverse) {
        if (lambda > margin) return SyncVerdict::Unstable;
        all_negative = all_negative && lambda < -margin;
    }
    return all_negative ? SyncVerdict::Stable : SyncVerdict::Marginal;
}

inline SyncVerdict sync_verdict(const ModeSpectrum& spectrum, double margin = kDefaultVerdictMargin) {
    if (spectrum.modes.size() != spectrum.eigenvalues.size() || spectrum.eigenvalues.size() < 2)
        throw Error(ErrorCode::Incomplete, "mode results missing");
    std::vector<double> transverse;
    for (std::size_t k = 1; k < spectrum.modes.size(); ++k) {
        if (!spectrum.modes[k]) throw Error(ErrorCode::Incomplete, "TLE missing for mode " + std::to_string(k));
        transverse.push_back(spectrum.modes[k]->lambda);
    }
    return sync_verdict(transverse, margin);
}

/// TLE of every mode at alpha + i beta = sigma * gamma_k. Modes with equal
/// eigenvalues share one computation. Failed modes are left empty and their
/// errors returned through `errors` when given.
inline ModeSpectrum network_modes(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix,
                                  const CouplingGraph& g, double sigma, const TLESettings& settings,
                                  std::size_t jobs = 0, const std::optional<OscState>& base = std::nullopt,
                                  std::vector<std::string>* errors = nullptr) {
    ModeSpectrum out;
    out.eigenvalues = graph_spectrum(g);
    std::vector<MSFQuery> queries;
    std::vector<std::size_t> slot(out.eigenvalues.size());
    for (std::size_t k = 0; k < out.eigenvalues.size(); ++k) {
        const cplx value = k == 0 ? cplx{} : sigma * out.eigenvalues[k];
        const auto same = std::find_if(queries.begin(), queries.end(), [&](const MSFQuery& q) {
            return std::abs(q.value() - value) <= 1e-12 * std::max(1.0, std::abs(value));
        });
        if (same == queries.end()) {
            slot[k] = queries.size();
            queries.push_back({value.real(), value.imag()});
        } else {
            slot[k] = static_cast<std::size_t>(same - queries.begin());
        }
    }
    const auto points = evaluate_queries(p, h_matrix, queries, settings, jobs, base);
    out.modes.resize(out.eigenvalues.size());
    if (errors) errors->assign(out.eigenvalues.size(), {});
    for (std::size_t k = 0; k < out.eigenvalues.size(); ++k) {
        out.modes[k] = points[slot[k]].result;
        if (errors) (*errors)[k] = points[slot[k]].error;
    }
    return out;
}

struct ProbeSettings {
    double sigma = 0.0;
    double perturbation_magnitude = 1e-3;
    std::uint64_t rng_seed = 1;
    std::size_t max_periods = 2000;
    double sync_threshold = 1e-10;
    std::size_t record_window = 100;
    std::size_t transient_periods = 500;
    double scan_step = 1e-3;
};

inline void validate(const ProbeSettings& s) {
    auto fail = [](const char* what) { throw Error(ErrorCode::InvalidParameter, what); };
    if (!(s.perturbation_magnitude >= 0.0)) fail("perturbation_magnitude must be non-negative");
    if (!(s.sync_threshold > 0.0)) fail("sync_threshold must be positive");
    if (s.max_periods == 0) fail("max_periods must be positive");
    if (s.record_window == 0 || s.record_window > s.max_periods) fail("record_window must lie in [1, max_periods]");
    if (!(s.scan_step > 0.0)) fail("scan_step must be positive");
    if (!std::isfinite(s.sigma)) fail("sigma must be finite");
}

struct ProbeResult {
    bool synchronized = false;
    /// Time since the start of the run at which the sustained synchronous
    /// interval began.
    std::optional<double> sync_time;
    /// Local maxima of |x(node a) - x(node b)| in the recorded window.
    std::vector<double> local_maxima;
    /// max_i ||X_i - X_0|| at the end of the run.
    double final_spread = 0.0;
    std::size_t impacts = 0;
    double duration = 0.0;
};

/// Exact propagator of the coupled network between impacts, in homogeneous
/// coordinates Y_i = X_i - X_p(tau) (the forced response is the same for all
/// nodes because G has zero row sums).
///
/// For a symmetric G = U diag(gamma) U^T the blocks of exp(M t) are
///   E_ij(t) = sum_k U_ik U_jk exp((J + sigma gamma_k H) t)
/// and since sum_j E_ij = exp(J t) a node update is
///   Y_i <- exp(J t) Y_i + sum_{j != i} E_ij (Y_j - Y_i).
/// Identical node states therefore stay bitwise identical.
class NetworkPropagator {
public:
    NetworkPropagator(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix, const CouplingGraph& g,
                      double sigma)
        : n_(g.n_nodes()), jacobian_(segment_generator(p)) {
        validate(g);
        if (!g.symmetric()) throw Error(ErrorCode::InvalidGraph, "network simulation needs a symmetric graph");
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(g.G);
        vectors_ = solver.eigenvectors();
        for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k)
            modes_.push_back(RealMatrix<2>(jacobian_ + sigma * solver.eigenvalues()(k) * h_matrix));
    }

    struct Blocks {
        RealMatrix<2> self;
        /// Upper triangle (i < j) in row-major order; E_ji == E_ij.
        std::vector<RealMatrix<2>> pair;
    };

    [[nodiscard]] Blocks blocks(double t) const {
        Blocks b;
        b.self = mat_exp<2>(RealMatrix<2>(jacobian_ * t));
        std::vector<RealMatrix<2>> mode_exp;
        mode_exp.reserve(modes_.size());
        for (const auto& m : modes_) mode_exp.push_back(mat_exp<2>(RealMatrix<2>(m * t)));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) {
                RealMatrix<2> e = RealMatrix<2>::Zero();
                for (std::size_t k = 0; k < modes_.size(); ++k) {
                    const double w = vectors_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) *
                                     vectors_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k));
                    e += w * mode_exp[k];
                }
                b.pair.push_back(e);
            }
        return b;
    }

    void apply(const Blocks& b, const std::vector<Eigen::Vector2d>& y, std::vector<Eigen::Vector2d>& out) const {
        out.resize(n_);
        for (std::size_t i = 0; i < n_; ++i) {
            Eigen::Vector2d acc = b.self * y[i];
            for (std::size_t j = 0; j < n_; ++j) {
                if (j == i) continue;
                acc += b.pair[pair_index(std::min(i, j), std::max(i, j))] * (y[j] - y[i]);
            }
            out[i] = acc;
        }
    }

    [[nodiscard]] std::size_t nodes() const { return n_; }

private:
    [[nodiscard]] std::size_t pair_index(std::size_t i, std::size_t j) const {
        return i * n_ - i * (i + 1) / 2 + (j - i - 1);
    }

    std::size_t n_;
    RealMatrix<2> jacobian_;
    Eigen::MatrixXd vectors_;
    std::vector<RealMatrix<2>> modes_;
};

struct NetworkRunSettings {
    double sigma = 0.0;
    std::size_t max_periods = 2000;
    double sync_threshold = 1e-10;
    std::size_t record_window = 100;
    double scan_step = 1e-3;
    /// Nodes whose position difference feeds the local-maxima record.
    std::size_t observe_a = 0;
    std::size_t observe_b = 1;
};

/// Direct simulation of the coupled network from explicit initial node states
/// (all at the same tau). Runs until the node states agree to within
/// sync_threshold for one full forcing period, or max_periods elapse.
inline ProbeResult simulate_network(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix,
                                    const CouplingGraph& g, const std::vector<OscState>& initial,
                                    const NetworkRunSettings& settings) {
    validate(p);
    const NetworkPropagator prop(p, h_matrix, g, settings.sigma);
    const std::size_t n = prop.nodes();
    if (initial.size() != n) throw Error(ErrorCode::InvalidParameter, "one initial state per node required");
    if (settings.observe_a >= n || settings.observe_b >= n)
        throw Error(ErrorCode::InvalidParameter, "observed nodes out of range");

    const SteadyState ss = steady_state_coefficients(p);
    const double eta = p.eta;
    /// Forced response at forcing phase `phase`. The phase is carried in
    /// [0, 2 pi) and advanced by local time, because at large tau the spacing
    /// of doubles exceeds the bisection tolerance and eta * tau would shift the
    /// particular solution against the homogeneous part.
    auto forced = [&](double phase) {
        const double c = std::cos(phase);
        const double s = std::sin(phase);
        return Eigen::Vector2d(ss.a * c + ss.b * s, eta * (ss.b * c - ss.a * s));
    };
    constexpr double two_pi = 2.0 * std::numbers::pi;
    auto wrap = [](double phase) { return phase >= two_pi ? phase - two_pi : phase; };

    const double h = settings.scan_step;
    const double period = p.forcing_period();
    const double tau0 = initial.front().tau;
    const double tau_end = tau0 + static_cast<double>(settings.max_periods) * period;
    const double window_start =
        tau0 + static_cast<double>(settings.max_periods - settings.record_window) * period;
    const NetworkPropagator::Blocks step_blocks = prop.blocks(h);

    std::vector<Eigen::Vector2d> y(n);
    double phase = std::fmod(eta * tau0, two_pi);
    if (phase < 0.0) phase += two_pi;
    {
        const Eigen::Vector2d xp = forced(phase);
        for (std::size_t i = 0; i < n; ++i) y[i] = Eigen::Vector2d(initial[i].x, initial[i].v) - xp;
    }
    double tau = tau0;
    std::vector<Eigen::Vector2d> y_next(n);
    std::vector<Eigen::Vector2d> x(n);

    ProbeResult out;
    std::vector<double> peaks_window;
    std::vector<double> peaks_since_sync;
    bool below = false;
    double below_since = 0.0;
    double d_prev2 = std::nan("");
    double d_prev1 = std::nan("");
    double tau_prev1 = tau0;
    std::vector<double> recent_impacts;
    std::size_t recent_head = 0;

    auto observe = [&](double at, const std::vector<Eigen::Vector2d>& states) {
        double spread = 0.0;
        for (std::size_t i = 1; i < n; ++i) spread = std::max(spread, (states[i] - states[0]).norm());
        const double d = std::abs(states[settings.observe_a](0) - states[settings.observe_b](0));
        if (d_prev1 > d_prev2 && d_prev1 >= d) {
            if (tau_prev1 >= window_start) peaks_window.push_back(d_prev1);
            if (below && tau_prev1 >= below_since) peaks_since_sync.push_back(d_prev1);
        }
        d_prev2 = d_prev1;
        d_prev1 = d;
        tau_prev1 = at;
        out.final_spread = spread;
        if (spread < settings.sync_threshold) {
            if (!below) {
                below = true;
                below_since = at;
                peaks_since_sync.clear();
            } else if (at - below_since >= period) {
                return true;
            }
        } else {
            below = false;
        }
        return false;
    };

    auto to_states = [&](const std::vector<Eigen::Vector2d>& hom, double at_phase,
                         std::vector<Eigen::Vector2d>& states) {
        const Eigen::Vector2d xp = forced(at_phase);
        states.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            states[i] = hom[i] + xp;
            if (!std::isfinite(states[i](0)) || !std::isfinite(states[i](1)))
                throw Error(ErrorCode::Propagation, "network state became non-finite");
        }
    };

    to_states(y, phase, x);
    bool synced = observe(tau, x);
    std::vector<bool> armed(n);
    while (!synced && tau < tau_end) {
        // A node only impacts when approaching from the admissible side; nodes
        // within the wall tolerance stay armed.
        for (std::size_t i = 0; i < n; ++i) armed[i] = p.wall_enabled && !(x[i](0) - p.x_w > oscillator_limits::kWallTolerance);
        prop.apply(step_blocks, y, y_next);
        const double tau_next = tau + h;
        const double phase_next = phase + eta * h;
        to_states(y_next, phase_next, x);

        bool crossed = false;
        for (std::size_t i = 0; i < n && !crossed; ++i) crossed = armed[i] && x[i](0) > p.x_w;
        if (!crossed) {
            std::swap(y, y_next);
            tau = tau_next;
            phase = wrap(phase_next);
            synced = observe(tau, x);
            continue;
        }

        // Earliest crossing of any node inside (tau, tau + h].
        std::vector<Eigen::Vector2d> probe_y;
        std::vector<Eigen::Vector2d> probe_x;
        auto gap_at = [&](double t) {
            prop.apply(prop.blocks(t), y, probe_y);
            to_states(probe_y, phase + eta * t, probe_x);
            double g_max = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < n; ++i)
                if (armed[i]) g_max = std::max(g_max, probe_x[i](0) - p.x_w);
            return g_max;
        };
        double lo = 0.0;
        double hi = h;
        while (hi - lo > oscillator_limits::kBisectionTolerance) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            if (gap_at(mid) > 0.0)
                hi = mid;
            else
                lo = mid;
        }
        prop.apply(prop.blocks(hi), y, probe_y);
        to_states(probe_y, phase + eta * hi, probe_x);
        std::vector<bool> hits(n);
        for (std::size_t i = 0; i < n; ++i) hits[i] = armed[i] && probe_x[i](0) > p.x_w;

        if (lo > 0.0) {
            prop.apply(prop.blocks(lo), y, y_next);
        } else {
            y_next = y;
        }
        const double tau_c = tau + lo;
        const double phase_c = phase + eta * lo;
        to_states(y_next, phase_c, x);
        for (std::size_t i = 0; i < n; ++i) {
            if (!hits[i]) continue;
            const auto impact = apply_impact(p, OscState{x[i](0), x[i](1), tau_c});
            x[i](1) = impact.state.v;
            ++out.impacts;
            recent_impacts.push_back(tau_c);
        }
        while (recent_head < recent_impacts.size() && tau_c - recent_impacts[recent_head] > period) ++recent_head;
        if (recent_impacts.size() - recent_head > oscillator_limits::kChatterCap) {
            std::ostringstream msg;
            msg << "more than " << oscillator_limits::kChatterCap << " impacts within one forcing period at tau="
                << tau_c;
            throw Error(ErrorCode::Chatter, msg.str());
        }
        if (recent_head > 4096) {
            recent_impacts.erase(recent_impacts.begin(), recent_impacts.begin() + static_cast<std::ptrdiff_t>(recent_head));
            recent_head = 0;
        }
        const Eigen::Vector2d xp = forced(phase_c);
        for (std::size_t i = 0; i < n; ++i) y[i] = x[i] - xp;
        tau = tau_c;
        phase = wrap(phase_c);
        synced = observe(tau, x);
    }

    out.duration = tau - tau0;
    out.synchronized = synced;
    if (synced) {
        out.sync_time = below_since - tau0;
        out.local_maxima = std::move(peaks_since_sync);
    } else {
        out.local_maxima = std::move(peaks_window);
    }
    return out;
}

/// Initial node states: node 0 at `base`, every other node displaced by
/// `magnitude` along a uniformly drawn unit direction (drawn in node order).
inline std::vector<OscState> perturbed_nodes(const OscState& base, std::size_t n, double magnitude,
                                             std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
    std::vector<OscState> nodes(n, base);
    for (std::size_t i = 1; i < n; ++i) {
        const double theta = angle(rng);
        nodes[i].x += magnitude * std::cos(theta);
        nodes[i].v += magnitude * std::sin(theta);
    }
    return nodes;
}

inline NetworkRunSettings to_run_settings(const ProbeSettings& s) {
    NetworkRunSettings r;
    r.sigma = s.sigma;
    r.max_periods = s.max_periods;
    r.sync_threshold = s.sync_threshold;
    r.record_window = s.record_window;
    r.scan_step = s.scan_step;
    return r;
}

/// Direct simulation of `g` from a shared settled state with seeded
/// perturbations of all nodes but the first.
inline ProbeResult run_network_probe(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix,
                                     const CouplingGraph& g, const ProbeSettings& settings,
                                     const std::optional<OscState>& base = std::nullopt) {
    validate(p);
    validate(settings);
    const OscState start = base ? *base : settle(p, settings.transient_periods, settings.scan_step);
    const auto nodes = perturbed_nodes(start, g.n_nodes(), settings.perturbation_magnitude, settings.rng_seed);
    return simulate_network(p, h_matrix, g, nodes, to_run_settings(settings));
}

/// Two mutually coupled oscillators, G = [[-1, 1], [1, -1]].
inline ProbeResult run_probe(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix,
                             const ProbeSettings& settings, const std::optional<OscState>& base = std::nullopt) {
    return run_network_probe(p, h_matrix, two_node_graph(), settings, base);
}

/// Per-index seed, independent of scheduling.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::size_t index) {
    std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
    std::array<std::uint32_t, 2> words{};
    seq.generate(words.begin(), words.end());
    return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

struct BifurcationColumn {
    double sigma = 0.0;
    std::optional<ProbeResult> probe;
    /// Points plotted for this sigma: the local maxima, or a single 0 when the
    /// pair synchronized.
    std::vector<double> points;
    std::string error;
};

inline std::vector<BifurcationColumn> bifurcation_scan(const ImpactOscillatorParams& p, const CouplingMatrixH& h_matrix,
                                                       const std::vector<double>& sigmas, const ProbeSettings& settings,
                                                       std::size_t jobs = 0,
                                                       const std::optional<OscState>& base = std::nullopt) {
    if (sigmas.empty()) throw Error(ErrorCode::InvalidParameter, "bifurcation_scan: empty sigma grid");
    validate(p);
    validate(settings);
    std::vector<BifurcationColumn> out(sigmas.size());
    for (std::size_t i = 0; i < sigmas.size(); ++i) out[i].sigma = sigmas[i];
    OscState start;
    try {
        start = base ? *base : settle(p, settings.transient_periods, settings.scan_step);
    } catch (const Error& e) {
        for (auto& c : out) c.error = e.what();
        return out;
    }
    parallel_for(sigmas.size(), jobs, [&](std::size_t i) {
        ProbeSettings local = settings;
        local.sigma = sigmas[i];
        local.rng_seed = derive_seed(settings.rng_seed, i);
        try {
            out[i].probe = run_probe(p, h_matrix, local, start);
            out[i].points = out[i].probe->synchronized ? std::vector<double>{0.0} : out[i].probe->local_maxima;
        } catch (const Error& e) {
            out[i].error = e.what();
        }
    });
    return out;
}

}  // namespace msflab
