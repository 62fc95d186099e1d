#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "resint/model.hpp"

namespace resint {

enum class StarredPoint { Midpoint, LeftEndpoint };
enum class Predictor { ExplicitEuler };

/// Knobs for one-step maps and their implicit solves.
struct SolverConfig {
    double h = 1.0e-3;        ///< step size
    double tol = 1.0e-15;     ///< fixed-point tolerance, sup norm of the update
    int max_iter = 50;        ///< iteration cap
    StarredPoint starred = StarredPoint::Midpoint;  ///< damping evaluation point
    bool reservoir = true;    ///< track z (required by en-gr; attaches z to imr/sv/rk4-38)
    Predictor predictor = Predictor::ExplicitEuler;
    bool strict_compat = false;  ///< reject scheme/system pairings that are formally undefined

    void validate() const {
        if (!(h >= 0.0) || !std::isfinite(h))
            throw std::invalid_argument("SolverConfig: h must be finite and >= 0");
        if (!(tol > 0.0))
            throw std::invalid_argument("SolverConfig: tol must be > 0");
        if (max_iter < 1)
            throw std::invalid_argument("SolverConfig: max_iter must be >= 1");
    }
};

/// Outcome of a single step.  `residual` is the sup norm of the last
/// fixed-point update (zero for explicit schemes).  `converged` is false only
/// when the iteration cap was hit while the update was still above tolerance
/// and above the rounding floor; such steps are reported, never dropped.
struct StepResult {
    PhaseState next;
    int iterations = 0;
    double residual = 0.0;
    bool converged = true;
};

/// Thrown by a step when an iterate leaves the finite range.
class DivergenceError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Thrown by trajectory generation; carries the index of the failing step.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& msg, std::size_t step)
        : std::runtime_error(msg), step_index_(step) {}
    std::size_t step_index() const noexcept { return step_index_; }

private:
    std::size_t step_index_;
};

namespace detail {

inline std::pair<double, double> starred_point(StarredPoint strategy, const PhaseState& s,
                                               double x_new, double y_new) {
    if (strategy == StarredPoint::Midpoint)
        return {0.5 * (s.x + x_new), 0.5 * (s.y + y_new)};
    return {s.x, s.y};
}

inline std::pair<double, double> euler_predictor(const SystemModel& m, const PhaseState& s,
                                                 double h) {
    const auto g = m.grad_h(s.x, s.y);
    return {s.x + h * s.y, s.y + h * (-g[0] - m.damping(s.x, s.y))};
}

struct FixedPointOutcome {
    double x = 0.0;
    double y = 0.0;
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
};

// Fixed-point loop u <- G(u) seeded with (x0, y0).  Stops when the update
// drops below tol, or when it stops decreasing while already at the rounding
// floor of the iterate magnitude (tol may be unrepresentable there), or at
// max_iter.
template <class MapFn>
FixedPointOutcome solve_fixed_point(const MapFn& map, double x0, double y0,
                                    const SolverConfig& cfg) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double xp = x0;
    double yp = y0;
    double prev_delta = std::numeric_limits<double>::infinity();
    FixedPointOutcome out;
    for (int k = 1; k <= cfg.max_iter; ++k) {
        const auto [xn, yn] = map(xp, yp);
        if (!std::isfinite(xn) || !std::isfinite(yn))
            throw DivergenceError("fixed-point iterate is not finite");
        const double delta = std::max(std::abs(xn - xp), std::abs(yn - yp));
        xp = xn;
        yp = yn;
        out.iterations = k;
        out.residual = delta;
        if (delta <= cfg.tol) {
            out.converged = true;
            break;
        }
        const double floor_scale =
            16.0 * eps * std::max({1.0, std::abs(xn), std::abs(yn)});
        if (delta >= prev_delta && delta <= floor_scale) {
            out.converged = true;  // at the rounding floor; residual reports what was achieved
            break;
        }
        prev_delta = delta;
    }
    out.x = xp;
    out.y = yp;
    return out;
}

// Shared implicit solve of the discrete-gradient update used by both the
// reservoir (en-gr) and the standard (st-gr) schemes:
//
//     (x' - x)/h = dgrad_y(x', y, y')
//     (y' - y)/h = -dgrad_x(x, x', y) - D(x*, y*)
inline FixedPointOutcome solve_dgrad_step(const SystemModel& m, const PhaseState& s,
                                          const SolverConfig& cfg) {
    const auto map = [&](double xk, double yk) -> std::pair<double, double> {
        const auto [xs, ys] = starred_point(cfg.starred, s, xk, yk);
        const double gy = m.dgrad_y(xk, s.y, yk);
        const double gx = m.dgrad_x(s.x, xk, s.y);
        return {s.x + cfg.h * gy, s.y - cfg.h * (gx + m.damping(xs, ys))};
    };
    const auto [px, py] = euler_predictor(m, s, cfg.h);
    return solve_fixed_point(map, px, py, cfg);
}

}  // namespace detail

/// Reservoir-carrying discrete-gradient step.  Solves the implicit
/// discrete-gradient update for (x', y') and books the dissipated energy into
/// the reservoir,
///
///     z' = z + D(x*, y*) (x' - x),
///
/// which makes K = H + z conserved exactly (up to the solver residual):
/// the two discrete-gradient quotients telescope H(x', y') - H(x, y) to
/// -D(x*, y*)(x' - x), the negative of the z increment, for any starred point.
inline StepResult step_en_gr(const SystemModel& m, const PhaseState& s, const SolverConfig& cfg) {
    cfg.validate();
    if (!cfg.reservoir)
        throw std::invalid_argument("step_en_gr: requires cfg.reservoir = true");
    const auto fp = detail::solve_dgrad_step(m, s, cfg);
    const auto [xs, ys] = detail::starred_point(cfg.starred, s, fp.x, fp.y);
    StepResult r;
    r.next = PhaseState{s.t + cfg.h, fp.x, fp.y, s.z + m.damping(xs, ys) * (fp.x - s.x)};
    r.iterations = fp.iterations;
    r.residual = fp.residual;
    r.converged = fp.converged;
    return r;
}

/// Standard discrete-gradient step: identical (x, y) update to step_en_gr,
/// no reservoir (z is carried through unchanged and K is not tracked).
inline StepResult step_st_gr(const SystemModel& m, const PhaseState& s, const SolverConfig& cfg) {
    cfg.validate();
    if (cfg.strict_compat && m.kind == SystemKind::VanDerPol)
        throw std::invalid_argument(
            "step_st_gr: rejected in strict mode for the van der pol oscillator; its damping "
            "injects as well as removes energy, so the scheme has no conserved or monotone "
            "energy to preserve without a reservoir (use en-gr, or drop strict mode)");
    const auto fp = detail::solve_dgrad_step(m, s, cfg);
    StepResult r;
    r.next = PhaseState{s.t + cfg.h, fp.x, fp.y, s.z};
    r.iterations = fp.iterations;
    r.residual = fp.residual;
    r.converged = fp.converged;
    return r;
}

/// Implicit midpoint rule with the full right-hand side (force and damping)
/// evaluated at ((x + x')/2, (y + y')/2).
inline StepResult step_imr(const SystemModel& m, const PhaseState& s, const SolverConfig& cfg) {
    cfg.validate();
    const auto map = [&](double xk, double yk) -> std::pair<double, double> {
        const double xm = 0.5 * (s.x + xk);
        const double ym = 0.5 * (s.y + yk);
        const auto g = m.grad_h(xm, ym);
        return {s.x + cfg.h * ym, s.y - cfg.h * (g[0] + m.damping(xm, ym))};
    };
    const auto [px, py] = detail::euler_predictor(m, s, cfg.h);
    const auto fp = detail::solve_fixed_point(map, px, py, cfg);
    StepResult r;
    r.next = PhaseState{s.t + cfg.h, fp.x, fp.y, s.z};
    r.iterations = fp.iterations;
    r.residual = fp.residual;
    r.converged = fp.converged;
    return r;
}

/// Stoermer-Verlet in velocity form.  Both force evaluations see the
/// half-step velocity, which keeps the kick-drift-kick symmetric for
/// velocity-dependent damping; the first kick is then implicit in y_half and
/// is resolved by a scalar fixed-point iteration (one evaluation suffices
/// when D does not depend on y).
inline StepResult step_sv(const SystemModel& m, const PhaseState& s, const SolverConfig& cfg) {
    cfg.validate();
    constexpr double eps = std::numeric_limits<double>::epsilon();
    const double half = 0.5 * cfg.h;
    const double fx0 = m.grad_h(s.x, s.y)[0];

    double yh = s.y + half * (-fx0 - m.damping(s.x, s.y));
    double prev_delta = std::numeric_limits<double>::infinity();
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    for (int k = 1; k <= cfg.max_iter; ++k) {
        const double yn = s.y + half * (-fx0 - m.damping(s.x, yh));
        if (!std::isfinite(yn))
            throw DivergenceError("sv half-step iterate is not finite");
        const double delta = std::abs(yn - yh);
        yh = yn;
        iterations = k;
        residual = delta;
        if (delta <= cfg.tol) {
            converged = true;
            break;
        }
        if (delta >= prev_delta && delta <= 16.0 * eps * std::max(1.0, std::abs(yn))) {
            converged = true;
            break;
        }
        prev_delta = delta;
    }

    const double xn = s.x + cfg.h * yh;
    const double fx1 = m.grad_h(xn, yh)[0];
    const double yn = yh + half * (-fx1 - m.damping(xn, yh));
    if (!std::isfinite(xn) || !std::isfinite(yn))
        throw DivergenceError("sv step is not finite");
    StepResult r;
    r.next = PhaseState{s.t + cfg.h, xn, yn, s.z};
    r.iterations = iterations;
    r.residual = residual;
    r.converged = converged;
    return r;
}

/// Explicit four-stage Runge-Kutta step, 3/8 rule: nodes (0, 1/3, 2/3, 1),
/// weights (1/8, 3/8, 3/8, 1/8).
inline StepResult step_rk4_38(const SystemModel& m, const PhaseState& s, const SolverConfig& cfg) {
    cfg.validate();
    const auto f = [&](double x, double y) -> std::array<double, 2> {
        return {y, -m.grad_h(x, y)[0] - m.damping(x, y)};
    };
    const double h = cfg.h;
    const auto k1 = f(s.x, s.y);
    const auto k2 = f(s.x + h / 3.0 * k1[0], s.y + h / 3.0 * k1[1]);
    const auto k3 = f(s.x + h * (-k1[0] / 3.0 + k2[0]), s.y + h * (-k1[1] / 3.0 + k2[1]));
    const auto k4 = f(s.x + h * (k1[0] - k2[0] + k3[0]), s.y + h * (k1[1] - k2[1] + k3[1]));
    const double xn = s.x + h / 8.0 * (k1[0] + 3.0 * k2[0] + 3.0 * k3[0] + k4[0]);
    const double yn = s.y + h / 8.0 * (k1[1] + 3.0 * k2[1] + 3.0 * k3[1] + k4[1]);
    if (!std::isfinite(xn) || !std::isfinite(yn))
        throw DivergenceError("rk4-38 stage is not finite");
    StepResult r;
    r.next = PhaseState{s.t + cfg.h, xn, yn, s.z};
    return r;
}

/// Explicit Euler.  Also used as the predictor of the implicit schemes.
/// Updates the reservoir with the left-endpoint damping value.
inline StepResult step_euler(const SystemModel& m, const PhaseState& s, const SolverConfig& cfg) {
    cfg.validate();
    const auto g = m.grad_h(s.x, s.y);
    const double d = m.damping(s.x, s.y);
    const double xn = s.x + cfg.h * s.y;
    const double yn = s.y + cfg.h * (-g[0] - d);
    if (!std::isfinite(xn) || !std::isfinite(yn))
        throw DivergenceError("euler step is not finite");
    StepResult r;
    r.next = PhaseState{s.t + cfg.h, xn, yn, s.z + d * (xn - s.x)};
    return r;
}

using StepFn = std::function<StepResult(const SystemModel&, const PhaseState&, const SolverConfig&)>;

/// Wraps a stepper so that after it produces (x', y') the reservoir is
/// updated as z' = z + D(x*, y*)(x' - x), with the starred point taken from
/// the converged endpoint states.  Applying this to a stepper that already
/// books the same update (en-gr with a matching starred strategy) recomputes
/// the identical value, so the wrapper is idempotent there.
inline StepFn attach_reservoir(StepFn inner, StarredPoint starred) {
    return [inner = std::move(inner), starred](const SystemModel& m, const PhaseState& s,
                                               const SolverConfig& cfg) {
        StepResult r = inner(m, s, cfg);
        const auto [xs, ys] = detail::starred_point(starred, s, r.next.x, r.next.y);
        r.next.z = s.z + m.damping(xs, ys) * (r.next.x - s.x);
        return r;
    };
}

inline const std::vector<std::string>& integrator_names() {
    static const std::vector<std::string> names = {"en-gr", "st-gr", "imr",
                                                   "sv",    "euler", "rk4-38"};
    return names;
}

/// Resolves an integrator name to a step map, honouring cfg.reservoir:
/// imr/sv get a reservoir attached at cfg.starred, rk4-38 at the left
/// endpoint (a converged-midpoint starred point has no meaning for an
/// explicit fourth-order step).  en-gr requires the reservoir; st-gr never
/// carries one; euler books z natively.
inline StepFn make_stepper(std::string_view name, const SolverConfig& cfg) {
    if (name == "en-gr") {
        if (!cfg.reservoir)
            throw std::invalid_argument("en-gr requires reservoir = on");
        return step_en_gr;
    }
    if (name == "st-gr") return step_st_gr;
    if (name == "euler") return step_euler;
    if (name == "imr")
        return cfg.reservoir ? attach_reservoir(step_imr, cfg.starred) : StepFn(step_imr);
    if (name == "sv")
        return cfg.reservoir ? attach_reservoir(step_sv, cfg.starred) : StepFn(step_sv);
    if (name == "rk4-38")
        return cfg.reservoir ? attach_reservoir(step_rk4_38, StarredPoint::LeftEndpoint)
                             : StepFn(step_rk4_38);
    throw std::invalid_argument("unknown integrator: " + std::string(name));
}

struct IterationStats {
    int max = 0;
    double mean = 0.0;
};

struct TrajectoryMeta {
    std::string system;
    std::map<std::string, double> params;
    std::string integrator;
    SolverConfig config;
    double duration = 0.0;
    std::size_t stride = 1;  ///< > 1 for decimated reference runs
    IterationStats iterations;
};

/// Uniformly sampled trajectory, t_i = i * h exactly (times are computed as
/// products, never accumulated sums).
struct Trajectory {
    std::vector<PhaseState> samples;
    TrajectoryMeta meta;

    std::size_t steps() const { return samples.empty() ? 0 : samples.size() - 1; }
};

namespace detail {

inline std::size_t step_count(double T, double h) {
    if (!(T > 0.0))
        throw std::invalid_argument("integrate: duration T must be > 0");
    const double n = std::llround(T / h);
    if (n < 1.0)
        throw std::invalid_argument("integrate: T shorter than half a step");
    return static_cast<std::size_t>(n);
}

}  // namespace detail

/// Summary returned by the streaming integrator.
struct StreamSummary {
    TrajectoryMeta meta;
    PhaseState final_state;
    std::size_t sample_count = 0;
};

/// Core integration loop.  Feeds every sample (including the initial one) to
/// `sink` in grid order instead of materialising the trajectory, so memory
/// use is the caller's choice.  Fails with IntegrationError (carrying the
/// step index) on divergence or on an unconverged implicit solve.
template <class Sink>
StreamSummary integrate_stream(const SystemModel& model, std::string_view stepper_name,
                               double x0, double y0, const SolverConfig& cfg, double T,
                               Sink&& sink) {
    cfg.validate();
    if (!(cfg.h > 0.0))
        throw std::invalid_argument("integrate: h must be > 0");
    const std::size_t n_steps = detail::step_count(T, cfg.h);
    const StepFn step = make_stepper(stepper_name, cfg);

    StreamSummary summary;
    summary.meta.system = model.name;
    summary.meta.params = model.params;
    summary.meta.integrator = std::string(stepper_name);
    summary.meta.config = cfg;
    summary.meta.duration = T;

    PhaseState s{0.0, x0, y0, 0.0};
    sink(s);
    long long iter_sum = 0;
    for (std::size_t i = 0; i < n_steps; ++i) {
        StepResult r;
        try {
            r = step(model, s, cfg);
        } catch (const DivergenceError& e) {
            throw IntegrationError("step " + std::to_string(i) + ": " + e.what(), i);
        }
        if (!r.converged)
            throw IntegrationError("step " + std::to_string(i) +
                                       ": fixed-point solver stalled at residual " +
                                       std::to_string(r.residual),
                                   i);
        s = r.next;
        s.t = static_cast<double>(i + 1) * cfg.h;
        sink(s);
        iter_sum += r.iterations;
        summary.meta.iterations.max = std::max(summary.meta.iterations.max, r.iterations);
    }
    summary.meta.iterations.mean = static_cast<double>(iter_sum) / static_cast<double>(n_steps);
    summary.final_state = s;
    summary.sample_count = n_steps + 1;
    return summary;
}

/// Integrates N = round(T/h) steps from (x0, y0) at t = 0 with z = 0 and
/// returns the full trajectory.  Deterministic: identical inputs give
/// bit-identical samples.
inline Trajectory integrate(const SystemModel& model, std::string_view stepper_name, double x0,
                            double y0, const SolverConfig& cfg, double T) {
    Trajectory traj;
    if (cfg.h > 0.0 && T > 0.0) {
        const double approx = T / cfg.h;
        if (approx > 0.0 && approx < 5.0e8)
            traj.samples.reserve(static_cast<std::size_t>(approx) + 2);
    }
    auto summary = integrate_stream(model, stepper_name, x0, y0, cfg, T,
                                    [&](const PhaseState& s) { traj.samples.push_back(s); });
    traj.meta = std::move(summary.meta);
    return traj;
}

/// High-resolution reference trajectory: rk4-38 at step h_ref, decimated so
/// that only every stride-th sample is kept.  The retained grid spacing is
/// stride * h_ref and retained times are k * (stride * h_ref) exactly.
/// Memory is proportional to the retained samples only.
inline Trajectory generate_reference(const SystemModel& model, double x0, double y0,
                                     double h_ref, std::size_t stride, double T) {
    if (stride < 1)
        throw std::invalid_argument("generate_reference: stride must be >= 1");
    SolverConfig cfg;
    cfg.h = h_ref;
    cfg.reservoir = false;
    cfg.validate();
    if (!(h_ref > 0.0))
        throw std::invalid_argument("generate_reference: h_ref must be > 0");
    const std::size_t n_total = detail::step_count(T, h_ref);
    if (n_total % stride != 0)
        throw std::invalid_argument(
            "generate_reference: stride does not divide the number of reference steps, the "
            "decimated samples would not land on the coarse grid");

    const double coarse_h = static_cast<double>(stride) * h_ref;
    Trajectory traj;
    traj.samples.reserve(n_total / stride + 1);
    std::size_t index = 0;
    auto summary = integrate_stream(model, "rk4-38", x0, y0, cfg, T, [&](const PhaseState& s) {
        if (index % stride == 0) {
            PhaseState kept = s;
            kept.t = static_cast<double>(index / stride) * coarse_h;
            traj.samples.push_back(kept);
        }
        ++index;
    });
    traj.meta = std::move(summary.meta);
    traj.meta.stride = stride;
    return traj;
}

}  // namespace resint
