#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "resint/integrators.hpp"
#include "resint/model.hpp"

namespace resint {

enum class DecrementMode { Direct, Reservoir };
enum class TheorySource { ExactSolution, Reference };
enum class Basin { Left, Right, Undecided };

inline const char* basin_name(Basin b) {
    switch (b) {
        case Basin::Left: return "left";
        case Basin::Right: return "right";
        default: return "undecided";
    }
}

/// |K_i - K_0| per sample.
inline std::vector<double> k_drift(const SystemModel& model, const Trajectory& traj) {
    std::vector<double> out;
    out.reserve(traj.samples.size());
    if (traj.samples.empty()) return out;
    const double k0 = eval_K(model, traj.samples.front());
    for (const auto& s : traj.samples) out.push_back(std::abs(eval_K(model, s) - k0));
    return out;
}

namespace detail {

constexpr double kDecrementDenominatorFloor = 1.0e-300;

inline double guarded_ratio(double num, double den) {
    if (std::abs(den) < kDecrementDenominatorFloor)
        return std::numeric_limits<double>::quiet_NaN();  // flagged gap, never a crash
    return num / den;
}

}  // namespace detail

/// Per-step energy decrement, one entry per step (length = samples - 1).
///
/// Direct:    R_i = H(x_{i+1}, y_{i+1}) / H(x_i, y_i)
/// Reservoir: R_i = (K_0 - z_{i+1}) / (K_0 - z_i),  K_0 = H_0 + z_0
///
/// Steps whose denominator vanishes yield NaN gaps.
inline std::vector<double> energy_decrement(const SystemModel& model, const Trajectory& traj,
                                            DecrementMode mode) {
    std::vector<double> out;
    if (traj.samples.size() < 2) return out;
    out.reserve(traj.samples.size() - 1);
    if (mode == DecrementMode::Direct) {
        double prev = model.hamiltonian(traj.samples[0].x, traj.samples[0].y);
        for (std::size_t i = 1; i < traj.samples.size(); ++i) {
            const double cur = model.hamiltonian(traj.samples[i].x, traj.samples[i].y);
            out.push_back(detail::guarded_ratio(cur, prev));
            prev = cur;
        }
    } else {
        const double k0 = eval_K(model, traj.samples.front());
        for (std::size_t i = 1; i < traj.samples.size(); ++i) {
            out.push_back(detail::guarded_ratio(k0 - traj.samples[i].z,
                                                k0 - traj.samples[i - 1].z));
        }
    }
    return out;
}

/// Theoretical decrement along the given trajectory's grid.
///
/// ExactSolution: H-ratios of the closed-form damped-oscillator solution
/// started from the trajectory's initial state (damped-harmonic only).
/// Reference: H-ratios of the trajectory itself, which is then expected to be
/// a high-resolution reference run on the coarse grid.
inline std::vector<double> decrement_theory(const SystemModel& model, const Trajectory& traj,
                                            TheorySource source) {
    if (source == TheorySource::Reference)
        return energy_decrement(model, traj, DecrementMode::Direct);

    if (model.kind != SystemKind::DampedHarmonic)
        throw std::invalid_argument(
            "decrement_theory: closed-form source is only available for damped-ho");
    std::vector<double> out;
    if (traj.samples.size() < 2) return out;
    out.reserve(traj.samples.size() - 1);
    const double b = model.params.at("b");
    const double x0 = traj.samples.front().x;
    const double y0 = traj.samples.front().y;
    const auto energy_at = [&](double t) {
        const auto xy = exact_damped_harmonic(b, x0, y0, t);
        return model.hamiltonian(xy[0], xy[1]);
    };
    double prev = energy_at(traj.samples.front().t);
    for (std::size_t i = 1; i < traj.samples.size(); ++i) {
        const double cur = energy_at(traj.samples[i].t);
        out.push_back(detail::guarded_ratio(cur, prev));
        prev = cur;
    }
    return out;
}

/// |measured - theory| elementwise; NaN gaps propagate.
inline std::vector<double> decrement_deviation(std::span<const double> measured,
                                               std::span<const double> theory) {
    if (measured.size() != theory.size())
        throw std::invalid_argument("decrement_deviation: series lengths differ");
    std::vector<double> out(measured.size());
    for (std::size_t i = 0; i < measured.size(); ++i) out[i] = std::abs(measured[i] - theory[i]);
    return out;
}

struct GlobalErrorSeries {
    std::vector<double> err_x;
    std::vector<double> err_y;
};

namespace detail {

inline bool grids_match(const Trajectory& a, const Trajectory& b) {
    if (a.samples.size() != b.samples.size()) return false;
    for (std::size_t i = 0; i < a.samples.size(); ++i) {
        const double ta = a.samples[i].t;
        const double tb = b.samples[i].t;
        if (std::abs(ta - tb) > 1.0e-12 * std::max(1.0, std::max(std::abs(ta), std::abs(tb))))
            return false;
    }
    return true;
}

}  // namespace detail

/// Per-sample |x - x_ref|, |y - y_ref|.  The grids must agree (same length,
/// times within 1e-12 relative); mismatches are an error, never silently
/// interpolated over.
inline GlobalErrorSeries global_error(const Trajectory& traj, const Trajectory& reference) {
    if (!detail::grids_match(traj, reference))
        throw std::invalid_argument("global_error: trajectory and reference grids differ");
    GlobalErrorSeries out;
    out.err_x.reserve(traj.samples.size());
    out.err_y.reserve(traj.samples.size());
    for (std::size_t i = 0; i < traj.samples.size(); ++i) {
        out.err_x.push_back(std::abs(traj.samples[i].x - reference.samples[i].x));
        out.err_y.push_back(std::abs(traj.samples[i].y - reference.samples[i].y));
    }
    return out;
}

/// Least-squares slope of log(error) against log(h).  Entries must have
/// strictly decreasing h and strictly positive errors.
inline double convergence_order(std::span<const std::pair<double, double>> errors) {
    if (errors.size() < 2)
        throw std::invalid_argument("convergence_order: needs at least two (h, error) entries");
    for (std::size_t i = 0; i < errors.size(); ++i) {
        if (!(errors[i].first > 0.0))
            throw std::invalid_argument("convergence_order: step sizes must be > 0");
        if (i > 0 && !(errors[i].first < errors[i - 1].first))
            throw std::invalid_argument("convergence_order: step sizes must strictly decrease");
        if (!(errors[i].second > 0.0))
            throw std::invalid_argument(
                "convergence_order: zero or negative error entry, order is undefined");
    }
    const std::size_t n = errors.size();
    double mean_lh = 0.0;
    double mean_le = 0.0;
    for (const auto& [h, e] : errors) {
        mean_lh += std::log(h);
        mean_le += std::log(e);
    }
    mean_lh /= static_cast<double>(n);
    mean_le /= static_cast<double>(n);
    double num = 0.0;
    double den = 0.0;
    for (const auto& [h, e] : errors) {
        const double dh = std::log(h) - mean_lh;
        num += dh * (std::log(e) - mean_le);
        den += dh * dh;
    }
    return num / den;
}

/// Double-well basin label from the trailing tail_fraction of the samples:
/// Left if the mean of x is within 0.5 of -1, Right if within 0.5 of +1.
inline Basin classify_basin(const Trajectory& traj, double tail_fraction = 0.1) {
    if (!(tail_fraction > 0.0) || tail_fraction > 1.0)
        throw std::invalid_argument("classify_basin: tail_fraction must be in (0, 1]");
    if (traj.samples.empty()) return Basin::Undecided;
    const auto n = traj.samples.size();
    const auto tail = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(n))));
    double mean = 0.0;
    for (std::size_t i = n - tail; i < n; ++i) mean += traj.samples[i].x;
    mean /= static_cast<double>(tail);
    if (std::abs(mean + 1.0) <= 0.5) return Basin::Left;
    if (std::abs(mean - 1.0) <= 0.5) return Basin::Right;
    return Basin::Undecided;
}

namespace detail {

inline double max_finite(std::span<const double> v) {
    double m = 0.0;
    for (double x : v)
        if (std::isfinite(x)) m = std::max(m, x);
    return m;
}

inline double last_finite(std::span<const double> v) {
    for (auto it = v.rbegin(); it != v.rend(); ++it)
        if (std::isfinite(*it)) return *it;
    return std::numeric_limits<double>::quiet_NaN();
}

inline std::size_t count_gaps(std::span<const double> v) {
    std::size_t n = 0;
    for (double x : v)
        if (!std::isfinite(x)) ++n;
    return n;
}

}  // namespace detail

struct SeriesAggregate {
    double max = 0.0;
    double final_value = 0.0;
};

inline SeriesAggregate aggregate(std::span<const double> series) {
    return {detail::max_finite(series), detail::last_finite(series)};
}

/// Post-processing bundle consumed by the command-line front end.
struct DiagnosticsReport {
    std::vector<double> k_drift_series;
    std::optional<std::vector<double>> decrement_dev;
    std::optional<GlobalErrorSeries> global_err;

    SeriesAggregate k_drift_agg;
    SeriesAggregate decrement_agg;
    SeriesAggregate err_x_agg;
    SeriesAggregate err_y_agg;
    std::size_t decrement_gaps = 0;

    std::optional<Basin> basin;
    IterationStats iterations;
};

/// Assembles the report.  `reference` (when given) provides the global-error
/// baseline and, with TheorySource::Reference, the decrement theory; with
/// TheorySource::ExactSolution the closed-form solution is used instead.
/// `mode` picks how the measured decrement is evaluated.
inline DiagnosticsReport build_report(const SystemModel& model, const Trajectory& traj,
                                      const Trajectory* reference, DecrementMode mode,
                                      TheorySource source) {
    DiagnosticsReport rep;
    rep.k_drift_series = k_drift(model, traj);
    rep.k_drift_agg = aggregate(rep.k_drift_series);
    rep.iterations = traj.meta.iterations;

    const bool have_theory =
        source == TheorySource::ExactSolution ? model.kind == SystemKind::DampedHarmonic
                                              : reference != nullptr;
    if (have_theory) {
        const auto measured = energy_decrement(model, traj, mode);
        const auto theory = source == TheorySource::ExactSolution
                                ? decrement_theory(model, traj, source)
                                : decrement_theory(model, *reference, source);
        rep.decrement_dev = decrement_deviation(measured, theory);
        rep.decrement_agg = aggregate(*rep.decrement_dev);
        rep.decrement_gaps = detail::count_gaps(*rep.decrement_dev);
    }
    if (reference != nullptr) {
        rep.global_err = global_error(traj, *reference);
        rep.err_x_agg = aggregate(rep.global_err->err_x);
        rep.err_y_agg = aggregate(rep.global_err->err_y);
    }
    if (model.kind == SystemKind::Duffing) rep.basin = classify_basin(traj);
    return rep;
}

}  // namespace resint
