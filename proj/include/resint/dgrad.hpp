#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "resint/model.hpp"

namespace resint {

/// The two coordinate-increment quotients of an energy function.
struct DGradPair {
    double dx_part = 0.0;  ///< discrete dH/dx
    double dy_part = 0.0;  ///< discrete dH/dy
};

namespace detail {

// Central finite difference used on the degenerate branch of the quotient.
template <class HFn>
double central_diff_x(const HFn& h, double x, double y) {
    const double step = 6.0e-6 * (1.0 + std::abs(x));
    return (h(x + step, y) - h(x - step, y)) / (2.0 * step);
}

template <class HFn>
double central_diff_y(const HFn& h, double x, double y) {
    const double step = 6.0e-6 * (1.0 + std::abs(y));
    return (h(x, y + step) - h(x, y - step)) / (2.0 * step);
}

inline void require_finite_energy(double v) {
    if (!std::isfinite(v))
        throw std::domain_error("itoh_abe_dgrad: non-finite energy evaluation");
}

}  // namespace detail

/// Coordinate-increment (Itoh-Abe style) discrete gradient of an energy map.
///
/// The x part increments x at the old y, the y part increments y at the new x:
///
///     dx_part = [H(xb, ya) - H(xa, ya)] / (xb - xa)
///     dy_part = [H(xb, yb) - H(xb, ya)] / (yb - ya)
///
/// so the two parts telescope:
///   dx_part (xb - xa) + dy_part (yb - ya) = H(xb, yb) - H(xa, ya).
///
/// When an increment is smaller than eps_switch the quotient is replaced by a
/// central finite difference of the corresponding partial derivative at the
/// increment midpoint.
template <class HFn>
DGradPair itoh_abe_dgrad(const HFn& h, double x_a, double x_b, double y_a, double y_b,
                         double eps_switch = 1.0e-12) {
    if (!(eps_switch > 0.0))
        throw std::invalid_argument("itoh_abe_dgrad: eps_switch must be > 0");

    DGradPair g;
    if (std::abs(x_b - x_a) > eps_switch) {
        const double hi = h(x_b, y_a);
        const double lo = h(x_a, y_a);
        detail::require_finite_energy(hi);
        detail::require_finite_energy(lo);
        g.dx_part = (hi - lo) / (x_b - x_a);
    } else {
        g.dx_part = detail::central_diff_x(h, 0.5 * (x_a + x_b), y_a);
        detail::require_finite_energy(g.dx_part);
    }
    if (std::abs(y_b - y_a) > eps_switch) {
        const double hi = h(x_b, y_b);
        const double lo = h(x_b, y_a);
        detail::require_finite_energy(hi);
        detail::require_finite_energy(lo);
        g.dy_part = (hi - lo) / (y_b - y_a);
    } else {
        g.dy_part = detail::central_diff_y(h, x_b, 0.5 * (y_a + y_b));
        detail::require_finite_energy(g.dy_part);
    }
    return g;
}

namespace detail {

// Deterministic uniform doubles in [0, 1), identical across platforms.
class UniformSource {
public:
    explicit UniformSource(std::uint64_t seed) : state_(seed ? seed : 0x9e3779b97f4a7c15ull) {}

    double next() {
        // splitmix64
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        z = z ^ (z >> 31);
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next(); }

private:
    std::uint64_t state_;
};

}  // namespace detail

/// Cross-checks a model's closed-form discrete gradients against the generic
/// quotient on pseudo-random points in [-10, 10]^4.  Increments below 0.1 are
/// skipped (there the quotient itself loses accuracy to cancellation and the
/// closed form is the authority).  Returns the worst relative discrepancy,
/// |quotient - closed| / max(1, |closed|); zero if every draw was degenerate.
inline double validate_closed_forms(const SystemModel& model, std::size_t n_samples,
                                    std::uint64_t seed) {
    if (n_samples < 1)
        throw std::invalid_argument("validate_closed_forms: n_samples must be >= 1");
    detail::UniformSource rng(seed);
    double worst = 0.0;
    for (std::size_t i = 0; i < n_samples; ++i) {
        const double xa = rng.uniform(-10.0, 10.0);
        const double xb = rng.uniform(-10.0, 10.0);
        const double ya = rng.uniform(-10.0, 10.0);
        const double yb = rng.uniform(-10.0, 10.0);
        if (std::abs(xb - xa) > 0.1) {
            const double quotient =
                (model.hamiltonian(xb, ya) - model.hamiltonian(xa, ya)) / (xb - xa);
            const double closed = model.dgrad_x(xa, xb, ya);
            const double rel = std::abs(quotient - closed) / std::max(1.0, std::abs(closed));
            worst = std::max(worst, rel);
        }
        if (std::abs(yb - ya) > 0.1) {
            const double quotient =
                (model.hamiltonian(xb, yb) - model.hamiltonian(xb, ya)) / (yb - ya);
            const double closed = model.dgrad_y(xb, ya, yb);
            const double rel = std::abs(quotient - closed) / std::max(1.0, std::abs(closed));
            worst = std::max(worst, rel);
        }
    }
    return worst;
}

}  // namespace resint
