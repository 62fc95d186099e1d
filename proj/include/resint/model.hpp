#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>

namespace resint {

/// One sample of an augmented phase-space trajectory: time t, position x,
/// velocity y, and the reservoir accumulator z that books the energy the
/// system has dissipated (or absorbed, with the opposite sign) so far.
struct PhaseState {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
};

enum class SystemKind { DampedHarmonic, VanDerPol, Duffing, Conservative };

/// A planar second-order system
///
///     x' = y
///     y' = -dH/dx - D(x, y)
///
/// described by its Hamiltonian H, the damping map D, and closed-form
/// discrete partial gradients of H:
///
///     dgrad_x(xa, xb, y) == (H(xb, y) - H(xa, y)) / (xb - xa)
///     dgrad_y(x, ya, yb) == (H(x, yb) - H(x, ya)) / (yb - ya)
///
/// continued to the diagonal by the exact partial derivative.  Closed forms
/// avoid the 0/0 of the raw quotient when an increment vanishes; the generic
/// quotient machinery lives in dgrad.hpp.
///
/// The energy balance of the continuous system is dH/dt = -y D(x, y).  The
/// reservoir convention used throughout is dz/dt = +y D(x, y), so that
/// K = H + z is constant along solutions.
///
/// Models are immutable after construction and safe to share across threads.
struct SystemModel {
    std::string name;
    SystemKind kind = SystemKind::Conservative;
    std::map<std::string, double> params;

    std::function<double(double, double)> hamiltonian;
    std::function<std::array<double, 2>(double, double)> grad_h;  ///< (dH/dx, dH/dy)
    std::function<double(double, double)> damping;                ///< D(x, y)
    std::function<double(double, double, double)> dgrad_x;        ///< (xa, xb, y)
    std::function<double(double, double, double)> dgrad_y;        ///< (x, ya, yb)
};

/// Computational invariant K = H(x, y) + z.
inline double eval_K(const SystemModel& model, const PhaseState& s) {
    return model.hamiltonian(s.x, s.y) + s.z;
}

/// Damped harmonic oscillator:  x' = y,  y' = -x - b y,  H = (x^2 + y^2)/2.
inline SystemModel make_damped_harmonic(double b) {
    if (!std::isfinite(b) || b < 0.0)
        throw std::invalid_argument("make_damped_harmonic: damping b must be finite and >= 0");
    SystemModel m;
    m.name = "damped-ho";
    m.kind = SystemKind::DampedHarmonic;
    m.params = {{"b", b}};
    m.hamiltonian = [](double x, double y) { return 0.5 * (x * x + y * y); };
    m.grad_h = [](double x, double y) { return std::array<double, 2>{x, y}; };
    m.damping = [b](double, double y) { return b * y; };
    m.dgrad_x = [](double xa, double xb, double) { return 0.5 * (xa + xb); };
    m.dgrad_y = [](double, double ya, double yb) { return 0.5 * (ya + yb); };
    return m;
}

/// Van der Pol oscillator:  x' = y,  y' = -x + a (1 - x^2) y.
/// In damped form D(x, y) = -a (1 - x^2) y with the same quadratic H.
inline SystemModel make_van_der_pol(double a) {
    if (!std::isfinite(a))
        throw std::invalid_argument("make_van_der_pol: parameter a must be finite");
    SystemModel m;
    m.name = "vdp";
    m.kind = SystemKind::VanDerPol;
    m.params = {{"a", a}};
    m.hamiltonian = [](double x, double y) { return 0.5 * (x * x + y * y); };
    m.grad_h = [](double x, double y) { return std::array<double, 2>{x, y}; };
    m.damping = [a](double x, double y) { return -a * (1.0 - x * x) * y; };
    m.dgrad_x = [](double xa, double xb, double) { return 0.5 * (xa + xb); };
    m.dgrad_y = [](double, double ya, double yb) { return 0.5 * (ya + yb); };
    return m;
}

/// Damped Duffing oscillator:  x' = y,  y' = x - x^3 - b y,
/// H = y^2/2 - x^2/2 + x^4/4 (double well with minima at x = +-1).
///
/// The discrete x-gradient uses the factored form
///     -(xa + xb)/2 + (xa + xb)(xa^2 + xb^2)/4,
/// which is the divided difference of H without a cancellation-prone division.
inline SystemModel make_duffing(double b) {
    if (!std::isfinite(b) || b < 0.0)
        throw std::invalid_argument("make_duffing: damping b must be finite and >= 0");
    SystemModel m;
    m.name = "duffing";
    m.kind = SystemKind::Duffing;
    m.params = {{"b", b}};
    m.hamiltonian = [](double x, double y) {
        return 0.5 * y * y - 0.5 * x * x + 0.25 * x * x * x * x;
    };
    m.grad_h = [](double x, double y) {
        return std::array<double, 2>{-x + x * x * x, y};
    };
    m.damping = [b](double, double y) { return b * y; };
    m.dgrad_x = [](double xa, double xb, double) {
        return -0.5 * (xa + xb) + (xa + xb) * (xa * xa + xb * xb) * 0.25;
    };
    m.dgrad_y = [](double, double ya, double yb) { return 0.5 * (ya + yb); };
    return m;
}

/// Copy of a model with the damping removed (D == 0).
inline SystemModel make_conservative(const SystemModel& base) {
    SystemModel m = base;
    m.kind = SystemKind::Conservative;
    m.name = base.name + "-conservative";
    m.damping = [](double, double) { return 0.0; };
    return m;
}

/// Closed-form solution of the underdamped oscillator x'' + b x' + x = 0:
///
///     x(t) = exp(-b t / 2) (C1 cos(w t) + C2 sin(w t)),  y = x'(t),
///     w = sqrt(1 - b^2/4),  C1 = x0,  C2 = (y0 + b x0 / 2) / w.
///
/// Only the underdamped branch 0 <= b < 2 is implemented.
inline std::array<double, 2> exact_damped_harmonic(double b, double x0, double y0, double t) {
    if (!(b >= 0.0 && b < 2.0))
        throw std::domain_error("exact_damped_harmonic: requires 0 <= b < 2 (underdamped)");
    const double w = std::sqrt(1.0 - 0.25 * b * b);
    const double c1 = x0;
    const double c2 = (y0 + 0.5 * b * x0) / w;
    const double e = std::exp(-0.5 * b * t);
    const double c = std::cos(w * t);
    const double s = std::sin(w * t);
    const double x = e * (c1 * c + c2 * s);
    const double y = e * (-0.5 * b * (c1 * c + c2 * s) + w * (c2 * c - c1 * s));
    return {x, y};
}

}  // namespace resint
