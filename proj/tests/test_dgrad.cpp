#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "resint/dgrad.hpp"
#include "resint/model.hpp"

using namespace resint;
using Catch::Matchers::WithinAbs;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    return lo + (hi - lo) * u;
}

const auto quadratic = [](double x, double y) { return 0.5 * (x * x + y * y); };

}  // namespace

TEST_CASE("coordinate-increment quotients", "[dgrad]") {
    SECTION("quadratic energy gives arithmetic means") {
        const auto g = itoh_abe_dgrad(quadratic, 0.0, 0.0, 1.0, 3.0);
        CHECK_THAT(g.dy_part, WithinAbs(2.0, 1e-14));
    }
    SECTION("degenerate increment falls back to the derivative") {
        const auto g = itoh_abe_dgrad(quadratic, 0.0, 0.0, 1.0, 1.0);
        CHECK_THAT(g.dy_part, WithinAbs(1.0, 1e-9));
    }
    SECTION("matches the duffing closed form") {
        const auto duf = make_duffing(0.2);
        const auto g = itoh_abe_dgrad(duf.hamiltonian, 0.0, 2.0, 5.0, 5.0);
        CHECK_THAT(g.dx_part, WithinAbs(1.0, 1e-13));
        CHECK_THAT(g.dx_part, WithinAbs(duf.dgrad_x(0.0, 2.0, 5.0), 1e-13));
    }
    SECTION("eps_switch must be positive") {
        CHECK_THROWS_AS(itoh_abe_dgrad(quadratic, 0.0, 1.0, 0.0, 1.0, 0.0),
                        std::invalid_argument);
    }
    SECTION("non-finite energy evaluations propagate") {
        const auto bad = [](double x, double) {
            return x > 5.0 ? std::numeric_limits<double>::quiet_NaN() : x;
        };
        CHECK_THROWS_AS(itoh_abe_dgrad(bad, 0.0, 10.0, 0.0, 1.0), std::domain_error);
    }
}

TEST_CASE("mean-value identity of the quotients", "[dgrad]") {
    std::mt19937_64 rng(11);
    const auto duf = make_duffing(0.2);
    for (int i = 0; i < 1000; ++i) {
        const double xa = uniform(rng, -10.0, 10.0);
        const double xb = uniform(rng, -10.0, 10.0);
        const double ya = uniform(rng, -10.0, 10.0);
        const double yb = uniform(rng, -10.0, 10.0);
        if (std::abs(yb - ya) <= 1e-12 || std::abs(xb - xa) <= 1e-12) continue;
        const auto g = itoh_abe_dgrad(duf.hamiltonian, xa, xb, ya, yb);

        const double lhs = g.dy_part * (yb - ya);
        const double rhs = duf.hamiltonian(xb, yb) - duf.hamiltonian(xb, ya);
        CHECK(std::abs(lhs - rhs) <=
              1e-12 * std::max({1.0, std::abs(duf.hamiltonian(xb, yb)),
                                std::abs(duf.hamiltonian(xb, ya))}));
    }
}

TEST_CASE("quotients telescope the energy difference", "[dgrad]") {
    // This chain identity is the conservation mechanism of the
    // discrete-gradient step.
    std::mt19937_64 rng(12);
    for (const auto& m : {make_damped_harmonic(0.2), make_duffing(0.2)}) {
        for (int i = 0; i < 1000; ++i) {
            const double xa = uniform(rng, -10.0, 10.0);
            const double xb = uniform(rng, -10.0, 10.0);
            const double ya = uniform(rng, -10.0, 10.0);
            const double yb = uniform(rng, -10.0, 10.0);
            if (std::abs(yb - ya) <= 1e-12 || std::abs(xb - xa) <= 1e-12) continue;
            const auto g = itoh_abe_dgrad(m.hamiltonian, xa, xb, ya, yb);
            const double lhs = g.dx_part * (xb - xa) + g.dy_part * (yb - ya);
            const double rhs = m.hamiltonian(xb, yb) - m.hamiltonian(xa, ya);
            const double denom = std::max({1.0, std::abs(m.hamiltonian(xa, ya)),
                                           std::abs(m.hamiltonian(xb, ya)),
                                           std::abs(m.hamiltonian(xb, yb))});
            CHECK(std::abs(lhs - rhs) <= 1e-12 * denom);
        }
    }
}

TEST_CASE("quotient and derivative branches agree near the switch", "[dgrad]") {
    std::mt19937_64 rng(13);
    const double eps_switch = 1e-5;
    for (const auto& m : {make_damped_harmonic(0.2), make_duffing(0.2)}) {
        double worst = 0.0;
        for (int i = 0; i < 500; ++i) {
            const double xb = uniform(rng, -10.0, 10.0);
            const double ya = uniform(rng, -10.0, 10.0);
            const double mag = uniform(rng, 0.5 * eps_switch, 2.0 * eps_switch);
            const double yb = ya + (rng() & 1 ? mag : -mag);
            // Forcing the switch both ways evaluates each branch on the
            // same increment.
            const auto quot = itoh_abe_dgrad(m.hamiltonian, xb, xb, ya, yb, 1e-300);
            const auto deriv = itoh_abe_dgrad(m.hamiltonian, xb, xb, ya, yb, 1.0);
            worst = std::max(worst, std::abs(quot.dy_part - deriv.dy_part));

            const double xa = xb + (rng() & 1 ? mag : -mag);
            const auto quot_x = itoh_abe_dgrad(m.hamiltonian, xa, xb, ya, ya, 1e-300);
            const auto deriv_x = itoh_abe_dgrad(m.hamiltonian, xa, xb, ya, ya, 1.0);
            worst = std::max(worst, std::abs(quot_x.dx_part - deriv_x.dx_part));
        }
        INFO(m.name);
        CHECK(worst <= 1e-6);
    }
}

TEST_CASE("closed forms validate against the generic quotient", "[dgrad]") {
    CHECK(validate_closed_forms(make_damped_harmonic(0.2), 1000, 1) <= 1e-12);
    CHECK(validate_closed_forms(make_van_der_pol(1.0), 1000, 1) <= 1e-12);
    CHECK(validate_closed_forms(make_duffing(0.2), 1000, 1) <= 1e-10);
    CHECK(validate_closed_forms(make_duffing(0.2), 1, 99) >= 0.0);
    CHECK_THROWS_AS(validate_closed_forms(make_duffing(0.2), 0, 1), std::invalid_argument);
}
