// Time-ordered propagators for the linear field ramp, U(tau) and V(tau).
//
// Scheme: exponential midpoint rule. Each step applies the exact unitary
// exp(-i H(t_mid) dt); H(B) splits into two invariant 2x2 blocks, so the step
// exponential is an exact Pauli-style rotation per block and the accumulated
// propagator stays block diagonal and unitary to machine precision. The step
// count is doubled until a Richardson estimate (2nd order: |U_2n - U_n|/3)
// and the unitarity defect both drop below the requested tolerance.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "qotto/spin_model.hpp"

namespace qotto {

enum class RampDirection { forward, reversed };

// forward:  B(t) = B_start + (B_end - B_start) (t/tau)
// reversed: the forward protocol traversed as B(tau - t).
struct RampProtocol {
    double b_start = 0.0;
    double b_end = 0.0;
    double tau = 0.0;
    RampDirection direction = RampDirection::forward;

    double field_at(double t) const {
        const double s = (direction == RampDirection::forward) ? t : tau - t;
        return b_start + (b_end - b_start) * (s / tau);
    }
};

struct Propagator {
    Matrix4c matrix = Matrix4c::Identity();
    RampProtocol protocol;
    double tolerance_achieved = 0.0;
};

namespace detail {

using Matrix2c = Eigen::Matrix2cd;

// exp(-i M dt) for M = [[a, b], [b, -a]] real symmetric traceless:
// M^2 = w^2 I with w = hypot(a,b), so exp(-iMdt) = cos(w dt) I - i sinc term.
inline Matrix2c block_rotation(double a, double b, double dt) {
    const double w = std::hypot(a, b);
    const double x = w * dt;
    double f;  // dt * sin(x)/x
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        f = dt * (1.0 - x2 / 6.0 + x2 * x2 / 120.0);
    } else {
        f = std::sin(x) / w;
    }
    const Complex im(0.0, 1.0);
    Matrix2c u;
    u(0, 0) = std::cos(x) - im * f * a;
    u(1, 1) = std::cos(x) + im * f * a;
    u(0, 1) = -im * f * b;
    u(1, 0) = -im * f * b;
    return u;
}

// Fixed-step midpoint-exponential product over the ramp, kept as the two
// invariant blocks: outer on (|11>,|00>) = indices (0,3), middle on
// (|10>,|01>) = indices (1,2).
inline void propagate_blocks(const EngineParams& params, const RampProtocol& protocol,
                             long steps, Matrix2c& outer, Matrix2c& middle) {
    const double j = params.coupling_j;
    const double g = params.gamma * j;
    const double dt = protocol.tau / static_cast<double>(steps);
    outer = Matrix2c::Identity();
    // Middle block Hamiltonian [[0,2J],[2J,0]] is time independent: exact in
    // one shot.
    middle = block_rotation(0.0, 2.0 * j, protocol.tau);
    for (long i = 0; i < steps; ++i) {
        const double t_mid = (static_cast<double>(i) + 0.5) * dt;
        const double field = protocol.field_at(t_mid);
        outer = block_rotation(2.0 * field, 2.0 * g, dt) * outer;
    }
}

inline Matrix4c assemble_blocks(const Matrix2c& outer, const Matrix2c& middle) {
    Matrix4c u = Matrix4c::Zero();
    u(0, 0) = outer(0, 0);
    u(0, 3) = outer(0, 1);
    u(3, 0) = outer(1, 0);
    u(3, 3) = outer(1, 1);
    u(1, 1) = middle(0, 0);
    u(1, 2) = middle(0, 1);
    u(2, 1) = middle(1, 0);
    u(2, 2) = middle(1, 1);
    return u;
}

inline double unitarity_defect(const Matrix4c& u) {
    return (u.adjoint() * u - Matrix4c::Identity()).cwiseAbs().maxCoeff();
}

}  // namespace detail

// Fixed step count, mainly for convergence studies; evolve() below chooses
// the count adaptively.
inline Propagator evolve_fixed_steps(const EngineParams& params, const RampProtocol& protocol,
                                     long steps) {
    detail::Matrix2c outer, middle;
    detail::propagate_blocks(params, protocol, steps, outer, middle);
    Propagator p;
    p.matrix = detail::assemble_blocks(outer, middle);
    p.protocol = protocol;
    p.tolerance_achieved = detail::unitarity_defect(p.matrix);
    return p;
}

inline Propagator evolve(const EngineParams& params, const RampProtocol& protocol, double tol) {
    if (!(tol > 0.0)) throw ValidationError("integration tolerance must be > 0");
    if (!(protocol.tau > 0.0)) throw ValidationError("ramp duration must be > 0");

    // Start with steps resolving the fastest phase, ~1 rad per step.
    const double g = params.gamma * params.coupling_j;
    const double spectral_radius =
        2.0 * std::max({std::hypot(protocol.b_start, g), std::hypot(protocol.b_end, g),
                        params.coupling_j});
    long steps = 16;
    while (static_cast<double>(steps) < protocol.tau * spectral_radius && steps < (1L << 20))
        steps *= 2;
    constexpr long kMaxSteps = 1L << 26;

    Matrix4c prev;
    {
        detail::Matrix2c outer, middle;
        detail::propagate_blocks(params, protocol, steps, outer, middle);
        prev = detail::assemble_blocks(outer, middle);
    }
    while (true) {
        steps *= 2;
        detail::Matrix2c outer, middle;
        detail::propagate_blocks(params, protocol, steps, outer, middle);
        const Matrix4c curr = detail::assemble_blocks(outer, middle);
        const double estimate = (curr - prev).cwiseAbs().maxCoeff() / 3.0;
        const double defect = detail::unitarity_defect(curr);
        if (estimate <= tol && defect <= tol) {
            Propagator p;
            p.matrix = curr;
            p.protocol = protocol;
            p.tolerance_achieved = estimate;
            return p;
        }
        if (steps >= kMaxSteps)
            throw NumericalError("propagator step size underflow: achieved error estimate " +
                                 std::to_string(estimate) + ", unitarity defect " +
                                 std::to_string(defect) + ", requested tol " +
                                 std::to_string(tol));
        prev = curr;
    }
}

// A_lm = <to_l | U | from_m>; unitary when both bases are complete.
inline Matrix4c amplitude_matrix(const Propagator& u, const EigenSystem& from_basis,
                                 const EigenSystem& to_basis) {
    return to_basis.states.adjoint() * u.matrix * from_basis.states;
}

}  // namespace qotto
