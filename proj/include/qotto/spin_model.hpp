// Two spins coupled by an anisotropic XY interaction in a transverse field:
//
//   H(B) = B (s1z + s2z) + J [(1+g) s1x s2x + (1-g) s1y s2y],   g = gamma
//
// Basis ordering used by the WHOLE library (fixed here, documented once):
//   index 0 = |11>,  1 = |10>,  2 = |01>,  3 = |00>
// with sz|1> = +|1>, sz|0> = -|0>. In this ordering H is real symmetric and
// block diagonal: an outer block on {|11>,|00>} and a middle block on
// {|10>,|01>}. Eigenvalues are (-2K, -2J, 2J, 2K), K = sqrt(B^2 + g^2 J^2).
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <string>

#include "qotto/errors.hpp"

namespace qotto {

using Complex = std::complex<double>;
using Matrix4c = Eigen::Matrix4cd;
using Vector4c = Eigen::Vector4cd;
using Matrix4r = Eigen::Matrix4d;
using Vector4r = Eigen::Vector4d;

enum class EngineMode { measurement_based, two_bath };

inline std::string to_string(EngineMode m) {
    return m == EngineMode::measurement_based ? "measurement_based" : "two_bath";
}

// All physical and protocol parameters of one engine configuration.
// Energies in units with hbar = k_B = 1.
struct EngineParams {
    double coupling_j = 1.0;   // J > 0
    double gamma = 0.0;        // anisotropy, in [-1, 1]
    double field_b1 = 1.0;     // initial field, >= 0
    double field_b2 = 2.0;     // final field, >= 0
    double temperature = 1.0;  // cold bath T > 0
    double tau = 1.0;          // unitary stroke duration, > 0
    EngineMode mode = EngineMode::measurement_based;
    double temperature_hot = 0.0;  // two_bath only, must exceed temperature

    void validate() const {
        if (!(coupling_j > 0.0)) throw ValidationError("coupling J must be > 0");
        if (!(gamma >= -1.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [-1, 1]");
        if (!(field_b1 >= 0.0)) throw ValidationError("B1 must be >= 0");
        if (!(field_b2 >= 0.0)) throw ValidationError("B2 must be >= 0");
        if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
        if (!(tau > 0.0)) throw ValidationError("tau must be > 0");
        if (mode == EngineMode::two_bath && !(temperature_hot > temperature))
            throw ValidationError("two_bath mode requires T_hot > T");
    }
};

// 4x4 Hermitian matrix in the computational ordering above, tagged with the
// field it was built at. Traceless by construction.
struct HamiltonianMatrix {
    Matrix4c entries;
    double field = 0.0;
};

inline HamiltonianMatrix build_hamiltonian(const EngineParams& params, double field) {
    if (!(field >= 0.0)) throw ValidationError("field must be >= 0");
    const double j = params.coupling_j;
    const double g = params.gamma * j;  // outer-block coupling gamma*J
    Matrix4c h = Matrix4c::Zero();
    h(0, 0) = 2.0 * field;
    h(3, 3) = -2.0 * field;
    h(0, 3) = h(3, 0) = 2.0 * g;
    h(1, 2) = h(2, 1) = 2.0 * j;
    return {h, field};
}

// Eigenpairs in the labeled order E = (-2K, -2J, 2J, 2K); this is ascending
// only when K > J. Column k of `states` is |psi_k> in the computational basis.
struct EigenSystem {
    Vector4r energies;
    Matrix4c states;
    double k_scale = 0.0;  // K = sqrt(B^2 + gamma^2 J^2)
    double field = 0.0;
};

namespace detail {

// Largest-magnitude component made real-positive, ties (within 1e-12) broken
// by lowest index, so amplitudes are reproducible across runs.
inline void fix_phase(Eigen::Ref<Vector4c> v) {
    int pick = 0;
    double best = std::abs(v(0));
    for (int i = 1; i < 4; ++i) {
        const double a = std::abs(v(i));
        if (a > best + 1e-12) {
            best = a;
            pick = i;
        }
    }
    const Complex z = v(pick);
    if (std::abs(z) == 0.0) return;
    v *= std::conj(z) / std::abs(z);
}

// Labeled eigensystem without the degeneracy guard. Valid whenever an
// arbitrary orthonormal eigenbasis is acceptable (Gibbs weights, exponentials)
// even if the 2K = 2J label ordering is ambiguous.
inline EigenSystem eigensystem_unchecked(double field, double coupling_j, double gamma) {
    const double j = coupling_j;
    const double g = gamma * j;
    const double k = std::hypot(field, g);

    EigenSystem es;
    es.k_scale = k;
    es.field = field;
    es.energies << -2.0 * k, -2.0 * j, 2.0 * j, 2.0 * k;
    es.states = Matrix4c::Zero();

    // Middle block: field independent, |psi_1> = (|10> - |01>)/sqrt2 after the
    // phase convention, |psi_2> = (|10> + |01>)/sqrt2.
    const double r = 1.0 / std::sqrt(2.0);
    es.states(1, 1) = r;
    es.states(2, 1) = -r;
    es.states(1, 2) = r;
    es.states(2, 2) = r;

    // Outer block on (|11>, |00>). Stable parametrization: with
    //   c = sqrt((K+B)/2K),  s = gJ / sqrt(2K(K+B))
    // the eigenvectors are psi_3 = (c, s) and psi_0 = (-s, c); this avoids the
    // K - B cancellation of the raw formulas near gJ -> 0.
    if (g == 0.0 || std::abs(g) < 1e-8 * field) {
        // Analytic limit: |psi_0> -> |00>, |psi_3> -> |11>.
        es.states(3, 0) = 1.0;
        es.states(0, 3) = 1.0;
    } else {
        const double c = std::sqrt((k + field) / (2.0 * k));
        const double s = g / std::sqrt(2.0 * k * (k + field));
        es.states(0, 0) = -s;
        es.states(3, 0) = c;
        es.states(0, 3) = c;
        es.states(3, 3) = s;
        fix_phase(es.states.col(0));
        fix_phase(es.states.col(3));
    }
    return es;
}

}  // namespace detail

// Labeled eigensystem of H(B). Raises when 2K and 2J collide while the outer
// block genuinely mixes |11>,|00> (possible at B = 0, |gamma| J = J): the
// label order is then ambiguous. In the gamma J -> 0 limit the states are
// exact basis vectors, so a 2K = 2J collision (e.g. gamma = 0, B = J) is
// harmless and must not be rejected.
inline EigenSystem eigensystem(const HamiltonianMatrix& h, const EngineParams& params) {
    const double g = params.gamma * params.coupling_j;
    const double k = std::hypot(h.field, g);
    const bool limit_branch = g == 0.0 || std::abs(g) < 1e-8 * h.field;
    if (!limit_branch && std::abs(2.0 * k - 2.0 * params.coupling_j) < 1e-12)
        throw NumericalError("degenerate spectrum: 2K == 2J, eigenlabel order is ambiguous");
    return detail::eigensystem_unchecked(h.field, params.coupling_j, params.gamma);
}

inline EigenSystem eigensystem_at(const EngineParams& params, double field) {
    return eigensystem(build_hamiltonian(params, field), params);
}

}  // namespace qotto
