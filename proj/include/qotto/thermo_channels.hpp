// Non-unitary strokes: complete thermalization (Gibbs replacement) and the
// non-selective Bell-basis measurement channel, plus the l1 coherence measure.
#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "qotto/spin_model.hpp"

namespace qotto {

// State of the working system, entries in the computational ordering of
// spin_model.hpp. Hermitian, unit trace, positive up to numerical dust;
// eigenvalues in [-1e-10, 0) are accepted but never renormalized away.
struct DensityMatrix {
    Matrix4c entries = Matrix4c::Zero();

    void validate() const {
        if ((entries - entries.adjoint()).cwiseAbs().maxCoeff() > 1e-12)
            throw NumericalError("density matrix is not Hermitian within 1e-12");
        if (std::abs(entries.trace() - Complex(1.0, 0.0)) > 1e-12)
            throw NumericalError("density matrix trace differs from 1 by more than 1e-12");
        Eigen::SelfAdjointEigenSolver<Matrix4c> es(entries, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -1e-10)
            throw NumericalError("density matrix has an eigenvalue below -1e-10");
    }
};

// Four orthonormal projector vectors (columns). Projectors M_a = |m_a><m_a|
// satisfy sum_a M_a^2 = 1.
struct MeasurementBasis {
    Matrix4c vectors = Matrix4c::Identity();

    double identity_defect() const {
        Matrix4c sum = Matrix4c::Zero();
        for (int a = 0; a < 4; ++a) sum += vectors.col(a) * vectors.col(a).adjoint();
        return (sum - Matrix4c::Identity()).cwiseAbs().maxCoeff();
    }
};

// {(|00> +- |11>)/sqrt2, (|01> +- |10>)/sqrt2} in the computational ordering.
inline MeasurementBasis bell_basis() {
    const double r = 1.0 / std::sqrt(2.0);
    MeasurementBasis basis;
    basis.vectors = Matrix4c::Zero();
    basis.vectors(3, 0) = r;  // |psi+>
    basis.vectors(0, 0) = r;
    basis.vectors(3, 1) = r;  // |psi->
    basis.vectors(0, 1) = -r;
    basis.vectors(2, 2) = r;  // |phi+>
    basis.vectors(1, 2) = r;
    basis.vectors(2, 3) = r;  // |phi->
    basis.vectors(1, 3) = -r;
    return basis;
}

// exp(-H(B)/T) / Z, assembled from Boltzmann weights relative to the ground
// energy so large beta cannot overflow.
inline DensityMatrix gibbs_state(const EngineParams& params, double field, double temperature) {
    if (!(temperature > 0.0)) throw ValidationError("Gibbs temperature must be > 0");
    const EigenSystem es =
        detail::eigensystem_unchecked(field, params.coupling_j, params.gamma);
    const double e_min = es.energies.minCoeff();
    Vector4r weights;
    for (int k = 0; k < 4; ++k) weights(k) = std::exp(-(es.energies(k) - e_min) / temperature);
    weights /= weights.sum();
    DensityMatrix rho;
    rho.entries = Matrix4c::Zero();
    for (int k = 0; k < 4; ++k)
        rho.entries += weights(k) * (es.states.col(k) * es.states.col(k).adjoint());
    return rho;
}

// rho -> sum_a M_a rho M_a: dephasing in the measurement basis. Trace and
// positivity preserving, idempotent, unital.
inline DensityMatrix measure_nonselective(const DensityMatrix& rho, const MeasurementBasis& basis) {
    if (basis.identity_defect() > 1e-12)
        throw ValidationError("measurement basis fails the resolution of identity");
    DensityMatrix out;
    out.entries = Matrix4c::Zero();
    for (int a = 0; a < 4; ++a) {
        const Vector4c m = basis.vectors.col(a);
        const Complex population = (m.adjoint() * rho.entries * m)(0, 0);
        out.entries += population.real() * (m * m.adjoint());
    }
    return out;
}

// C_l1(rho) = sum_{i != j} |<psi_i| rho |psi_j>|.
inline double coherence_l1(const DensityMatrix& rho, const EigenSystem& basis) {
    const Matrix4c projected = basis.states.adjoint() * rho.entries * basis.states;
    double sum = 0.0;
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            if (i != j) sum += std::abs(projected(i, j));
    return sum;
}

inline double average_energy(const DensityMatrix& rho, const HamiltonianMatrix& h) {
    return (rho.entries * h.entries).trace().real();
}

}  // namespace qotto
