// Four-stroke cycle assembly: thermal start at A, unitary ramp to B,
// isochoric heating to C (Bell measurement, or hot bath in two_bath mode),
// unitary ramp back to D, full rethermalization D -> A.
#pragma once

#include <string>
#include <vector>

#include "qotto/propagator.hpp"
#include "qotto/spin_model.hpp"
#include "qotto/thermo_channels.hpp"

namespace qotto {

struct CycleRecord {
    DensityMatrix rho_a, rho_b, rho_c, rho_d;
    double e_a = 0.0, e_b = 0.0, e_c = 0.0, e_d = 0.0;
    double w1 = 0.0;        // E_B - E_A, work during expansion
    double w2 = 0.0;        // E_D - E_C, work during compression
    double q_in = 0.0;      // E_C - E_B: Q_M in measurement mode, Q_H in two_bath
    double q_out = 0.0;     // Q_L = E_A - E_D
    double w_engine = 0.0;  // -(W1 + W2); positive when work is extracted
    bool is_engine = false;
};

// CycleRecord plus the propagators and eigenbases the FCS layer needs, so a
// cycle is integrated once per configuration.
struct CycleContext {
    EngineParams params;
    CycleRecord record;
    Propagator expansion;    // U(tau), ramp B1 -> B2
    Propagator compression;  // V(tau), ramp traversed as B(tau - t)
    EigenSystem eig_b1;      // basis at A and D
    EigenSystem eig_b2;      // basis at B and C
};

inline CycleContext run_cycle_context(const EngineParams& params, double tol = 1e-10) {
    params.validate();
    CycleContext ctx;
    ctx.params = params;

    const HamiltonianMatrix h1 = build_hamiltonian(params, params.field_b1);
    const HamiltonianMatrix h2 = build_hamiltonian(params, params.field_b2);
    ctx.eig_b1 = eigensystem(h1, params);
    ctx.eig_b2 = eigensystem(h2, params);

    const RampProtocol forward{params.field_b1, params.field_b2, params.tau,
                               RampDirection::forward};
    const RampProtocol reversed{params.field_b1, params.field_b2, params.tau,
                                RampDirection::reversed};
    ctx.expansion = evolve(params, forward, tol);
    ctx.compression = evolve(params, reversed, tol);

    CycleRecord& r = ctx.record;
    r.rho_a = gibbs_state(params, params.field_b1, params.temperature);
    r.rho_b.entries = ctx.expansion.matrix * r.rho_a.entries * ctx.expansion.matrix.adjoint();
    if (params.mode == EngineMode::measurement_based)
        r.rho_c = measure_nonselective(r.rho_b, bell_basis());
    else
        r.rho_c = gibbs_state(params, params.field_b2, params.temperature_hot);
    r.rho_d.entries =
        ctx.compression.matrix * r.rho_c.entries * ctx.compression.matrix.adjoint();

    r.e_a = average_energy(r.rho_a, h1);
    r.e_b = average_energy(r.rho_b, h2);
    r.e_c = average_energy(r.rho_c, h2);
    r.e_d = average_energy(r.rho_d, h1);
    r.w1 = r.e_b - r.e_a;
    r.w2 = r.e_d - r.e_c;
    r.q_in = r.e_c - r.e_b;
    r.q_out = r.e_a - r.e_d;
    r.w_engine = -(r.w1 + r.w2);
    // Strict inequalities with a 1e-12 dead band against sign flapping.
    r.is_engine = r.q_in > 1e-12 && r.q_out < -1e-12 && r.w1 + r.w2 < -1e-12;
    return ctx;
}

inline CycleRecord run_cycle(const EngineParams& params, double tol = 1e-10) {
    return run_cycle_context(params, tol).record;
}

struct SweepPoint {
    double tau = 0.0;
    bool ok = false;
    std::string error;  // set when ok is false; the sweep continues
    CycleRecord record;
};

inline std::vector<SweepPoint> sweep_tau(const EngineParams& params,
                                         const std::vector<double>& tau_grid,
                                         double tol = 1e-10) {
    if (tau_grid.empty()) throw ValidationError("tau grid must be nonempty");
    for (double t : tau_grid)
        if (!(t > 0.0)) throw ValidationError("tau grid values must be > 0");
    std::vector<SweepPoint> points;
    points.reserve(tau_grid.size());
    for (double t : tau_grid) {
        SweepPoint p;
        p.tau = t;
        EngineParams local = params;
        local.tau = t;
        try {
            p.record = run_cycle(local, tol);
            p.ok = true;
        } catch (const std::exception& e) {
            p.error = e.what();
        }
        points.push_back(std::move(p));
    }
    return points;
}

}  // namespace qotto
