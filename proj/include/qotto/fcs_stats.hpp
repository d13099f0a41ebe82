// Full counting statistics of work. The characteristic function of one
// unitary stage,
//
//   chi(u) = Tr[ e^{iu H_tau} U e^{-i(u/2) H_0} rho e^{-i(u/2) H_0} U^dag ]
//          = sum_{lmn} e^{-iu (eps^tau_l - (eps^0_m + eps^0_n)/2)}
//                      A_lm rho_mn conj(A_ln),
//
// is kept as an exact finite term list (amplitude, frequency); its Fourier
// transform is then a delta comb, never a binned histogram. Support points
// carry the diagonal (m = n, the TPM part) and off-diagonal (interference)
// quasi-probability components separately; the off-diagonal components sum
// to zero, which is what lets individual entries turn negative.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "qotto/otto_cycle.hpp"
#include "qotto/propagator.hpp"
#include "qotto/spin_model.hpp"
#include "qotto/thermo_channels.hpp"

namespace qotto {

// Work values within this absolute distance land in one support point.
inline constexpr double kFrequencyClusterTol = 1e-9;
// Allowed imaginary residue of a clustered quasi-probability; conjugate
// (m,n)/(n,m) pairs share a frequency, so anything larger is a pairing bug.
inline constexpr double kImagResidueTol = 1e-9;

enum class StageTag { ab, cd, full_cycle };

inline std::string to_string(StageTag s) {
    switch (s) {
        case StageTag::ab: return "AB";
        case StageTag::cd: return "CD";
        default: return "full_cycle";
    }
}

enum class Origin { diagonal, off_diagonal, merged };

inline std::string to_string(Origin o) {
    switch (o) {
        case Origin::diagonal: return "diagonal";
        case Origin::off_diagonal: return "off_diagonal";
        default: return "merged";
    }
}

struct CfTerm {
    Complex amplitude;
    double frequency = 0.0;  // work value carried by the delta
    bool diagonal = false;   // m == n term (TPM part)
};

struct CharacteristicFunction {
    std::vector<CfTerm> terms;

    Complex evaluate(double u) const {
        Complex sum = 0.0;
        for (const CfTerm& t : terms)
            sum += t.amplitude * std::exp(Complex(0.0, -u * t.frequency));
        return sum;
    }

    // |chi(u)| can never exceed this.
    double amplitude_bound() const {
        double s = 0.0;
        for (const CfTerm& t : terms) s += std::abs(t.amplitude);
        return s;
    }
};

struct WorkPoint {
    double w = 0.0;
    double p = 0.0;           // quasi-probability, = p_diagonal + p_off_diagonal
    double p_diagonal = 0.0;  // genuine TPM probability content, >= 0
    double p_off_diagonal = 0.0;
    Origin origin = Origin::diagonal;
};

struct WorkDistribution {
    std::vector<WorkPoint> points;  // sorted by w
    StageTag stage = StageTag::ab;
    EngineParams params;

    double normalization_residual() const {
        double s = 0.0;
        for (const WorkPoint& q : points) s += q.p;
        return std::abs(s - 1.0);
    }
    double off_diagonal_sum() const {
        double s = 0.0;
        for (const WorkPoint& q : points) s += q.p_off_diagonal;
        return s;
    }
    double min_p() const {
        double m = 0.0;
        for (const WorkPoint& q : points) m = std::min(m, q.p);
        return m;
    }
};

// chi(u) = sum_lmn e^{-iu (eps^tau_l - (eps^0_m + eps^0_n)/2)} A_lm rho_mn A'_nl.
// Terms with exactly zero amplitude are dropped; exactly coincident
// frequencies of the same kind are summed.
inline CharacteristicFunction stage_characteristic(const DensityMatrix& rho0,
                                                   const Propagator& u_prop,
                                                   const EigenSystem& basis0,
                                                   const EigenSystem& basis_tau) {
    const Matrix4c amps = amplitude_matrix(u_prop, basis0, basis_tau);
    const Matrix4c rho = basis0.states.adjoint() * rho0.entries * basis0.states;

    std::vector<CfTerm> terms;
    terms.reserve(64);
    for (int l = 0; l < 4; ++l) {
        for (int m = 0; m < 4; ++m) {
            for (int n = 0; n < 4; ++n) {
                const Complex amplitude = amps(l, m) * rho(m, n) * std::conj(amps(l, n));
                if (amplitude == Complex(0.0, 0.0)) continue;
                CfTerm t;
                t.amplitude = amplitude;
                t.frequency =
                    basis_tau.energies(l) - 0.5 * (basis0.energies(m) + basis0.energies(n));
                t.diagonal = (m == n);
                terms.push_back(t);
            }
        }
    }

    std::sort(terms.begin(), terms.end(), [](const CfTerm& a, const CfTerm& b) {
        if (a.frequency != b.frequency) return a.frequency < b.frequency;
        return a.diagonal < b.diagonal;
    });
    CharacteristicFunction cf;
    for (const CfTerm& t : terms) {
        if (!cf.terms.empty() && cf.terms.back().frequency == t.frequency &&
            cf.terms.back().diagonal == t.diagonal) {
            cf.terms.back().amplitude += t.amplitude;
        } else {
            cf.terms.push_back(t);
        }
    }
    return cf;
}

namespace detail {

struct RawPoint {
    double w = 0.0;
    double p_diagonal = 0.0;
    double p_off_diagonal = 0.0;
};

// Agglomerative merge in sorted order: a gap above kFrequencyClusterTol
// starts a new support point. Representative w is the member mean.
inline std::vector<WorkPoint> cluster_points(std::vector<RawPoint> raw) {
    std::sort(raw.begin(), raw.end(),
              [](const RawPoint& a, const RawPoint& b) { return a.w < b.w; });
    std::vector<WorkPoint> points;
    std::size_t i = 0;
    while (i < raw.size()) {
        std::size_t j = i + 1;
        double w_sum = raw[i].w;
        double pd = raw[i].p_diagonal;
        double po = raw[i].p_off_diagonal;
        while (j < raw.size() && raw[j].w - raw[j - 1].w <= kFrequencyClusterTol) {
            w_sum += raw[j].w;
            pd += raw[j].p_diagonal;
            po += raw[j].p_off_diagonal;
            ++j;
        }
        const bool has_diag = pd != 0.0;
        const bool has_off = po != 0.0;
        if (has_diag || has_off) {
            WorkPoint q;
            q.w = w_sum / static_cast<double>(j - i);
            q.p_diagonal = pd;
            q.p_off_diagonal = po;
            q.p = pd + po;
            q.origin = has_diag && has_off ? Origin::merged
                       : has_diag          ? Origin::diagonal
                                           : Origin::off_diagonal;
            points.push_back(q);
        }
        i = j;
    }
    return points;
}

}  // namespace detail

// Fourier transform of the term list: cluster frequencies, take the real
// part, and reject any cluster whose imaginary residue survives (the
// conjugate-pair structure guarantees real quasi-probabilities).
inline WorkDistribution stage_distribution(const CharacteristicFunction& cf) {
    struct Cluster {
        double w_sum = 0.0;
        int count = 0;
        Complex diag = 0.0;
        Complex off = 0.0;
    };
    std::vector<CfTerm> terms = cf.terms;
    std::sort(terms.begin(), terms.end(),
              [](const CfTerm& a, const CfTerm& b) { return a.frequency < b.frequency; });

    std::vector<Cluster> clusters;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (clusters.empty() || (i > 0 && terms[i].frequency - terms[i - 1].frequency >
                                              kFrequencyClusterTol))
            clusters.push_back({});
        Cluster& c = clusters.back();
        c.w_sum += terms[i].frequency;
        c.count += 1;
        (terms[i].diagonal ? c.diag : c.off) += terms[i].amplitude;
    }

    std::vector<detail::RawPoint> raw;
    raw.reserve(clusters.size());
    for (const Cluster& c : clusters) {
        if (std::abs(c.diag.imag()) > kImagResidueTol || std::abs(c.off.imag()) > kImagResidueTol)
            throw NumericalError("work distribution cluster has imaginary residue above 1e-9; "
                                 "amplitude pairing is broken");
        raw.push_back({c.w_sum / c.count, c.diag.real(), c.off.real()});
    }
    WorkDistribution dist;
    dist.points = detail::cluster_points(std::move(raw));
    return dist;
}

// Distribution of w = w1 + w2 from chi_CL = chi_AB chi_CD: all pairwise work
// sums with product quasi-probabilities. A product point is diagonal only if
// both factors are.
inline WorkDistribution cycle_distribution(const WorkDistribution& dist_ab,
                                           const WorkDistribution& dist_cd) {
    std::vector<detail::RawPoint> raw;
    raw.reserve(dist_ab.points.size() * dist_cd.points.size());
    for (const WorkPoint& a : dist_ab.points) {
        for (const WorkPoint& b : dist_cd.points) {
            detail::RawPoint r;
            r.w = a.w + b.w;
            r.p_diagonal = a.p_diagonal * b.p_diagonal;
            r.p_off_diagonal = a.p_diagonal * b.p_off_diagonal +
                               a.p_off_diagonal * b.p_diagonal +
                               a.p_off_diagonal * b.p_off_diagonal;
            raw.push_back(r);
        }
    }
    WorkDistribution dist;
    dist.points = detail::cluster_points(std::move(raw));
    dist.stage = StageTag::full_cycle;
    dist.params = dist_ab.params;
    return dist;
}

// <w^k> over the support.
inline double moments(const WorkDistribution& dist, int k) {
    if (k < 1) throw ValidationError("moment order must be >= 1");
    double sum = 0.0;
    for (const WorkPoint& q : dist.points) sum += std::pow(q.w, k) * q.p;
    return sum;
}

// First moment straight from the term list, -i d/du chi at u = 0. Used as the
// derivative-form cross-check of moments(dist, 1).
inline double first_moment_from_terms(const CharacteristicFunction& cf) {
    Complex sum = 0.0;
    for (const CfTerm& t : cf.terms) sum += t.amplitude * t.frequency;
    return sum.real();
}

// <W> = <W_D> + <W_OD>: first moments of the diagonal and off-diagonal
// quasi-probability content.
struct AverageSplit {
    double diagonal = 0.0;
    double off_diagonal = 0.0;
};

inline AverageSplit average_split(const WorkDistribution& dist) {
    AverageSplit s;
    for (const WorkPoint& q : dist.points) {
        s.diagonal += q.w * q.p_diagonal;
        s.off_diagonal += q.w * q.p_off_diagonal;
    }
    return s;
}

// ---- cycle-level drivers ----

inline CharacteristicFunction stage_ab_characteristic(const CycleContext& ctx) {
    return stage_characteristic(ctx.record.rho_a, ctx.expansion, ctx.eig_b1, ctx.eig_b2);
}

inline CharacteristicFunction stage_cd_characteristic(const CycleContext& ctx) {
    return stage_characteristic(ctx.record.rho_c, ctx.compression, ctx.eig_b2, ctx.eig_b1);
}

// Everything the serializers and sweep drivers need from one configuration.
struct FcsBundle {
    CharacteristicFunction cf_ab;
    CharacteristicFunction cf_cd;
    WorkDistribution ab;
    WorkDistribution cd;
    WorkDistribution full;
};

inline FcsBundle fcs_bundle(const CycleContext& ctx) {
    FcsBundle b;
    b.cf_ab = stage_ab_characteristic(ctx);
    b.cf_cd = stage_cd_characteristic(ctx);
    b.ab = stage_distribution(b.cf_ab);
    b.ab.stage = StageTag::ab;
    b.ab.params = ctx.params;
    b.cd = stage_distribution(b.cf_cd);
    b.cd.stage = StageTag::cd;
    b.cd.params = ctx.params;
    b.full = cycle_distribution(b.ab, b.cd);
    return b;
}

// The eight-term expansion of P(W2; tau): four outer-block transition terms,
// the two middle-block survival terms, and the two interference terms that
// carry the coherence rho^C_30 and can go negative.
struct ExpansionTerm {
    std::string name;
    double work = 0.0;
    double weight = 0.0;
};

inline std::vector<ExpansionTerm> stage_cd_expansion(const CycleContext& ctx) {
    if (ctx.params.mode != EngineMode::measurement_based)
        throw ValidationError("stage CD expansion is defined for the measurement-based engine");
    const Matrix4c a = amplitude_matrix(ctx.compression, ctx.eig_b2, ctx.eig_b1);
    const Matrix4c rho =
        ctx.eig_b2.states.adjoint() * ctx.record.rho_c.entries * ctx.eig_b2.states;
    const Vector4r& ec = ctx.eig_b2.energies;  // eps^{C0}
    const Vector4r& ed = ctx.eig_b1.energies;  // eps^{Dtau}
    const double mid = 0.5 * (ec(0) + ec(3));

    auto diag = [&](int i, int j) {
        return ExpansionTerm{"diag_" + std::to_string(j) + "to" + std::to_string(i),
                             ed(i) - ec(j), std::norm(a(i, j)) * rho(j, j).real()};
    };
    auto interference = [&](int i) {
        return ExpansionTerm{"interference_final" + std::to_string(i), ed(i) - mid,
                             2.0 * (a(i, 3) * rho(3, 0) * std::conj(a(i, 0))).real()};
    };
    return {diag(0, 0), diag(3, 0), diag(3, 3), diag(0, 3),
            interference(3), interference(0), diag(1, 1), diag(2, 2)};
}

}  // namespace qotto
