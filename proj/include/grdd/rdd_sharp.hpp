#pragma once

// Sharp-design geodesic treatment effect: one-sided local Fréchet regressions at
// the cutoff joined by the geodesic between them.

#include "grdd/error.hpp"
#include "grdd/frechet.hpp"
#include "grdd/sample.hpp"
#include "grdd/spaces.hpp"

#include <cstddef>
#include <optional>
#include <string>

namespace grdd {

struct SharpConfig {
    KernelKind kernel = KernelKind::Triangular;
    FrechetSolveConfig solver;
    /// Reference point ω for d_G; the unweighted sample Fréchet mean when unset.
    std::optional<MetricObject> reference;
};

struct SolverDiagnostics {
    int iterations = 0;
    bool converged = true;
    bool projected = false;
    double objective = 0.0;
    double multistart_spread = 0.0;
    std::size_t contributing = 0;

    static SolverDiagnostics from(const FrechetSolution& s, std::size_t contributing) {
        return {s.iterations, s.converged, s.projected, s.objective, s.multistart_spread, contributing};
    }
};

struct SharpEstimate {
    GeodesicEffect effect;
    double h0 = 0.0;
    double h1 = 0.0;
    std::size_t n0 = 0;
    std::size_t n1 = 0;
    double magnitude = 0.0;
    SolverDiagnostics left;
    SolverDiagnostics right;
};

/// One-sided fit at the cutoff; a degenerate window names its side.
inline FrechetSolution fit_at_cutoff(const LocalFrechetRegressor& reg, double cutoff, double h, Side side,
                                     std::size_t* contributing = nullptr) {
    try {
        const WeightProfile p = reg.weights(cutoff, h, to_kernel_side(side));
        if (contributing) *contributing = p.contributing();
        return reg.fit(p);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateWindow)
            fail(ErrorCode::DegenerateWindow, std::string(to_string(side)) + " side: " + e.detail());
        throw;
    }
}

inline SharpEstimate estimate_sharp(const RddSample& sample, double h0, double h1, const SharpConfig& cfg = {}) {
    if (sample.records.empty()) fail(ErrorCode::EmptyInput, "empty sample");
    const LocalFrechetRegressor reg(sample, cfg.kernel, cfg.solver);
    SharpEstimate est;
    std::size_t c0 = 0, c1 = 0;
    const FrechetSolution left = fit_at_cutoff(reg, sample.cutoff, h0, Side::Left, &c0);
    const FrechetSolution right = fit_at_cutoff(reg, sample.cutoff, h1, Side::Right, &c1);
    MetricObject omega = cfg.reference ? *cfg.reference : sample_frechet_mean(reg.outcomes(), cfg.solver);
    est.effect = make_effect(left.point, right.point, std::move(omega));
    est.h0 = h0;
    est.h1 = h1;
    est.n0 = sample.count_below();
    est.n1 = sample.count_at_or_above();
    est.magnitude = est.effect.length;
    est.left = SolverDiagnostics::from(left, c0);
    est.right = SolverDiagnostics::from(right, c1);
    return est;
}

/// d_G between two sharp estimates, using the first estimate's reference point.
inline double effect_distance(const SharpEstimate& e1, const SharpEstimate& e2) {
    if (!e1.effect.start.space.same_geometry(e2.effect.start.space))
        fail(ErrorCode::SpaceMismatch, "effects live in different spaces");
    return quotient_distance_dG(e1.effect, e2.effect, e1.effect.reference);
}

/// d_G of an estimate against a known effect, using the known effect's reference point.
inline double effect_bias(const GeodesicEffect& estimate, const GeodesicEffect& truth) {
    if (!estimate.start.space.same_geometry(truth.start.space))
        fail(ErrorCode::SpaceMismatch, "effects live in different spaces");
    return quotient_distance_dG(estimate, truth, truth.reference);
}

} // namespace grdd
