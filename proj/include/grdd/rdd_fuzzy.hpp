#pragma once

// Fuzzy-design estimators.
//
//  Embedding            (Ψ(ν̂₁) − Ψ(ν̂₀)) / (m̂₁ − m̂₀)
//  GeodesicOneSided     μ̂_z = Ψ⁻¹(Ψ(μ̂⊕) + (Ψ(ν̂_z) − Ψ(μ̂⊕)) / (m̂₁ − m̂₀)),
//                       μ̂⊕ from the always-taker or never-taker stratum
//  RiemannianTangent    (ν̂♯₁ − ν̂♯₀) / (m̂₁ − m̂₀) on Log_ω(Y)
//  GeodesicRiemannian   μ̂♯_z = Exp_ω(ν̂♯ + (ν̂♯_z − ν̂♯) / (m̂₁ − m̂₀))
//
// m̂_z are one-sided local-linear intercepts of T on R at the cutoff.

#include "grdd/error.hpp"
#include "grdd/frechet.hpp"
#include "grdd/rdd_sharp.hpp"
#include "grdd/sample.hpp"
#include "grdd/spaces.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace grdd {

enum class FuzzyVariant { Embedding, GeodesicOneSided, RiemannianTangent, GeodesicRiemannian };
enum class Noncompliance { AlwaysTakers, NeverTakers };

inline const char* to_string(FuzzyVariant v) {
    switch (v) {
    case FuzzyVariant::Embedding: return "embedding";
    case FuzzyVariant::GeodesicOneSided: return "geodesic";
    case FuzzyVariant::RiemannianTangent: return "riemannian";
    case FuzzyVariant::GeodesicRiemannian: return "geodesic-riemannian";
    }
    return "unknown";
}

inline const char* to_string(Noncompliance n) { return n == Noncompliance::AlwaysTakers ? "always" : "never"; }

struct FuzzyConfig {
    KernelKind kernel = KernelKind::Triangular;
    FrechetSolveConfig solver;
    /// Estimates are refused when |m̂₁ − m̂₀| does not exceed this.
    double delta_comply = 0.05;
    /// ω: Log/Exp base for the Riemannian variants and the d_G reference point.
    /// Defaults to the sample Fréchet mean (a data-dependent choice).
    std::optional<MetricObject> reference;
};

struct ComplianceFit {
    double m0 = 0.0;
    double m1 = 0.0;
    double slope0 = 0.0;
    double slope1 = 0.0;
    double h0 = 0.0;
    double h1 = 0.0;

    [[nodiscard]] double denominator() const { return m1 - m0; }
};

struct FuzzyEstimate {
    FuzzyVariant variant = FuzzyVariant::Embedding;
    /// Embedding-space (or tangent-space) effect divided by the compliance jump.
    Vector tau;
    /// Hilbert norm of tau (Euclidean norm for tangent variants).
    double magnitude = 0.0;
    double m0 = 0.0;
    double m1 = 0.0;
    double denominator = 0.0;
    double h0 = 0.0;
    double h1 = 0.0;
    /// One-sided limits at the cutoff (ν̂₀, ν̂₁), in the outcome space.
    std::optional<MetricObject> limit_left;
    std::optional<MetricObject> limit_right;
    /// Stratum estimate μ̂⊕ (geodesic variants); tangent variants report Exp_ω of the stratum mean.
    std::optional<MetricObject> stratum;
    std::optional<MetricObject> start;
    std::optional<MetricObject> end;
    std::optional<GeodesicEffect> effect;
    std::vector<std::string> warnings;
};

namespace detail {

inline std::pair<double, double> local_linear_fit(std::span<const double> r, std::span<const double> y, double c,
                                                  double h, KernelSpec spec) {
    std::vector<std::size_t> order(r.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return r[a] != r[b] ? r[a] < r[b] : y[a] < y[b]; });
    const WeightProfile p = compute_weights(r, c, h, spec, {}, order);
    double xi0 = 0.0, xi1 = 0.0;
    const double n = static_cast<double>(p.n_norm);
    for (std::size_t i : order) {
        const double x = r[i] - c;
        if (spec.side == KernelSide::Left ? x >= 0.0 : (spec.side == KernelSide::Right && x < 0.0)) continue;
        const double k = kernel_eval(spec, x / h) / h;
        if (k == 0.0) continue;
        xi0 += k * y[i];
        xi1 += k * x * y[i];
    }
    xi0 /= n;
    xi1 /= n;
    const double intercept = (p.mu2 * xi0 - p.mu1 * xi1) / p.sigma2;
    const double slope = (p.mu0 * xi1 - p.mu1 * xi0) / p.sigma2;
    return {intercept, slope};
}

inline void require_treatment(const RddSample& s) {
    if (!s.has_treatment()) fail(ErrorCode::MissingTreatment, "fuzzy estimation needs a treatment column t");
}

inline double checked_denominator(const ComplianceFit& fit, double delta) {
    const double den = fit.denominator();
    if (!(std::abs(den) > delta))
        fail(ErrorCode::WeakCompliance, "compliance jump " + std::to_string(den) + " does not exceed " + std::to_string(delta));
    return den;
}

inline FuzzyEstimate base_estimate(FuzzyVariant v, const ComplianceFit& fit) {
    FuzzyEstimate est;
    est.variant = v;
    est.m0 = fit.m0;
    est.m1 = fit.m1;
    est.denominator = fit.denominator();
    est.h0 = fit.h0;
    est.h1 = fit.h1;
    return est;
}

/// Records that belong to the noncomplier stratum used to identify μ⊕.
inline std::vector<std::size_t> stratum_indices(const RddSample& s, Noncompliance side) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < s.records.size(); ++i) {
        const auto& o = s.records[i];
        const bool hit = side == Noncompliance::AlwaysTakers ? (*o.t == 1 && *o.z == 0) : (*o.t == 0 && *o.z == 1);
        if (hit) idx.push_back(i);
    }
    return idx;
}

inline std::size_t violating_count(const RddSample& s, Noncompliance side) {
    return stratum_indices(s, side == Noncompliance::AlwaysTakers ? Noncompliance::NeverTakers : Noncompliance::AlwaysTakers)
        .size();
}

inline bool full_compliance(double den) { return std::abs(den - 1.0) <= 1e-12; }

/// Stratum Fréchet mean at the cutoff: the side's full-sample LFR weights ŝ restricted to the
/// stratum. Returns the minimizer, or nothing when the restricted weights have no positive mass.
inline std::optional<FrechetSolution> stratum_fit(const RddSample& s, const LocalFrechetRegressor& reg,
                                                  Noncompliance side, double h0, double h1, const FuzzyConfig& cfg) {
    const auto idx = stratum_indices(s, side);
    if (idx.empty()) return std::nullopt;
    std::vector<bool> member(s.size(), false);
    for (std::size_t i : idx) member[i] = true;
    const bool always = side == Noncompliance::AlwaysTakers;
    const WeightProfile p = always ? reg.weights(s.cutoff, h0, KernelSide::Left) : reg.weights(s.cutoff, h1, KernelSide::Right);
    std::vector<MetricObject> y;
    std::vector<double> w;
    double total = 0.0;
    for (std::size_t i : reg.order()) {
        if (!member[i] || p.weights[i] == 0.0) continue;
        y.push_back(reg.outcomes()[i]);
        w.push_back(p.weights[i] / static_cast<double>(idx.size()));
        total += w.back();
    }
    if (y.empty() || !(total > 0.0)) return std::nullopt;
    return solve_frechet(y, w, cfg.solver);
}

inline LocalFrechetRegressor tangent_regressor(const RddSample& s, const MetricObject& omega, const FuzzyConfig& cfg) {
    std::vector<MetricObject> tangents;
    tangents.reserve(s.size());
    for (const auto& o : s.records) {
        Vector v = log_map(omega, o.y);
        tangents.push_back(MetricObject{SpaceDescriptor::euclidean(static_cast<std::size_t>(v.size())), std::move(v)});
    }
    return LocalFrechetRegressor(SpaceDescriptor::euclidean(s.space.payload_size()), s.running(), std::move(tangents),
                                 cfg.kernel, cfg.solver);
}

inline MetricObject reference_point(const RddSample& s, const FuzzyConfig& cfg) {
    if (cfg.reference) {
        if (!cfg.reference->space.same_geometry(s.space)) fail(ErrorCode::SpaceMismatch, "reference point space differs");
        return *cfg.reference;
    }
    return sample_frechet_mean(s.outcomes(), cfg.solver);
}

} // namespace detail

inline ComplianceFit estimate_compliance(const RddSample& sample, double h0, double h1,
                                         KernelKind kernel = KernelKind::Triangular) {
    detail::require_treatment(sample);
    const std::vector<double> r = sample.running();
    std::vector<double> t;
    t.reserve(sample.size());
    for (const auto& o : sample.records) t.push_back(static_cast<double>(*o.t));
    ComplianceFit fit;
    fit.h0 = h0;
    fit.h1 = h1;
    try {
        std::tie(fit.m0, fit.slope0) = detail::local_linear_fit(r, t, sample.cutoff, h0, {kernel, KernelSide::Left});
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateWindow) fail(e.code(), "left side compliance: " + e.detail());
        throw;
    }
    try {
        std::tie(fit.m1, fit.slope1) = detail::local_linear_fit(r, t, sample.cutoff, h1, {kernel, KernelSide::Right});
    } catch (const Error& e) {
        if (e.code() == ErrorCode::DegenerateWindow) fail(e.code(), "right side compliance: " + e.detail());
        throw;
    }
    fit.m0 = std::clamp(fit.m0, 0.0, 1.0);
    fit.m1 = std::clamp(fit.m1, 0.0, 1.0);
    return fit;
}

/// Compliers' local average effect in the Hilbert embedding.
inline FuzzyEstimate estimate_fuzzy_late(const RddSample& sample, double h0, double h1, const FuzzyConfig& cfg = {}) {
    if (!sample.space.embedding_available())
        fail(ErrorCode::EmbeddingUnavailable, sample.space.name() + " has no Hilbert embedding; use the Riemannian variant");
    const ComplianceFit fit = estimate_compliance(sample, h0, h1, cfg.kernel);
    const double den = detail::checked_denominator(fit, cfg.delta_comply);
    const LocalFrechetRegressor reg(sample, cfg.kernel, cfg.solver);
    const FrechetSolution left = fit_at_cutoff(reg, sample.cutoff, h0, Side::Left);
    const FrechetSolution right = fit_at_cutoff(reg, sample.cutoff, h1, Side::Right);
    FuzzyEstimate est = detail::base_estimate(FuzzyVariant::Embedding, fit);
    est.tau = (embed(right.point) - embed(left.point)) / den;
    est.magnitude = hilbert_norm(sample.space, est.tau);
    est.limit_left = left.point;
    est.limit_right = right.point;
    return est;
}

/// Compliers' geodesic effect under one-sided noncompliance, via the embedding.
inline FuzzyEstimate estimate_geodesic_fuzzy(const RddSample& sample, double h0, double h1, Noncompliance side,
                                             const FuzzyConfig& cfg = {}) {
    if (!sample.space.embedding_available())
        fail(ErrorCode::EmbeddingUnavailable, sample.space.name() + " has no Hilbert embedding; use the Riemannian variant");
    detail::require_treatment(sample);
    if (!sample.has_assignment()) fail(ErrorCode::MissingAssignment, "geodesic fuzzy estimation needs an assignment column z");
    const ComplianceFit fit = estimate_compliance(sample, h0, h1, cfg.kernel);
    const double den = detail::checked_denominator(fit, cfg.delta_comply);
    const LocalFrechetRegressor reg(sample, cfg.kernel, cfg.solver);
    const FrechetSolution left = fit_at_cutoff(reg, sample.cutoff, h0, Side::Left);
    const FrechetSolution right = fit_at_cutoff(reg, sample.cutoff, h1, Side::Right);
    const Vector psi0 = embed(left.point);
    const Vector psi1 = embed(right.point);

    FuzzyEstimate est = detail::base_estimate(FuzzyVariant::GeodesicOneSided, fit);
    est.limit_left = left.point;
    est.limit_right = right.point;
    est.tau = (psi1 - psi0) / den;

    if (const auto viol = detail::violating_count(sample, side); viol > 0)
        est.warnings.push_back("OneSidedViolation: " + std::to_string(viol) + " records contradict the " +
                               std::string(to_string(side)) + "-taker assumption");

    const std::optional<FrechetSolution> stratum = detail::stratum_fit(sample, reg, side, h0, h1, cfg);
    if (!stratum) {
        if (!detail::full_compliance(den))
            fail(ErrorCode::EmptyStratum, std::string(to_string(side)) + "-taker stratum is empty or degenerate near the cutoff");
        // With a unit compliance jump the stratum term cancels and μ̂_z = ν̂_z.
        est.warnings.push_back("StratumUnused: stratum empty under full compliance");
        est.start = left.point;
        est.end = right.point;
    } else {
        est.stratum = stratum->point;
        const Vector psi_s = embed(stratum->point);
        bool proj0 = false, proj1 = false;
        est.start = inverse_embed_projected(psi_s + (psi0 - psi_s) / den, sample.space, &proj0);
        est.end = inverse_embed_projected(psi_s + (psi1 - psi_s) / den, sample.space, &proj1);
        if (proj0 || proj1) est.warnings.push_back("ProjectionApplied: complier endpoint projected onto the space");
    }
    est.effect = make_effect(*est.start, *est.end, detail::reference_point(sample, cfg));
    est.magnitude = est.effect->length;
    return est;
}

/// Compliers' effect on tangent coordinates Log_ω(Y).
inline FuzzyEstimate estimate_riemannian_fuzzy(const RddSample& sample, const MetricObject& omega, double h0, double h1,
                                               const FuzzyConfig& cfg = {}) {
    require_logexp(sample.space);
    if (!omega.space.same_geometry(sample.space)) fail(ErrorCode::SpaceMismatch, "reference point space differs");
    const ComplianceFit fit = estimate_compliance(sample, h0, h1, cfg.kernel);
    const double den = detail::checked_denominator(fit, cfg.delta_comply);
    const LocalFrechetRegressor reg = detail::tangent_regressor(sample, omega, cfg);
    const Vector nu0 = fit_at_cutoff(reg, sample.cutoff, h0, Side::Left).point.data;
    const Vector nu1 = fit_at_cutoff(reg, sample.cutoff, h1, Side::Right).point.data;
    FuzzyEstimate est = detail::base_estimate(FuzzyVariant::RiemannianTangent, fit);
    est.tau = (nu1 - nu0) / den;
    est.magnitude = est.tau.norm();
    est.limit_left = exp_map(omega, nu0, ProjectionPolicy::Project);
    est.limit_right = exp_map(omega, nu1, ProjectionPolicy::Project);
    return est;
}

inline FuzzyEstimate estimate_riemannian_fuzzy(const RddSample& sample, double h0, double h1, const FuzzyConfig& cfg = {}) {
    return estimate_riemannian_fuzzy(sample, detail::reference_point(sample, cfg), h0, h1, cfg);
}

/// Compliers' geodesic effect on a manifold under one-sided noncompliance.
inline FuzzyEstimate estimate_geodesic_riemannian_fuzzy(const RddSample& sample, const MetricObject& omega,
                                                        Noncompliance side, double h0, double h1,
                                                        const FuzzyConfig& cfg = {}) {
    require_logexp(sample.space);
    if (!omega.space.same_geometry(sample.space)) fail(ErrorCode::SpaceMismatch, "reference point space differs");
    if (!sample.has_assignment()) fail(ErrorCode::MissingAssignment, "geodesic fuzzy estimation needs an assignment column z");
    const ComplianceFit fit = estimate_compliance(sample, h0, h1, cfg.kernel);
    const double den = detail::checked_denominator(fit, cfg.delta_comply);
    const LocalFrechetRegressor reg = detail::tangent_regressor(sample, omega, cfg);
    const Vector nu0 = fit_at_cutoff(reg, sample.cutoff, h0, Side::Left).point.data;
    const Vector nu1 = fit_at_cutoff(reg, sample.cutoff, h1, Side::Right).point.data;

    FuzzyEstimate est = detail::base_estimate(FuzzyVariant::GeodesicRiemannian, fit);
    est.tau = (nu1 - nu0) / den;
    est.limit_left = exp_map(omega, nu0, ProjectionPolicy::Project);
    est.limit_right = exp_map(omega, nu1, ProjectionPolicy::Project);
    if (const auto viol = detail::violating_count(sample, side); viol > 0)
        est.warnings.push_back("OneSidedViolation: " + std::to_string(viol) + " records contradict the " +
                               std::string(to_string(side)) + "-taker assumption");

    const std::optional<FrechetSolution> fit_s = detail::stratum_fit(sample, reg, side, h0, h1, cfg);
    const std::optional<Vector> stratum = fit_s ? std::optional<Vector>(fit_s->point.data) : std::nullopt;
    Vector arg0 = nu0, arg1 = nu1;
    if (!stratum) {
        if (!detail::full_compliance(den))
            fail(ErrorCode::EmptyStratum, std::string(to_string(side)) + "-taker stratum is empty or degenerate near the cutoff");
        est.warnings.push_back("StratumUnused: stratum empty under full compliance");
    } else {
        est.stratum = exp_map(omega, *stratum, ProjectionPolicy::Project);
        arg0 = *stratum + (nu0 - *stratum) / den;
        arg1 = *stratum + (nu1 - *stratum) / den;
    }
    bool p0 = false, p1 = false;
    est.start = exp_map(omega, arg0, ProjectionPolicy::Project, &p0);
    est.end = exp_map(omega, arg1, ProjectionPolicy::Project, &p1);
    if (p0 || p1) est.warnings.push_back("ExpOutOfDomain: complier endpoint projected back into the space");
    est.effect = make_effect(*est.start, *est.end, omega);
    est.magnitude = est.effect->length;
    return est;
}

inline FuzzyEstimate estimate_geodesic_riemannian_fuzzy(const RddSample& sample, Noncompliance side, double h0, double h1,
                                                        const FuzzyConfig& cfg = {}) {
    return estimate_geodesic_riemannian_fuzzy(sample, detail::reference_point(sample, cfg), side, h0, h1, cfg);
}

} // namespace grdd
