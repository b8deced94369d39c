#pragma once

// Geodesic metric spaces: distances, geodesics, transport maps, Hilbert
// embeddings and Riemannian Log/Exp charts for the supported outcome types.
//
// Every object is a flat payload plus a SpaceDescriptor. Matrix payloads are
// stored row-major (m*m entries). Functions and quantile functions are sampled
// on uniform grids; their L2 geometry uses trapezoid weights.

#include "grdd/error.hpp"
#include "grdd/linalg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

namespace grdd {

using Vector = Eigen::VectorXd;

enum class SpaceTag { Euclidean, FunctionalL2, CompositionalSphere, NetworkLaplacian, SpdMatrix, Wasserstein1D };
enum class SpdMetric { Frobenius, Power, LogEuclidean, LogCholesky };

/// What happens when a transported or reconstructed point leaves the feasible set.
enum class ProjectionPolicy { Project, Strict };

namespace tol {
inline constexpr double kSphereNorm = 1e-10;
inline constexpr double kSymmetry = 1e-10;
inline constexpr double kRowSum = 1e-10;
inline constexpr double kOrder = 1e-12;
inline constexpr double kAntipodal = 1e-9;
} // namespace tol

struct SpaceDescriptor {
    SpaceTag tag = SpaceTag::Euclidean;
    /// Vector length, grid length, or matrix order m, depending on `tag`.
    std::size_t dim = 1;
    SpdMetric spd_metric = SpdMetric::Frobenius;
    double power = 0.5;
    double domain_lo = 0.0;
    double domain_hi = 1.0;
    double support_lo = -std::numeric_limits<double>::infinity();
    double support_hi = std::numeric_limits<double>::infinity();
    double w_max = std::numeric_limits<double>::infinity();
    double eps_pd = 1e-10;
    double beta1 = 2.0;
    double beta2 = 2.0;

    static SpaceDescriptor euclidean(std::size_t k) { return {.tag = SpaceTag::Euclidean, .dim = k}; }
    static SpaceDescriptor functional(std::size_t grid, double lo = 0.0, double hi = 1.0) {
        return {.tag = SpaceTag::FunctionalL2, .dim = grid, .domain_lo = lo, .domain_hi = hi};
    }
    static SpaceDescriptor sphere(std::size_t d) { return {.tag = SpaceTag::CompositionalSphere, .dim = d}; }
    static SpaceDescriptor laplacian(std::size_t m, double w_max = std::numeric_limits<double>::infinity()) {
        return {.tag = SpaceTag::NetworkLaplacian, .dim = m, .w_max = w_max};
    }
    static SpaceDescriptor spd(std::size_t m, SpdMetric metric, double power = 0.5, double eps_pd = 1e-10) {
        return {.tag = SpaceTag::SpdMatrix, .dim = m, .spd_metric = metric, .power = power, .eps_pd = eps_pd};
    }
    static SpaceDescriptor wasserstein(std::size_t grid,
                                       double lo = -std::numeric_limits<double>::infinity(),
                                       double hi = std::numeric_limits<double>::infinity()) {
        return {.tag = SpaceTag::Wasserstein1D, .dim = grid, .support_lo = lo, .support_hi = hi};
    }

    [[nodiscard]] bool is_matrix() const {
        return tag == SpaceTag::NetworkLaplacian || tag == SpaceTag::SpdMatrix;
    }
    [[nodiscard]] std::size_t payload_size() const { return is_matrix() ? dim * dim : dim; }
    [[nodiscard]] bool embedding_available() const { return tag != SpaceTag::CompositionalSphere; }
    [[nodiscard]] bool logexp_available() const {
        return tag == SpaceTag::CompositionalSphere || tag == SpaceTag::Euclidean;
    }
    [[nodiscard]] bool flat() const {
        return tag == SpaceTag::Euclidean || tag == SpaceTag::FunctionalL2 || tag == SpaceTag::NetworkLaplacian ||
               (tag == SpaceTag::SpdMatrix && spd_metric == SpdMetric::Frobenius) || tag == SpaceTag::Wasserstein1D;
    }
    [[nodiscard]] std::string name() const {
        switch (tag) {
        case SpaceTag::Euclidean: return "euclid";
        case SpaceTag::FunctionalL2: return "l2";
        case SpaceTag::CompositionalSphere: return "simplex";
        case SpaceTag::NetworkLaplacian: return "laplacian";
        case SpaceTag::Wasserstein1D: return "wass";
        case SpaceTag::SpdMatrix:
            switch (spd_metric) {
            case SpdMetric::Frobenius: return "spd:frobenius";
            case SpdMetric::Power: return "spd:power";
            case SpdMetric::LogEuclidean: return "spd:log_euclidean";
            case SpdMetric::LogCholesky: return "spd:log_cholesky";
            }
        }
        return "unknown";
    }

    /// Same space, shape and metric; configured bounds are not compared.
    [[nodiscard]] bool same_geometry(const SpaceDescriptor& o) const {
        if (tag != o.tag || dim != o.dim) return false;
        if (tag == SpaceTag::SpdMatrix && (spd_metric != o.spd_metric || (spd_metric == SpdMetric::Power && power != o.power)))
            return false;
        if (tag == SpaceTag::FunctionalL2 && (domain_lo != o.domain_lo || domain_hi != o.domain_hi)) return false;
        return true;
    }
};

/// A point of a geodesic metric space.
struct MetricObject {
    SpaceDescriptor space;
    Vector data;

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(data.size()); }
    friend bool operator==(const MetricObject& a, const MetricObject& b) {
        return a.space.same_geometry(b.space) && a.data.size() == b.data.size() && a.data == b.data;
    }
};

namespace detail {

inline void require_finite(const Vector& v, const char* what) {
    if (!v.allFinite()) fail(ErrorCode::NonFinite, std::string(what) + " has non-finite entries");
}

inline void require_compatible(const MetricObject& a, const MetricObject& b) {
    if (a.space.tag != b.space.tag ||
        (a.space.tag == SpaceTag::SpdMatrix && a.space.spd_metric != b.space.spd_metric))
        fail(ErrorCode::SpaceMismatch, a.space.name() + " vs " + b.space.name());
    if (!a.space.same_geometry(b.space) || a.data.size() != b.data.size())
        fail(ErrorCode::ShapeMismatch, "payload sizes " + std::to_string(a.data.size()) + " and " +
                                            std::to_string(b.data.size()));
    require_finite(a.data, "first operand");
    require_finite(b.data, "second operand");
}

inline void require_shape(const SpaceDescriptor& s, const Vector& v) {
    if (static_cast<std::size_t>(v.size()) != s.payload_size())
        fail(ErrorCode::ShapeMismatch, s.name() + " expects " + std::to_string(s.payload_size()) + " values, got " +
                                           std::to_string(v.size()));
}

/// Trapezoid quadrature weights for a uniform grid of `g` points on [lo, hi].
inline Vector trapezoid_weights(std::size_t g, double lo, double hi) {
    Vector w = Vector::Zero(static_cast<Eigen::Index>(g));
    if (g == 1) {
        w(0) = hi - lo;
        return w;
    }
    const double step = (hi - lo) / static_cast<double>(g - 1);
    w.setConstant(step);
    w(0) = w(static_cast<Eigen::Index>(g - 1)) = 0.5 * step;
    return w;
}

/// Weighted least-squares projection onto non-decreasing sequences (pool adjacent violators).
inline Vector isotonic_fit(const Vector& y, const Vector& w) {
    struct Block {
        double value;
        double weight;
        Eigen::Index count;
    };
    std::vector<Block> blocks;
    blocks.reserve(static_cast<std::size_t>(y.size()));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        blocks.push_back({y(i), w(i), 1});
        while (blocks.size() > 1 && blocks[blocks.size() - 2].value > blocks.back().value) {
            Block top = blocks.back();
            blocks.pop_back();
            Block& prev = blocks.back();
            const double total = prev.weight + top.weight;
            prev.value = (prev.value * prev.weight + top.value * top.weight) / total;
            prev.weight = total;
            prev.count += top.count;
        }
    }
    Vector out(y.size());
    Eigen::Index pos = 0;
    for (const Block& b : blocks)
        for (Eigen::Index k = 0; k < b.count; ++k) out(pos++) = b.value;
    return out;
}

inline double sphere_dist(const Vector& a, const Vector& b) {
    // Stable form of arccos(aᵀb) for unit vectors.
    return 2.0 * std::atan2((a - b).norm(), (a + b).norm());
}

inline void require_not_antipodal(const Vector& a, const Vector& b) {
    if (a.dot(b) <= -1.0 + tol::kAntipodal) fail(ErrorCode::AntipodalPoints, "geodesic is not unique");
}

inline Vector sphere_log(const Vector& base, const Vector& x) {
    require_not_antipodal(base, x);
    const double c = base.dot(x);
    Vector v = x - c * base;
    const double nv = v.norm();
    if (nv < 1e-300) return Vector::Zero(base.size());
    const double theta = std::atan2(nv, c);
    return (theta / nv) * v;
}

inline Vector sphere_exp(const Vector& base, const Vector& v) {
    const double nv = v.norm();
    if (nv == 0.0) return base;
    Vector out = std::cos(nv) * base + (std::sin(nv) / nv) * v;
    return out / out.norm();
}

inline bool in_orthant(const Vector& z) { return z.minCoeff() >= -tol::kOrder; }

/// Nearest point of the closed positive orthant of the sphere.
inline Vector orthant_project(const Vector& z) {
    Vector p = z.cwiseMax(0.0);
    const double n = p.norm();
    if (n == 0.0) {
        Eigen::Index idx = 0;
        z.maxCoeff(&idx);
        p.setZero();
        p(idx) = 1.0;
        return p;
    }
    return p / n;
}

} // namespace detail

// ---------------------------------------------------------------------------
// Validation

inline void validate(const MetricObject& obj) {
    const SpaceDescriptor& s = obj.space;
    detail::require_shape(s, obj.data);
    detail::require_finite(obj.data, "payload");
    const Vector& v = obj.data;
    const auto m = static_cast<Eigen::Index>(s.dim);
    switch (s.tag) {
    case SpaceTag::Euclidean:
    case SpaceTag::FunctionalL2:
        if (s.tag == SpaceTag::FunctionalL2 && (s.dim < 2 || !(s.domain_hi > s.domain_lo)))
            fail(ErrorCode::InvariantViolation, "functional grid needs >= 2 points on a proper interval");
        return;
    case SpaceTag::CompositionalSphere:
        if (v.minCoeff() < -tol::kOrder) fail(ErrorCode::InvariantViolation, "composition has a negative coordinate");
        if (std::abs(v.norm() - 1.0) > tol::kSphereNorm)
            fail(ErrorCode::InvariantViolation, "composition is not on the unit sphere");
        return;
    case SpaceTag::NetworkLaplacian: {
        const linalg::Matrix a = linalg::as_matrix(v, m);
        if (linalg::asymmetry(a) > tol::kSymmetry) fail(ErrorCode::InvariantViolation, "Laplacian is not symmetric");
        if (a.rowwise().sum().cwiseAbs().maxCoeff() > tol::kRowSum)
            fail(ErrorCode::InvariantViolation, "Laplacian rows do not sum to zero");
        for (Eigen::Index i = 0; i < m; ++i) {
            if (a(i, i) < -tol::kOrder) fail(ErrorCode::InvariantViolation, "Laplacian has a negative diagonal");
            for (Eigen::Index j = 0; j < m; ++j) {
                if (i == j) continue;
                if (a(i, j) > tol::kOrder) fail(ErrorCode::InvariantViolation, "Laplacian has a positive off-diagonal");
                if (-a(i, j) > s.w_max + tol::kOrder)
                    fail(ErrorCode::InvariantViolation, "Laplacian edge weight exceeds w_max");
            }
        }
        return;
    }
    case SpaceTag::SpdMatrix: {
        const linalg::Matrix a = linalg::as_matrix(v, m);
        if (linalg::asymmetry(a) > tol::kSymmetry) fail(ErrorCode::InvariantViolation, "SPD matrix is not symmetric");
        if (linalg::sym_eigenvalues(a)(0) <= s.eps_pd)
            fail(ErrorCode::InvariantViolation, "SPD matrix smallest eigenvalue is not above eps_pd");
        if (s.spd_metric == SpdMetric::Power && !(s.power > 0.0))
            fail(ErrorCode::InvariantViolation, "power metric exponent must be positive");
        return;
    }
    case SpaceTag::Wasserstein1D:
        if (s.dim < 2) fail(ErrorCode::InvariantViolation, "quantile grid needs >= 2 points");
        for (Eigen::Index i = 0; i + 1 < v.size(); ++i)
            if (v(i + 1) < v(i) - tol::kOrder)
                fail(ErrorCode::InvariantViolation, "quantile function decreases at grid index " + std::to_string(i + 1));
        if (v.minCoeff() < s.support_lo - tol::kOrder || v.maxCoeff() > s.support_hi + tol::kOrder)
            fail(ErrorCode::InvariantViolation, "quantile function leaves the support interval");
        return;
    }
}

inline bool is_valid(const MetricObject& obj) {
    try {
        validate(obj);
        return true;
    } catch (const Error&) {
        return false;
    }
}

/// Builds and validates an object.
inline MetricObject make_object(const SpaceDescriptor& space, Vector data) {
    MetricObject obj{space, std::move(data)};
    validate(obj);
    return obj;
}

/// Square-root map from simplex shares to the positive orthant of the sphere.
/// Shares are renormalized; zero shares are floored at 1e-12 first.
inline MetricObject composition_from_shares(const SpaceDescriptor& space, const Vector& shares) {
    if (space.tag != SpaceTag::CompositionalSphere) fail(ErrorCode::SpaceMismatch, "shares need the simplex space");
    detail::require_shape(space, shares);
    detail::require_finite(shares, "shares");
    if (shares.minCoeff() < 0.0) fail(ErrorCode::InvariantViolation, "negative compositional share");
    Vector s = shares.cwiseMax(1e-12);
    s /= s.sum();
    Vector z = s.cwiseSqrt();
    z /= z.norm();
    return make_object(space, std::move(z));
}

inline Vector shares_from_composition(const MetricObject& obj) { return obj.data.cwiseAbs2(); }

// ---------------------------------------------------------------------------
// Hilbert embedding Ψ

/// Quadrature weights of the Hilbert inner product on embedding coordinates.
inline Vector hilbert_weights(const SpaceDescriptor& s) {
    switch (s.tag) {
    case SpaceTag::FunctionalL2: return detail::trapezoid_weights(s.dim, s.domain_lo, s.domain_hi);
    case SpaceTag::Wasserstein1D: return detail::trapezoid_weights(s.dim, 0.0, 1.0);
    default: return Vector::Ones(static_cast<Eigen::Index>(s.payload_size()));
    }
}

inline double hilbert_norm(const SpaceDescriptor& s, const Vector& v) {
    return std::sqrt(std::max(0.0, (hilbert_weights(s).array() * v.array().square()).sum()));
}

inline double hilbert_distance(const SpaceDescriptor& s, const Vector& u, const Vector& v) {
    return hilbert_norm(s, u - v);
}

inline Vector embed(const MetricObject& a) {
    const SpaceDescriptor& s = a.space;
    if (!s.embedding_available())
        fail(ErrorCode::EmbeddingUnavailable, s.name() + " has no isometric Hilbert embedding");
    detail::require_shape(s, a.data);
    if (s.tag != SpaceTag::SpdMatrix) return a.data;
    const auto m = static_cast<Eigen::Index>(s.dim);
    const linalg::Matrix A = linalg::as_matrix(a.data, m);
    switch (s.spd_metric) {
    case SpdMetric::Frobenius: return a.data;
    case SpdMetric::Power: return linalg::flatten(linalg::pow_spd(A, s.power));
    case SpdMetric::LogEuclidean: return linalg::flatten(linalg::log_spd(A));
    case SpdMetric::LogCholesky: {
        Eigen::LLT<linalg::Matrix> llt(linalg::symmetrize(A));
        if (llt.info() != Eigen::Success) fail(ErrorCode::InvariantViolation, "Cholesky factorization failed");
        linalg::Matrix L = llt.matrixL();
        for (Eigen::Index i = 0; i < m; ++i) L(i, i) = std::log(L(i, i));
        return linalg::flatten(L);
    }
    }
    return a.data;
}

/// True when `v` lies in Ψ(M) (within tolerance), so inverse_embed succeeds.
inline bool embedding_feasible(const SpaceDescriptor& s, const Vector& v) {
    if (static_cast<std::size_t>(v.size()) != s.payload_size() || !v.allFinite()) return false;
    const auto m = static_cast<Eigen::Index>(s.dim);
    switch (s.tag) {
    case SpaceTag::Euclidean:
    case SpaceTag::FunctionalL2: return true;
    case SpaceTag::CompositionalSphere: return false;
    case SpaceTag::NetworkLaplacian: return is_valid(MetricObject{s, v});
    case SpaceTag::Wasserstein1D: return is_valid(MetricObject{s, v});
    case SpaceTag::SpdMatrix: {
        const linalg::Matrix X = linalg::as_matrix(v, m);
        switch (s.spd_metric) {
        case SpdMetric::Frobenius: return is_valid(MetricObject{s, v});
        case SpdMetric::Power:
            return linalg::asymmetry(X) <= tol::kSymmetry &&
                   linalg::sym_eigenvalues(X)(0) > std::pow(s.eps_pd, s.power);
        case SpdMetric::LogEuclidean:
            return linalg::asymmetry(X) <= tol::kSymmetry && linalg::sym_eigenvalues(X)(0) > std::log(s.eps_pd);
        case SpdMetric::LogCholesky:
            return X.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().cwiseAbs().maxCoeff() <= tol::kSymmetry;
        }
    }
    }
    return false;
}

/// Ψ⁻¹ on Ψ(M). Throws InverseInfeasible outside the image.
inline MetricObject inverse_embed(const Vector& v, const SpaceDescriptor& s) {
    if (!s.embedding_available())
        fail(ErrorCode::EmbeddingUnavailable, s.name() + " has no isometric Hilbert embedding");
    detail::require_shape(s, v);
    detail::require_finite(v, "embedded point");
    if (!embedding_feasible(s, v)) fail(ErrorCode::InverseInfeasible, "point lies outside the image of " + s.name());
    if (s.tag != SpaceTag::SpdMatrix) return MetricObject{s, v};
    const auto m = static_cast<Eigen::Index>(s.dim);
    const linalg::Matrix X = linalg::as_matrix(v, m);
    switch (s.spd_metric) {
    case SpdMetric::Frobenius: return MetricObject{s, linalg::flatten(linalg::symmetrize(X))};
    case SpdMetric::Power: return MetricObject{s, linalg::flatten(linalg::pow_spd(X, 1.0 / s.power))};
    case SpdMetric::LogEuclidean: return MetricObject{s, linalg::flatten(linalg::exp_sym(X))};
    case SpdMetric::LogCholesky: {
        linalg::Matrix L = X.triangularView<Eigen::Lower>();
        for (Eigen::Index i = 0; i < m; ++i) L(i, i) = std::exp(L(i, i));
        return MetricObject{s, linalg::flatten(L * L.transpose())};
    }
    }
    return MetricObject{s, v};
}

/// Metric projection onto Ψ(M) (Laplacians: clamp off-diagonals and reset the diagonal).
inline Vector project_embedding(const SpaceDescriptor& s, const Vector& v) {
    detail::require_shape(s, v);
    const auto m = static_cast<Eigen::Index>(s.dim);
    switch (s.tag) {
    case SpaceTag::Euclidean:
    case SpaceTag::FunctionalL2: return v;
    case SpaceTag::CompositionalSphere: return detail::orthant_project(v);
    case SpaceTag::Wasserstein1D: {
        Vector q = detail::isotonic_fit(v, hilbert_weights(s));
        return q.cwiseMax(s.support_lo).cwiseMin(s.support_hi);
    }
    case SpaceTag::NetworkLaplacian: {
        linalg::Matrix a = linalg::symmetrize(linalg::as_matrix(v, m));
        for (Eigen::Index i = 0; i < m; ++i) {
            double row = 0.0;
            for (Eigen::Index j = 0; j < m; ++j) {
                if (i == j) continue;
                a(i, j) = std::clamp(a(i, j), -s.w_max, 0.0);
                row += a(i, j);
            }
            a(i, i) = -row;
        }
        return linalg::flatten(a);
    }
    case SpaceTag::SpdMatrix: {
        // Floors sit at 2*eps_pd so the reconstructed matrix clears the strict eps_pd bound.
        const double floor = 2.0 * s.eps_pd;
        const linalg::Matrix X = linalg::as_matrix(v, m);
        switch (s.spd_metric) {
        case SpdMetric::Frobenius: return linalg::flatten(linalg::eigen_floor(X, floor));
        case SpdMetric::Power: return linalg::flatten(linalg::eigen_floor(X, std::pow(floor, s.power)));
        case SpdMetric::LogEuclidean: return linalg::flatten(linalg::eigen_floor(X, std::log(floor)));
        case SpdMetric::LogCholesky: {
            linalg::Matrix L = X.triangularView<Eigen::Lower>();
            return linalg::flatten(L);
        }
        }
    }
    }
    return v;
}

/// Ψ⁻¹ after projecting onto Ψ(M) when needed; `projected` reports whether it moved.
inline MetricObject inverse_embed_projected(const Vector& v, const SpaceDescriptor& s, bool* projected = nullptr) {
    detail::require_finite(v, "embedded point");
    const bool feasible = embedding_feasible(s, v);
    if (projected) *projected = !feasible;
    return inverse_embed(feasible ? v : project_embedding(s, v), s);
}

// ---------------------------------------------------------------------------
// Distances, geodesics, transport

inline double distance(const MetricObject& a, const MetricObject& b) {
    detail::require_compatible(a, b);
    if (a.space.tag == SpaceTag::CompositionalSphere) return detail::sphere_dist(a.data, b.data);
    if (a.space.tag == SpaceTag::SpdMatrix && a.space.spd_metric != SpdMetric::Frobenius)
        return hilbert_distance(a.space, embed(a), embed(b));
    return hilbert_distance(a.space, a.data, b.data);
}

/// Point γ_{a,b}(t) of the unique geodesic from a (t=0) to b (t=1).
inline MetricObject geodesic_eval(const MetricObject& a, const MetricObject& b, double t) {
    detail::require_compatible(a, b);
    if (!(t >= 0.0 && t <= 1.0)) fail(ErrorCode::InvalidArgument, "geodesic parameter must lie in [0,1]");
    if (a.space.tag == SpaceTag::CompositionalSphere) {
        detail::require_not_antipodal(a.data, b.data);
        if (t == 0.0) return a;
        if (t == 1.0) return b;
        return MetricObject{a.space, detail::sphere_exp(a.data, t * detail::sphere_log(a.data, b.data))};
    }
    if (t == 0.0) return a;
    if (t == 1.0) return b;
    return inverse_embed_projected((1.0 - t) * embed(a) + t * embed(b), a.space);
}

/// Geodesic transport Γ_{a,b}(w). Flat and embedded spaces translate by Ψ(b) − Ψ(a);
/// the sphere parallel-transports Log_a(b) to w and applies Exp_w.
inline MetricObject transport_apply(const MetricObject& a, const MetricObject& b, const MetricObject& w,
                                    ProjectionPolicy policy = ProjectionPolicy::Project) {
    detail::require_compatible(a, b);
    detail::require_compatible(a, w);
    const SpaceDescriptor& s = a.space;
    if (s.tag == SpaceTag::CompositionalSphere) {
        detail::require_not_antipodal(a.data, b.data);
        detail::require_not_antipodal(a.data, w.data);
        const Vector v = detail::sphere_log(a.data, b.data);
        const Vector moved = v - (w.data.dot(v) / (1.0 + a.data.dot(w.data))) * (a.data + w.data);
        Vector out = detail::sphere_exp(w.data, moved);
        if (!detail::in_orthant(out)) {
            if (policy == ProjectionPolicy::Strict)
                fail(ErrorCode::TransportOutOfSpace, "transported composition leaves the positive orthant");
            out = detail::orthant_project(out);
        }
        return MetricObject{s, std::move(out)};
    }
    const Vector target = embed(w) + (embed(b) - embed(a));
    if (!embedding_feasible(s, target)) {
        if (policy == ProjectionPolicy::Strict)
            fail(ErrorCode::TransportOutOfSpace, "transported point leaves " + s.name());
        return inverse_embed(project_embedding(s, target), s);
    }
    return inverse_embed(target, s);
}

/// A treatment effect represented by the geodesic start → end and the reference
/// point used to compare geodesics.
struct GeodesicEffect {
    MetricObject start;
    MetricObject end;
    MetricObject reference;
    double length = 0.0;
};

inline GeodesicEffect make_effect(MetricObject start, MetricObject end, MetricObject reference) {
    detail::require_compatible(start, end);
    detail::require_compatible(start, reference);
    const double len = distance(start, end);
    return {std::move(start), std::move(end), std::move(reference), len};
}

/// d_G between geodesic classes, evaluated by transporting the reference point ω.
inline double quotient_distance_dG(const GeodesicEffect& e1, const GeodesicEffect& e2, const MetricObject& omega) {
    return distance(transport_apply(e1.start, e1.end, omega), transport_apply(e2.start, e2.end, omega));
}

// ---------------------------------------------------------------------------
// Riemannian charts

inline void require_logexp(const SpaceDescriptor& s) {
    if (!s.logexp_available()) fail(ErrorCode::LogExpUnavailable, s.name() + " has no Log/Exp charts");
}

/// Log_ω(a) in ambient coordinates.
inline Vector log_map(const MetricObject& omega, const MetricObject& a) {
    require_logexp(omega.space);
    detail::require_compatible(omega, a);
    if (omega.space.tag == SpaceTag::Euclidean) return a.data - omega.data;
    return detail::sphere_log(omega.data, a.data);
}

/// Exp_ω(v). On the sphere the tangent norm must stay below π and the image inside
/// the positive orthant; Strict throws ExpOutOfDomain otherwise, Project repairs.
inline MetricObject exp_map(const MetricObject& omega, const Vector& v,
                            ProjectionPolicy policy = ProjectionPolicy::Strict, bool* projected = nullptr) {
    require_logexp(omega.space);
    detail::require_shape(omega.space, v);
    detail::require_finite(v, "tangent vector");
    if (projected) *projected = false;
    if (omega.space.tag == SpaceTag::Euclidean) return MetricObject{omega.space, omega.data + v};
    Vector tangent = v - v.dot(omega.data) * omega.data;
    const double nv = tangent.norm();
    constexpr double kLimit = std::numbers::pi - 1e-9;
    if (nv >= kLimit) {
        if (policy == ProjectionPolicy::Strict) fail(ErrorCode::ExpOutOfDomain, "tangent norm reaches pi");
        tangent *= kLimit / nv;
        if (projected) *projected = true;
    }
    Vector out = detail::sphere_exp(omega.data, tangent);
    if (!detail::in_orthant(out)) {
        if (policy == ProjectionPolicy::Strict)
            fail(ErrorCode::ExpOutOfDomain, "Exp image leaves the positive orthant");
        out = detail::orthant_project(out);
        if (projected) *projected = true;
    }
    return MetricObject{omega.space, std::move(out)};
}

} // namespace grdd
